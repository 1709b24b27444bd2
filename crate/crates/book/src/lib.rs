//! Compiles and runs the code listings of the guide in `book/` as doc-tests,
//! so the book cannot drift from the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/persistence.md")]
pub mod chapter1 {}

#[doc = include_str!("../../../book/src/lyapunov.md")]
pub mod chapter2 {}

#[doc = include_str!("../../../book/src/persistence-exponent.md")]
pub mod chapter3 {}

#[doc = include_str!("../../../book/src/time-series.md")]
pub mod chapter4 {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod chapter5 {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod chapter6 {}
