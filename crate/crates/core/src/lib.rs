//! Chaos quantification with zero-dimensional persistent homology.
//!
//! This crate measures how chaotic a dynamical system is in two ways:
//!
//! * the **persistence exponent**, the rate at which the number of connected
//!   components of a Vietoris-Rips filtration decays (on a log scale) as the
//!   filtration radius grows, and
//! * the classical **Lyapunov exponent**, estimated with Kantz's
//!   neighborhood-tracking algorithm.
//!
//! Both can be computed on a pair of neighboring trajectories of the Lorenz or
//! Rossler systems ([`dynsys`]) or on the delay embedding of a single scalar
//! series ([`embedding`]). The [`experiments`] module runs parameter sweeps and
//! noise ladders that compare how each measure reacts to added noise.
//!
//! All filtration radii follow the *radius* convention: an edge between two
//! points enters the complex at `ε = ‖x_i − x_j‖ / 2`, not at the pairwise
//! distance itself.
//!
//! ```
//! use pexp::ph0::{barcode0, betti_at};
//! use pexp::PointCloud;
//!
//! let cloud = PointCloud::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
//! let bars = barcode0(&cloud).unwrap();
//! assert_eq!(betti_at(&bars, 0.49), 2);
//! assert_eq!(betti_at(&bars, 0.5), 1);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod dynsys;
pub mod embedding;
pub mod experiments;
pub mod exponents;
pub mod io;
pub mod ph0;
mod points;
pub mod rng;
pub mod spatial;
pub mod stats;

pub use dynsys::{Family, SystemSpec, TimeGrid, Trajectory, TrajectoryPair};
pub use embedding::{EmbeddingParams, Series};
pub use exponents::{ExponentFit, ExponentKind, FitWindow, NeighborhoodParams};
pub use ph0::{Barcode0, BettiCurve};
pub use points::PointCloud;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument violated a precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The integrator produced a non-finite state.
    #[error("integration diverged at step {step} (t = {time}): non-finite state")]
    Divergence { step: usize, time: f64 },

    /// Not a single anchor point had enough neighbors to contribute.
    #[error("insufficient neighbors: no anchor has at least {min_neighbors} neighbor(s) within delta = {delta}")]
    InsufficientNeighbors { delta: f64, min_neighbors: usize },

    /// Mutual information is undefined (e.g. the series is constant).
    #[error("mutual information undefined: {0}")]
    UndefinedMutualInformation(String),

    /// A regression had fewer than two samples or a degenerate abscissa.
    #[error("regression failed: {0}")]
    Regression(String),

    /// A persistence exponent fell outside its theoretical bounds.
    #[error("bound violation: {0}")]
    BoundViolation(String),

    /// A computed quantity was not finite.
    #[error("non-finite result: {0}")]
    NonFinite(String),

    /// Malformed input data.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Malformed configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Clone for Error {
    fn clone(&self) -> Self {
        match self {
            Error::InvalidParameter(m) => Error::InvalidParameter(m.clone()),
            Error::Divergence { step, time } => Error::Divergence {
                step: *step,
                time: *time,
            },
            Error::InsufficientNeighbors {
                delta,
                min_neighbors,
            } => Error::InsufficientNeighbors {
                delta: *delta,
                min_neighbors: *min_neighbors,
            },
            Error::UndefinedMutualInformation(m) => Error::UndefinedMutualInformation(m.clone()),
            Error::Regression(m) => Error::Regression(m.clone()),
            Error::BoundViolation(m) => Error::BoundViolation(m.clone()),
            Error::NonFinite(m) => Error::NonFinite(m.clone()),
            Error::Parse { line, message } => Error::Parse {
                line: *line,
                message: message.clone(),
            },
            Error::Config(m) => Error::Config(m.clone()),
            Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), e.to_string())),
            Error::Json(e) => Error::Json(serde_json::Error::io(std::io::Error::other(e.to_string()))),
        }
    }
}

impl Error {
    /// `true` for failures of the numerics (as opposed to bad user input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::InsufficientNeighbors { .. }
                | Error::UndefinedMutualInformation(_)
                | Error::Regression(_)
                | Error::BoundViolation(_)
                | Error::NonFinite(_)
        )
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
