//! Lorenz and Rossler flows, their numerical integration, neighboring
//! trajectory pairs, and per-dimension scaled Gaussian noise.
//!
//! Integration is classical fixed-step fourth-order Runge-Kutta sampled
//! directly on the requested [`TimeGrid`]; no transient is discarded.

use std::collections::BTreeMap;
use std::fmt;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::stats::sample_std;
use crate::{rng, Error, PointCloud, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lorenz,
    Rossler,
}

impl Family {
    /// Names of the control parameters, in the order used by the equations.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::Lorenz => &["sigma", "beta", "rho"],
            Family::Rossler => &["a", "b", "c"],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Lorenz => f.write_str("lorenz"),
            Family::Rossler => f.write_str("rossler"),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lorenz" => Ok(Family::Lorenz),
            "rossler" | "rössler" => Ok(Family::Rossler),
            other => Err(Error::param(format!("unknown system family '{other}'"))),
        }
    }
}

/// A system family together with its control parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub family: Family,
    pub params: BTreeMap<String, f64>,
}

impl SystemSpec {
    pub fn new(family: Family, params: BTreeMap<String, f64>) -> Result<Self> {
        let spec = SystemSpec { family, params };
        spec.validate()?;
        Ok(spec)
    }

    pub fn lorenz(sigma: f64, beta: f64, rho: f64) -> Result<Self> {
        Self::new(
            Family::Lorenz,
            BTreeMap::from([
                ("sigma".into(), sigma),
                ("beta".into(), beta),
                ("rho".into(), rho),
            ]),
        )
    }

    /// Lorenz with `σ = 10`, `β = 8/3` and the given `ρ`.
    pub fn lorenz_rho(rho: f64) -> Result<Self> {
        Self::lorenz(10.0, 8.0 / 3.0, rho)
    }

    pub fn rossler(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(
            Family::Rossler,
            BTreeMap::from([("a".into(), a), ("b".into(), b), ("c".into(), c)]),
        )
    }

    /// Rossler with `b = 2`, `c = 4` and the given `a`.
    pub fn rossler_a(a: f64) -> Result<Self> {
        Self::rossler(a, 2.0, 4.0)
    }

    pub fn validate(&self) -> Result<()> {
        for name in self.family.param_names() {
            match self.params.get(*name) {
                None => {
                    return Err(Error::param(format!(
                        "{} system is missing parameter '{name}'",
                        self.family
                    )))
                }
                Some(v) if !v.is_finite() => {
                    return Err(Error::param(format!("parameter '{name}' is not finite")))
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = self
            .params
            .keys()
            .find(|k| !self.family.param_names().contains(&k.as_str()))
        {
            return Err(Error::param(format!(
                "unknown parameter '{extra}' for the {} system",
                self.family
            )));
        }
        Ok(())
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    /// A copy with one parameter replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut params = self.params.clone();
        params.insert(name.to_string(), value);
        Self::new(self.family, params)
    }

    fn coefficients(&self) -> [f64; 3] {
        let p = |n: &str| self.params[n];
        match self.family {
            Family::Lorenz => [p("sigma"), p("beta"), p("rho")],
            Family::Rossler => [p("a"), p("b"), p("c")],
        }
    }
}

#[inline]
fn vector_field(family: Family, k: &[f64; 3], s: &[f64; 3]) -> [f64; 3] {
    let [x, y, z] = *s;
    match family {
        Family::Lorenz => {
            let [sigma, beta, rho] = *k;
            [sigma * (y - x), x * (rho - z) - y, x * y - beta * z]
        }
        Family::Rossler => {
            let [a, b, c] = *k;
            [-y - z, x + a * y, b + z * (x - c)]
        }
    }
}

/// The uniform sampling grid `t0, t0 + dt, …, t0 + (count − 1)·dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub count: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, count: usize) -> Result<Self> {
        let g = TimeGrid { t0, dt, count };
        g.validate()?;
        Ok(g)
    }

    /// The grid `0, dt, …, t_end` (inclusive, `t_end/dt` rounded).
    pub fn until(t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(t_end > 0.0) {
            return Err(Error::param("t_end and dt must be positive"));
        }
        let steps = (t_end / dt).round() as usize;
        Self::new(0.0, dt, steps + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param(format!("time step must be positive, got {}", self.dt)));
        }
        if !self.t0.is_finite() {
            return Err(Error::param("t0 must be finite"));
        }
        if self.count < 2 {
            return Err(Error::param(format!(
                "a time grid needs at least 2 samples, got {}",
                self.count
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    /// Unit-step grid starting at 0.
    pub fn unit(count: usize) -> Result<Self> {
        Self::new(0.0, 1.0, count)
    }
}

/// A sampled path in state space.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: PointCloud,
    grid: TimeGrid,
}

impl Trajectory {
    pub fn new(points: PointCloud, grid: TimeGrid) -> Result<Self> {
        grid.validate()?;
        if points.len() != grid.count {
            return Err(Error::param(format!(
                "trajectory has {} points but its grid has {} samples",
                points.len(),
                grid.count
            )));
        }
        Ok(Trajectory { points, grid })
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn points(&self) -> &PointCloud {
        &self.points
    }

    pub fn into_points(self) -> PointCloud {
        self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.point(i)
    }

    /// The first `count` samples.
    pub fn truncate(&self, count: usize) -> Result<Trajectory> {
        if count > self.len() {
            return Err(Error::param(format!(
                "cannot truncate a {}-point trajectory to {count} points",
                self.len()
            )));
        }
        let idx: Vec<usize> = (0..count).collect();
        Trajectory::new(
            self.points.select(&idx),
            TimeGrid::new(self.grid.t0, self.grid.dt, count)?,
        )
    }

    /// Values of coordinate `d` over time.
    pub fn component(&self, d: usize) -> Vec<f64> {
        self.points.rows().map(|p| p[d]).collect()
    }
}

/// Two trajectories on the same grid whose initial states are close.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPair {
    pub x: Trajectory,
    pub y: Trajectory,
    /// `‖x(t0) − y(t0)‖`, always positive.
    pub initial_separation: f64,
}

impl TrajectoryPair {
    pub fn new(x: Trajectory, y: Trajectory) -> Result<Self> {
        if x.dim() != y.dim() || x.grid() != y.grid() {
            return Err(Error::param(
                "trajectories of a pair must share dimension and time grid",
            ));
        }
        let d0 = crate::spatial::dist(x.point(0), y.point(0));
        if !(d0 > 0.0) {
            return Err(Error::param("neighboring trajectories must start apart"));
        }
        Ok(TrajectoryPair {
            x,
            y,
            initial_separation: d0,
        })
    }

    /// The point set `Z = x ∪ y` (x first, then y).
    pub fn union(&self) -> PointCloud {
        self.x
            .points()
            .union(self.y.points())
            .expect("pair members share a dimension")
    }

    pub fn map(&self, mut f: impl FnMut(&Trajectory) -> Result<Trajectory>) -> Result<Self> {
        TrajectoryPair::new(f(&self.x)?, f(&self.y)?)
    }
}

/// Integrates `spec` from `x0` and samples the solution on `grid`.
///
/// Point 0 of the result is `x0` verbatim.
pub fn integrate(spec: &SystemSpec, x0: &[f64], grid: &TimeGrid) -> Result<Trajectory> {
    spec.validate()?;
    grid.validate()?;
    if x0.len() != 3 {
        return Err(Error::param(format!(
            "initial state must have 3 coordinates, got {}",
            x0.len()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("initial state must be finite"));
    }
    let k = spec.coefficients();
    let family = spec.family;
    let h = grid.dt;
    let f = |s: &[f64; 3]| vector_field(family, &k, s);

    let mut state = [x0[0], x0[1], x0[2]];
    let mut coords = Vec::with_capacity(grid.count * 3);
    coords.extend_from_slice(&state);
    for n in 1..grid.count {
        let k1 = f(&state);
        let s2 = add_scaled(&state, &k1, h / 2.0);
        let k2 = f(&s2);
        let s3 = add_scaled(&state, &k2, h / 2.0);
        let k3 = f(&s3);
        let s4 = add_scaled(&state, &k3, h);
        let k4 = f(&s4);
        for d in 0..3 {
            state[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step: n,
                time: grid.time(n),
            });
        }
        coords.extend_from_slice(&state);
    }
    Trajectory::new(PointCloud::new(3, coords)?, *grid)
}

#[inline]
fn add_scaled(s: &[f64; 3], k: &[f64; 3], h: f64) -> [f64; 3] {
    [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2]]
}

/// Generates a pair of neighboring trajectories.
///
/// The first initial state is `base_x0` jittered by `N(0, ic_jitter_std)` per
/// coordinate; the second is the first plus `N(0, sep_std)` per coordinate.
/// Both standard deviations are scales, not variances.
pub fn neighboring_pair(
    spec: &SystemSpec,
    base_x0: &[f64],
    ic_jitter_std: f64,
    sep_std: f64,
    grid: &TimeGrid,
    seed: u64,
) -> Result<TrajectoryPair> {
    if !(ic_jitter_std >= 0.0) || !ic_jitter_std.is_finite() {
        return Err(Error::param("initial-condition jitter must be finite and >= 0"));
    }
    if !(sep_std > 0.0) || !sep_std.is_finite() {
        return Err(Error::param(
            "separation scale must be positive so the trajectories start apart",
        ));
    }
    let mut rng = rng::from_seed(seed);
    let jitter = Normal::new(0.0, ic_jitter_std).expect("validated scale");
    let sep = Normal::new(0.0, sep_std).expect("validated scale");

    let x0: Vec<f64> = base_x0.iter().map(|v| v + jitter.sample(&mut rng)).collect();
    let y0 = loop {
        let y0: Vec<f64> = x0.iter().map(|v| v + sep.sample(&mut rng)).collect();
        if crate::spatial::dist(&x0, &y0) > 0.0 {
            break y0;
        }
    };
    TrajectoryPair::new(integrate(spec, &x0, grid)?, integrate(spec, &y0, grid)?)
}

/// Per-dimension standard deviations `γ_d` (unbiased).
pub fn dimension_scales(traj: &Trajectory) -> Vec<f64> {
    (0..traj.dim())
        .map(|d| sample_std(&traj.component(d)))
        .collect()
}

/// Adds i.i.d. Gaussian noise with standard deviation `sigma · γ_d` to every
/// coordinate `d`, where `γ_d` is the sample standard deviation of that
/// coordinate over the trajectory.
///
/// `sigma = 0` and zero-variance coordinates are left untouched.
pub fn perturb_trajectory(traj: &Trajectory, sigma: f64, seed: u64) -> Result<Trajectory> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param(format!("noise level must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(traj.clone());
    }
    let scales = dimension_scales(traj);
    let noise: Vec<Option<Normal<f64>>> = scales
        .iter()
        .map(|&g| (g > 0.0).then(|| Normal::new(0.0, sigma * g).expect("finite scale")))
        .collect();
    let mut rng = rng::from_seed(seed);
    let points = traj.points().map_points(|src, dst| {
        for d in 0..src.len() {
            dst[d] = match &noise[d] {
                Some(n) => src[d] + n.sample(&mut rng),
                None => src[d],
            };
        }
    })?;
    Trajectory::new(points, *traj.grid())
}
