//! Lyapunov and persistence exponents.
//!
//! * [`kantz_lyapunov`] tracks how the mean distance from a point to its
//!   δ-neighbors grows as the whole neighborhood is advanced in time.
//! * [`persistence_exponent_pair`] fits the decay of β₀ of the union of two
//!   neighboring trajectories against the filtration radius.
//! * [`persistence_exponent_local`] does the same per δ-neighborhood of a
//!   single embedded series and averages the normalized Betti vectors.
//!
//! Both neighborhood algorithms average first and take the logarithm second.
//! [`Averaging::MeanOfLog`] switches the Lyapunov estimator to the
//! average-of-logs form.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ph0::{barcode0, mst_weights, validate_radii};
use crate::spatial::{dist, KdTree};
use crate::{Error, PointCloud, Result, Trajectory, TrajectoryPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentKind {
    Lyapunov,
    PersistencePair,
    PersistenceLocal,
}

impl ExponentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExponentKind::Lyapunov => "lyapunov",
            ExponentKind::PersistencePair => "persistence_pair",
            ExponentKind::PersistenceLocal => "persistence_local",
        }
    }

    pub fn is_persistence(self) -> bool {
        !matches!(self, ExponentKind::Lyapunov)
    }
}

impl fmt::Display for ExponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExponentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lyapunov" => Ok(ExponentKind::Lyapunov),
            "persistence_pair" => Ok(ExponentKind::PersistencePair),
            "persistence_local" => Ok(ExponentKind::PersistenceLocal),
            other => Err(Error::param(format!("unknown exponent kind '{other}'"))),
        }
    }
}

/// δ-neighborhood parameters. Neighbors satisfy `‖x_i − x_j‖ < delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodParams {
    pub delta: f64,
    #[serde(default = "one")]
    pub min_neighbors: usize,
}

fn one() -> usize {
    1
}

impl NeighborhoodParams {
    pub fn new(delta: f64, min_neighbors: usize) -> Result<Self> {
        let nb = NeighborhoodParams {
            delta,
            min_neighbors,
        };
        nb.validate()?;
        Ok(nb)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::param(format!(
                "neighborhood radius must be positive, got {}",
                self.delta
            )));
        }
        if self.min_neighbors == 0 {
            return Err(Error::param("min_neighbors must be at least 1"));
        }
        Ok(())
    }
}

/// Inclusive regression window `[lo, hi]` on the abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct FitWindow {
    pub lo: f64,
    pub hi: f64,
}

impl FitWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::param(format!("fit window [{lo}, {hi}] must have lo < hi")));
        }
        Ok(FitWindow { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

impl TryFrom<[f64; 2]> for FitWindow {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        FitWindow::new(v[0], v[1])
    }
}

impl From<FitWindow> for [f64; 2] {
    fn from(w: FitWindow) -> Self {
        [w.lo, w.hi]
    }
}

/// Ordinary least squares restricted to a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Least-squares line through the samples whose abscissa lies in `window`.
pub fn fit_slope(xs: &[f64], ys: &[f64], window: FitWindow) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::param("abscissa and ordinate lengths differ"));
    }
    let (wx, wy): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, _)| window.contains(**x))
        .map(|(x, y)| (*x, *y))
        .unzip();
    let n = wx.len();
    if n < 2 {
        return Err(Error::Regression(format!(
            "window [{}, {}] holds {n} sample(s), need at least 2",
            window.lo, window.hi
        )));
    }
    if wy.iter().any(|y| !y.is_finite()) {
        return Err(Error::NonFinite("regression ordinate".into()));
    }
    let mx = wx.iter().sum::<f64>() / n as f64;
    let my = wy.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in wx.iter().zip(&wy) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Regression("all abscissae in the window coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        n,
    })
}

/// A fitted exponent together with the curve it was fitted to.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub kind: ExponentKind,
    pub value: f64,
    pub window: FitWindow,
    pub abscissa: Vec<f64>,
    pub ordinate: Vec<f64>,
    pub intercept: f64,
    pub r_squared: f64,
    /// `ln(n)/Δε` for persistence fits; `None` for Lyapunov fits.
    pub upper_bound: Option<f64>,
    pub n_contributing: usize,
    pub metadata: BTreeMap<String, Value>,
}

impl ExponentFit {
    fn from_curve(
        kind: ExponentKind,
        abscissa: Vec<f64>,
        ordinate: Vec<f64>,
        window: FitWindow,
    ) -> Result<ExponentFit> {
        let fit = fit_slope(&abscissa, &ordinate, window)?;
        Ok(ExponentFit {
            kind,
            value: fit.slope,
            window,
            abscissa,
            ordinate,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            upper_bound: None,
            n_contributing: 0,
            metadata: BTreeMap::new(),
        })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "kind": self.kind.as_str(),
            "value": self.value,
            "window": [self.window.lo, self.window.hi],
            "upper_bound": self.upper_bound,
            "r_squared": self.r_squared,
            "curve": self.abscissa.iter().zip(&self.ordinate).map(|(a, o)| [*a, *o]).collect::<Vec<_>>(),
            "n_contributing": self.n_contributing,
            "metadata": self.metadata,
        })
    }
}

impl Serialize for ExponentFit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

/// How per-anchor ratios are combined before regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// `log(mean ratio)`.
    #[default]
    LogOfMean,
    /// `mean(log ratio)`.
    MeanOfLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KantzOptions {
    /// Neighbors with `|i − j| ≤ theiler` are ignored.
    #[serde(default)]
    pub theiler: usize,
    #[serde(default)]
    pub averaging: Averaging,
}

/// Kantz estimate of the largest Lyapunov exponent, per sample.
pub fn kantz_lyapunov(
    x: &Trajectory,
    nb: &NeighborhoodParams,
    t_max: usize,
    window: FitWindow,
) -> Result<ExponentFit> {
    kantz_lyapunov_with(x, nb, t_max, window, &KantzOptions::default())
}

/// [`kantz_lyapunov`] with explicit options.
///
/// Anchors and neighbors are drawn from the first `N − t_max` points, so every
/// neighbor set can be advanced by up to `t_max` steps without falling off the
/// end of the series. `L_i = 0` anchors are skipped and counted in the
/// metadata.
pub fn kantz_lyapunov_with(
    x: &Trajectory,
    nb: &NeighborhoodParams,
    t_max: usize,
    window: FitWindow,
    opts: &KantzOptions,
) -> Result<ExponentFit> {
    nb.validate()?;
    if t_max < 1 {
        return Err(Error::param("t_max must be at least 1"));
    }
    if window.lo < 0.0 || window.hi > t_max as f64 {
        return Err(Error::param(format!(
            "fit window [{}, {}] must lie within [0, {t_max}]",
            window.lo, window.hi
        )));
    }
    let n = x.len();
    if n <= t_max + 1 {
        return Err(Error::param(format!(
            "series of {n} points is too short for t_max = {t_max}"
        )));
    }
    let pts = x.points();
    let pool = n - t_max;
    let pool_idx: Vec<usize> = (0..pool).collect();
    let tree = KdTree::with_indices(pts, &pool_idx);

    enum Anchor {
        Skipped,
        ZeroDistance,
        Ratios(Vec<f64>),
    }

    let anchors: Vec<Anchor> = (0..pool)
        .into_par_iter()
        .map(|i| {
            let neighbors: Vec<usize> = tree
                .within(pts.point(i), nb.delta)
                .into_iter()
                .filter(|&j| j.abs_diff(i) > opts.theiler && j != i)
                .collect();
            if neighbors.len() < nb.min_neighbors {
                return Anchor::Skipped;
            }
            let spread = |t: usize| {
                let xi = pts.point(i + t);
                neighbors.iter().map(|&j| dist(xi, pts.point(j + t))).sum::<f64>()
                    / neighbors.len() as f64
            };
            let l0 = spread(0);
            if l0 == 0.0 {
                return Anchor::ZeroDistance;
            }
            Anchor::Ratios((1..=t_max).map(|t| spread(t) / l0).collect())
        })
        .collect();

    let mut zero = 0usize;
    let mut ratios = Vec::new();
    for a in &anchors {
        match a {
            Anchor::Skipped => {}
            Anchor::ZeroDistance => zero += 1,
            Anchor::Ratios(r) => ratios.push(r),
        }
    }
    if ratios.is_empty() {
        return Err(Error::InsufficientNeighbors {
            delta: nb.delta,
            min_neighbors: nb.min_neighbors,
        });
    }

    let mut abscissa = vec![0.0];
    let mut ordinate = vec![0.0];
    for t in 1..=t_max {
        let y = match opts.averaging {
            Averaging::LogOfMean => {
                let m = ratios.iter().map(|r| r[t - 1]).sum::<f64>() / ratios.len() as f64;
                m.ln()
            }
            Averaging::MeanOfLog => {
                let logs: Vec<f64> = ratios
                    .iter()
                    .map(|r| r[t - 1])
                    .filter(|&v| v > 0.0)
                    .map(f64::ln)
                    .collect();
                if logs.is_empty() {
                    f64::NEG_INFINITY
                } else {
                    logs.iter().sum::<f64>() / logs.len() as f64
                }
            }
        };
        abscissa.push(t as f64);
        ordinate.push(y);
    }
    let mut fit = ExponentFit::from_curve(ExponentKind::Lyapunov, abscissa, ordinate, window)?;
    fit.n_contributing = ratios.len();
    let dt = x.grid().dt;
    let m = &mut fit.metadata;
    m.insert("delta".into(), json!(nb.delta));
    m.insert("min_neighbors".into(), json!(nb.min_neighbors));
    m.insert("t_max".into(), json!(t_max));
    m.insert("theiler".into(), json!(opts.theiler));
    m.insert("averaging".into(), json!(opts.averaging));
    m.insert("skipped_zero_distance".into(), json!(zero));
    m.insert("dt".into(), json!(dt));
    m.insert("value_per_time_unit".into(), json!(fit.value / dt));
    Ok(fit)
}

/// Persistence exponent of a pair of neighboring trajectories.
///
/// Requires `radii[0] = 0`, so the curve is normalized by `β₀(0) = |Z|`
/// (for distinct points). Use [`persistence_exponent_cloud`] to normalize at
/// a positive first radius.
pub fn persistence_exponent_pair(
    pair: &TrajectoryPair,
    radii: &[f64],
    window: FitWindow,
) -> Result<ExponentFit> {
    if radii.first() != Some(&0.0) {
        return Err(Error::param(
            "the pair exponent normalizes at radius 0; radii must start at 0",
        ));
    }
    let mut fit = persistence_exponent_cloud(&pair.union(), radii, window)?;
    fit.kind = ExponentKind::PersistencePair;
    fit.metadata
        .insert("trajectory_length".into(), json!(pair.x.len()));
    fit.metadata
        .insert("initial_separation".into(), json!(pair.initial_separation));
    Ok(fit)
}

/// Persistence exponent of an arbitrary cloud `Z`: the slope of
/// `−ln(β₀(ε_r)/β₀(ε_1))` against `ε_r` over `window`.
pub fn persistence_exponent_cloud(
    z: &PointCloud,
    radii: &[f64],
    window: FitWindow,
) -> Result<ExponentFit> {
    validate_radii(radii)?;
    let bc = barcode0(z)?;
    let counts = bc.betti_counts(radii);
    let first = counts[0] as f64;
    let ordinate: Vec<f64> = counts.iter().map(|&c| -(c as f64 / first).ln()).collect();
    let mut fit =
        ExponentFit::from_curve(ExponentKind::PersistencePair, radii.to_vec(), ordinate, window)?;
    fit.n_contributing = z.len();
    fit.upper_bound = Some(persistence_bound(z.len(), window.width()));
    fit.metadata.insert("n_points".into(), json!(z.len()));
    fit.metadata.insert("beta0_first".into(), json!(counts[0]));
    fit.metadata.insert("epsilon_first".into(), json!(radii[0]));
    Ok(fit)
}

/// Persistence exponent of a single embedded trajectory, averaging the
/// normalized Betti vectors of every δ-neighborhood (each neighborhood
/// includes its anchor).
pub fn persistence_exponent_local(
    x: &PointCloud,
    nb: &NeighborhoodParams,
    radii: &[f64],
    window: FitWindow,
) -> Result<ExponentFit> {
    let (ordinate, sizes) = local_betti_curve(x, nb, radii)?;
    let mut fit = ExponentFit::from_curve(
        ExponentKind::PersistenceLocal,
        radii.to_vec(),
        ordinate,
        window,
    )?;
    let n = x.len();
    let max_nb = sizes.iter().copied().max().unwrap_or(1);
    let mean_nb = sizes.iter().sum::<usize>() as f64 / n as f64;
    fit.n_contributing = n;
    fit.upper_bound = Some(persistence_bound(n, window.width()));
    let m = &mut fit.metadata;
    m.insert("delta".into(), json!(nb.delta));
    m.insert("n_points".into(), json!(n));
    m.insert("max_neighborhood".into(), json!(max_nb));
    m.insert("mean_neighborhood".into(), json!(mean_nb));
    m.insert(
        "upper_bound_max_neighborhood".into(),
        json!(persistence_bound(max_nb, window.width())),
    );
    Ok(fit)
}

/// `−ln(mean_i Δβ(r, i))` for every radius, plus the neighborhood sizes.
pub fn local_betti_curve(
    x: &PointCloud,
    nb: &NeighborhoodParams,
    radii: &[f64],
) -> Result<(Vec<f64>, Vec<usize>)> {
    nb.validate()?;
    validate_radii(radii)?;
    if x.is_empty() {
        return Err(Error::param("empty embedding"));
    }
    let tree = KdTree::new(x);
    let per_anchor: Vec<(Vec<f64>, usize)> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let hood = tree.within(x.point(i), nb.delta);
            let k = hood.len();
            let weights = mst_weights(x, &hood);
            // β₀(ε) = k − #{w : w/2 ≤ ε}; weights are sorted.
            let betti = |eps: f64| (k - weights.partition_point(|w| w / 2.0 <= eps)) as f64;
            let first = betti(radii[0]);
            (radii.iter().map(|&e| betti(e) / first).collect(), k)
        })
        .collect();
    let n = per_anchor.len() as f64;
    let ordinate = (0..radii.len())
        .map(|r| {
            let mean = per_anchor.iter().map(|(v, _)| v[r]).sum::<f64>() / n;
            -mean.ln()
        })
        .collect();
    Ok((ordinate, per_anchor.into_iter().map(|(_, k)| k).collect()))
}

/// `−ln(1/n)/Δε = ln(n)/Δε`.
pub fn persistence_bound(n_points: usize, width: f64) -> f64 {
    (n_points as f64).ln() / width
}

/// Result of checking a persistence fit against `0 ≤ β_exp ≤ ln(n)/Δε`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub within: bool,
    pub bound: f64,
    pub diagnostic: Option<String>,
}

pub fn check_bounds(fit: &ExponentFit, n_points: usize) -> BoundCheck {
    check_bounds_with_slack(fit, n_points, 0.0)
}

/// [`check_bounds`] allowing `slack` on either side for regression round-off.
pub fn check_bounds_with_slack(fit: &ExponentFit, n_points: usize, slack: f64) -> BoundCheck {
    let bound = persistence_bound(n_points, fit.window.width());
    let v = fit.value;
    let diagnostic = if !v.is_finite() {
        Some(format!("exponent {v} is not finite"))
    } else if v < -slack {
        Some(format!("exponent {v} is negative"))
    } else if v > bound + slack {
        Some(format!(
            "exponent {v} exceeds ln({n_points})/{} = {bound}",
            fit.window.width()
        ))
    } else {
        None
    };
    BoundCheck {
        within: diagnostic.is_none(),
        bound,
        diagnostic,
    }
}

/// How filtration radii are chosen for a given δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusSpec {
    /// A fixed list of radii.
    Absolute(Vec<f64>),
    /// `count` evenly spaced radii on `[0, δ]`.
    EvenlyToDelta(usize),
}

impl RadiusSpec {
    pub fn resolve(&self, delta: f64) -> Result<Vec<f64>> {
        let radii = match self {
            RadiusSpec::Absolute(r) => r.clone(),
            RadiusSpec::EvenlyToDelta(count) => {
                if *count < 2 {
                    return Err(Error::param("need at least 2 radii"));
                }
                (0..*count)
                    .map(|k| delta * k as f64 / (*count - 1) as f64)
                    .collect()
            }
        };
        validate_radii(&radii)?;
        Ok(radii)
    }
}

/// A regression window either fixed or expressed as fractions of δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowSpec {
    Absolute(FitWindow),
    FractionOfDelta([f64; 2]),
}

impl WindowSpec {
    pub fn resolve(&self, delta: f64) -> Result<FitWindow> {
        match self {
            WindowSpec::Absolute(w) => Ok(*w),
            WindowSpec::FractionOfDelta([lo, hi]) => FitWindow::new(lo * delta, hi * delta),
        }
    }
}

/// Parameters of a δ scan over `δ = c · D_X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaScanParams {
    pub c_grid: Vec<f64>,
    /// Largest relative spread `(max − min)/|mean|` tolerated in a stable run.
    pub stability_tol: f64,
    #[serde(default = "one")]
    pub min_neighbors: usize,
    pub t_max: usize,
    pub lyapunov_window: FitWindow,
    pub radii: RadiusSpec,
    pub persistence_window: WindowSpec,
    #[serde(default)]
    pub kantz: KantzOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaScanRow {
    pub c: f64,
    pub delta: f64,
    pub lyapunov: Option<f64>,
    pub persistence: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaScanReport {
    pub diameter: f64,
    pub rows: Vec<DeltaScanRow>,
    /// Inclusive `[c_lo, c_hi]` of the longest stable run, if any.
    pub stable_range: Option<[f64; 2]>,
    pub c_chosen: f64,
    pub delta: f64,
    /// Set when no stable run exists and the least-varying `c` was used.
    pub flagged: bool,
}

/// Scans `δ = c · D_X` over `params.c_grid`, computing both exponents for
/// each `c`, and picks the midpoint of the longest run of consecutive grid
/// values over which both exponents stay within `stability_tol` (relative).
pub fn select_delta_scan(x: &Trajectory, params: &DeltaScanParams) -> Result<DeltaScanReport> {
    let c_grid = &params.c_grid;
    if c_grid.is_empty() {
        return Err(Error::param("c grid is empty"));
    }
    if c_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("c grid must be strictly increasing"));
    }
    if c_grid.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::param("c values must be positive"));
    }
    let diameter = x.points().diameter();
    if !(diameter > 0.0) {
        return Err(Error::param("embedding has zero diameter"));
    }
    let rows: Vec<DeltaScanRow> = c_grid
        .iter()
        .map(|&c| {
            let delta = c * diameter;
            let computed = (|| -> Result<(f64, f64)> {
                let nb = NeighborhoodParams::new(delta, params.min_neighbors)?;
                let lyap = kantz_lyapunov_with(
                    x,
                    &nb,
                    params.t_max,
                    params.lyapunov_window,
                    &params.kantz,
                )?;
                let radii = params.radii.resolve(delta)?;
                let window = params.persistence_window.resolve(delta)?;
                let pers = persistence_exponent_local(x.points(), &nb, &radii, window)?;
                Ok((lyap.value, pers.value))
            })();
            match computed {
                Ok((l, p)) => DeltaScanRow {
                    c,
                    delta,
                    lyapunov: Some(l),
                    persistence: Some(p),
                    error: None,
                },
                Err(e) => DeltaScanRow {
                    c,
                    delta,
                    lyapunov: None,
                    persistence: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let values: Vec<Option<(f64, f64)>> = rows
        .iter()
        .map(|r| r.lyapunov.zip(r.persistence))
        .collect();
    let choice = choose_stable_c(c_grid, &values, params.stability_tol)?;
    Ok(DeltaScanReport {
        diameter,
        rows,
        stable_range: choice.range,
        c_chosen: choice.c,
        delta: choice.c * diameter,
        flagged: choice.flagged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StableChoice {
    pub c: f64,
    pub range: Option<[f64; 2]>,
    pub flagged: bool,
}

fn relative_spread(vals: &[f64]) -> f64 {
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if max == min {
        return 0.0;
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    (max - min) / mean.abs()
}

/// Picks `c` from per-grid-point exponent pairs `(λ, β_exp)`.
///
/// A run `[i, j]` (at least two grid points, all evaluated) is stable when
/// both exponents' relative spread over the run is below `tol`. The longest
/// stable run wins, the earliest on ties, and the chosen `c` is the mean of
/// its end points. With no stable run, the evaluated `c` with the smallest
/// relative change to its neighbors is returned and flagged.
pub fn choose_stable_c(
    c_grid: &[f64],
    values: &[Option<(f64, f64)>],
    tol: f64,
) -> Result<StableChoice> {
    if c_grid.len() != values.len() || c_grid.is_empty() {
        return Err(Error::param("c grid and values must be non-empty and aligned"));
    }
    let n = c_grid.len();
    let stable = |i: usize, j: usize| -> bool {
        let Some(run) = values[i..=j].iter().copied().collect::<Option<Vec<_>>>() else {
            return false;
        };
        let l: Vec<f64> = run.iter().map(|v| v.0).collect();
        let p: Vec<f64> = run.iter().map(|v| v.1).collect();
        relative_spread(&l) < tol && relative_spread(&p) < tol
    };
    let mut best: Option<(usize, usize)> = None;
    for i in 0..n {
        // Spread over a run only grows with the run, so extend greedily.
        let mut j = i;
        while j + 1 < n && stable(i, j + 1) {
            j += 1;
        }
        if j > i && best.is_none_or(|(bi, bj)| j - i > bj - bi) {
            best = Some((i, j));
        }
    }
    if let Some((i, j)) = best {
        return Ok(StableChoice {
            c: (c_grid[i] + c_grid[j]) / 2.0,
            range: Some([c_grid[i], c_grid[j]]),
            flagged: false,
        });
    }
    let variation = |i: usize| -> Option<f64> {
        let (l, p) = values[i]?;
        let mut total = 0.0;
        let mut seen = false;
        for k in [i.wrapping_sub(1), i + 1] {
            if let Some(Some((l2, p2))) = values.get(k) {
                total += relative_spread(&[l, *l2]) + relative_spread(&[p, *p2]);
                seen = true;
            }
        }
        Some(if seen { total } else { f64::INFINITY })
    };
    let pick = (0..n)
        .filter_map(|i| variation(i).map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::param("no c value produced both exponents"))?;
    Ok(StableChoice {
        c: c_grid[pick.0],
        range: None,
        flagged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ph0::{betti_curve, BettiCurve};
    use crate::TimeGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn traj_1d(values: Vec<f64>) -> Trajectory {
        let n = values.len();
        Trajectory::new(PointCloud::new(1, values).unwrap(), TimeGrid::unit(n).unwrap()).unwrap()
    }

    #[test]
    fn fit_exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let f = fit_slope(&xs, &ys, FitWindow::new(0.0, 9.0).unwrap()).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_constant_and_window_membership() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let f = fit_slope(&xs, &[4.0; 4], FitWindow::new(0.0, 3.0).unwrap()).unwrap();
        assert_eq!(f.slope, 0.0);
        // Inclusive on both ends: [1, 2] keeps exactly two samples.
        let g = fit_slope(&xs, &[0.0, 1.0, 5.0, 0.0], FitWindow::new(1.0, 2.0).unwrap()).unwrap();
        assert_eq!((g.n, g.slope), (2, 4.0));
        assert!(fit_slope(&xs, &[0.0; 4], FitWindow::new(0.5, 0.9).unwrap()).is_err());
    }

    #[test]
    fn fit_noisy_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x + noise.sample(&mut rng)).collect();
        let f = fit_slope(&xs, &ys, FitWindow::new(0.0, 1.0).unwrap()).unwrap();
        assert!((f.slope - 1.0).abs() < 0.02, "{}", f.slope);
    }

    #[test]
    fn window_json_shape() {
        let w: FitWindow = serde_json::from_str("[0.0, 6.0]").unwrap();
        assert_eq!(w, FitWindow::new(0.0, 6.0).unwrap());
        assert!(serde_json::from_str::<FitWindow>("[6.0, 0.0]").is_err());
    }

    #[test]
    fn kantz_on_uniform_motion_is_flat() {
        // Uniform translation: every pairwise distance survives the advance.
        let n = 400;
        let coords: Vec<f64> = (0..n).flat_map(|i| [i as f64 * 0.1, 2.0 + i as f64 * 0.03]).collect();
        let x = Trajectory::new(PointCloud::new(2, coords).unwrap(), TimeGrid::unit(n).unwrap()).unwrap();
        let nb = NeighborhoodParams::new(100.0, 1).unwrap();
        let fit = kantz_lyapunov(&x, &nb, 10, FitWindow::new(0.0, 10.0).unwrap()).unwrap();
        assert!(fit.value.abs() < 1e-12, "{}", fit.value);
    }

    #[test]
    fn kantz_recovers_exponential_divergence() {
        let lambda0 = 0.05;
        let x = traj_1d((0..300).map(|i| (lambda0 * i as f64).exp()).collect());
        let nb = NeighborhoodParams::new(0.5, 1).unwrap();
        let fit = kantz_lyapunov(&x, &nb, 20, FitWindow::new(2.0, 18.0).unwrap()).unwrap();
        assert!(((fit.value - lambda0) / lambda0).abs() < 0.1, "{}", fit.value);
        assert!(fit.n_contributing > 0);
    }

    #[test]
    fn kantz_without_neighbors_fails() {
        let x = traj_1d((0..50).map(|i| i as f64).collect());
        let nb = NeighborhoodParams::new(0.5, 1).unwrap();
        assert!(matches!(
            kantz_lyapunov(&x, &nb, 5, FitWindow::new(0.0, 5.0).unwrap()),
            Err(Error::InsufficientNeighbors { .. })
        ));
    }

    #[test]
    fn kantz_window_must_fit_t_max() {
        let x = traj_1d((0..50).map(|i| (i as f64).sin()).collect());
        let nb = NeighborhoodParams::new(0.5, 1).unwrap();
        assert!(kantz_lyapunov(&x, &nb, 5, FitWindow::new(0.0, 7.0).unwrap()).is_err());
    }

    #[test]
    fn bound_values() {
        assert!((persistence_bound(4000, 6.0) - 1.3823).abs() < 1e-3);
        assert!((persistence_bound(1510, 8.7) - 0.842).abs() < 1e-3);
    }

    fn fake_fit(value: f64, width: f64) -> ExponentFit {
        ExponentFit {
            kind: ExponentKind::PersistencePair,
            value,
            window: FitWindow::new(0.0, width).unwrap(),
            abscissa: vec![],
            ordinate: vec![],
            intercept: 0.0,
            r_squared: 1.0,
            upper_bound: None,
            n_contributing: 0,
            metadata: BTreeMap::new(),
        }
    }

    #[test]
    fn bounds_check_examples() {
        assert!(check_bounds(&fake_fit(1.0, 6.0), 4000).within);
        let neg = check_bounds(&fake_fit(-0.001, 6.0), 4000);
        assert!(!neg.within && neg.diagnostic.is_some());
        let high = check_bounds(&fake_fit(68.8, 0.15), 30000);
        assert!(!high.within);
        assert!((high.bound - 68.73).abs() < 0.01);
    }

    fn assert_within_bounds(fit: &ExponentFit) {
        let bound = fit.upper_bound.expect("persistence fits carry a bound");
        assert!(
            fit.value >= -1e-9 && fit.value <= bound + 1e-9,
            "{} outside [0, {bound}]",
            fit.value
        );
    }

    #[test]
    fn pair_without_merges_is_flat() {
        let grid = TimeGrid::unit(3).unwrap();
        let x = Trajectory::new(PointCloud::from_line(&[0.0, 10.0, 20.0]).unwrap(), grid).unwrap();
        let y = Trajectory::new(PointCloud::from_line(&[5.0, 15.0, 25.0]).unwrap(), grid).unwrap();
        let pair = TrajectoryPair::new(x, y).unwrap();
        let fit = persistence_exponent_pair(&pair, &[0.0, 0.5, 1.0, 2.0], FitWindow::new(0.0, 2.0).unwrap()).unwrap();
        assert_eq!(fit.value, 0.0);
        assert_eq!(fit.upper_bound, Some(6f64.ln() / 2.0));
        assert_within_bounds(&fit);
    }

    #[test]
    fn pair_requires_zero_start() {
        let grid = TimeGrid::unit(2).unwrap();
        let x = Trajectory::new(PointCloud::from_line(&[0.0, 1.0]).unwrap(), grid).unwrap();
        let y = Trajectory::new(PointCloud::from_line(&[0.5, 1.5]).unwrap(), grid).unwrap();
        let pair = TrajectoryPair::new(x, y).unwrap();
        assert!(persistence_exponent_pair(&pair, &[0.1, 0.5], FitWindow::new(0.1, 0.5).unwrap()).is_err());
    }

    #[test]
    fn exponential_line_cloud_matches_two_point_fit() {
        // Positions 2^k: the gaps double, so merges happen at 2^(k-1)/2.
        let pos: Vec<f64> = (0..12).map(|k| 2f64.powi(k)).collect();
        let z = PointCloud::from_line(&pos).unwrap();
        let radii = [0.0, 3.0];
        let fit = persistence_exponent_cloud(&z, &radii, FitWindow::new(0.0, 3.0).unwrap()).unwrap();
        // Oracle: count components by linking gaps ≤ 2ε directly.
        let comps = |eps: f64| 1 + pos.windows(2).filter(|w| w[1] - w[0] > 2.0 * eps).count();
        let want = (-(comps(3.0) as f64 / comps(0.0) as f64).ln() - 0.0) / 3.0;
        assert!((fit.value - want).abs() < 1e-10, "{} vs {want}", fit.value);
        assert_within_bounds(&fit);
    }

    #[test]
    fn local_with_tiny_delta_is_zero() {
        let z = PointCloud::from_line(&[0.0, 1.0, 2.5, 4.0]).unwrap();
        let nb = NeighborhoodParams::new(0.9, 1).unwrap();
        let radii: Vec<f64> = (0..10).map(|i| i as f64 * 0.2).collect();
        let fit = persistence_exponent_local(&z, &nb, &radii, FitWindow::new(0.0, 1.8).unwrap()).unwrap();
        assert_eq!(fit.value, 0.0);
        assert!(fit.ordinate.iter().all(|&v| v == 0.0));
        assert_within_bounds(&fit);
    }

    #[test]
    fn local_bound_matches_reported_value() {
        let z = PointCloud::from_line(&(0..1510).map(|i| i as f64).collect::<Vec<_>>()).unwrap();
        let nb = NeighborhoodParams::new(0.5, 1).unwrap();
        let fit = persistence_exponent_local(&z, &nb, &[0.0, 4.7, 13.4], FitWindow::new(4.7, 13.4).unwrap()).unwrap();
        assert!((fit.upper_bound.unwrap() - 0.842).abs() < 1e-3);
        assert_within_bounds(&fit);
    }

    /// Independent route: BFS components per neighborhood.
    fn bfs_components(p: &PointCloud, idx: &[usize], eps: f64) -> usize {
        let k = idx.len();
        let mut seen = vec![false; k];
        let mut comps = 0;
        for s in 0..k {
            if seen[s] {
                continue;
            }
            comps += 1;
            seen[s] = true;
            let mut queue = vec![s];
            while let Some(u) = queue.pop() {
                for v in 0..k {
                    if !seen[v] && dist(p.point(idx[u]), p.point(idx[v])) <= 2.0 * eps {
                        seen[v] = true;
                        queue.push(v);
                    }
                }
            }
        }
        comps
    }

    #[test]
    fn local_curve_matches_bfs_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let p = PointCloud::new(3, (0..300).map(|_| rng.random::<f64>()).collect()).unwrap();
        let delta = 0.45;
        let radii: Vec<f64> = (0..20).map(|i| i as f64 * 0.012).collect();
        let nb = NeighborhoodParams::new(delta, 1).unwrap();
        let (curve, _) = local_betti_curve(&p, &nb, &radii).unwrap();
        for (r, &eps) in radii.iter().enumerate() {
            let mut total = 0.0;
            for i in 0..p.len() {
                let hood: Vec<usize> = (0..p.len())
                    .filter(|&j| dist(p.point(i), p.point(j)) < delta)
                    .collect();
                total += bfs_components(&p, &hood, eps) as f64 / bfs_components(&p, &hood, radii[0]) as f64;
            }
            let want = -(total / p.len() as f64).ln();
            assert!((curve[r] - want).abs() < 1e-12, "r={r}: {} vs {want}", curve[r]);
        }
    }

    #[test]
    fn pair_exponent_is_rigid_and_scale_covariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 60;
        let grid = TimeGrid::unit(n).unwrap();
        let mk = |rng: &mut ChaCha8Rng| {
            Trajectory::new(
                PointCloud::new(2, (0..2 * n).map(|_| rng.random::<f64>() * 4.0).collect()).unwrap(),
                grid,
            )
            .unwrap()
        };
        let pair = TrajectoryPair::new(mk(&mut rng), mk(&mut rng)).unwrap();
        let radii: Vec<f64> = (0..30).map(|i| i as f64 * 0.02).collect();
        let window = FitWindow::new(0.0, 0.2).unwrap();
        let base = persistence_exponent_pair(&pair, &radii, window).unwrap();

        let s = 4.0;
        let scaled = pair
            .map(|t| Trajectory::new(t.points().map_points(|a, b| {
                b[0] = s * a[0] + 1.0;
                b[1] = s * a[1] - 3.0;
            })?, *t.grid()))
            .unwrap();
        let sr: Vec<f64> = radii.iter().map(|r| r * s).collect();
        let sw = FitWindow::new(0.0, 0.2 * s).unwrap();
        let fit = persistence_exponent_pair(&scaled, &sr, sw).unwrap();
        assert!((fit.value - base.value / s).abs() < 1e-9, "{} vs {}", fit.value, base.value / s);
        assert_within_bounds(&base);
        assert_within_bounds(&fit);
    }

    #[test]
    fn stable_choice_picks_longest_run_midpoint() {
        let c: Vec<f64> = (1..=20).map(|i| i as f64 * 0.01).collect();
        let vals: Vec<Option<(f64, f64)>> = c
            .iter()
            .map(|&c| {
                let l = if (0.06..=0.0801).contains(&c) { 0.0065 } else { 0.0065 + (c - 0.07f64).abs() };
                let p = if (0.06..=0.0801).contains(&c) { 0.44 } else { 0.44 + 3.0 * (c - 0.07f64).abs() };
                Some((l, p))
            })
            .collect();
        let pick = choose_stable_c(&c, &vals, 0.05).unwrap();
        assert!(!pick.flagged);
        let [lo, hi] = pick.range.unwrap();
        assert!((lo - 0.06).abs() < 1e-12 && (hi - 0.08).abs() < 1e-12, "{lo} {hi}");
        assert!((pick.c - 0.07).abs() < 1e-12);
    }

    #[test]
    fn constant_exponents_choose_grid_midpoint() {
        let c = [0.02, 0.04, 0.06, 0.08, 0.10];
        let vals = vec![Some((0.0, 0.0)); 5];
        let pick = choose_stable_c(&c, &vals, 0.01).unwrap();
        assert_eq!(pick.range, Some([0.02, 0.10]));
        assert!((pick.c - 0.06).abs() < 1e-15);
    }

    #[test]
    fn jump_splits_stable_range() {
        let c: Vec<f64> = (1..=12).map(|i| i as f64 * 0.02).collect();
        let vals: Vec<Option<(f64, f64)>> = c
            .iter()
            .map(|&c| Some((if c < 0.1 { 0.5 } else { 1.0 }, 0.3)))
            .collect();
        let pick = choose_stable_c(&c, &vals, 0.05).unwrap();
        let [lo, hi] = pick.range.unwrap();
        assert!(lo >= 0.1 || hi < 0.1, "range [{lo}, {hi}] straddles the jump");
    }

    #[test]
    fn unstable_values_are_flagged() {
        let c = [0.1, 0.2, 0.3];
        let vals = vec![Some((1.0, 1.0)), Some((2.0, 2.0)), Some((2.2, 2.1))];
        let pick = choose_stable_c(&c, &vals, 0.01).unwrap();
        assert!(pick.flagged);
        assert_eq!(pick.c, 0.3);
    }

    #[test]
    fn curve_from_grid_and_exact_agree_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = PointCloud::new(2, (0..80).map(|_| rng.random::<f64>()).collect()).unwrap();
        let radii: Vec<f64> = (0..25).map(|i| i as f64 * 0.01).collect();
        let sampled = betti_curve(&p, &radii).unwrap();
        let exact = BettiCurve::exact(&barcode0(&p).unwrap());
        for (r, &c) in radii.iter().zip(sampled.counts()) {
            assert_eq!(exact.value_at(*r), c);
        }
    }
}
