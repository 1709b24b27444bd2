//! Delay embedding of scalar series.
//!
//! [`sliding_window_embed`] turns a series `s` into the points
//! `(s[i], s[i+τ], …, s[i+(M−1)τ])`. [`select_delay_ami`] and
//! [`select_dim_fnn`] pick `τ` and `M`, and [`local_projection_denoise`]
//! optionally cleans the series first.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spatial::KdTree;
use crate::stats::sample_std;
use crate::{rng, Error, PointCloud, Result, TimeGrid, Trajectory};

/// An ordered scalar series.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    values: Vec<f64>,
    label: String,
}

impl Series {
    pub fn new(values: Vec<f64>) -> Result<Series> {
        Series::with_label(values, "value")
    }

    pub fn with_label(values: Vec<f64>, label: impl Into<String>) -> Result<Series> {
        if values.len() < 2 {
            return Err(Error::param(format!(
                "a series needs at least 2 samples, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("sample {i} is not finite")));
        }
        Ok(Series {
            values,
            label: label.into(),
        })
    }

    /// Coordinate `d` of a trajectory.
    pub fn from_component(traj: &Trajectory, d: usize) -> Result<Series> {
        if d >= traj.dim() {
            return Err(Error::param(format!(
                "component {d} out of range for a {}-dimensional trajectory",
                traj.dim()
            )));
        }
        Series::with_label(traj.component(d), format!("x{}", d + 1))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `a · s + b`, sample by sample.
    pub fn affine(&self, a: f64, b: f64) -> Result<Series> {
        Series::with_label(self.values.iter().map(|v| a * v + b).collect(), self.label.clone())
    }

    /// Adds Gaussian noise with standard deviation `sigma · std(s)`.
    /// `sigma = 0` and constant series are returned unchanged.
    pub fn perturb(&self, sigma: f64, seed: u64) -> Result<Series> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::param(format!("noise level must be finite and >= 0, got {sigma}")));
        }
        let scale = sample_std(&self.values);
        if sigma == 0.0 || scale == 0.0 {
            return Ok(self.clone());
        }
        let noise = Normal::new(0.0, sigma * scale).expect("finite scale");
        let mut rng = rng::from_seed(seed);
        Series::with_label(
            self.values.iter().map(|v| v + noise.sample(&mut rng)).collect(),
            self.label.clone(),
        )
    }
}

pub fn load_series_csv(path: impl AsRef<Path>) -> Result<Series> {
    crate::io::read_series_csv(path)
}

pub fn save_series_csv(s: &Series, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_series_csv(s, path)
}

/// Delay `τ` and window length `M` (the embedding dimension).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingParams {
    pub tau: usize,
    pub dim: usize,
}

impl EmbeddingParams {
    pub fn new(tau: usize, dim: usize) -> Result<Self> {
        if tau == 0 || dim == 0 {
            return Err(Error::param("delay and dimension must both be at least 1"));
        }
        Ok(EmbeddingParams { tau, dim })
    }

    /// Number of samples spanned by one window.
    pub fn span(&self) -> usize {
        (self.dim - 1) * self.tau
    }

    /// Number of embedded points for a series of length `n`.
    pub fn points_for(&self, n: usize) -> Option<usize> {
        n.checked_sub(self.span()).filter(|&k| k > 0)
    }
}

/// The sliding-window embedding on a unit time grid.
pub fn sliding_window_embed(s: &Series, p: &EmbeddingParams) -> Result<Trajectory> {
    let p = EmbeddingParams::new(p.tau, p.dim)?;
    let n = p.points_for(s.len()).ok_or_else(|| {
        Error::param(format!(
            "window of span {} does not fit a series of length {}",
            p.span(),
            s.len()
        ))
    })?;
    if n < 2 {
        return Err(Error::param("embedding would contain a single point"));
    }
    let v = s.values();
    let mut coords = Vec::with_capacity(n * p.dim);
    for i in 0..n {
        coords.extend((0..p.dim).map(|k| v[i + k * p.tau]));
    }
    Trajectory::new(PointCloud::new(p.dim, coords)?, TimeGrid::unit(n)?)
}

/// Outcome of a delay search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelaySelection {
    pub tau: usize,
    /// Mutual information (nats) at lags `0..=max_tau`.
    pub mi: Vec<f64>,
    /// The curve the minimum was searched on (`mi` after smoothing).
    pub smoothed: Vec<f64>,
    /// Set when no reliable minimum was found.
    pub flagged: bool,
    pub note: Option<String>,
}

/// Parameters for [`select_delay_ami`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmiParams {
    pub max_tau: usize,
    /// Histogram bins per axis; `⌈√n⌉` when `None`.
    #[serde(default)]
    pub bins: Option<usize>,
    /// Half-width of the moving average applied to lags `≥ 1` before the
    /// minimum search. Zero searches the raw curve.
    #[serde(default = "default_smoothing")]
    pub smoothing: usize,
}

fn default_smoothing() -> usize {
    2
}

impl AmiParams {
    pub fn new(max_tau: usize) -> Self {
        AmiParams {
            max_tau,
            bins: None,
            smoothing: default_smoothing(),
        }
    }
}

/// Share of `MI(0)` below which the lagged curve counts as flat.
const FLAT_MI_FRACTION: f64 = 0.05;

/// First strict local minimum of the auto mutual information.
///
/// MI is estimated with an equiquantile histogram. Bin membership is
/// decided by rank, so the result is unchanged by `s ↦ a·s + b` for any
/// `a ≠ 0`. Histogram MI jitters from lag to lag, so the minimum is taken on
/// a moving average of the lagged curve (see [`AmiParams::smoothing`]).
pub fn select_delay_ami(s: &Series, p: &AmiParams) -> Result<DelaySelection> {
    let n = s.len();
    let max_tau = p.max_tau;
    if max_tau < 2 || max_tau >= n {
        return Err(Error::param(format!(
            "max_tau must lie in [2, {}), got {max_tau}",
            n
        )));
    }
    let v = s.values();
    if v.iter().all(|&x| x == v[0]) {
        return Err(Error::UndefinedMutualInformation(
            "the series is constant".into(),
        ));
    }
    let b = p.bins.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize);
    if b < 2 {
        return Err(Error::param("at least 2 bins are required"));
    }
    let labels = quantile_bins(v, b);
    let mi: Vec<f64> = (0..=max_tau)
        .map(|tau| mutual_information(&labels[..n - tau], &labels[tau..], b))
        .collect();
    let w = p.smoothing;
    let smoothed: Vec<f64> = (0..=max_tau)
        .map(|t| {
            if t == 0 {
                return mi[0];
            }
            let lo = t.saturating_sub(w).max(1);
            let hi = (t + w).min(max_tau);
            mi[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();

    let lagged = &mi[1..];
    let hi = lagged.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = lagged.iter().copied().fold(f64::INFINITY, f64::min);
    let flat = hi - lo < FLAT_MI_FRACTION * mi[0];
    let c = &smoothed;
    let first_min = (1..max_tau).find(|&t| c[t] < c[t - 1] && c[t] < c[t + 1]);
    let (tau, flagged, note) = match (first_min, flat) {
        (Some(t), false) => (t, false, None),
        (Some(t), true) => (
            t,
            true,
            Some("mutual information is flat across lags; the minimum is not reliable".into()),
        ),
        (None, _) => (
            max_tau,
            true,
            Some(format!("no local minimum of mutual information below lag {max_tau}")),
        ),
    };
    Ok(DelaySelection {
        tau,
        mi,
        smoothed,
        flagged,
        note,
    })
}

/// Rank-based bin labels with a partition symmetric under rank reversal.
fn quantile_bins(v: &[f64], bins: usize) -> Vec<usize> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    // Cut points in rank space: the lower half from floor(k n / B), the upper
    // half mirrored, so reversing ranks maps bin k onto bin B − 1 − k.
    let cut = |k: usize| -> usize {
        if 2 * k <= bins {
            k * n / bins
        } else {
            n - (bins - k) * n / bins
        }
    };
    let cuts: Vec<usize> = (0..=bins).map(cut).collect();
    let mut labels = vec![0; n];
    let mut k = 0;
    for (rank, &i) in order.iter().enumerate() {
        while rank >= cuts[k + 1] {
            k += 1;
        }
        labels[i] = k;
    }
    labels
}

fn mutual_information(a: &[usize], b: &[usize], bins: usize) -> f64 {
    let n = a.len() as f64;
    let mut joint = vec![0usize; bins * bins];
    let mut pa = vec![0usize; bins];
    let mut pb = vec![0usize; bins];
    for (&i, &j) in a.iter().zip(b) {
        joint[i * bins + j] += 1;
        pa[i] += 1;
        pb[j] += 1;
    }
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c > 0 {
                let pij = c as f64 / n;
                mi += pij * (pij * n * n / (pa[i] as f64 * pb[j] as f64)).ln();
            }
        }
    }
    mi
}

/// Outcome of Cao's false-nearest-neighbor test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionSelection {
    pub dim: usize,
    /// `E1(d)` for `d = 1..=max_m`.
    pub e1: Vec<f64>,
    /// `E2(d)` for `d = 1..=max_m`.
    pub e2: Vec<f64>,
    pub flagged: bool,
    pub note: Option<String>,
}

/// Tolerance around 1 within which every `E2(d)` marks the series as
/// indistinguishable from noise.
const NOISE_E2_BAND: f64 = 0.1;

/// Cao's method: the smallest `M` with `|E1(M+1) − E1(M)| < threshold`.
///
/// Distances use the maximum norm. The result is flagged when `E1` never
/// saturates below `max_m` or when `E2(d) ≈ 1` for every `d`, the signature
/// of a stochastic series.
pub fn select_dim_fnn(
    s: &Series,
    tau: usize,
    max_m: usize,
    threshold: f64,
) -> Result<DimensionSelection> {
    if tau == 0 {
        return Err(Error::param("delay must be at least 1"));
    }
    if max_m < 2 {
        return Err(Error::param("max_m must be at least 2"));
    }
    if !(threshold > 0.0) {
        return Err(Error::param("threshold must be positive"));
    }
    let n = s.len();
    // E(d) needs points valid in dimension d + 1, up to d = max_m + 1.
    let needed = (max_m + 1) * tau + 2;
    if n < needed + 10 {
        return Err(Error::param(format!(
            "series of length {n} is too short for max_m = {max_m} at delay {tau}"
        )));
    }
    let v = s.values();
    let mut e = Vec::with_capacity(max_m + 1);
    let mut estar = Vec::with_capacity(max_m + 1);
    for d in 1..=max_m + 1 {
        let (ed, esd) = cao_means(v, tau, d)?;
        e.push(ed);
        estar.push(esd);
    }
    let e1: Vec<f64> = (0..max_m).map(|k| e[k + 1] / e[k]).collect();
    let e2: Vec<f64> = (0..max_m)
        .map(|k| if estar[k] > 0.0 { estar[k + 1] / estar[k] } else { 1.0 })
        .collect();
    let saturated = (0..max_m - 1).find(|&k| (e1[k + 1] - e1[k]).abs() < threshold);
    let noise_like = e2.iter().all(|x| (x - 1.0).abs() < NOISE_E2_BAND);
    let (dim, mut flagged, mut note) = match saturated {
        Some(k) => (k + 1, false, None),
        None => (max_m, true, Some(format!("E1 does not saturate below dimension {max_m}"))),
    };
    if noise_like {
        flagged = true;
        note = Some("E2 stays near 1 for every dimension; the series looks stochastic".into());
    }
    Ok(DimensionSelection {
        dim,
        e1,
        e2,
        flagged,
        note,
    })
}

/// Cao's `E(d)` and `E*(d)` over points valid in dimension `d + 1`.
fn cao_means(v: &[f64], tau: usize, d: usize) -> Result<(f64, f64)> {
    let count = v.len() - d * tau;
    let window = |i: usize, k: usize| v[i + k * tau];
    let terms: Vec<Option<(f64, f64)>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut best = f64::INFINITY;
            let mut arg = usize::MAX;
            for j in 0..count {
                if j == i {
                    continue;
                }
                let mut dmax = 0.0f64;
                for k in 0..d {
                    dmax = dmax.max((window(i, k) - window(j, k)).abs());
                    if dmax >= best {
                        break;
                    }
                }
                if dmax > 0.0 && dmax < best {
                    best = dmax;
                    arg = j;
                }
            }
            if arg == usize::MAX {
                return None;
            }
            let extra = (window(i, d) - window(arg, d)).abs();
            Some((best.max(extra) / best, extra))
        })
        .collect();
    let valid: Vec<(f64, f64)> = terms.into_iter().flatten().collect();
    if valid.is_empty() {
        return Err(Error::param("no point has a distinct nearest neighbor"));
    }
    let m = valid.len() as f64;
    Ok((
        valid.iter().map(|t| t.0).sum::<f64>() / m,
        valid.iter().map(|t| t.1).sum::<f64>() / m,
    ))
}

/// Parameters for [`local_projection_denoise`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiseParams {
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    /// Absolute neighborhood radius; `None` means 5% of the embedded diameter.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default = "default_projection_dim")]
    pub projection_dim: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

fn default_embed_dim() -> usize {
    3
}

fn default_projection_dim() -> usize {
    2
}

fn default_iterations() -> usize {
    1
}

impl Default for DenoiseParams {
    fn default() -> Self {
        DenoiseParams {
            embed_dim: default_embed_dim(),
            radius: None,
            projection_dim: default_projection_dim(),
            iterations: default_iterations(),
        }
    }
}

/// Default radius as a share of the embedded diameter.
pub const DEFAULT_RADIUS_FRACTION: f64 = 0.05;

/// Local projection noise reduction.
///
/// Each pass embeds the series with unit delay, projects every window onto
/// the leading `projection_dim` principal directions of its neighborhood
/// (the window itself included), and replaces each sample by the average of
/// its corrected copies. Windows whose neighborhood has fewer than
/// `embed_dim + 1` points keep their original values.
pub fn local_projection_denoise(s: &Series, p: &DenoiseParams) -> Result<Series> {
    if p.iterations == 0 {
        return Err(Error::param("denoising needs at least one iteration"));
    }
    if p.projection_dim == 0 || p.projection_dim > p.embed_dim {
        return Err(Error::param(format!(
            "projection dimension must lie in [1, {}], got {}",
            p.embed_dim, p.projection_dim
        )));
    }
    if let Some(r) = p.radius {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::param(format!("radius must be positive, got {r}")));
        }
    }
    let embed = EmbeddingParams::new(1, p.embed_dim)?;
    let mut current = s.clone();
    for _ in 0..p.iterations {
        let x = sliding_window_embed(&current, &embed)?;
        let cloud = x.points();
        let radius = match p.radius {
            Some(r) => r,
            None => DEFAULT_RADIUS_FRACTION * cloud.diameter(),
        };
        if !(radius > 0.0) {
            // Every window coincides; there is nothing to project.
            return Ok(current);
        }
        let tree = KdTree::new(cloud);
        let m = p.embed_dim;
        let corrected: Vec<Option<Vec<f64>>> = (0..cloud.len())
            .into_par_iter()
            .map(|i| {
                let hood = tree.within(cloud.point(i), radius);
                (hood.len() > m).then(|| project(cloud, &hood, cloud.point(i), p.projection_dim))
            })
            .collect();
        let v = current.values();
        let mut sums = vec![0.0; v.len()];
        let mut counts = vec![0usize; v.len()];
        for (i, c) in corrected.iter().enumerate() {
            for k in 0..m {
                sums[i + k] += match c {
                    Some(w) => w[k],
                    None => v[i + k],
                };
                counts[i + k] += 1;
            }
        }
        let values = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
        current = Series::with_label(values, s.label().to_string())?;
    }
    Ok(current)
}

/// Projects `x` onto the affine span of the `q` leading principal directions
/// of `hood`.
fn project(cloud: &PointCloud, hood: &[usize], x: &[f64], q: usize) -> Vec<f64> {
    let m = cloud.dim();
    let k = hood.len() as f64;
    let mut centroid = DVector::<f64>::zeros(m);
    for &j in hood {
        centroid += DVector::from_column_slice(cloud.point(j));
    }
    centroid /= k;
    let mut cov = DMatrix::<f64>::zeros(m, m);
    for &j in hood {
        let d = DVector::from_column_slice(cloud.point(j)) - &centroid;
        cov += &d * d.transpose();
    }
    cov /= k;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let offset = DVector::from_column_slice(x) - &centroid;
    let mut out = centroid.clone();
    for &c in &order[..q] {
        let u = eig.eigenvectors.column(c);
        out += u * u.dot(&offset);
    }
    out.iter().copied().collect()
}
