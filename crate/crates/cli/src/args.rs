//! Command-line arguments.
//!
//! Every argument struct doubles as the schema of the `--config` file for
//! its subcommand: keys are the long flag names with `-` replaced by `_`.
//! The sweep-style commands read the library's experiment configs instead.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pexp::{ExponentKind, Family};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "pexp",
    version,
    about = "Persistence and Lyapunov exponents of dynamical systems and time series"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a Lorenz or Rossler system and write the trajectory.
    Simulate(SimulateArgs),
    /// Delay-embed a series (delay and dimension chosen automatically unless given).
    Embed(EmbedArgs),
    /// Local projection noise reduction of a series.
    Denoise(DenoiseArgs),
    /// Dimension-zero barcode of a point cloud.
    Barcode(BarcodeArgs),
    /// Betti-0 counts of a point cloud at a list of radii.
    BettiCurve(BettiCurveArgs),
    /// Largest Lyapunov exponent by Kantz's algorithm.
    Lyapunov(LyapunovArgs),
    /// Persistence exponent of a single trajectory or embedded series.
    Pexp(PexpArgs),
    /// Persistence exponent of neighboring trajectory pairs.
    PexpPair(PexpPairArgs),
    /// Parameter sweep over neighboring trajectory pairs.
    Sweep(SweepArgs),
    /// Normalized exponents of a series under increasing noise.
    NoiseLadder(NoiseLadderArgs),
    /// Scan the neighborhood scale c (delta = c times the diameter).
    DeltaScan(DeltaScanArgs),
}

/// Where results go.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct Output {
    /// Output file. A `.json` extension writes JSON, anything else CSV.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also draw a line plot to this SVG file.
    #[arg(long, value_name = "FILE")]
    pub svg: Option<PathBuf>,
}

/// An input file and, for series, how to embed it.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct Input {
    /// Input CSV: a series (one column), a trajectory (`t,x1,...`) or a point cloud.
    #[arg(long = "in", value_name = "FILE")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    /// Take this 1-based coordinate of a multi-column file as the series.
    #[arg(long)]
    pub column: Option<usize>,
    /// Embedding delay. Chosen by auto mutual information when omitted.
    #[arg(long)]
    pub tau: Option<usize>,
    /// Embedding dimension. Chosen by false nearest neighbors when omitted.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Largest delay searched for the mutual information minimum.
    #[arg(long)]
    pub max_tau: Option<usize>,
    /// Largest dimension tried by the false-nearest-neighbor test.
    #[arg(long)]
    pub max_dim: Option<usize>,
    /// Saturation threshold of the false-nearest-neighbor test.
    #[arg(long)]
    pub fnn_threshold: Option<f64>,
}

/// The δ-neighborhood: absolute, or relative to the diameter.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct Neighborhood {
    /// Absolute neighborhood radius.
    #[arg(long, conflicts_with = "c")]
    pub delta: Option<f64>,
    /// Neighborhood radius as a fraction of the diameter.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub min_neighbors: Option<usize>,
}

/// Kantz settings.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct Kantz {
    /// Largest number of steps the neighborhoods are advanced.
    #[arg(long)]
    pub t_max: Option<usize>,
    /// Fit window in steps, `lo,hi`. Defaults to `0,t_max`.
    #[arg(long, value_delimiter = ',')]
    pub window: Option<Vec<f64>>,
    /// Temporal exclusion: neighbors closer in time than this are skipped.
    #[arg(long)]
    pub theiler: Option<usize>,
    /// `log_of_mean` or `mean_of_log`.
    #[arg(long)]
    pub averaging: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// TOML file with defaults for any of the flags.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// `lorenz` or `rossler`.
    #[arg(long)]
    pub system: Option<Family>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// End time; the grid is `0, dt, ..., t`.
    #[arg(long)]
    pub t: Option<f64>,
    /// Number of samples, instead of an end time.
    #[arg(long, conflicts_with = "t")]
    pub samples: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Leading samples to integrate and then drop.
    #[arg(long)]
    pub transient: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EmbedArgs {
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub input: Input,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct DenoiseArgs {
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Input series (or a multi-column file with `--column`).
    #[arg(long = "in", value_name = "FILE")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub column: Option<usize>,
    /// Window length of the unit-delay embedding.
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Neighborhood radius; 5% of the embedded diameter when omitted.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Number of principal directions kept.
    #[arg(long)]
    pub projection_dim: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct BarcodeArgs {
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Point cloud CSV (a trajectory file's `t` column is ignored).
    #[arg(long = "in", value_name = "FILE")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct BettiCurveArgs {
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Point cloud CSV (a trajectory file's `t` column is ignored).
    #[arg(long = "in", value_name = "FILE")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    /// `start:step:stop` (inclusive) or a comma-separated list.
    #[arg(long)]
    pub radii: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct LyapunovArgs {
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub input: Input,
    #[command(flatten)]
    #[serde(flatten)]
    pub neighborhood: Neighborhood,
    #[command(flatten)]
    #[serde(flatten)]
    pub kantz: Kantz,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: Output,
}

/// Radii and fit window for a local persistence exponent.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct LocalRadii {
    /// Explicit radii, `start:step:stop` or a list.
    #[arg(long, conflicts_with = "n_radii")]
    pub radii: Option<String>,
    /// Number of evenly spaced radii on `[0, delta]`.
    #[arg(long)]
    pub n_radii: Option<usize>,
    /// Fit window in radius units, `lo,hi`.
    #[arg(
        long = "eps-window",
        value_delimiter = ',',
        conflicts_with = "eps_window_frac"
    )]
    pub eps_window: Option<Vec<f64>>,
    /// Fit window as fractions of delta, `lo,hi`.
    #[arg(long = "eps-window-frac", value_delimiter = ',')]
    pub eps_window_frac: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct PexpArgs {
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub input: Input,
    #[command(flatten)]
    #[serde(flatten)]
    pub neighborhood: Neighborhood,
    #[command(flatten)]
    #[serde(flatten)]
    pub radii: LocalRadii,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: Output,
}

/// Overrides applied on top of an experiment config file.
#[derive(Debug, Clone, Default, Args)]
pub struct SweepOverrides {
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Noise levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub noise: Option<Vec<f64>>,
    /// Values of the swept parameter, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    /// Samples per trajectory.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Radii of the pair exponent.
    #[arg(long)]
    pub radii: Option<String>,
    /// Fit window of the pair exponent, `lo,hi`.
    #[arg(long = "eps-window", value_delimiter = ',')]
    pub eps_window: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PexpPairArgs {
    /// Experiment config (TOML). Without one, the built-in preset is used.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["x", "y"])]
    pub config: Option<PathBuf>,
    /// `lorenz` or `rossler` desk-scale preset, used without `--config`.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<Family>,
    /// First trajectory of a single pair; skips the sweep.
    #[arg(long, requires = "y", value_name = "FILE")]
    pub x: Option<PathBuf>,
    /// Second trajectory of a single pair.
    #[arg(long, requires = "x", value_name = "FILE")]
    pub y: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: SweepOverrides,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// Experiment config (TOML). Without one, the built-in preset is used.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// `lorenz` or `rossler` desk-scale preset, used without `--config`.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<Family>,
    /// Exponents to compute, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub kinds: Option<Vec<ExponentKind>>,
    #[command(flatten)]
    pub overrides: SweepOverrides,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Default, Args)]
pub struct NoiseLadderArgs {
    /// Noise ladder config (TOML).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub neighborhood: Neighborhood,
    #[command(flatten)]
    pub kantz: Kantz,
    #[command(flatten)]
    pub radii: LocalRadii,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Noise levels as fractions of the series' standard deviation.
    #[arg(long, value_delimiter = ',')]
    pub noise: Option<Vec<f64>>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct DeltaScanArgs {
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub input: Input,
    /// Grid of c values, `start:step:stop` or a list.
    #[arg(long)]
    pub c_grid: Option<String>,
    /// Largest relative spread tolerated within a stable run.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub min_neighbors: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub kantz: Kantz,
    #[command(flatten)]
    #[serde(flatten)]
    pub radii: LocalRadii,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: Output,
}
