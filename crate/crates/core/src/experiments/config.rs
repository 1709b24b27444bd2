//! Declarative experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exponents::{Averaging, KantzOptions, RadiusSpec, WindowSpec};
use crate::ph0::validate_radii;
use crate::{EmbeddingParams, Error, ExponentKind, FitWindow, NeighborhoodParams, Result, SystemSpec};

/// Parses `start:step:stop` (inclusive) or a comma-separated list.
///
/// ```
/// let r = pexp::experiments::parse_radii("0:0.1:8").unwrap();
/// assert_eq!(r.len(), 81);
/// assert_eq!(r[80], 8.0);
/// ```
pub fn parse_radii(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::param(format!("'{s}' is not a number in radius list '{text}'")))
    };
    let radii = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::param(format!(
                "radius range '{text}' must look like start:step:stop"
            )));
        }
        let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
            return Err(Error::param(format!(
                "radius range '{text}' needs step > 0 and stop >= start"
            )));
        }
        let steps = ((stop - start) / step + 1e-9).floor() as usize;
        let mut r: Vec<f64> = (0..=steps).map(|k| start + k as f64 * step).collect();
        let last = r.last_mut().expect("at least one radius");
        if (*last - stop).abs() <= 1e-9 * step {
            *last = stop;
        }
        r
    } else {
        text.split(',').map(num).collect::<Result<Vec<f64>>>()?
    };
    validate_radii(&radii)?;
    Ok(radii)
}

/// A radius list written either as a range string or as an array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Radii {
    Range(String),
    List(Vec<f64>),
}

impl Radii {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        match self {
            Radii::Range(s) => parse_radii(s),
            Radii::List(v) => {
                validate_radii(v)?;
                Ok(v.clone())
            }
        }
    }
}

/// δ given directly or as a fraction `c` of the cloud's diameter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighborhoodScale {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default = "one")]
    pub min_neighbors: usize,
}

fn one() -> usize {
    1
}

impl NeighborhoodScale {
    pub fn absolute(delta: f64) -> Self {
        NeighborhoodScale {
            delta: Some(delta),
            c: None,
            min_neighbors: 1,
        }
    }

    pub fn relative(c: f64) -> Self {
        NeighborhoodScale {
            delta: None,
            c: Some(c),
            min_neighbors: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.delta, self.c) {
            (Some(d), None) if d > 0.0 && d.is_finite() => Ok(()),
            (None, Some(c)) if c > 0.0 && c.is_finite() => Ok(()),
            (Some(_), Some(_)) => Err(Error::Config("give either delta or c, not both".into())),
            (None, None) => Err(Error::Config("neighborhood needs delta or c".into())),
            _ => Err(Error::Config("delta and c must be positive".into())),
        }
    }

    /// Resolves δ; `diameter` is only evaluated for the relative form.
    pub fn resolve(&self, diameter: impl FnOnce() -> f64) -> Result<NeighborhoodParams> {
        self.validate()?;
        let delta = match (self.delta, self.c) {
            (Some(d), _) => d,
            (None, Some(c)) => c * diameter(),
            (None, None) => unreachable!("validated"),
        };
        NeighborhoodParams::new(delta, self.min_neighbors)
    }
}

/// Kantz settings shared by sweeps and ladders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KantzConfig {
    pub t_max: usize,
    pub window: FitWindow,
    #[serde(default)]
    pub theiler: usize,
    #[serde(default)]
    pub averaging: Averaging,
}

impl KantzConfig {
    pub fn options(&self) -> KantzOptions {
        KantzOptions {
            theiler: self.theiler,
            averaging: self.averaging,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(Error::Config("lyapunov.t_max must be at least 1".into()));
        }
        if self.window.lo < 0.0 || self.window.hi > self.t_max as f64 {
            return Err(Error::Config(format!(
                "lyapunov.window [{}, {}] must lie within [0, t_max = {}]",
                self.window.lo, self.window.hi, self.t_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweptParam {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub dt: f64,
    /// Samples per trajectory (`T`); each pair cloud has `2T` points.
    pub samples: usize,
    pub base_x0: Vec<f64>,
    /// Standard deviation of the jitter added to `base_x0`.
    pub ic_jitter: f64,
    /// Standard deviation of the offset between the two initial states.
    pub separation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairPersistenceConfig {
    pub radii: Radii,
    pub window: FitWindow,
}

/// Kantz settings for a sweep, with δ given directly or relative to the
/// clean trajectory's diameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepLyapunovConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default = "one")]
    pub min_neighbors: usize,
    pub t_max: usize,
    pub window: FitWindow,
    #[serde(default)]
    pub theiler: usize,
    #[serde(default)]
    pub averaging: Averaging,
}

impl SweepLyapunovConfig {
    pub fn neighborhood(&self) -> NeighborhoodScale {
        NeighborhoodScale {
            delta: self.delta,
            c: self.c,
            min_neighbors: self.min_neighbors,
        }
    }

    pub fn kantz(&self) -> KantzConfig {
        KantzConfig {
            t_max: self.t_max,
            window: self.window,
            theiler: self.theiler,
            averaging: self.averaging,
        }
    }
}

fn default_kinds() -> Vec<ExponentKind> {
    vec![ExponentKind::Lyapunov, ExponentKind::PersistencePair]
}

/// A parameter sweep over neighboring trajectory pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub trials: usize,
    pub noise_levels: Vec<f64>,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<ExponentKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub system: SystemSpec,
    pub sweep: SweptParam,
    pub simulation: SimulationConfig,
    pub persistence: PairPersistenceConfig,
    pub lyapunov: SweepLyapunovConfig,
}

impl ExperimentConfig {
    /// Lorenz sweep at desk scale: `ρ ∈ {90, 91, …, 103}`, three noise
    /// levels, 5 trials, `T = 2000` samples at `dt = 0.01`.
    ///
    /// β_exp is fitted on radii `[0, 2]`. Wider windows such as `[0, 6]`
    /// reach the saturated tail of the Betti curve, where the least-squares
    /// slope can exceed `ln(2T)/Δε` and the sweep aborts.
    pub fn lorenz_desk() -> Self {
        ExperimentConfig {
            master_seed: 20_240_601,
            trials: 5,
            noise_levels: vec![0.0, 0.015, 0.025],
            kinds: default_kinds(),
            output_dir: None,
            system: SystemSpec::lorenz_rho(95.0).expect("valid parameters"),
            sweep: SweptParam {
                name: "rho".into(),
                values: (90..=103).map(f64::from).collect(),
            },
            simulation: SimulationConfig {
                dt: 0.01,
                samples: 2000,
                base_x0: vec![-13.0, -14.0, 47.0],
                ic_jitter: 0.1,
                separation: 1e-4,
            },
            persistence: PairPersistenceConfig {
                radii: Radii::Range("0:0.05:4".into()),
                window: FitWindow { lo: 0.0, hi: 2.0 },
            },
            lyapunov: SweepLyapunovConfig {
                delta: None,
                c: Some(0.02),
                min_neighbors: 1,
                t_max: 7,
                window: FitWindow { lo: 0.0, hi: 7.0 },
                theiler: 10,
                averaging: Averaging::LogOfMean,
            },
        }
    }

    /// Rossler sweep at desk scale: 20 values of `a` on `[0.37, 0.42]`,
    /// `T = 15000` samples at `dt = 1/15`, β_exp fitted on radii `[0, 0.05]`.
    pub fn rossler_desk() -> Self {
        ExperimentConfig {
            master_seed: 20_240_602,
            trials: 5,
            noise_levels: vec![0.0, 0.0015, 0.0025],
            kinds: default_kinds(),
            output_dir: None,
            system: SystemSpec::rossler_a(0.40).expect("valid parameters"),
            sweep: SweptParam {
                name: "a".into(),
                values: (0..20).map(|k| 0.37 + 0.05 * k as f64 / 19.0).collect(),
            },
            simulation: SimulationConfig {
                dt: 1.0 / 15.0,
                samples: 15000,
                base_x0: vec![-0.4, 0.6, 1.0],
                ic_jitter: 0.001,
                separation: 1e-4,
            },
            persistence: PairPersistenceConfig {
                radii: Radii::Range("0:0.001:0.5".into()),
                window: FitWindow { lo: 0.0, hi: 0.05 },
            },
            lyapunov: SweepLyapunovConfig {
                delta: None,
                c: Some(0.02),
                min_neighbors: 1,
                t_max: 100,
                window: FitWindow { lo: 0.0, hi: 100.0 },
                theiler: 15,
                averaging: Averaging::LogOfMean,
            },
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.noise_levels.is_empty() {
            return bad("noise_levels is empty".into());
        }
        if let Some(s) = self.noise_levels.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return bad(format!("noise level {s} must be finite and >= 0"));
        }
        if self.kinds.is_empty() {
            return bad("kinds is empty".into());
        }
        if self.kinds.contains(&ExponentKind::PersistenceLocal) {
            return bad("sweeps compute lyapunov and persistence_pair only".into());
        }
        self.system.validate()?;
        if !self.system.family.param_names().contains(&self.sweep.name.as_str()) {
            return bad(format!(
                "'{}' is not a parameter of the {} system",
                self.sweep.name, self.system.family
            ));
        }
        if self.sweep.values.is_empty() {
            return bad("sweep.values is empty".into());
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return bad("sweep values must be finite".into());
        }
        let sim = &self.simulation;
        if !(sim.dt > 0.0) || !sim.dt.is_finite() {
            return bad(format!("simulation.dt must be positive, got {}", sim.dt));
        }
        if sim.samples < 2 {
            return bad("simulation.samples must be at least 2".into());
        }
        if sim.base_x0.len() != 3 || sim.base_x0.iter().any(|v| !v.is_finite()) {
            return bad("simulation.base_x0 must hold 3 finite numbers".into());
        }
        if !(sim.ic_jitter >= 0.0) || !(sim.separation > 0.0) {
            return bad("ic_jitter must be >= 0 and separation > 0".into());
        }
        let radii = self.persistence.radii.resolve()?;
        if radii[0] != 0.0 {
            return bad("persistence.radii must start at 0".into());
        }
        self.lyapunov.neighborhood().validate()?;
        self.lyapunov.kantz().validate()?;
        if self.lyapunov.t_max + 1 >= sim.samples {
            return bad("lyapunov.t_max must be shorter than the trajectory".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML form, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        sha256_hex(canonical.to_toml_string().as_bytes())
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalPersistenceConfig {
    pub radii: RadiusSpec,
    pub window: WindowSpec,
}

/// A noise ladder on a single series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseLadderConfig {
    pub master_seed: u64,
    pub trials: usize,
    /// Noise levels besides the σ = 0 reference, which is always computed.
    pub noise_levels: Vec<f64>,
    pub embedding: EmbeddingParams,
    pub neighborhood: NeighborhoodScale,
    pub lyapunov: KantzConfig,
    pub persistence: LocalPersistenceConfig,
}

impl NoiseLadderConfig {
    /// Defaults for a slowly varying experimental series: `τ = 6`, `M = 3`,
    /// `δ = 0.07 · D_X`, 100 radii on `[0, δ]`, fits on `ε ∈ [7, 13]` and
    /// `t ∈ [40, 80]`, noise levels `0.05, 0.10, …, 0.75`.
    pub fn single_series_defaults() -> Self {
        NoiseLadderConfig {
            master_seed: 20_240_603,
            trials: 10,
            noise_levels: (1..=15).map(|k| k as f64 * 0.05).collect(),
            embedding: EmbeddingParams { tau: 6, dim: 3 },
            neighborhood: NeighborhoodScale::relative(0.07),
            lyapunov: KantzConfig {
                t_max: 80,
                window: FitWindow { lo: 40.0, hi: 80.0 },
                theiler: 0,
                averaging: Averaging::LogOfMean,
            },
            persistence: LocalPersistenceConfig {
                radii: RadiusSpec::EvenlyToDelta(100),
                window: WindowSpec::Absolute(FitWindow { lo: 7.0, hi: 13.0 }),
            },
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: NoiseLadderConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.noise_levels.is_empty() {
            return Err(Error::param("the noise ladder needs at least one noise level"));
        }
        if let Some(s) = self.noise_levels.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return Err(Error::Config(format!("noise level {s} must be finite and >= 0")));
        }
        EmbeddingParams::new(self.embedding.tau, self.embedding.dim)?;
        self.neighborhood.validate()?;
        self.lyapunov.validate()
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.to_toml_string().as_bytes())
    }
}
