//! Multi-trial experiments: parameter sweeps over neighboring trajectory
//! pairs ([`run_sweep`]) and noise ladders on a single series
//! ([`run_noise_ladder`]).
//!
//! Every trial draws from its own random stream derived from the master seed
//! and the trial's indices, and results are aggregated in a fixed order, so a
//! rerun with the same configuration writes byte-identical files.

mod config;
mod ladder;
mod sweep;

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

pub use config::{
    parse_radii, ExperimentConfig, KantzConfig, LocalPersistenceConfig, NeighborhoodScale,
    NoiseLadderConfig, PairPersistenceConfig, Radii, SimulationConfig, SweepLyapunovConfig,
    SweptParam,
};
pub use ladder::run_noise_ladder;
pub use sweep::run_sweep;

use crate::io::fmt_real;
use crate::{ExponentKind, Result};

/// Aggregate over the trials of one `(param, σ, kind)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub sigma: f64,
    pub kind: ExponentKind,
    pub mean: f64,
    pub std: f64,
    pub n_trials: usize,
    pub n_failed: usize,
}

/// The outcome of one trial for one exponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub param: f64,
    pub sigma: f64,
    pub trial: usize,
    pub kind: ExponentKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub master_seed: u64,
    /// Name of the swept quantity (`"sigma"` for noise ladders).
    pub param_name: String,
    pub crate_version: String,
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub trials: Vec<TrialRecord>,
    pub provenance: Provenance,
}

pub const SWEEP_CSV_HEADER: &str = "param,sigma,kind,mean,std,n_trials,n_failed";

impl SweepResult {
    pub fn row(&self, param: f64, sigma: f64, kind: ExponentKind) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.param == param && r.sigma == sigma && r.kind == kind)
    }

    pub fn rows_of(&self, kind: ExponentKind) -> impl Iterator<Item = &SweepRow> + '_ {
        self.rows.iter().filter(move |r| r.kind == kind)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.param,
                r.sigma,
                r.kind,
                fmt_real(r.mean),
                fmt_real(r.std),
                r.n_trials,
                r.n_failed
            ));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!(self)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_json(self, path)
    }
}

pub(crate) fn aggregate(
    param: f64,
    sigma: f64,
    kind: ExponentKind,
    values: &[f64],
    n_failed: usize,
) -> SweepRow {
    SweepRow {
        param,
        sigma,
        kind,
        mean: crate::stats::mean(values),
        std: crate::stats::sample_std(values),
        n_trials: values.len(),
        n_failed,
    }
}
