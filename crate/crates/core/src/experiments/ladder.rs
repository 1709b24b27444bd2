use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::json;

use super::config::sha256_hex;
use super::{aggregate, NoiseLadderConfig, Provenance, SweepResult, SweepRow, TrialRecord};
use crate::embedding::sliding_window_embed;
use crate::exponents::{
    check_bounds_with_slack, kantz_lyapunov_with, persistence_exponent_local,
};
use crate::rng::derive_seed;
use crate::{Error, ExponentFit, ExponentKind, FitWindow, NeighborhoodParams, Result, Series, Trajectory};

const BOUND_SLACK: f64 = 1e-9;
const LADDER_STREAM: u64 = 2;
const KINDS: [ExponentKind; 2] = [ExponentKind::Lyapunov, ExponentKind::PersistenceLocal];

/// Fixed settings shared by every rung of the ladder.
struct Setup<'a> {
    cfg: &'a NoiseLadderConfig,
    nb: NeighborhoodParams,
    radii: Vec<f64>,
    window: FitWindow,
}

impl Setup<'_> {
    /// `(λ, β_exp)` fits of one embedded trajectory, each possibly failed.
    /// The outer error is a bound violation and aborts the ladder.
    fn fits(&self, x: &Trajectory, context: &str) -> Result<[Result<ExponentFit>; 2]> {
        let k = &self.cfg.lyapunov;
        let lyap = kantz_lyapunov_with(x, &self.nb, k.t_max, k.window, &k.options());
        let pers = persistence_exponent_local(x.points(), &self.nb, &self.radii, self.window);
        if let Ok(fit) = &pers {
            let check = check_bounds_with_slack(fit, x.len(), BOUND_SLACK);
            if !check.within {
                return Err(Error::BoundViolation(format!(
                    "{context}: {}",
                    check.diagnostic.unwrap_or_default()
                )));
            }
        }
        Ok([lyap, pers])
    }

    fn exponents(&self, x: &Trajectory, context: &str) -> Result<[Result<f64>; 2]> {
        Ok(self.fits(x, context)?.map(|f| f.map(|f| f.value)))
    }
}

/// True when the regressed curve is flat to rounding over the window, so the
/// slope carries no information and cannot normalize anything.
fn is_flat(fit: &ExponentFit) -> bool {
    let scale = fit
        .abscissa
        .iter()
        .zip(&fit.ordinate)
        .filter(|(x, _)| fit.window.contains(**x))
        .fold(0.0f64, |m, (_, y)| m.max(y.abs()));
    fit.value.abs() * fit.window.width() <= 1e-9 * (1.0 + scale)
}

/// Runs a noise ladder on one series.
///
/// δ, the radii and the regression windows are fixed from the clean
/// embedding. For every noise level and trial the series itself is perturbed
/// with Gaussian noise of standard deviation `σ · std(s)` and re-embedded.
/// Rows report each exponent divided by its σ = 0 value, so the σ = 0 row is
/// exactly 1; the raw reference values are kept in the provenance.
pub fn run_noise_ladder(series: &Series, cfg: &NoiseLadderConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let clean = sliding_window_embed(series, &cfg.embedding)?;
    let diameter = clean.points().diameter();
    let nb = cfg.neighborhood.resolve(|| diameter)?;
    let radii = cfg.persistence.radii.resolve(nb.delta)?;
    let window = cfg.persistence.window.resolve(nb.delta)?;
    let setup = Setup {
        cfg,
        nb,
        radii,
        window,
    };

    let [lyap0, pers0] = setup.fits(&clean, "sigma = 0")?;
    let clean_fits = [lyap0?, pers0?];
    for fit in &clean_fits {
        if is_flat(fit) {
            return Err(Error::NonFinite(format!(
                "the noiseless {} exponent is 0 (flat curve over the fit window), so normalized values are undefined",
                fit.kind
            )));
        }
    }
    let reference = clean_fits.map(|f| f.value);

    let levels: Vec<f64> = cfg.noise_levels.iter().copied().filter(|&s| s != 0.0).collect();
    let tasks: Vec<(usize, usize)> = (0..levels.len())
        .flat_map(|s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    let outcomes: Vec<[Result<f64>; 2]> = tasks
        .par_iter()
        .map(|&(s, t)| {
            let seed = derive_seed(cfg.master_seed, &[LADDER_STREAM, s as u64, t as u64]);
            let x = series
                .perturb(levels[s], seed)
                .and_then(|noisy| sliding_window_embed(&noisy, &cfg.embedding));
            match x {
                Ok(x) => setup.exponents(&x, &format!("sigma = {}, trial {t}", levels[s])),
                Err(e) => Ok([Err(e.clone()), Err(e)]),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<SweepRow> = KINDS
        .iter()
        .map(|&kind| aggregate(0.0, 0.0, kind, &[1.0], 0))
        .collect();
    let mut trials = Vec::new();
    let mut outcomes = outcomes.into_iter();
    let mut per_level: Vec<[Vec<f64>; 2]> = vec![[Vec::new(), Vec::new()]; levels.len()];
    let mut failures = vec![[0usize; 2]; levels.len()];
    let mut first_err: Vec<[Option<Error>; 2]> = (0..levels.len()).map(|_| [None, None]).collect();
    for &(s, t) in &tasks {
        let outcome = outcomes.next().expect("one outcome per task");
        for (k, result) in outcome.into_iter().enumerate() {
            let mut record = TrialRecord {
                param: levels[s],
                sigma: levels[s],
                trial: t,
                kind: KINDS[k],
                value: None,
                error: None,
            };
            match result {
                Ok(v) => {
                    let normalized = v / reference[k];
                    per_level[s][k].push(normalized);
                    record.value = Some(normalized);
                }
                Err(e) => {
                    failures[s][k] += 1;
                    record.error = Some(e.to_string());
                    first_err[s][k].get_or_insert(e);
                }
            }
            trials.push(record);
        }
    }
    for (s, &sigma) in levels.iter().enumerate() {
        for (k, &kind) in KINDS.iter().enumerate() {
            if per_level[s][k].is_empty() {
                return Err(first_err[s][k].take().expect("failures recorded"));
            }
            rows.push(aggregate(sigma, sigma, kind, &per_level[s][k], failures[s][k]));
        }
    }

    let mut extra = BTreeMap::new();
    extra.insert("reference_lyapunov".into(), json!(reference[0]));
    extra.insert("reference_persistence".into(), json!(reference[1]));
    extra.insert("delta".into(), json!(setup.nb.delta));
    extra.insert("diameter".into(), json!(diameter));
    extra.insert("n_points".into(), json!(clean.len()));
    extra.insert("persistence_window".into(), json!([window.lo, window.hi]));
    extra.insert(
        "persistence_upper_bound".into(),
        json!(crate::exponents::persistence_bound(clean.len(), window.width())),
    );
    extra.insert("series_sha256".into(), json!(series_digest(series)));
    extra.insert("normalized".into(), json!(true));
    Ok(SweepResult {
        rows,
        trials,
        provenance: Provenance {
            config_hash: cfg.hash(),
            master_seed: cfg.master_seed,
            param_name: "sigma".into(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            extra,
        },
    })
}

fn series_digest(s: &Series) -> String {
    let bytes: Vec<u8> = s.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    sha256_hex(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{integrate, SystemSpec};
    use crate::exponents::{RadiusSpec, WindowSpec};
    use crate::experiments::{KantzConfig, LocalPersistenceConfig, NeighborhoodScale};
    use crate::exponents::Averaging;
    use crate::{EmbeddingParams, TimeGrid};

    fn lorenz_series(samples: usize) -> Series {
        let spec = SystemSpec::lorenz_rho(28.0).unwrap();
        let grid = TimeGrid::new(0.0, 0.02, samples).unwrap();
        let traj = integrate(&spec, &[1.0, 1.0, 20.0], &grid).unwrap();
        Series::from_component(&traj, 0).unwrap()
    }

    fn small_cfg() -> NoiseLadderConfig {
        NoiseLadderConfig {
            master_seed: 3,
            trials: 2,
            noise_levels: vec![0.05, 0.1],
            embedding: EmbeddingParams { tau: 4, dim: 3 },
            neighborhood: NeighborhoodScale::relative(0.08),
            lyapunov: KantzConfig {
                t_max: 20,
                window: FitWindow::new(0.0, 20.0).unwrap(),
                theiler: 10,
                averaging: Averaging::LogOfMean,
            },
            persistence: LocalPersistenceConfig {
                radii: RadiusSpec::EvenlyToDelta(40),
                window: WindowSpec::FractionOfDelta([0.1, 0.5]),
            },
        }
    }

    #[test]
    fn reference_row_is_exactly_one() {
        let res = run_noise_ladder(&lorenz_series(800), &small_cfg()).unwrap();
        for kind in KINDS {
            let row = res.row(0.0, 0.0, kind).unwrap();
            assert_eq!(row.mean, 1.0);
            assert_eq!(row.std, 0.0);
        }
        assert_eq!(res.rows.len(), 6);
        assert!(res.rows.iter().all(|r| r.mean.is_finite()));
    }

    #[test]
    fn zero_in_the_list_is_not_duplicated() {
        let mut cfg = small_cfg();
        cfg.noise_levels = vec![0.0, 0.05];
        let res = run_noise_ladder(&lorenz_series(800), &cfg).unwrap();
        assert_eq!(res.rows.len(), 4);
    }

    #[test]
    fn empty_noise_list_is_rejected() {
        let mut cfg = small_cfg();
        cfg.noise_levels.clear();
        assert!(matches!(
            run_noise_ladder(&lorenz_series(300), &cfg),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn flat_reference_curve_is_rejected() {
        // Every neighborhood is a single component long before the window.
        let mut cfg = small_cfg();
        cfg.neighborhood = NeighborhoodScale::relative(0.3);
        cfg.persistence.window = WindowSpec::FractionOfDelta([0.8, 1.0]);
        assert!(matches!(
            run_noise_ladder(&lorenz_series(800), &cfg),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn ladder_is_deterministic() {
        let s = lorenz_series(600);
        let a = run_noise_ladder(&s, &small_cfg()).unwrap();
        let b = run_noise_ladder(&s, &small_cfg()).unwrap();
        assert_eq!(a.to_json().to_string(), b.to_json().to_string());
    }
}
