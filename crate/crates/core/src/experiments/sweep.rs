use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::json;

use super::{aggregate, ExperimentConfig, Provenance, SweepResult, TrialRecord};
use crate::dynsys::{neighboring_pair, perturb_trajectory};
use crate::exponents::{check_bounds_with_slack, kantz_lyapunov_with, persistence_exponent_pair};
use crate::rng::derive_seed;
use crate::{Error, ExponentKind, Result, TimeGrid, TrajectoryPair};

/// Round-off allowance when checking fitted exponents against their bounds.
const BOUND_SLACK: f64 = 1e-9;

/// Stream tags keep pair generation and noise draws apart.
const PAIR_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

type Cell = Vec<(ExponentKind, Result<f64>)>;

/// Runs a parameter sweep.
///
/// Each `(parameter value, trial)` generates one neighboring pair, shared by
/// every noise level, so differences between noise levels are not masked by
/// different initial conditions. Each noise level then perturbs both members
/// independently. The Lyapunov exponent is estimated with Kantz's algorithm
/// on the (perturbed) first trajectory and reported per time unit; the
/// persistence exponent uses the union of both.
///
/// Failed trials are excluded from the means and counted in `n_failed`. A
/// persistence exponent outside its theoretical bounds aborts the run.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let sim = &cfg.simulation;
    let grid = TimeGrid::new(0.0, sim.dt, sim.samples)?;
    let radii = cfg.persistence.radii.resolve()?;
    let tasks: Vec<(usize, usize)> = (0..cfg.sweep.values.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();

    let outcomes: Vec<Vec<Cell>> = tasks
        .par_iter()
        .map(|&(p, t)| run_trial(cfg, &grid, &radii, p, t))
        .collect::<Result<Vec<_>>>()?;

    let mut by_task: BTreeMap<(usize, usize), Vec<Cell>> =
        tasks.iter().copied().zip(outcomes).collect();
    let mut rows = Vec::new();
    let mut trials = Vec::new();
    for (p, &value) in cfg.sweep.values.iter().enumerate() {
        for (s, &sigma) in cfg.noise_levels.iter().enumerate() {
            for (k, &kind) in cfg.kinds.iter().enumerate() {
                let mut ok = Vec::new();
                let mut first_err = None;
                let mut failed = 0;
                for t in 0..cfg.trials {
                    let cells = by_task.get_mut(&(p, t)).expect("every task ran");
                    let outcome = std::mem::replace(&mut cells[s][k].1, Ok(f64::NAN));
                    let mut record = TrialRecord {
                        param: value,
                        sigma,
                        trial: t,
                        kind,
                        value: None,
                        error: None,
                    };
                    match outcome {
                        Ok(v) => {
                            ok.push(v);
                            record.value = Some(v);
                        }
                        Err(e) => {
                            failed += 1;
                            record.error = Some(e.to_string());
                            first_err.get_or_insert(e);
                        }
                    }
                    trials.push(record);
                }
                if ok.is_empty() {
                    return Err(first_err.expect("at least one trial"));
                }
                rows.push(aggregate(value, sigma, kind, &ok, failed));
            }
        }
    }

    let mut extra = BTreeMap::new();
    extra.insert("family".into(), json!(cfg.system.family));
    extra.insert("samples_per_trajectory".into(), json!(sim.samples));
    extra.insert("dt".into(), json!(sim.dt));
    extra.insert("lyapunov_units".into(), json!("per_time_unit"));
    if cfg.kinds.contains(&ExponentKind::PersistencePair) {
        let n = 2 * sim.samples;
        extra.insert(
            "persistence_upper_bound".into(),
            json!(crate::exponents::persistence_bound(n, cfg.persistence.window.width())),
        );
    }
    Ok(SweepResult {
        rows,
        trials,
        provenance: Provenance {
            config_hash: cfg.hash(),
            master_seed: cfg.master_seed,
            param_name: cfg.sweep.name.clone(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            extra,
        },
    })
}

/// All noise levels and exponent kinds for one `(param, trial)`. The outer
/// error is reserved for bound violations, which abort the sweep.
fn run_trial(
    cfg: &ExperimentConfig,
    grid: &TimeGrid,
    radii: &[f64],
    p: usize,
    t: usize,
) -> Result<Vec<Cell>> {
    let seed = cfg.master_seed;
    let pair = cfg
        .system
        .with_param(&cfg.sweep.name, cfg.sweep.values[p])
        .and_then(|spec| {
            neighboring_pair(
                &spec,
                &cfg.simulation.base_x0,
                cfg.simulation.ic_jitter,
                cfg.simulation.separation,
                grid,
                derive_seed(seed, &[PAIR_STREAM, p as u64, t as u64]),
            )
        });
    let pair = match pair {
        Ok(pair) => pair,
        Err(e) => {
            let cell: Cell = cfg.kinds.iter().map(|&k| (k, Err(e.clone()))).collect();
            return Ok(vec![cell; cfg.noise_levels.len()]);
        }
    };

    let nb = cfg
        .lyapunov
        .neighborhood()
        .resolve(|| pair.x.points().diameter());
    let kantz = cfg.lyapunov.kantz();
    let mut cells = Vec::with_capacity(cfg.noise_levels.len());
    for (s, &sigma) in cfg.noise_levels.iter().enumerate() {
        let noise_seed =
            |member: u64| derive_seed(seed, &[NOISE_STREAM, p as u64, s as u64, t as u64, member]);
        let noisy = perturb_trajectory(&pair.x, sigma, noise_seed(0)).and_then(|x| {
            let y = perturb_trajectory(&pair.y, sigma, noise_seed(1))?;
            TrajectoryPair::new(x, y)
        });
        let mut cell = Vec::with_capacity(cfg.kinds.len());
        for &kind in &cfg.kinds {
            let value = match (&noisy, kind) {
                (Err(e), _) => Err(e.clone()),
                (Ok(z), ExponentKind::PersistencePair) => {
                    pair_exponent(z, radii, cfg, p, sigma, t)?
                }
                (Ok(z), ExponentKind::Lyapunov) => match &nb {
                    Ok(nb) => kantz_lyapunov_with(&z.x, nb, kantz.t_max, kantz.window, &kantz.options())
                        .map(|fit| fit.value / z.x.grid().dt),
                    Err(e) => Err(e.clone()),
                },
                (Ok(_), ExponentKind::PersistenceLocal) => {
                    unreachable!("rejected by validation")
                }
            };
            cell.push((kind, value));
        }
        cells.push(cell);
    }
    Ok(cells)
}

fn pair_exponent(
    z: &TrajectoryPair,
    radii: &[f64],
    cfg: &ExperimentConfig,
    p: usize,
    sigma: f64,
    t: usize,
) -> Result<Result<f64>> {
    let fit = match persistence_exponent_pair(z, radii, cfg.persistence.window) {
        Ok(fit) => fit,
        Err(e) => return Ok(Err(e)),
    };
    let n = 2 * z.x.len();
    let check = check_bounds_with_slack(&fit, n, BOUND_SLACK);
    if !check.within {
        return Err(Error::BoundViolation(format!(
            "{} = {} at sigma = {sigma}, trial {t}: {}",
            cfg.sweep.name,
            cfg.sweep.values[p],
            check.diagnostic.unwrap_or_default()
        )));
    }
    Ok(Ok(fit.value))
}
