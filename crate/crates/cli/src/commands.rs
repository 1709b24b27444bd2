//! One function per subcommand. Each returns the one-line summary.

use std::path::Path;

use pexp::dynsys::integrate;
use pexp::embedding::{local_projection_denoise, DenoiseParams};
use pexp::experiments::{
    parse_radii, run_noise_ladder, run_sweep, ExperimentConfig, LocalPersistenceConfig,
    NeighborhoodScale, NoiseLadderConfig, Radii, SweepResult,
};
use pexp::exponents::{
    check_bounds, kantz_lyapunov_with, persistence_exponent_local, persistence_exponent_pair,
    select_delta_scan, DeltaScanParams, KantzOptions, RadiusSpec, WindowSpec,
};
use pexp::io::{fmt_real, read_points_csv, read_trajectory_csv, write_betti_csv, write_json};
use pexp::ph0::barcode0;
use pexp::stats::rms;
use pexp::{
    BettiCurve, EmbeddingParams, ExponentFit, ExponentKind, Family, NeighborhoodParams, Series,
    SystemSpec, TimeGrid, Trajectory, TrajectoryPair,
};
use serde_json::json;

use crate::args::*;
use crate::input::{self, out_path, required, state_space, wants_json};
use crate::merge::{read_text, with_config};
use crate::svg::Plot;
use crate::{CliError, CliResult};

const DEFAULT_C: f64 = 0.07;
const DEFAULT_T_MAX: usize = 20;
const DEFAULT_N_RADII: usize = 100;
const DEFAULT_EPS_WINDOW_FRAC: [f64; 2] = [0.2, 0.55];

pub fn dispatch(command: Command) -> CliResult<String> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Embed(a) => embed(a),
        Command::Denoise(a) => denoise(a),
        Command::Barcode(a) => barcode(a),
        Command::BettiCurve(a) => betti_curve(a),
        Command::Lyapunov(a) => lyapunov(a),
        Command::Pexp(a) => pexp_local(a),
        Command::PexpPair(a) => pexp_pair(a),
        Command::Sweep(a) => sweep(a),
        Command::NoiseLadder(a) => noise_ladder(a),
        Command::DeltaScan(a) => delta_scan(a),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| {
        pexp::Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
        .into()
    })
}

fn write_svg(output: &Output, plot: impl FnOnce() -> Plot) -> CliResult<()> {
    if let Some(path) = &output.svg {
        plot().write(path)?;
    }
    Ok(())
}

fn rows_csv<'a>(header: &str, rows: impl IntoIterator<Item = &'a [f64]>) -> String {
    let mut text = format!("{header}\n");
    for row in rows {
        let fields: Vec<String> = row.iter().map(|v| fmt_real(*v)).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    text
}

fn simulate(args: SimulateArgs) -> CliResult<String> {
    let config = args.config.clone();
    let args = with_config(args, config.as_deref())?;
    let out = out_path(&args.output)?;
    let family = args.system.unwrap_or(Family::Lorenz);
    let mut spec = match family {
        Family::Lorenz => SystemSpec::lorenz(10.0, 8.0 / 3.0, 28.0)?,
        Family::Rossler => SystemSpec::rossler(0.2, 0.2, 5.7)?,
    };
    let given = [
        ("rho", args.rho),
        ("sigma", args.sigma),
        ("beta", args.beta),
        ("a", args.a),
        ("b", args.b),
        ("c", args.c),
    ];
    for (name, value) in given {
        if let Some(v) = value {
            if !family.param_names().contains(&name) {
                return Err(CliError::usage(format!(
                    "--{name} does not apply to the {family} system"
                )));
            }
            spec = spec.with_param(name, v)?;
        }
    }
    let dt = args.dt.unwrap_or(0.01);
    let grid = match args.samples {
        Some(n) => TimeGrid::new(0.0, dt, n)?,
        None => TimeGrid::until(args.t.unwrap_or(20.0), dt)?,
    };
    let x0 = args.x0.clone().unwrap_or_else(|| vec![1.0, 1.0, 1.0]);
    let transient = args.transient.unwrap_or(0);
    let full = integrate(&spec, &x0, &TimeGrid::new(0.0, dt, grid.count + transient)?)?;
    let kept: Vec<usize> = (transient..full.len()).collect();
    let traj = Trajectory::new(full.points().select(&kept), grid)?;

    if wants_json(out) {
        let points: Vec<&[f64]> = traj.points().rows().collect();
        write_json(
            &json!({ "system": spec, "grid": grid, "x0": x0, "points": points }),
            out,
        )?;
    } else {
        pexp::io::write_trajectory_csv(&traj, out)?;
    }
    write_svg(&args.output, || {
        let mut plot = Plot::new(format!("{family} trajectory"), "t", "state");
        for d in 0..traj.dim() {
            let points = (0..traj.len()).map(|n| (grid.time(n), traj.point(n)[d]));
            plot = plot.line(format!("x{}", d + 1), points);
        }
        plot
    })?;
    let params: Vec<String> = spec
        .params
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    Ok(format!(
        "{family} ({}): {} samples at dt = {dt} written to {}",
        params.join(", "),
        traj.len(),
        out.display()
    ))
}

fn phase_plot(title: &str, x: &Trajectory) -> Plot {
    if x.dim() >= 2 {
        Plot::new(title, "x1", "x2").line("orbit", x.points().rows().map(|p| (p[0], p[1])))
    } else {
        Plot::new(title, "index", "x1").line(
            "orbit",
            x.points().rows().enumerate().map(|(i, p)| (i as f64, p[0])),
        )
    }
}

fn embed(args: EmbedArgs) -> CliResult<String> {
    let config = args.config.clone();
    let args = with_config(args, config.as_deref())?;
    let out = out_path(&args.output)?;
    let s = input::load_series(required(&args.input.input, "--in")?, args.input.column)?;
    let (x, report) = input::embed(&s, &args.input)?;
    if wants_json(out) {
        let points: Vec<&[f64]> = x.points().rows().collect();
        write_json(&json!({ "embedding": report, "points": points }), out)?;
    } else {
        pexp::io::write_trajectory_csv(&x, out)?;
    }
    write_svg(&args.output, || phase_plot("delay embedding", &x))?;
    Ok(format!(
        "embedded {} samples with {}: {} points written to {}",
        s.len(),
        report.describe(),
        x.len(),
        out.display()
    ))
}

fn denoise(args: DenoiseArgs) -> CliResult<String> {
    let config = args.config.clone();
    let args = with_config(args, config.as_deref())?;
    let out = out_path(&args.output)?;
    let s = input::load_series(required(&args.input, "--in")?, args.column)?;
    let defaults = DenoiseParams::default();
    let params = DenoiseParams {
        embed_dim: args.embed_dim.unwrap_or(defaults.embed_dim),
        radius: args.radius,
        projection_dim: args.projection_dim.unwrap_or(defaults.projection_dim),
        iterations: args.iterations.unwrap_or(defaults.iterations),
    };
    let clean = local_projection_denoise(&s, &params)?;
    if wants_json(out) {
        write_json(
            &json!({ "params": params, "label": clean.label(), "values": clean.values() }),
            out,
        )?;
    } else {
        pexp::io::write_series_csv(&clean, out)?;
    }
    write_svg(&args.output, || {
        let indexed = |v: &[f64]| {
            v.iter()
                .enumerate()
                .map(|(i, y)| (i as f64, *y))
                .collect::<Vec<_>>()
        };
        Plot::new("local projection noise reduction", "index", s.label())
            .line("input", indexed(s.values()))
            .line("denoised", indexed(clean.values()))
    })?;
    let change: Vec<f64> = s
        .values()
        .iter()
        .zip(clean.values())
        .map(|(a, b)| a - b)
        .collect();
    Ok(format!(
        "denoised {} samples (M = {}, q = {}, {} pass(es)), rms correction {:.4e}, written to {}",
        s.len(),
        params.embed_dim,
        params.projection_dim,
        params.iterations,
        rms(&change),
        out.display()
    ))
}

fn step_plot(title: &str, curve: &BettiCurve) -> Plot {
    let mut points = Vec::with_capacity(2 * curve.len());
    for (k, (&r, &c)) in curve.radii().iter().zip(curve.counts()).enumerate() {
        if k > 0 {
            points.push((r, curve.counts()[k - 1] as f64));
        }
        points.push((r, c as f64));
    }
    Plot::new(title, "epsilon", "beta0").line("beta0", points)
}

fn barcode(args: BarcodeArgs) -> CliResult<String> {
    let config = args.config.clone();
    let args = with_config(args, config.as_deref())?;
    let out = out_path(&args.output)?;
    let cloud = read_points_csv(required(&args.input, "--in")?)?;
    let bc = barcode0(&cloud)?;
    let death = |d: f64| if d.is_finite() { json!(d) } else { json!(null) };
    if wants_json(out) {
        let bars: Vec<_> = bc
            .bars()
            .iter()
            .map(|b| json!([b.birth, death(b.death)]))
            .collect();
        write_json(&json!({ "n_points": bc.n_points(), "bars": bars }), out)?;
    } else {
        let mut text = String::from("birth,death\n");
        for b in bc.bars() {
            let d = if b.death.is_finite() {
                fmt_real(b.death)
            } else {
                "inf".into()
            };
            text.push_str(&format!("{},{d}\n", fmt_real(b.birth)));
        }
        write_text(out, &text)?;
    }
    write_svg(&args.output, || {
        step_plot("dimension-zero persistence", &BettiCurve::exact(&bc))
    })?;
    let last = bc.finite_deaths().fold(0.0f64, f64::max);
    Ok(format!(
        "{} points, {} bars, last merge at epsilon = {last}, written to {}",
        bc.n_points(),
        bc.bars().len(),
        out.display()
    ))
}

fn betti_curve(args: BettiCurveArgs) -> CliResult<String> {
    let config = args.config.clone();
    let args = with_config(args, config.as_deref())?;
    let out = out_path(&args.output)?;
    let cloud = read_points_csv(required(&args.input, "--in")?)?;
    let radii_text = args
        .radii
        .as_deref()
        .ok_or_else(|| CliError::usage("--radii is required (as a flag or in --config)"))?;
    let radii = parse_radii(radii_text)?;
    let curve = pexp::ph0::betti_curve(&cloud, &radii)?;
    if wants_json(out) {
        write_json(
            &json!({ "epsilon": curve.radii(), "betti0": curve.counts() }),
            out,
        )?;
    } else {
        write_betti_csv(&curve, out)?;
    }
    write_svg(&args.output, || step_plot("Betti curve", &curve))?;
    let counts = curve.counts();
    Ok(format!(
        "{} radii on [{}, {}]: beta0 from {} to {}, written to {}",
        radii.len(),
        radii[0],
        radii[radii.len() - 1],
        counts[0],
        counts[counts.len() - 1],
        out.display()
    ))
}

fn neighborhood(nb: &Neighborhood, x: &Trajectory) -> CliResult<NeighborhoodParams> {
    let scale = NeighborhoodScale {
        delta: nb.delta,
        c: if nb.delta.is_none() {
            Some(nb.c.unwrap_or(DEFAULT_C))
        } else {
            None
        },
        min_neighbors: nb.min_neighbors.unwrap_or(1),
    };
    Ok(scale.resolve(|| x.points().diameter())?)
}

fn kantz_settings(k: &Kantz) -> CliResult<(usize, pexp::FitWindow, KantzOptions)> {
    let t_max = k.t_max.unwrap_or(DEFAULT_T_MAX);
    let window = match &k.window {
        Some(w) => input::window(w, "--window")?,
        None => pexp::FitWindow::new(0.0, t_max as f64)?,
    };
    let opts = KantzOptions {
        theiler: k.theiler.unwrap_or(0),
        averaging: input::averaging(k.averaging.as_deref())?,
    };
    Ok((t_max, window, opts))
}

fn fit_plot(title: &str, x_label: &str, y_label: &str, fit: &ExponentFit) -> Plot {
    let line = |x: f64| fit.intercept + fit.value * x;
    Plot::new(title, x_label, y_label)
        .line(
            "curve",
            fit.abscissa
                .iter()
                .copied()
                .zip(fit.ordinate.iter().copied()),
        )
        .line(
            format!("slope {:.4}", fit.value),
            [
                (fit.window.lo, line(fit.window.lo)),
                (fit.window.hi, line(fit.window.hi)),
            ],
        )
}

fn write_fit(fit: &ExponentFit, header: &str, out: &Path) -> CliResult<()> {
    if wants_json(out) {
        write_json(fit, out)?;
    } else {
        let rows: Vec<[f64; 2]> = fit
            .abscissa
            .iter()
            .zip(&fit.ordinate)
            .map(|(a, o)| [*a, *o])
            .collect();
        write_text(out, &rows_csv(header, rows.iter().map(|r| &r[..])))?;
    }
    Ok(())
}

fn embedding_note(report: &Option<input::EmbeddingReport>) -> String {
    report
        .as_ref()
        .map(|r| format!(", {}", r.describe()))
        .unwrap_or_default()
}

fn lyapunov(args: LyapunovArgs) -> CliResult<String> {
    let config = args.config.clone();
    let args = with_config(args, config.as_deref())?;
    let out = out_path(&args.output)?;
    let (x, report) = state_space(&args.input)?;
    let nb = neighborhood(&args.neighborhood, &x)?;
    let (t_max, window, opts) = kantz_settings(&args.kantz)?;
    let mut fit = kantz_lyapunov_with(&x, &nb, t_max, window, &opts)?;
    let dt = x.grid().dt;
    fit.metadata.insert("delta".into(), json!(nb.delta));
    fit.metadata.insert("dt".into(), json!(dt));
    fit.metadata
        .insert("per_time_unit".into(), json!(fit.value / dt));
    if let Some(r) = &report {
        fit.metadata.insert("embedding".into(), json!(r));
    }
    write_fit(&fit, "step,log_divergence", out)?;
    write_svg(&args.output, || {
        fit_plot("Kantz divergence", "steps", "log divergence", &fit)
    })?;
    let rate = if dt == 1.0 {
        String::new()
    } else {
        format!(" ({:.6} per time unit)", fit.value / dt)
    };
    Ok(format!(
        "lambda = {:.6} per step{rate}, R^2 = {:.3}, delta = {:.4e}{}, written to {}",
        fit.value,
        fit.r_squared,
        nb.delta,
        embedding_note(&report),
        out.display()
    ))
}

fn local_radii(r: &LocalRadii) -> CliResult<(RadiusSpec, WindowSpec)> {
    let radii = match (&r.radii, r.n_radii) {
        (Some(text), _) => RadiusSpec::Absolute(parse_radii(text)?),
        (None, n) => RadiusSpec::EvenlyToDelta(n.unwrap_or(DEFAULT_N_RADII)),
    };
    let window = match (&r.eps_window, &r.eps_window_frac) {
        (Some(w), _) => WindowSpec::Absolute(input::window(w, "--eps-window")?),
        (None, Some(f)) => {
            let w = input::window(f, "--eps-window-frac")?;
            WindowSpec::FractionOfDelta([w.lo, w.hi])
        }
        (None, None) => WindowSpec::FractionOfDelta(DEFAULT_EPS_WINDOW_FRAC),
    };
    Ok((radii, window))
}

/// Fails with a bound violation after the fit has been written, so the
/// offending curve can be inspected.
fn enforce_bound(fit: &ExponentFit, n_points: usize) -> CliResult<()> {
    let check = check_bounds(fit, n_points);
    if check.within {
        Ok(())
    } else {
        Err(pexp::Error::BoundViolation(check.diagnostic.unwrap_or_default()).into())
    }
}

fn pexp_local(args: PexpArgs) -> CliResult<String> {
    let config = args.config.clone();
    let args = with_config(args, config.as_deref())?;
    let out = out_path(&args.output)?;
    let (x, report) = state_space(&args.input)?;
    let nb = neighborhood(&args.neighborhood, &x)?;
    let (radii, window) = local_radii(&args.radii)?;
    let (radii, window) = (radii.resolve(nb.delta)?, window.resolve(nb.delta)?);
    let mut fit = persistence_exponent_local(x.points(), &nb, &radii, window)?;
    fit.metadata.insert("delta".into(), json!(nb.delta));
    if let Some(r) = &report {
        fit.metadata.insert("embedding".into(), json!(r));
    }
    write_fit(&fit, "epsilon,neg_log_betti", out)?;
    write_svg(&args.output, || {
        fit_plot(
            "local persistence",
            "epsilon",
            "-log normalized beta0",
            &fit,
        )
    })?;
    enforce_bound(&fit, x.len())?;
    Ok(format!(
        "beta_exp = {:.6} (bound {:.6}), R^2 = {:.3}, delta = {:.4e}, {} points{}, written to {}",
        fit.value,
        fit.upper_bound.unwrap_or(f64::NAN),
        fit.r_squared,
        nb.delta,
        x.len(),
        embedding_note(&report),
        out.display()
    ))
}

fn experiment_config(config: Option<&Path>, preset: Option<Family>) -> CliResult<ExperimentConfig> {
    match config {
        Some(path) => Ok(ExperimentConfig::from_toml_str(&read_text(path)?)?),
        None => Ok(match preset.unwrap_or(Family::Lorenz) {
            Family::Lorenz => ExperimentConfig::lorenz_desk(),
            Family::Rossler => ExperimentConfig::rossler_desk(),
        }),
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, o: &SweepOverrides) -> CliResult<()> {
    if let Some(t) = o.trials {
        cfg.trials = t;
    }
    if let Some(s) = o.seed {
        cfg.master_seed = s;
    }
    if let Some(n) = &o.noise {
        cfg.noise_levels = n.clone();
    }
    if let Some(v) = &o.values {
        cfg.sweep.values = v.clone();
    }
    if let Some(n) = o.samples {
        cfg.simulation.samples = n;
    }
    if let Some(r) = &o.radii {
        cfg.persistence.radii = Radii::Range(r.clone());
    }
    if let Some(w) = &o.eps_window {
        cfg.persistence.window = input::window(w, "--eps-window")?;
    }
    Ok(())
}

/// `--out`, or `<output_dir>/<name>.json` from the config.
fn sweep_out(output: &Output, cfg: &ExperimentConfig, name: &str) -> CliResult<std::path::PathBuf> {
    match (&output.out, &cfg.output_dir) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(dir)) => {
            std::fs::create_dir_all(dir).map_err(pexp::Error::from)?;
            Ok(dir.join(format!("{name}.json")))
        }
        (None, None) => Err(CliError::usage(
            "--out is required (or output_dir in the config)",
        )),
    }
}

fn write_sweep(res: &SweepResult, out: &Path) -> CliResult<()> {
    if wants_json(out) {
        res.write_json(out)?;
    } else {
        write_text(out, &res.to_csv_string())?;
    }
    Ok(())
}

fn sweep_plot(res: &SweepResult, title: &str, y_label: &str) -> Plot {
    let mut plot = Plot::new(title, res.provenance.param_name.as_str(), y_label);
    let mut keys: Vec<(ExponentKind, u64)> = res
        .rows
        .iter()
        .map(|r| (r.kind, r.sigma.to_bits()))
        .collect();
    keys.sort();
    keys.dedup();
    for (kind, sigma) in keys {
        let sigma = f64::from_bits(sigma);
        let points = res
            .rows
            .iter()
            .filter(|r| r.kind == kind && r.sigma == sigma)
            .map(|r| (r.param, r.mean));
        plot = plot.line(format!("{kind}, sigma = {sigma}"), points);
    }
    plot
}

fn sweep_summary(res: &SweepResult, out: &Path) -> String {
    let failed: usize = res.rows.iter().map(|r| r.n_failed).sum();
    format!(
        "{} rows over {} = {} values, {} failed trial(s), config {}, written to {}",
        res.rows.len(),
        res.provenance.param_name,
        res.rows
            .iter()
            .map(|r| r.param.to_bits())
            .collect::<std::collections::BTreeSet<_>>()
            .len(),
        failed,
        &res.provenance.config_hash[..12.min(res.provenance.config_hash.len())],
        out.display()
    )
}

fn pexp_pair(args: PexpPairArgs) -> CliResult<String> {
    if let (Some(xp), Some(yp)) = (&args.x, &args.y) {
        return single_pair(&args, xp, yp);
    }
    let mut cfg = experiment_config(args.config.as_deref(), args.preset)?;
    apply_overrides(&mut cfg, &args.overrides)?;
    cfg.kinds = vec![ExponentKind::PersistencePair];
    let out = sweep_out(&args.output, &cfg, "pexp_pair")?;
    let res = run_sweep(&cfg)?;
    write_sweep(&res, &out)?;
    write_svg(&args.output, || {
        sweep_plot(&res, "pair persistence exponent", "beta_exp")
    })?;
    Ok(sweep_summary(&res, &out))
}

fn single_pair(args: &PexpPairArgs, xp: &Path, yp: &Path) -> CliResult<String> {
    let out = out_path(&args.output)?;
    let pair = TrajectoryPair::new(read_trajectory_csv(xp)?, read_trajectory_csv(yp)?)?;
    let o = &args.overrides;
    let radii = parse_radii(o.radii.as_deref().unwrap_or("0:0.05:4"))?;
    let window = match &o.eps_window {
        Some(w) => input::window(w, "--eps-window")?,
        None => pexp::FitWindow::new(0.0, 2.0)?,
    };
    let fit = persistence_exponent_pair(&pair, &radii, window)?;
    write_fit(&fit, "epsilon,neg_log_betti", out)?;
    write_svg(&args.output, || {
        fit_plot("pair persistence", "epsilon", "-log normalized beta0", &fit)
    })?;
    let n = 2 * pair.x.len();
    enforce_bound(&fit, n)?;
    Ok(format!(
        "beta_exp = {:.6} (bound {:.6}), R^2 = {:.3}, {n} points, written to {}",
        fit.value,
        fit.upper_bound.unwrap_or(f64::NAN),
        fit.r_squared,
        out.display()
    ))
}

fn sweep(args: SweepArgs) -> CliResult<String> {
    let mut cfg = experiment_config(args.config.as_deref(), args.preset)?;
    apply_overrides(&mut cfg, &args.overrides)?;
    if let Some(k) = &args.kinds {
        cfg.kinds = k.clone();
    }
    let out = sweep_out(&args.output, &cfg, "sweep")?;
    let res = run_sweep(&cfg)?;
    write_sweep(&res, &out)?;
    write_svg(&args.output, || {
        sweep_plot(&res, "exponent sweep", "mean exponent")
    })?;
    Ok(sweep_summary(&res, &out))
}

fn noise_ladder(args: NoiseLadderArgs) -> CliResult<String> {
    let out = out_path(&args.output)?;
    let s: Series = input::load_series(required(&args.input.input, "--in")?, args.input.column)?;
    let (mut cfg, from_file) = match &args.config {
        Some(path) => (NoiseLadderConfig::from_toml_str(&read_text(path)?)?, true),
        None => (NoiseLadderConfig::single_series_defaults(), false),
    };
    let mut note = String::new();
    let in_ = &args.input;
    if !from_file || in_.tau.is_some() || in_.dim.is_some() {
        // Without a config file the defaults' embedding is not tuned to the
        // series, so missing parameters are selected from the data.
        let mut wanted = in_.clone();
        if from_file {
            wanted.tau = wanted.tau.or(Some(cfg.embedding.tau));
            wanted.dim = wanted.dim.or(Some(cfg.embedding.dim));
        }
        let (_, report) = input::embed(&s, &wanted)?;
        cfg.embedding = EmbeddingParams::new(report.tau, report.dim)?;
        note = format!(", {}", report.describe());
    }
    if !from_file {
        let (radii, window) = local_radii(&LocalRadii::default())?;
        cfg.persistence = LocalPersistenceConfig { radii, window };
        cfg.lyapunov.t_max = DEFAULT_T_MAX;
        cfg.lyapunov.window = pexp::FitWindow::new(0.0, DEFAULT_T_MAX as f64)?;
    }
    let k = &args.kantz;
    let lyap = &mut cfg.lyapunov;
    if let Some(t) = k.t_max {
        lyap.t_max = t;
        lyap.window = pexp::FitWindow::new(0.0, t as f64)?;
    }
    if let Some(w) = &k.window {
        lyap.window = input::window(w, "--window")?;
    }
    if let Some(t) = k.theiler {
        lyap.theiler = t;
    }
    if k.averaging.is_some() {
        lyap.averaging = input::averaging(k.averaging.as_deref())?;
    }
    let r = &args.radii;
    if r.radii.is_some() || r.n_radii.is_some() {
        cfg.persistence.radii = local_radii(r)?.0;
    }
    if r.eps_window.is_some() || r.eps_window_frac.is_some() {
        cfg.persistence.window = local_radii(r)?.1;
    }
    let nb = &args.neighborhood;
    if nb.delta.is_some() || nb.c.is_some() {
        cfg.neighborhood.delta = nb.delta;
        cfg.neighborhood.c = nb.c;
    }
    if let Some(m) = nb.min_neighbors {
        cfg.neighborhood.min_neighbors = m;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(n) = &args.noise {
        cfg.noise_levels = n.clone();
    }
    let res = run_noise_ladder(&s, &cfg)?;
    write_sweep(&res, out)?;
    write_svg(&args.output, || {
        let mut plot = Plot::new("noise ladder", "sigma", "normalized exponent");
        for kind in [ExponentKind::Lyapunov, ExponentKind::PersistenceLocal] {
            plot = plot.line(kind.as_str(), res.rows_of(kind).map(|r| (r.sigma, r.mean)));
        }
        plot
    })?;
    let extra = &res.provenance.extra;
    Ok(format!(
        "{} noise levels x {} trials: reference lambda = {:.6}, beta_exp = {:.6} (bound {:.6}){note}, written to {}",
        cfg.noise_levels.iter().filter(|&&s| s != 0.0).count(),
        cfg.trials,
        extra["reference_lyapunov"].as_f64().unwrap_or(f64::NAN),
        extra["reference_persistence"].as_f64().unwrap_or(f64::NAN),
        extra["persistence_upper_bound"].as_f64().unwrap_or(f64::NAN),
        out.display()
    ))
}

fn delta_scan(args: DeltaScanArgs) -> CliResult<String> {
    let config = args.config.clone();
    let args = with_config(args, config.as_deref())?;
    let out = out_path(&args.output)?;
    let (x, report) = state_space(&args.input)?;
    let (t_max, lyapunov_window, kantz) = kantz_settings(&args.kantz)?;
    let (radii, persistence_window) = local_radii(&args.radii)?;
    let params = DeltaScanParams {
        c_grid: parse_radii(args.c_grid.as_deref().unwrap_or("0.01:0.01:0.2"))?,
        stability_tol: args.tol.unwrap_or(0.1),
        min_neighbors: args.min_neighbors.unwrap_or(1),
        t_max,
        lyapunov_window,
        radii,
        persistence_window,
        kantz,
    };
    let scan = select_delta_scan(&x, &params)?;
    if wants_json(out) {
        write_json(
            &json!({ "scan": scan, "params": params, "embedding": report }),
            out,
        )?;
    } else {
        let mut text = String::from("c,delta,lyapunov,persistence,error\n");
        let opt = |v: Option<f64>| v.map(fmt_real).unwrap_or_default();
        for r in &scan.rows {
            let error = r.error.as_deref().unwrap_or("").replace(['"', ','], " ");
            text.push_str(&format!(
                "{},{},{},{},{error}\n",
                fmt_real(r.c),
                fmt_real(r.delta),
                opt(r.lyapunov),
                opt(r.persistence)
            ));
        }
        write_text(out, &text)?;
    }
    write_svg(&args.output, || {
        let series = |f: fn(&pexp::exponents::DeltaScanRow) -> Option<f64>| {
            scan.rows
                .iter()
                .map(move |r| (r.c, f(r).unwrap_or(f64::NAN)))
        };
        Plot::new("delta scan", "c", "exponent")
            .line("lyapunov", series(|r| r.lyapunov))
            .line("persistence_local", series(|r| r.persistence))
    })?;
    let range = match scan.stable_range {
        Some([lo, hi]) => format!("stable on c in [{lo}, {hi}]"),
        None => "no stable run (flagged)".into(),
    };
    Ok(format!(
        "{range}, chose c = {} (delta = {:.4e}){}, written to {}",
        scan.c_chosen,
        scan.delta,
        embedding_note(&report),
        out.display()
    ))
}
