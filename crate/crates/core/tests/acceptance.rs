//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p pexp --test acceptance --release`.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use pexp::dynsys::{integrate, SystemSpec};
use pexp::embedding::{
    local_projection_denoise, select_delay_ami, select_dim_fnn, sliding_window_embed, AmiParams,
    DenoiseParams,
};
use pexp::experiments::{run_noise_ladder, run_sweep, ExperimentConfig, NeighborhoodScale, NoiseLadderConfig, SweepResult};
use pexp::exponents::{
    kantz_lyapunov, persistence_bound, persistence_exponent_local, select_delta_scan,
    DeltaScanParams, KantzOptions, RadiusSpec, WindowSpec,
};
use pexp::ph0::{barcode0, distortion_identity, interleaving_distance};
use pexp::rng::stream;
use pexp::{
    BettiCurve, EmbeddingParams, ExponentKind, FitWindow, NeighborhoodParams, PointCloud, Series,
    TimeGrid, Trajectory,
};
use rand::Rng;

type Outcome = Result<String, String>;

/// Every β_exp value produced by the suite, with the bound it must respect.
static FITS: Mutex<Vec<(String, f64, f64)>> = Mutex::new(Vec::new());

fn record_fit(context: impl Into<String>, value: f64, bound: f64) {
    FITS.lock().unwrap().push((context.into(), value, bound));
}

fn record_sweep(label: &str, res: &SweepResult) {
    let bound = res.provenance.extra["persistence_upper_bound"].as_f64().unwrap();
    for t in &res.trials {
        if let (ExponentKind::PersistencePair, Some(v)) = (t.kind, t.value) {
            record_fit(format!("{label} param {} sigma {} trial {}", t.param, t.sigma, t.trial), v, bound);
        }
    }
}

fn record_ladder(label: &str, res: &SweepResult) {
    let extra = &res.provenance.extra;
    let bound = extra["persistence_upper_bound"].as_f64().unwrap();
    let reference = extra["reference_persistence"].as_f64().unwrap();
    record_fit(format!("{label} reference"), reference, bound);
    for t in &res.trials {
        if let (ExponentKind::PersistenceLocal, Some(v)) = (t.kind, t.value) {
            record_fit(format!("{label} sigma {} trial {}", t.sigma, t.trial), v * reference, bound);
        }
    }
}

fn within_time(detail: String, start: Instant, limit: Duration) -> Outcome {
    let took = start.elapsed();
    if took > limit {
        Err(format!("{detail}; took {took:.1?}, limit {limit:?}"))
    } else {
        Ok(format!("{detail}; {took:.1?}"))
    }
}

fn random_cloud(rng: &mut impl Rng, n: usize, dim: usize) -> PointCloud {
    let coords = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    PointCloud::new(dim, coords).unwrap()
}

fn lorenz_x(samples: usize, dt: f64) -> Series {
    let spec = SystemSpec::lorenz_rho(28.0).unwrap();
    let burn = 500;
    let traj = integrate(&spec, &[1.0, 1.0, 20.0], &TimeGrid::new(0.0, dt, samples + burn).unwrap()).unwrap();
    Series::new(traj.component(0)[burn..].to_vec()).unwrap()
}

fn bound_reproduction() -> Outcome {
    let start = Instant::now();
    let lorenz = persistence_bound(2 * 2000, 6.0);
    let local = persistence_bound(1510, 8.7);
    let lorenz_exact = 4000f64.ln() / 6.0;
    let local_exact = 1510f64.ln() / 8.7;
    if (lorenz - lorenz_exact).abs() > 1e-6 || (local - local_exact).abs() > 1e-6 {
        return Err(format!("got {lorenz} and {local}"));
    }
    // The printed values are "≈ 1.38" and "≈ 0.842".
    if (lorenz - 1.38).abs() > 5e-3 || (local - 0.842).abs() > 1e-3 {
        return Err(format!("{lorenz} or {local} far from the printed values"));
    }
    within_time(format!("ln(4000)/6 = {lorenz:.6}, ln(1510)/8.7 = {local:.6}"), start, Duration::from_secs(1))
}

fn stability_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = stream(7, &[1]);
    let mut worst_margin = f64::INFINITY;
    for trial in 0..500 {
        let n = rng.random_range(2..=60);
        let dim = rng.random_range(1..=3);
        let z = random_cloud(&mut rng, n, dim);
        let eta = rng.random_range(0.0..=0.2) * z.diameter();
        let moved = z
            .map_points(|p, out| {
                let dir: Vec<f64> = (0..p.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-300);
                let r = eta * rng.random_range(0.0..=1.0);
                for ((o, x), d) in out.iter_mut().zip(p).zip(&dir) {
                    *o = x + r * d / norm;
                }
            })
            .unwrap();
        let f = BettiCurve::exact(&barcode0(&z).unwrap());
        let g = BettiCurve::exact(&barcode0(&moved).unwrap());
        let d_i = interleaving_distance(&f, &g).unwrap();
        let dis = distortion_identity(&z, &moved).unwrap().distortion;
        if !(d_i <= dis) {
            return Err(format!("trial {trial}: d_I = {d_i} > distortion {dis}"));
        }
        worst_margin = worst_margin.min(dis - d_i);
    }
    within_time(format!("500 pairs, 0 violations, min slack {worst_margin:.3e}"), start, Duration::from_secs(30))
}

fn bfs_components(z: &PointCloud, eps: f64) -> usize {
    let n = z.len();
    let mut seen = vec![false; n];
    let mut components = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        components += 1;
        seen[s] = true;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if !seen[j] {
                    let d: f64 = z.point(i).iter().zip(z.point(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    if d <= 2.0 * eps {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    components
}

fn betti_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = stream(7, &[2]);
    let mut checked = 0;
    for cloud in 0..100 {
        let n = rng.random_range(1..=60);
        let dim = rng.random_range(1..=4);
        let z = random_cloud(&mut rng, n, dim);
        let bc = barcode0(&z).unwrap();
        // Half the radii sit exactly on merge radii to exercise ties.
        let deaths: Vec<f64> = bc.finite_deaths().collect();
        let mut radii: Vec<f64> = (0..50)
            .map(|k| {
                if k % 2 == 0 && !deaths.is_empty() {
                    deaths[rng.random_range(0..deaths.len())]
                } else {
                    rng.random_range(0.0..=z.diameter().max(1e-9))
                }
            })
            .collect();
        radii.sort_by(f64::total_cmp);
        for &eps in &radii {
            let fast = pexp::ph0::betti_at(&bc, eps);
            let slow = bfs_components(&z, eps);
            if fast != slow {
                return Err(format!("cloud {cloud}, eps {eps}: union-find {fast}, BFS {slow}"));
            }
            checked += 1;
        }
    }
    within_time(format!("{checked} (cloud, radius) pairs agree"), start, Duration::from_secs(30))
}

fn lyapunov_recovery() -> Outcome {
    let start = Instant::now();
    let lambda0 = 0.05;
    let coords: Vec<f64> = (0..300).map(|i| (lambda0 * i as f64).exp()).collect();
    let x = Trajectory::new(PointCloud::new(1, coords).unwrap(), TimeGrid::unit(300).unwrap()).unwrap();
    let nb = NeighborhoodParams::new(0.5, 1).map_err(|e| e.to_string())?;
    let fit = kantz_lyapunov(&x, &nb, 20, FitWindow::new(2.0, 18.0).unwrap()).map_err(|e| e.to_string())?;
    let rel = ((fit.value - lambda0) / lambda0).abs();
    if rel >= 0.1 {
        return Err(format!("recovered {} (relative error {rel:.3})", fit.value));
    }
    within_time(format!("recovered {:.5} (relative error {rel:.2e})", fit.value), start, Duration::from_secs(5))
}

fn lorenz_orderings() -> Outcome {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::lorenz_desk();
    cfg.sweep.values = vec![95.0, 100.1];
    cfg.noise_levels = vec![0.0];
    let res = run_sweep(&cfg).map_err(|e| e.to_string())?;
    record_sweep("lorenz ordering", &res);
    let mean = |rho, kind| res.row(rho, 0.0, kind).unwrap().mean;
    let (b95, b100) = (mean(95.0, ExponentKind::PersistencePair), mean(100.1, ExponentKind::PersistencePair));
    let (l95, l100) = (mean(95.0, ExponentKind::Lyapunov), mean(100.1, ExponentKind::Lyapunov));
    let detail = format!("beta_exp {b95:.3} vs {b100:.3}, lambda {l95:.3} vs {l100:.3}");
    if !(b95 > b100 && l95 > l100) {
        return Err(detail);
    }
    within_time(detail, start, Duration::from_secs(300))
}

fn noise_stability() -> Outcome {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::lorenz_desk();
    cfg.sweep.values = vec![92.0, 95.0, 98.0];
    cfg.noise_levels = vec![0.0, 0.025];
    let res = run_sweep(&cfg).map_err(|e| e.to_string())?;
    record_sweep("noise stability", &res);
    let change = |kind| {
        cfg.sweep.values.iter().map(|&rho| {
            let clean = res.row(rho, 0.0, kind).unwrap().mean;
            let noisy = res.row(rho, 0.025, kind).unwrap().mean;
            ((noisy - clean) / clean).abs()
        }).sum::<f64>() / cfg.sweep.values.len() as f64
    };
    let beta = change(ExponentKind::PersistencePair);
    let lambda = change(ExponentKind::Lyapunov);
    let detail = format!("mean relative change beta_exp {beta:.4}, lambda {lambda:.4}");
    if !(beta < lambda) {
        return Err(detail);
    }
    within_time(detail, start, Duration::from_secs(600))
}

fn complexity() -> Outcome {
    let start = Instant::now();
    let spec = SystemSpec::lorenz_rho(28.0).unwrap();
    let sizes = [250usize, 500, 1000, 2000];
    // A strided subsample of one long trajectory keeps the point distribution
    // fixed as N grows, so neighborhood sizes scale linearly with N.
    let full = integrate(&spec, &[1.0, 1.0, 20.0], &TimeGrid::new(0.0, 0.01, 20_500).unwrap()).unwrap();
    let delta = 0.05 * full.points().diameter();
    let nb = NeighborhoodParams::new(delta, 1).unwrap();
    let radii: Vec<f64> = (0..50).map(|k| delta * k as f64 / 49.0).collect();
    let window = FitWindow::new(0.1 * delta, 0.5 * delta).unwrap();
    let mut times = Vec::new();
    for &n in &sizes {
        let cloud = full.points().select(&(0..n).map(|i| 500 + i * (20_000 / n)).collect::<Vec<_>>());
        let mut best = Duration::MAX;
        for _ in 0..5 {
            let t = Instant::now();
            let fit = persistence_exponent_local(&cloud, &nb, &radii, window).map_err(|e| e.to_string())?;
            best = best.min(t.elapsed());
            record_fit(format!("complexity N = {n}"), fit.value, fit.upper_bound.unwrap());
        }
        times.push(best.as_secs_f64());
    }
    let ratios: Vec<f64> = times.windows(2).map(|w| w[1] / w[0].max(1e-6)).collect();
    let detail = format!("per-doubling ratios {:?}", ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>());
    if ratios.iter().any(|&r| r > 6.0) {
        return Err(detail);
    }
    within_time(detail, start, Duration::from_secs(300))
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::lorenz_desk();
    cfg.sweep.values = vec![95.0, 100.1];
    cfg.noise_levels = vec![0.0, 0.025];
    cfg.trials = 2;
    let mut files = Vec::new();
    for run in 0..2 {
        let res = run_sweep(&cfg).map_err(|e| e.to_string())?;
        record_sweep("determinism", &res);
        let csv = dir.path().join(format!("sweep{run}.csv"));
        let json = dir.path().join(format!("sweep{run}.json"));
        res.write_csv(&csv).map_err(|e| e.to_string())?;
        res.write_json(&json).map_err(|e| e.to_string())?;
        files.push((std::fs::read(csv).unwrap(), std::fs::read(json).unwrap()));
    }
    if files[0] != files[1] {
        return Err("sweep files differ between runs".into());
    }
    let series = lorenz_x(800, 0.05);
    let mut ladder_cfg = small_ladder(EmbeddingParams::new(3, 3).unwrap(), 0.1);
    ladder_cfg.trials = 2;
    let a = run_noise_ladder(&series, &ladder_cfg).map_err(|e| e.to_string())?;
    let b = run_noise_ladder(&series, &ladder_cfg).map_err(|e| e.to_string())?;
    record_ladder("determinism ladder", &a);
    if a.to_csv_string() != b.to_csv_string() || a.to_json() != b.to_json() {
        return Err("noise-ladder output differs between runs".into());
    }
    within_time(format!("{} sweep bytes identical across runs", files[0].0.len() + files[0].1.len()), start, Duration::from_secs(300))
}

fn small_ladder(embedding: EmbeddingParams, c: f64) -> NoiseLadderConfig {
    let mut cfg = NoiseLadderConfig::single_series_defaults();
    cfg.embedding = embedding;
    cfg.neighborhood = NeighborhoodScale::relative(c);
    cfg.noise_levels = vec![0.05, 0.1, 0.2];
    cfg.lyapunov.t_max = 20;
    cfg.lyapunov.window = FitWindow::new(0.0, 20.0).unwrap();
    cfg.persistence.radii = RadiusSpec::EvenlyToDelta(100);
    cfg.persistence.window = WindowSpec::FractionOfDelta([0.2, 0.55]);
    cfg
}

fn series_end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("series.csv");
    pexp::io::write_series_csv(&lorenz_x(1528, 0.1), &path).map_err(|e| e.to_string())?;
    let raw = pexp::io::read_series_csv(&path).map_err(|e| e.to_string())?;
    let s = local_projection_denoise(&raw, &DenoiseParams::default()).map_err(|e| e.to_string())?;
    let tau = select_delay_ami(&s, &AmiParams::new(60)).map_err(|e| e.to_string())?.tau;
    let dim = select_dim_fnn(&s, tau, 8, 0.1).map_err(|e| e.to_string())?.dim;
    let embedding = EmbeddingParams::new(tau, dim).map_err(|e| e.to_string())?;
    let x = sliding_window_embed(&s, &embedding).map_err(|e| e.to_string())?;

    let scan = select_delta_scan(
        &x,
        &DeltaScanParams {
            c_grid: (1..=20).map(|k| k as f64 * 0.01).collect(),
            stability_tol: 0.1,
            min_neighbors: 1,
            t_max: 20,
            lyapunov_window: FitWindow::new(0.0, 20.0).unwrap(),
            radii: RadiusSpec::EvenlyToDelta(100),
            persistence_window: WindowSpec::FractionOfDelta([0.2, 0.55]),
            kantz: KantzOptions::default(),
        },
    )
    .map_err(|e| e.to_string())?;
    for row in &scan.rows {
        if let Some(v) = row.persistence {
            let width = 0.35 * row.delta;
            record_fit(format!("delta scan c = {}", row.c), v, persistence_bound(x.len(), width));
        }
    }

    let cfg = small_ladder(embedding, scan.c_chosen);
    let res = run_noise_ladder(&s, &cfg).map_err(|e| e.to_string())?;
    record_ladder("series ladder", &res);
    for kind in [ExponentKind::Lyapunov, ExponentKind::PersistenceLocal] {
        let row = res.row(0.0, 0.0, kind).ok_or("missing sigma = 0 row")?;
        if row.mean != 1.0 {
            return Err(format!("sigma = 0 {kind} row is {}", row.mean));
        }
    }
    let extra = &res.provenance.extra;
    let n = extra["n_points"].as_u64().unwrap() as usize;
    let w = extra["persistence_window"].as_array().unwrap();
    let width = w[1].as_f64().unwrap() - w[0].as_f64().unwrap();
    let reported = extra["persistence_upper_bound"].as_f64().unwrap();
    if (reported - (n as f64).ln() / width).abs() > 1e-9 {
        return Err(format!("reported bound {reported} is not ln({n})/{width}"));
    }
    within_time(
        format!(
            "tau {tau}, M {dim}, |X| {}, c {:.3}{}, bound {reported:.3}, {} rows",
            x.len(),
            scan.c_chosen,
            if scan.flagged { " (flagged)" } else { "" },
            res.rows.len()
        ),
        start,
        Duration::from_secs(300),
    )
}

fn bounds_proposition() -> Outcome {
    let fits = FITS.lock().unwrap();
    if fits.is_empty() {
        return Err("no fits recorded".into());
    }
    for (context, value, bound) in fits.iter() {
        if !(*value >= -1e-9 && *value <= bound + 1e-9) {
            return Err(format!("{context}: {value} outside [0, {bound}]"));
        }
    }
    let worst = fits.iter().map(|(_, v, b)| v / b).fold(f64::NEG_INFINITY, f64::max);
    Ok(format!("{} fits within bounds, largest value/bound {worst:.3}", fits.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("bound reproduction", bound_reproduction),
        ("stability theorem property suite", stability_suite),
        ("Betti oracle equivalence", betti_oracle),
        ("synthetic Lyapunov recovery", lyapunov_recovery),
        ("Lorenz qualitative reproduction", lorenz_orderings),
        ("noise-stability headline", noise_stability),
        ("complexity sanity", complexity),
        ("determinism", determinism),
        ("single-series end-to-end", series_end_to_end),
        // Last, so it sees every fit produced above.
        ("bounds proposition", bounds_proposition),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
