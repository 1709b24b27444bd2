use pexp::dynsys::{integrate, SystemSpec};
use pexp::embedding::{select_delay_ami, select_dim_fnn, AmiParams};
use pexp::experiments::{
    run_noise_ladder, run_sweep, ExperimentConfig, NeighborhoodScale, NoiseLadderConfig, Radii,
    SWEEP_CSV_HEADER,
};
use pexp::exponents::{RadiusSpec, WindowSpec};
use pexp::{EmbeddingParams, ExponentKind, FitWindow, Series, TimeGrid};

fn lorenz_x(samples: usize, dt: f64) -> Series {
    let spec = SystemSpec::lorenz_rho(28.0).unwrap();
    let traj = integrate(&spec, &[1.0, 1.0, 20.0], &TimeGrid::new(0.0, dt, samples + 500).unwrap()).unwrap();
    Series::new(traj.component(0)[500..].to_vec()).unwrap()
}

fn quick_lorenz() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::lorenz_desk();
    cfg.sweep.values = vec![95.0, 100.1];
    cfg.noise_levels = vec![0.0, 0.025];
    cfg.trials = 2;
    cfg.simulation.samples = 1000;
    cfg.persistence.radii = Radii::Range("0:0.1:3".into());
    cfg
}

#[test]
fn config_file_round_trip_drives_the_same_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.toml");
    let cfg = quick_lorenz();
    std::fs::write(&path, cfg.to_toml_string()).unwrap();
    let loaded = ExperimentConfig::from_path(&path).unwrap();
    assert_eq!(loaded, cfg);
    assert_eq!(loaded.hash(), cfg.hash());

    let res = run_sweep(&loaded).unwrap();
    assert_eq!(res.provenance.config_hash, cfg.hash());
    assert_eq!(res.provenance.param_name, "rho");
    let csv = res.to_csv_string();
    assert_eq!(csv.lines().next(), Some(SWEEP_CSV_HEADER));
    // Two kinds per (rho, sigma) cell.
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    let bound = res.provenance.extra["persistence_upper_bound"].as_f64().unwrap();
    assert!((bound - 2000f64.ln() / 2.0).abs() < 1e-12);
    for t in res.trials.iter().filter(|t| t.kind == ExponentKind::PersistencePair) {
        let v = t.value.unwrap();
        assert!(v >= -1e-9 && v <= bound + 1e-9, "{v}");
    }
}

#[test]
fn sweep_json_carries_trials_and_provenance() {
    let mut cfg = quick_lorenz();
    cfg.noise_levels = vec![0.0];
    cfg.trials = 1;
    let json = run_sweep(&cfg).unwrap().to_json();
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);
    assert_eq!(json["trials"].as_array().unwrap().len(), 4);
    assert_eq!(json["provenance"]["master_seed"], cfg.master_seed);
    assert_eq!(json["provenance"]["extra"]["lyapunov_units"], "per_time_unit");
}

#[test]
fn noise_ladder_config_round_trips() {
    let cfg = NoiseLadderConfig::single_series_defaults();
    let back = NoiseLadderConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(cfg.noise_levels.len(), 15);
    assert!((cfg.noise_levels[14] - 0.75).abs() < 1e-12);
}

/// Normalized β_exp should stay closer to 1 than normalized λ for σ ≤ 0.2.
/// On synthetic Lorenz-x data it does not: noise of 0.2·std is comparable to
/// δ and shifts the steep start of the local Betti curve into the window.
#[test]
#[ignore = "does not hold on synthetic Lorenz-x data; see the decisions log"]
fn persistence_is_more_noise_stable_than_lyapunov_on_a_series() {
    let s = lorenz_x(1528, 0.04);
    let tau = select_delay_ami(&s, &AmiParams::new(60)).unwrap().tau;
    let dim = select_dim_fnn(&s, tau, 8, 0.1).unwrap().dim;
    let mut cfg = NoiseLadderConfig::single_series_defaults();
    cfg.embedding = EmbeddingParams::new(tau, dim).unwrap();
    cfg.neighborhood = NeighborhoodScale::relative(0.07);
    cfg.noise_levels = vec![0.05, 0.1, 0.15, 0.2];
    cfg.trials = 10;
    cfg.lyapunov.t_max = 20;
    cfg.lyapunov.window = FitWindow::new(0.0, 20.0).unwrap();
    cfg.persistence.radii = RadiusSpec::EvenlyToDelta(100);
    cfg.persistence.window = WindowSpec::FractionOfDelta([0.2, 0.55]);
    let res = run_noise_ladder(&s, &cfg).unwrap();
    let deviation = |kind| {
        res.rows_of(kind).map(|r| (r.mean - 1.0).abs()).sum::<f64>() / cfg.noise_levels.len() as f64
    };
    let beta = deviation(ExponentKind::PersistenceLocal);
    let lambda = deviation(ExponentKind::Lyapunov);
    assert!(beta < lambda, "beta_exp deviates {beta:.3}, lambda {lambda:.3}");
}
