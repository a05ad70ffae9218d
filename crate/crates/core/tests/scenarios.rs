use proptest::prelude::*;

use uavspoof::geo::LocalPos;
use uavspoof::gps::read_log;
use uavspoof::harness::export::{export_run, trajectory_csv, TRAJECTORY_COLUMNS};
use uavspoof::harness::replicate::{baseline, fig8_scenario, replicate, ExperimentId};
use uavspoof::harness::{run_scenario, run_scenario_with, AttackConfig, PolicySource, ScenarioConfig, Verdict};
use uavspoof::learner::{train, Td3Config, TrainingTask};
use uavspoof::policy::{load_policy, save_policy, NetworkShape};
use uavspoof::world::Obstacle;

#[test]
fn replicate_writes_both_runs_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let report = replicate(ExperimentId::Fig8a, None, dir.path()).unwrap();
    assert!(matches!(report.attack.verdict, Verdict::Collided { .. }));
    assert!(matches!(report.baseline.verdict, Verdict::ReachedTarget { .. }));
    for sub in ["attack", "baseline"] {
        for f in ["trajectory.csv", "paths.csv", "test_ratio.csv", "gps.log", "summary.json"] {
            assert!(dir.path().join(sub).join(f).is_file(), "{sub}/{f}");
        }
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "fig8a");
    assert_eq!(summary["attack"]["verdict"]["outcome"], "collided");

    // the written scenario reproduces the attacked run
    let cfg = ScenarioConfig::load(&dir.path().join("scenario.toml")).unwrap();
    let again = run_scenario(&cfg).unwrap();
    let first = std::fs::read_to_string(dir.path().join("attack/trajectory.csv")).unwrap();
    assert_eq!(trajectory_csv(&again.records), first);
}

#[test]
fn fig7_envelope_drifts_without_tripping_the_gate() {
    let dir = tempfile::tempdir().unwrap();
    let report = replicate(ExperimentId::Fig7Envelope, None, dir.path()).unwrap();
    assert!(report.attack.max_test_ratio < 1.0);
    assert_eq!(report.attack.rejected_steps, 0);
    // 1.1 m/s for 35 s, held afterwards
    assert!((report.attack.final_estimate_offset_m - 38.5).abs() < 0.35 * 38.5, "{}", report.attack.final_estimate_offset_m);
    assert_eq!(report.baseline.final_estimate_offset_m, 0.0);
}

#[test]
fn gps_log_round_trips_and_replays() {
    use uavspoof::estimator::Estimator;
    use uavspoof::geo::geodetic_to_local;

    let cfg = fig8_scenario(LocalPos::new(0.0, 150.0), 4);
    let run = run_scenario(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_run(&run, dir.path()).unwrap();
    let log = read_log(std::io::BufReader::new(std::fs::File::open(dir.path().join("gps.log")).unwrap())).unwrap();
    assert_eq!(log.len(), run.gps_log.len());
    for (a, b) in log.iter().zip(&run.gps_log) {
        assert_eq!(a.seq, b.seq);
        // nine decimals of a degree is about 0.1 mm
        let d = geodetic_to_local(&a.coord, &cfg.frame).distance(geodetic_to_local(&b.coord, &cfg.frame));
        assert!(d < 1e-3, "seq {}: {d} m", a.seq);
    }
    let mut est = Estimator::settled_at(cfg.environment.start, cfg.fusion).unwrap();
    let mut last_t = 0.0;
    for m in &log {
        if m.t > last_t {
            est.predict(nalgebra::Vector2::zeros(), m.t - last_t);
            last_t = m.t;
        }
        est.fuse(geodetic_to_local(&m.coord, &cfg.frame)).unwrap();
        assert!(est.est.is_finite());
    }
}

#[test]
fn trained_weights_load_through_a_scenario_file() {
    let task = TrainingTask::default();
    let cfg = Td3Config {
        total_steps: 600,
        warmup_steps: 200,
        batch_size: 16,
        network: NetworkShape { n_rays: 16, depth_layers: vec![8], trunk_hidden: vec![16] },
        ..Td3Config::default()
    };
    let policy = train(&task, &cfg).unwrap().policy;
    let dir = tempfile::tempdir().unwrap();
    save_policy(&policy, &dir.path().join("actor.pol")).unwrap();

    let mut sc = baseline(&fig8_scenario(LocalPos::new(0.0, 150.0), 0));
    sc.duration_s = 5.0;
    sc.policy = PolicySource::Weights { path: "actor.pol".into() };
    let path = dir.path().join("scenario.toml");
    std::fs::write(&path, sc.to_toml_string()).unwrap();
    let loaded = ScenarioConfig::load(&path).unwrap();
    let from_file = run_scenario(&loaded).unwrap();
    let direct = run_scenario_with(&loaded, &load_policy(&dir.path().join("actor.pol")).unwrap()).unwrap();
    assert_eq!(trajectory_csv(&from_file.records), trajectory_csv(&direct.records));

    // a policy built for another ray count is refused
    let mut wrong = loaded.clone();
    wrong.depth.n_rays = 8;
    assert!(run_scenario(&wrong).is_err());
}

fn scenario(seed: u64, tx: f64, ox: f64, sigma: f64, attack: bool) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(
        LocalPos::ORIGIN,
        LocalPos::new(tx, 120.0),
        vec![Obstacle { center: LocalPos::new(ox, 70.0), radius: 4.0 }],
        40.0,
    );
    cfg.seed = seed;
    cfg.noise.sigma = sigma;
    if attack {
        cfg.attack = AttackConfig::Constrained(Default::default());
    }
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_are_reproducible(seed in 0u64..1000, tx in -40.0f64..40.0, ox in -10.0f64..10.0, attack: bool) {
        let cfg = scenario(seed, tx, ox, 0.5, attack);
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        prop_assert_eq!(trajectory_csv(&a.records), trajectory_csv(&b.records));
        prop_assert_eq!(a.gps_log, b.gps_log);
    }

    #[test]
    fn noiseless_unattacked_estimate_equals_truth(tx in -40.0f64..40.0, ox in -10.0f64..10.0) {
        let out = run_scenario(&scenario(0, tx, ox, 0.0, false)).unwrap();
        for r in &out.records {
            prop_assert!(r.est_pos.distance(r.true_pos) < 1e-6);
        }
    }

    #[test]
    fn exported_rows_match_the_schema(seed in 0u64..1000, attack: bool) {
        let out = run_scenario(&scenario(seed, 10.0, 0.0, 0.5, attack)).unwrap();
        let csv = trajectory_csv(&out.records);
        prop_assert_eq!(csv.lines().count(), out.records.len() + 1);
        for line in csv.lines() {
            prop_assert_eq!(line.split(',').count(), TRAJECTORY_COLUMNS.len());
        }
    }

    #[test]
    fn constrained_offsets_stay_within_the_step_limit(seed in 0u64..1000, tx in -40.0f64..40.0) {
        let out = run_scenario(&scenario(seed, tx, 0.0, 0.5, true)).unwrap();
        for w in out.records.windows(2) {
            prop_assert!(w[1].spoof_offset.distance(w[0].spoof_offset) <= 0.1 + 1e-9);
        }
    }
}
