use mcbf::asyncsim::{convergence_tick, run, run_from, scenario_hash, Mode, RunManifest, ScheduleSpec};
use mcbf::dualsolve::{sync_solve, DualOptions, DualState};
use mcbf::experiments::{run_experiment, square_scenario, two_cell_scenario, ExperimentConfig};
use mcbf::primal::{single_cell_mode, solve_network, PowerOptions};

fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| ((x - y) / y).abs()).fold(0.0, f64::max)
}

#[test]
fn lossy_runs_reach_the_sync_optimum() {
    let s = two_cell_scenario(1).unwrap();
    let star = sync_solve(&s.view(), &DualState::zeros(4), &DualOptions::default()).unwrap();
    for seed in 0..4 {
        let sched = ScheduleSpec {
            p_fail: 0.5,
            d_max: 3,
            horizon: 300,
            seed,
            ..ScheduleSpec::default()
        };
        let trace = run(&s, &sched, Mode::MultiCell).unwrap();
        assert!(rel_inf(trace.final_lambda(), &star.lambda_star.lambda) <= 1e-6);
        assert!(convergence_tick(&trace, 1e-5).is_some());
    }
}

#[test]
fn slower_agents_still_converge() {
    let s = square_scenario(2, 0.1, 3).unwrap();
    let opt = solve_network(
        &s.view(),
        &DualState::zeros(8),
        &DualOptions::default(),
        &PowerOptions::default(),
    )
    .unwrap();
    let sched = ScheduleSpec {
        t_dc: 2,
        t_bf: 3,
        t_pc: 1,
        p_fail: 0.2,
        d_max: 4,
        horizon: 600,
        seed: 5,
        ..ScheduleSpec::default()
    };
    let trace = run(&s, &sched, Mode::MultiCell).unwrap();
    let last = trace.final_record();
    assert!(rel_inf(&last.lambda, &opt.dual.lambda_star.lambda) <= 1e-6);
    assert!((last.total_power - opt.total_power).abs() <= 1e-6 * opt.total_power);
    assert!(last.min_sinr_margin.abs() <= 1e-6);
}

#[test]
fn single_cell_runs_match_single_cell_solve() {
    let s = square_scenario(2, 0.2, 0).unwrap();
    let opt = solve_network(
        &single_cell_mode(&s),
        &DualState::zeros(8),
        &DualOptions::default(),
        &PowerOptions::default(),
    )
    .unwrap();
    let trace = run(
        &s,
        &ScheduleSpec {
            horizon: 200,
            ..ScheduleSpec::default()
        },
        Mode::SingleCell,
    )
    .unwrap();
    assert!(rel_inf(trace.final_lambda(), &opt.dual.lambda_star.lambda) <= 1e-6);
    assert!((trace.final_record().total_power - opt.total_power).abs() <= 1e-6 * opt.total_power);
}

#[test]
fn thresholded_coordination_is_a_perturbation() {
    let s = square_scenario(2, 0.1, 1).unwrap();
    let exact = run(&s, &ScheduleSpec::synchronous(100), Mode::MultiCell).unwrap();
    let cut = run(
        &s,
        &ScheduleSpec {
            neighbor_threshold: 1e-3,
            ..ScheduleSpec::synchronous(100)
        },
        Mode::MultiCell,
    )
    .unwrap();
    let d = rel_inf(cut.final_lambda(), exact.final_lambda());
    assert!(d < 0.1, "{d}");
}

#[test]
fn trace_and_manifest_files() {
    let s = two_cell_scenario(0).unwrap();
    let sched = ScheduleSpec {
        p_fail: 0.3,
        horizon: 20,
        seed: 4,
        ..ScheduleSpec::default()
    };
    let start = DualState::uniform(4, 25.0);
    let trace = run_from(&s, &sched, Mode::MultiCell, &start).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    trace.save_csv(&csv).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("tick,agent,event,lambda_0_0"));
    assert!(text.contains(",skip,"));
    let m = RunManifest::new(&s, &sched, Mode::MultiCell, &start);
    let path = dir.path().join("t.manifest.json");
    m.save(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["scenario_sha256"], scenario_hash(&s));
    assert_eq!(v["schedule"]["seed"], 4);
    let json = serde_json::to_string(&trace).unwrap();
    let back: mcbf::asyncsim::SimTrace = serde_json::from_str(&json).unwrap();
    assert_eq!(back, trace);
}

#[test]
fn experiment_bundle_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        seeds: Some(3),
        horizon: Some(120),
        ..ExperimentConfig::default()
    };
    let out = run_experiment("table-iterations", &cfg).unwrap();
    let files = out.save(dir.path()).unwrap();
    assert_eq!(files.len(), 2);
    let rows = &out.tables[0].rows;
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[4] == "0"));
}
