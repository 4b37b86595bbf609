use std::path::Path;
use std::process::{Command, Output};

fn mcbf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcbf"))
        .args(args)
        .current_dir(dir)
        .env_remove("MCBF_OUT_DIR")
        .output()
        .unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn gen(dir: &Path, name: &str, extra: &[&str]) {
    let mut args = vec!["gen", "-M", "2", "-o", name];
    args.extend_from_slice(extra);
    assert_eq!(mcbf(&args, dir).status.code(), Some(0));
}

#[test]
fn gen_writes_scenario_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = mcbf(
        &["gen", "--layout", "square-corners", "-M", "4", "-K", "1", "--seed", "3"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["M"], 4);
    assert_eq!(v["K"], 1);
}

#[test]
fn feasible_scenario_solves() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "s.json", &[]);
    let feas = mcbf(&["feas", "s.json"], dir.path());
    assert_eq!(feas.status.code(), Some(0));
    assert_eq!(json(&feas)["agree"], true);
    let solve = mcbf(&["solve", "s.json", "-o", "sum.json"], dir.path());
    assert_eq!(solve.status.code(), Some(0));
    let v = json(&solve);
    assert_eq!(v["status"], "converged");
    assert!(v["gap_rel"].as_f64().unwrap() <= 1e-6);
    assert!(dir.path().join("sum.json").exists());
    let short = mcbf(&["solve", "s.json", "--max-iter", "2"], dir.path());
    assert_eq!(short.status.code(), Some(2));
}

#[test]
fn infeasible_scenario_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "s.json", &["-K", "3", "-N", "2", "--gamma", "10"]);
    assert_eq!(mcbf(&["feas", "s.json"], dir.path()).status.code(), Some(3));
    let solve = mcbf(&["solve", "s.json"], dir.path());
    assert_eq!(solve.status.code(), Some(3));
    assert_eq!(json(&solve)["status"], "infeasible");
}

#[test]
fn sim_writes_trace_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "s.json", &[]);
    let out = mcbf(
        &["sim", "s.json", "--p-fail", "0.3", "--horizon", "60", "--seed", "4"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    assert!(trace.starts_with("tick,agent,event,"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/trace.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["trace_schema"], "mcbf-trace/1");
    assert_eq!(manifest["seed"], 4);
}

#[test]
fn experiment_honours_out_dir_env() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mcbf"))
        .args(["experiment", "fig-dual-sync", "--horizon", "5"])
        .current_dir(dir.path())
        .env("MCBF_OUT_DIR", "results")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("results/fig-dual-sync.manifest.json").exists());
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mcbf(&["experiment", "nope"], dir.path()).status.code(), Some(1));
    assert_eq!(mcbf(&["solve", "missing.json"], dir.path()).status.code(), Some(1));
    gen(dir.path(), "s.json", &[]);
    assert_eq!(
        mcbf(&["solve", "s.json", "--mode", "sideways"], dir.path())
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn bad_arguments_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mcbf(&["solve"], dir.path()).status.code(), Some(1));
    assert_eq!(mcbf(&["--help"], dir.path()).status.code(), Some(0));
}
