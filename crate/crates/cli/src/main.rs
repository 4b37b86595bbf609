use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mcbf::asyncsim::{convergence_tick, run, Mode, RunManifest, ScheduleSpec};
use mcbf::channel::{generate_scenario, LayoutKind, LayoutSpec, Scenario};
use mcbf::dualsolve::{DualOptions, DualState};
use mcbf::experiments::{run_experiment, ExperimentConfig, EXPERIMENTS};
use mcbf::feasibility::{build_coupling, is_feasible, k_matrix_test, min_power_vector};
use mcbf::hermlin::{CVector, Complex64};
use mcbf::primal::{single_cell_mode, solve_network, BeamformerSet, PowerOptions};
use mcbf::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "mcbf", version, about = "Multi-cell downlink beamforming and power control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random scenario and write it as JSON.
    Gen(GenArgs),
    /// Feasibility of a scenario for given (or principal) beamformers.
    Feas(FeasArgs),
    /// Solve the dual, recover beamformers and powers, print a summary.
    Solve(SolveArgs),
    /// Simulate the distributed protocol and write a CSV trace.
    Sim(SimArgs),
    /// Run a named experiment recipe.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenArgs {
    /// two-cell-line, square-corners or hexagonal-7
    #[arg(long, default_value = "two-cell-line")]
    layout: String,
    #[arg(short = 'M', long = "cells")]
    cells: Option<usize>,
    #[arg(short = 'K', long = "users", default_value_t = 2)]
    users: usize,
    #[arg(short = 'N', long = "antennas", default_value_t = 4)]
    antennas: usize,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-12)]
    sigma2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000.0)]
    inter_bs_distance: f64,
    /// Scenario file to write; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FeasArgs {
    scenario: PathBuf,
    /// JSON array of beamformers, each an array of [re, im] pairs.
    #[arg(long)]
    beamformers: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    scenario: PathBuf,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// multi-cell or single-cell
    #[arg(long, default_value = "multi-cell")]
    mode: String,
    /// Also write the summary JSON here.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    scenario: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    p_fail: f64,
    #[arg(long, default_value_t = 5)]
    d_max: usize,
    #[arg(long, default_value_t = 1)]
    t_dc: usize,
    #[arg(long, default_value_t = 1)]
    t_bf: usize,
    #[arg(long, default_value_t = 1)]
    t_pc: usize,
    #[arg(long, default_value_t = 200)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    neighbor_threshold: f64,
    #[arg(long, default_value = "multi-cell")]
    mode: String,
    /// Trace CSV; the run manifest goes next to it. Defaults to
    /// `<out-dir>/trace.csv`.
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long, env = "MCBF_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    name: String,
    /// Number of Monte-Carlo draws for averaging recipes.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, env = "MCBF_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Feas(a) => cmd_feas(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Sim(a) => cmd_sim(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn parse_mode(name: &str) -> mcbf::Result<Mode> {
    Mode::parse(name).ok_or_else(|| Error::InvalidParameter(format!("unknown mode `{name}`")))
}

fn print_json(v: &serde_json::Value) -> mcbf::Result<()> {
    print_text(&serde_json::to_string_pretty(v)?)
}

fn print_text(text: &str) -> mcbf::Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn cmd_gen(a: GenArgs) -> mcbf::Result<u8> {
    let kind = LayoutKind::parse(&a.layout)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown layout `{}`", a.layout)))?;
    let mut layout = LayoutSpec::new(kind);
    layout.inter_bs_distance = a.inter_bs_distance;
    let cells = a.cells.unwrap_or(kind.cell_count());
    let s = generate_scenario(&layout, cells, a.users, a.antennas, a.gamma, a.sigma2, a.seed)?;
    match a.out {
        Some(path) => {
            s.save(&path)?;
            Scenario::load(&path)?;
        }
        None => print_text(&s.to_json())?,
    }
    Ok(0)
}

fn load_beamformers(path: &Path) -> mcbf::Result<BeamformerSet> {
    let raw: Vec<Vec<[f64; 2]>> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    BeamformerSet::new(
        raw.into_iter()
            .map(|w| CVector::from_iterator(w.len(), w.into_iter().map(|[re, im]| Complex64::new(re, im))))
            .collect(),
    )
}

fn cmd_feas(a: FeasArgs) -> mcbf::Result<u8> {
    let s = Scenario::load(&a.scenario)?;
    let w = match &a.beamformers {
        Some(p) => load_beamformers(p)?,
        None => BeamformerSet::principal(&s)?,
    };
    let cs = build_coupling(&s, &w)?;
    let report = is_feasible(&cs);
    let k = k_matrix_test(&cs);
    let p = if report.feasible {
        Some(min_power_vector(&cs)?.into_vec())
    } else {
        None
    };
    print_json(&json!({
        "feasible": report.feasible,
        "rho": report.rho,
        "marginal": report.marginal,
        "k_matrix": k,
        "agree": k == report.feasible,
        "min_power": p,
    }))?;
    Ok(if report.feasible { 0 } else { EXIT_INFEASIBLE })
}

fn cmd_solve(a: SolveArgs) -> mcbf::Result<u8> {
    let s = Scenario::load(&a.scenario)?;
    let mode = parse_mode(&a.mode)?;
    let view = match mode {
        Mode::MultiCell => s.view(),
        Mode::SingleCell => single_cell_mode(&s),
    };
    let opts = DualOptions {
        tol: a.tol,
        max_iter: a.max_iter,
    };
    let outcome = solve_network(&view, &DualState::zeros(s.num_users()), &opts, &PowerOptions::default());
    let (summary, code) = match outcome {
        Ok(sol) => (
            json!({
                "status": "converged",
                "mode": mode.name(),
                "gap_rel": sol.gap_rel,
                "iterations": sol.dual.iterations,
                "rho": sol.rho,
                "total_power": sol.total_power,
                "dual_objective": sol.dual_objective,
                "sinr_margins": sol.sinr_margins(&s),
                "lambda_star": sol.dual.lambda_star.lambda,
                "power": sol.power.as_slice(),
                "constraint_slacks": sol.dual.constraint_slacks,
            }),
            0,
        ),
        Err(e @ (Error::DualNonConvergence { .. } | Error::PowerNonConvergence { .. })) => (
            json!({ "status": "not-converged", "mode": mode.name(), "error": e.to_string() }),
            EXIT_NOT_CONVERGED,
        ),
        Err(e @ (Error::Infeasible { .. } | Error::DualDivergence { .. } | Error::PowerDivergence { .. })) => (
            json!({ "status": "infeasible", "mode": mode.name(), "error": e.to_string() }),
            EXIT_INFEASIBLE,
        ),
        Err(e) => return Err(e),
    };
    if let Some(path) = &a.out {
        std::fs::write(path, serde_json::to_string_pretty(&summary)?)?;
    }
    print_json(&summary)?;
    Ok(code)
}

fn cmd_sim(a: SimArgs) -> mcbf::Result<u8> {
    let s = Scenario::load(&a.scenario)?;
    let mode = parse_mode(&a.mode)?;
    let sched = ScheduleSpec {
        t_dc: a.t_dc,
        t_bf: a.t_bf,
        t_pc: a.t_pc,
        p_fail: a.p_fail,
        d_max: a.d_max,
        horizon: a.horizon,
        seed: a.seed,
        neighbor_threshold: a.neighbor_threshold,
    };
    let trace = run(&s, &sched, mode)?;
    let out = a.out.unwrap_or_else(|| a.out_dir.join("trace.csv"));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    trace.save_csv(&out)?;
    let manifest_path = out.with_extension("manifest.json");
    RunManifest::new(&s, &sched, mode, &DualState::zeros(s.num_users())).save(&manifest_path)?;
    let last = trace.final_record();
    print_json(&json!({
        "trace": out,
        "manifest": manifest_path,
        "converged_at": convergence_tick(&trace, 1e-5),
        "final_lambda": last.lambda,
        "final_total_power": last.total_power,
        "final_min_sinr_margin": last.min_sinr_margin,
    }))?;
    Ok(0)
}

fn cmd_experiment(a: ExperimentArgs) -> mcbf::Result<u8> {
    if !EXPERIMENTS.contains(&a.name.as_str()) {
        return Err(Error::UnknownExperiment(format!(
            "{} (expected one of {})",
            a.name,
            EXPERIMENTS.join(", ")
        )));
    }
    let cfg = ExperimentConfig {
        seeds: a.seeds,
        base_seed: a.seed,
        horizon: a.horizon,
    };
    let out = run_experiment(&a.name, &cfg)?;
    let files = out.save(&a.out_dir)?;
    print_json(&json!({ "experiment": out.name, "files": files }))?;
    Ok(0)
}
