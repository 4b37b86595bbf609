//! Named experiment recipes. Each produces one or more CSV tables plus a
//! JSON manifest holding every input needed to rerun it.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::asyncsim::{convergence_tick, run, run_from, scenario_hash, Mode, ScheduleSpec, TRACE_SCHEMA};
use crate::channel::{generate_scenario, LayoutKind, LayoutSpec, Scenario};
use crate::dualsolve::{classify_start, sync_solve, sync_trajectory, DualOptions, DualState};
use crate::error::{Error, Result};
use crate::primal::{single_cell_mode, solve_network, PowerOptions};

pub const EXPERIMENTS: [&str; 6] = [
    "fig-dual-async",
    "fig-dual-sync",
    "fig-hex7",
    "fig-total-power",
    "table-iterations",
    "fig-baseline",
];

pub const DEFAULT_GAMMA: f64 = 0.1;
pub const DEFAULT_SIGMA2: f64 = 1e-12;
pub const DEFAULT_ANTENNAS: usize = 4;
pub const TABLE_P: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
pub const BASELINE_GAMMAS: [f64; 5] = [0.05, 0.1, 0.2, 0.3, 0.5];
pub const BASELINE_K: [usize; 2] = [2, 3];

#[derive(Clone, Debug, Default, Serialize)]
pub struct ExperimentConfig {
    /// Monte-Carlo draws for averaging recipes.
    pub seeds: Option<usize>,
    /// Scenario seed for single-scenario recipes and first seed otherwise.
    pub base_seed: u64,
    pub horizon: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub name: String,
    pub tables: Vec<Table>,
    pub manifest: serde_json::Value,
}

impl ExperimentOutput {
    /// Writes every table and `<name>.manifest.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut files = self.tables.iter().map(|t| t.save(dir)).collect::<Result<Vec<_>>>()?;
        let path = dir.join(format!("{}.manifest.json", self.name));
        std::fs::write(&path, serde_json::to_string_pretty(&self.manifest)?)?;
        files.push(path);
        Ok(files)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn lambda_header(cells: usize, k: usize) -> Vec<String> {
    (0..cells * k).map(|v| format!("lambda_{}_{}", v / k, v % k)).collect()
}

fn manifest(name: &str, cfg: &ExperimentConfig, extra: serde_json::Value) -> serde_json::Value {
    json!({
        "experiment": name,
        "version": env!("CARGO_PKG_VERSION"),
        "trace_schema": TRACE_SCHEMA,
        "config": cfg,
        "parameters": extra,
    })
}

pub fn two_cell_scenario(seed: u64) -> Result<Scenario> {
    generate_scenario(
        &LayoutSpec::new(LayoutKind::TwoCellLine),
        2,
        2,
        DEFAULT_ANTENNAS,
        DEFAULT_GAMMA,
        DEFAULT_SIGMA2,
        seed,
    )
}

pub fn square_scenario(users_per_cell: usize, gamma: f64, seed: u64) -> Result<Scenario> {
    generate_scenario(
        &LayoutSpec::new(LayoutKind::SquareCorners),
        4,
        users_per_cell,
        DEFAULT_ANTENNAS,
        gamma,
        DEFAULT_SIGMA2,
        seed,
    )
}

pub fn run_experiment(name: &str, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match name {
        "fig-dual-sync" => fig_dual(cfg, false),
        "fig-dual-async" => fig_dual(cfg, true),
        "fig-hex7" => fig_hex7(cfg),
        "fig-total-power" => fig_total_power(cfg),
        "table-iterations" => table_iterations_recipe(cfg),
        "fig-baseline" => fig_baseline(cfg),
        other => Err(Error::UnknownExperiment(other.into())),
    }
}

/// Dual trajectories of the two-cell scenario from the uniform starts 40
/// and 25 and from `2 lambda*`, synchronous or with `P = 0.5` skips.
fn fig_dual(cfg: &ExperimentConfig, asynchronous: bool) -> Result<ExperimentOutput> {
    let name = if asynchronous {
        "fig-dual-async"
    } else {
        "fig-dual-sync"
    };
    let s = two_cell_scenario(cfg.base_seed)?;
    let mk = s.num_users();
    let view = s.view();
    let star = sync_solve(&view, &DualState::zeros(mk), &DualOptions::default())?;
    let steps = cfg.horizon.unwrap_or(if asynchronous { 120 } else { 60 });
    let cases = [
        ("case1", DualState::uniform(mk, 40.0)),
        ("case2", DualState::uniform(mk, 25.0)),
        (
            "above",
            DualState::new(star.lambda_star.lambda.iter().map(|v| 2.0 * v).collect()),
        ),
    ];
    let mut header = vec!["case".to_string(), "iteration".into()];
    header.extend(lambda_header(s.cells(), s.users_per_cell()));
    header.extend((0..mk).map(|v| format!("lambda_star_{}_{}", v / 2, v % 2)));
    let mut table = Table {
        name: name.into(),
        header,
        rows: Vec::new(),
    };
    let sched = ScheduleSpec {
        p_fail: 0.5,
        d_max: 0,
        horizon: steps,
        seed: cfg.base_seed,
        ..ScheduleSpec::default()
    };
    let mut kinds = Vec::new();
    for (case, start) in &cases {
        kinds.push(json!({ "case": case, "start": start.lambda, "kind": classify_start(&view, start)? }));
        let traj: Vec<Vec<f64>> = if asynchronous {
            let trace = run_from(&s, &sched, Mode::MultiCell, start)?;
            trace.dc_lambdas().into_iter().map(|l| l.to_vec()).collect()
        } else {
            sync_trajectory(&view, start, steps)?
        };
        for (it, l) in traj.iter().enumerate() {
            let mut row = vec![case.to_string(), it.to_string()];
            row.extend(l.iter().copied().map(fmt));
            row.extend(star.lambda_star.lambda.iter().copied().map(fmt));
            table.rows.push(row);
        }
    }
    Ok(ExperimentOutput {
        name: name.into(),
        tables: vec![table],
        manifest: manifest(
            name,
            cfg,
            json!({
                "M": 2, "K": 2, "N": DEFAULT_ANTENNAS, "gamma": DEFAULT_GAMMA, "sigma2": DEFAULT_SIGMA2,
                "layout": "two-cell-line", "scenario_sha256": scenario_hash(&s),
                "schedule": if asynchronous { Some(sched) } else { None },
                "starts": kinds, "lambda_star": star.lambda_star.lambda,
            }),
        ),
    })
}

/// Seven hexagonal cells, two users each, `P = 0.5`; duals of each cell's
/// first user.
fn fig_hex7(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let s = generate_scenario(
        &LayoutSpec::new(LayoutKind::Hexagonal7),
        7,
        2,
        DEFAULT_ANTENNAS,
        DEFAULT_GAMMA,
        DEFAULT_SIGMA2,
        cfg.base_seed,
    )?;
    let mk = s.num_users();
    let star = sync_solve(&s.view(), &DualState::zeros(mk), &DualOptions::default())?;
    let sched = ScheduleSpec {
        p_fail: 0.5,
        d_max: 0,
        horizon: cfg.horizon.unwrap_or(150),
        seed: cfg.base_seed,
        ..ScheduleSpec::default()
    };
    let trace = run(&s, &sched, Mode::MultiCell)?;
    let mut header = vec!["iteration".to_string()];
    header.extend((0..7).map(|m| format!("lambda_{m}_0")));
    header.extend((0..7).map(|m| format!("lambda_star_{m}_0")));
    let mut table = Table {
        name: "fig-hex7".into(),
        header,
        rows: Vec::new(),
    };
    for (it, l) in trace.dc_lambdas().iter().enumerate() {
        let mut row = vec![it.to_string()];
        row.extend((0..7).map(|m| fmt(l[2 * m])));
        row.extend((0..7).map(|m| fmt(star.lambda_star.lambda[2 * m])));
        table.rows.push(row);
    }
    Ok(ExperimentOutput {
        name: "fig-hex7".into(),
        tables: vec![table],
        manifest: manifest(
            "fig-hex7",
            cfg,
            json!({
                "M": 7, "K": 2, "N": DEFAULT_ANTENNAS, "gamma": DEFAULT_GAMMA, "sigma2": DEFAULT_SIGMA2,
                "layout": "hexagonal7", "scenario_sha256": scenario_hash(&s), "schedule": sched,
                "converged_at": convergence_tick(&trace, 1e-5),
            }),
        ),
    })
}

pub const TOTAL_POWER_P: [f64; 4] = [0.0, 0.1, 0.3, 0.5];

/// Total transmit power of the full protocol on one four-cell scenario for
/// several failure probabilities, against the centralized optimum.
fn fig_total_power(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let s = square_scenario(4, DEFAULT_GAMMA, cfg.base_seed)?;
    let mk = s.num_users();
    let opt = solve_network(
        &s.view(),
        &DualState::zeros(mk),
        &DualOptions::default(),
        &PowerOptions::default(),
    )?;
    let horizon = cfg.horizon.unwrap_or(150);
    let mut table = Table::new(
        "fig-total-power",
        &["p_fail", "tick", "total_power", "min_sinr_margin", "optimal_power"],
    );
    let mut schedules = Vec::new();
    for &p in &TOTAL_POWER_P {
        let sched = ScheduleSpec {
            p_fail: p,
            d_max: 0,
            horizon,
            seed: cfg.base_seed,
            ..ScheduleSpec::default()
        };
        let trace = run(&s, &sched, Mode::MultiCell)?;
        for r in &trace.records {
            table.rows.push(vec![
                p.to_string(),
                r.tick.to_string(),
                fmt(r.total_power),
                fmt(r.min_sinr_margin),
                fmt(opt.total_power),
            ]);
        }
        schedules.push(sched);
    }
    Ok(ExperimentOutput {
        name: "fig-total-power".into(),
        tables: vec![table],
        manifest: manifest(
            "fig-total-power",
            cfg,
            json!({
                "M": 4, "K": 4, "N": DEFAULT_ANTENNAS, "gamma": DEFAULT_GAMMA, "sigma2": DEFAULT_SIGMA2,
                "layout": "square-corners", "scenario_sha256": scenario_hash(&s), "schedules": schedules,
                "optimal_power": opt.total_power,
            }),
        ),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRow {
    pub p_fail: f64,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
    /// Runs that had not converged by the end of the horizon.
    pub unconverged: usize,
}

/// Mean number of dual rounds to reach `||dlambda|| <= tol` on four-cell,
/// four-user scenarios. Scenario `k` and its skip pattern use seed
/// `base_seed + k` for every `P`, so the curves share random numbers.
pub fn iteration_sweep(
    p_values: &[f64],
    seeds: usize,
    base_seed: u64,
    horizon: usize,
    tol: f64,
) -> Result<Vec<IterationRow>> {
    let scenarios = (0..seeds as u64)
        .into_par_iter()
        .map(|k| square_scenario(4, DEFAULT_GAMMA, base_seed + k))
        .collect::<Result<Vec<_>>>()?;
    p_values
        .iter()
        .map(|&p| {
            let ticks = scenarios
                .par_iter()
                .map(|s| {
                    let sched = ScheduleSpec {
                        p_fail: p,
                        d_max: 0,
                        horizon,
                        seed: s.seed,
                        t_bf: horizon + 1,
                        t_pc: horizon + 1,
                        ..ScheduleSpec::default()
                    };
                    Ok(convergence_tick(&run(s, &sched, Mode::MultiCell)?, tol))
                })
                .collect::<Result<Vec<_>>>()?;
            let done: Vec<f64> = ticks.iter().flatten().map(|&k| k as f64).collect();
            let mean = done.iter().sum::<f64>() / done.len().max(1) as f64;
            let var = done.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / done.len().max(1) as f64;
            Ok(IterationRow {
                p_fail: p,
                mean,
                std: var.sqrt(),
                runs: done.len(),
                unconverged: ticks.len() - done.len(),
            })
        })
        .collect()
}

fn table_iterations_recipe(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let seeds = cfg.seeds.unwrap_or(100);
    let horizon = cfg.horizon.unwrap_or(400);
    let rows = iteration_sweep(&TABLE_P, seeds, cfg.base_seed, horizon, 1e-5)?;
    let mut table = Table::new(
        "table-iterations",
        &["p_fail", "mean_iterations", "std_iterations", "runs", "unconverged"],
    );
    for r in &rows {
        table.rows.push(vec![
            r.p_fail.to_string(),
            format!("{:.3}", r.mean),
            format!("{:.3}", r.std),
            r.runs.to_string(),
            r.unconverged.to_string(),
        ]);
    }
    Ok(ExperimentOutput {
        name: "table-iterations".into(),
        tables: vec![table],
        manifest: manifest(
            "table-iterations",
            cfg,
            json!({
                "M": 4, "K": 4, "N": DEFAULT_ANTENNAS, "gamma": DEFAULT_GAMMA, "sigma2": DEFAULT_SIGMA2,
                "layout": "square-corners", "p_values": TABLE_P, "d_max": 0, "tol": 1e-5,
                "horizon": horizon, "seeds": seeds,
            }),
        ),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselinePoint {
    pub users_per_cell: usize,
    pub gamma: f64,
    pub multi_cell: f64,
    pub single_cell: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselineSweep {
    pub points: Vec<BaselinePoint>,
    /// Seeds whose draws were solvable in both modes at every target.
    pub used_seeds: Vec<u64>,
    pub discarded: usize,
}

/// Total power of both modes at every target, or `None` if either mode
/// fails anywhere on the sweep.
fn baseline_draw(k: usize, gammas: &[f64], seed: u64) -> Result<Option<Vec<(f64, f64)>>> {
    let base = square_scenario(k, gammas[0], seed)?;
    let mut out = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let s = base.with_uniform_gamma(g)?;
        let start = DualState::zeros(s.num_users());
        let solve = |view| solve_network(&view, &start, &DualOptions::default(), &PowerOptions::default());
        match (solve(s.view()), solve(single_cell_mode(&s))) {
            (Ok(a), Ok(b)) => out.push((a.total_power, b.total_power)),
            (Err(e), _) | (_, Err(e)) if is_infeasible_outcome(&e) => return Ok(None),
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Ok(Some(out))
}

fn is_infeasible_outcome(e: &Error) -> bool {
    matches!(
        e,
        Error::Infeasible { .. }
            | Error::DualDivergence { .. }
            | Error::DualNonConvergence { .. }
            | Error::PowerDivergence { .. }
            | Error::PowerNonConvergence { .. }
    )
}

/// Averages total power over the first `draws` seeds (from `base_seed`)
/// whose scenarios are solvable in both modes at every target.
pub fn baseline_sweep(k: usize, gammas: &[f64], draws: usize, base_seed: u64) -> Result<BaselineSweep> {
    let mut used: Vec<(u64, Vec<(f64, f64)>)> = Vec::new();
    let mut next = base_seed;
    let mut discarded = 0;
    let limit = base_seed + 20 * draws as u64 + 100;
    while used.len() < draws && next < limit {
        let batch = (draws - used.len()) as u64;
        let results = (next..next + batch)
            .into_par_iter()
            .map(|seed| Ok((seed, baseline_draw(k, gammas, seed)?)))
            .collect::<Result<Vec<_>>>()?;
        for (seed, r) in results {
            match r {
                Some(v) => used.push((seed, v)),
                None => discarded += 1,
            }
        }
        next += batch;
    }
    let n = used.len().max(1) as f64;
    let points = gammas
        .iter()
        .enumerate()
        .map(|(gi, &g)| BaselinePoint {
            users_per_cell: k,
            gamma: g,
            multi_cell: used.iter().map(|(_, v)| v[gi].0).sum::<f64>() / n,
            single_cell: used.iter().map(|(_, v)| v[gi].1).sum::<f64>() / n,
        })
        .collect();
    Ok(BaselineSweep {
        points,
        used_seeds: used.iter().map(|(s, _)| *s).collect(),
        discarded,
    })
}

fn fig_baseline(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let draws = cfg.seeds.unwrap_or(1000);
    let mut table = Table::new(
        "fig-baseline",
        &[
            "users_per_cell",
            "gamma",
            "multi_cell_power",
            "single_cell_power",
            "gap",
            "draws",
        ],
    );
    let mut meta = Vec::new();
    for &k in &BASELINE_K {
        let sweep = baseline_sweep(k, &BASELINE_GAMMAS, draws, cfg.base_seed)?;
        for p in &sweep.points {
            table.rows.push(vec![
                k.to_string(),
                p.gamma.to_string(),
                fmt(p.multi_cell),
                fmt(p.single_cell),
                fmt(p.single_cell - p.multi_cell),
                sweep.used_seeds.len().to_string(),
            ]);
        }
        meta.push(json!({ "K": k, "draws": sweep.used_seeds.len(), "discarded": sweep.discarded }));
    }
    Ok(ExperimentOutput {
        name: "fig-baseline".into(),
        tables: vec![table],
        manifest: manifest(
            "fig-baseline",
            cfg,
            json!({
                "M": 4, "N": DEFAULT_ANTENNAS, "sigma2": DEFAULT_SIGMA2, "layout": "square-corners",
                "gammas": BASELINE_GAMMAS, "users_per_cell": BASELINE_K, "sweeps": meta,
            }),
        ),
    })
}
