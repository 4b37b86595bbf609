//! Virtual-time simulation of the distributed protocol.
//!
//! Each BS runs a dual-computation agent for its users, a beamforming agent,
//! and each user a power-control agent. Remote dual variables reach a BS over
//! a backhaul that delivers every value with a random delay of at most
//! `d_max` ticks, and every dual update is skipped with probability
//! `p_fail`. Everything is driven by one seeded RNG, so a run is a pure
//! function of its inputs.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{Adjacency, Coupling, Scenario, ScenarioView, UserId};
use crate::dualsolve::{dual_map_cell, dual_objective, norm2, DualState};
use crate::error::{Error, Result};
use crate::primal::{beamform, build_e, gain_table, power_map, sinr_from_gains, BeamformerSet, GainTable, PowerVector};

pub const TRACE_SCHEMA: &str = "mcbf-trace/1";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub t_dc: usize,
    pub t_bf: usize,
    pub t_pc: usize,
    pub p_fail: f64,
    pub d_max: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Relative trace threshold for coordinating two BSs; 0 coordinates all.
    pub neighbor_threshold: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            t_dc: 1,
            t_bf: 1,
            t_pc: 1,
            p_fail: 0.0,
            d_max: 5,
            horizon: 200,
            seed: 0,
            neighbor_threshold: 0.0,
        }
    }
}

impl ScheduleSpec {
    /// Fully synchronous schedule: no skips, no delay, every agent every tick.
    pub fn synchronous(horizon: usize) -> Self {
        Self {
            d_max: 0,
            horizon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_dc == 0 || self.t_bf == 0 || self.t_pc == 0 {
            return Err(Error::InvalidSchedule("periods must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.p_fail) {
            return Err(Error::InvalidSchedule(format!(
                "failure probability must lie in [0, 1), got {}",
                self.p_fail
            )));
        }
        if !(self.neighbor_threshold >= 0.0) || !self.neighbor_threshold.is_finite() {
            return Err(Error::InvalidSchedule(
                "neighbor threshold must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    MultiCell,
    SingleCell,
}

impl Mode {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "multi-cell" | "multi" => Some(Mode::MultiCell),
            "single-cell" | "single" => Some(Mode::SingleCell),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::MultiCell => "multi-cell",
            Mode::SingleCell => "single-cell",
        }
    }
}

/// BS `bs` is coordinated with cell `cell` when `trace(R_{bs,cell,i})`
/// exceeds `threshold` times the largest correlation trace for some `i`.
pub fn interference_neighborhood(s: &Scenario, threshold: f64) -> Adjacency {
    let max_trace = (0..s.cells())
        .flat_map(|bs| s.users().map(move |u| (bs, u)))
        .map(|(bs, u)| s.corr(bs, u).trace())
        .fold(0.0, f64::max);
    let mut adj = Adjacency::empty(s.cells());
    for cell in 0..s.cells() {
        for bs in 0..s.cells() {
            let linked =
                (0..s.users_per_cell()).any(|i| s.corr(bs, UserId::new(cell, i)).trace() > threshold * max_trace);
            adj.set(cell, bs, linked);
        }
    }
    adj
}

/// Remote dual values as last delivered to each BS.
#[derive(Clone, Debug, PartialEq)]
pub struct BackhaulState {
    users: usize,
    value: Vec<f64>,
    origin: Vec<usize>,
}

impl BackhaulState {
    pub fn new(cells: usize, lambda0: &[f64]) -> Self {
        Self {
            users: lambda0.len(),
            value: lambda0.repeat(cells),
            origin: vec![0; cells * lambda0.len()],
        }
    }

    /// Stores a value of dual `v` taken from the state after tick `origin`,
    /// unless a fresher one is already held.
    pub fn deliver(&mut self, consumer: usize, v: usize, value: f64, origin: usize) {
        let k = consumer * self.users + v;
        if origin >= self.origin[k] {
            self.value[k] = value;
            self.origin[k] = origin;
        }
    }

    pub fn value(&self, consumer: usize, v: usize) -> f64 {
        self.value[consumer * self.users + v]
    }

    pub fn origin(&self, consumer: usize, v: usize) -> usize {
        self.origin[consumer * self.users + v]
    }

    /// The dual vector BS `consumer` works with: its own users' current
    /// values and delivered values for everyone else.
    pub fn local_view(&self, consumer: usize, current: &[f64], s: &Scenario) -> Vec<f64> {
        (0..self.users)
            .map(|v| {
                if s.user(v).cell == consumer {
                    current[v]
                } else {
                    self.value(consumer, v)
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Init,
    Update,
    Skip,
    Beamform,
    Power,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Init => "init",
            EventKind::Update => "update",
            EventKind::Skip => "skip",
            EventKind::Beamform => "beamform",
            EventKind::Power => "power",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Agent {
    Network,
    Dual(UserId),
    Beam(usize),
    Power(UserId),
}

impl std::fmt::Display for Agent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Agent::Network => write!(f, "network"),
            Agent::Dual(u) => write!(f, "dc{u}"),
            Agent::Beam(bs) => write!(f, "bf({bs})"),
            Agent::Power(u) => write!(f, "pc{u}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub agent: Agent,
    pub kind: EventKind,
}

/// State after one tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    /// Number of dual-computation rounds completed, if this tick ran one.
    pub dc_iteration: Option<usize>,
    pub lambda: Vec<f64>,
    pub power: Vec<f64>,
    pub total_power: f64,
    pub sinr: Vec<f64>,
    pub min_sinr_margin: f64,
    pub dual_objective: f64,
    /// Largest age, in ticks, of a remote dual read this tick.
    pub max_staleness: usize,
    pub events: Vec<Event>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub cells: usize,
    pub users_per_cell: usize,
    pub records: Vec<TickRecord>,
}

impl SimTrace {
    /// Dual vectors at tick 0 and after every dual-computation round.
    pub fn dc_lambdas(&self) -> Vec<&[f64]> {
        self.records
            .iter()
            .filter(|r| r.tick == 0 || r.dc_iteration.is_some())
            .map(|r| r.lambda.as_slice())
            .collect()
    }

    pub fn final_lambda(&self) -> &[f64] {
        &self.records.last().expect("trace has the initial record").lambda
    }

    pub fn final_record(&self) -> &TickRecord {
        self.records.last().expect("trace has the initial record")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mk = self.cells * self.users_per_cell;
        let mut header = vec!["tick".to_string(), "agent".into(), "event".into()];
        for v in 0..mk {
            header.push(format!(
                "lambda_{}_{}",
                v / self.users_per_cell,
                v % self.users_per_cell
            ));
        }
        header.push("total_power".into());
        header.push("min_sinr_margin".into());
        w.write_record(&header)?;
        for r in &self.records {
            for e in &r.events {
                let mut row = vec![r.tick.to_string(), e.agent.to_string(), e.kind.name().to_string()];
                row.extend(r.lambda.iter().map(|v| format!("{v:e}")));
                row.push(format!("{:e}", r.total_power));
                row.push(format!("{:e}", r.min_sinr_margin));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Smallest dual round `k >= 1` from which every step
/// `||lambda_j - lambda_{j-1}||` up to the end of the trace is at most `tol`.
pub fn convergence_tick(trace: &SimTrace, tol: f64) -> Option<usize> {
    let lambdas = trace.dc_lambdas();
    if lambdas.len() < 2 {
        return None;
    }
    let mut k = lambdas.len();
    while k > 1 && norm2(lambdas[k - 1], lambdas[k - 2]) <= tol {
        k -= 1;
    }
    (k < lambdas.len()).then_some(k)
}

pub fn run(s: &Scenario, sched: &ScheduleSpec, mode: Mode) -> Result<SimTrace> {
    run_from(s, sched, mode, &DualState::zeros(s.num_users()))
}

#[allow(clippy::too_many_arguments)]
fn record(
    s: &Scenario,
    tick: usize,
    dc_iteration: Option<usize>,
    lambda: &[f64],
    p: &PowerVector,
    g: &GainTable,
    max_staleness: usize,
    events: Vec<Event>,
) -> TickRecord {
    let sinr = sinr_from_gains(s, g, p);
    let min_sinr_margin = sinr
        .iter()
        .zip(s.gammas())
        .map(|(x, gam)| (x - gam) / gam)
        .fold(f64::INFINITY, f64::min);
    TickRecord {
        tick,
        dc_iteration,
        lambda: lambda.to_vec(),
        power: p.as_slice().to_vec(),
        total_power: p.total(),
        sinr,
        min_sinr_margin,
        dual_objective: dual_objective(s, lambda),
        max_staleness,
        events,
    }
}

fn cell_beamformers(
    view: &ScenarioView<'_>,
    local: &[f64],
    bs: usize,
    w: &mut [crate::hermlin::CVector],
) -> Result<()> {
    let s = view.scenario;
    for i in 0..s.users_per_cell() {
        let u = UserId::new(bs, i);
        w[s.flat(u)] = beamform(&build_e(view, local, u))?;
    }
    Ok(())
}

pub fn run_from(s: &Scenario, sched: &ScheduleSpec, mode: Mode, start: &DualState) -> Result<SimTrace> {
    sched.validate()?;
    let mk = s.num_users();
    start.validate(mk)?;
    let cells = s.cells();
    let (view, adj) = match mode {
        Mode::SingleCell => (ScenarioView::new(s, Coupling::IntraCell), Adjacency::empty(cells)),
        Mode::MultiCell if sched.neighbor_threshold == 0.0 => {
            (ScenarioView::new(s, Coupling::Full), interference_neighborhood(s, 0.0))
        }
        Mode::MultiCell => {
            let adj = interference_neighborhood(s, sched.neighbor_threshold);
            (ScenarioView::new(s, Coupling::Neighbors(adj.clone())), adj)
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(sched.seed);
    let mut history: Vec<Vec<f64>> = vec![start.lambda.clone()];
    let mut lambda = start.lambda.clone();
    let mut backhaul = BackhaulState::new(cells, &lambda);

    let mut w = vec![crate::hermlin::CVector::zeros(s.antennas()); mk];
    for bs in 0..cells {
        cell_beamformers(&view, &lambda, bs, &mut w)?;
    }
    let mut gains = gain_table(s, &BeamformerSet::new(w.clone())?)?;
    let mut p = PowerVector::zeros(mk);
    let mut records = vec![record(
        s,
        0,
        None,
        &lambda,
        &p,
        &gains,
        0,
        vec![Event {
            agent: Agent::Network,
            kind: EventKind::Init,
        }],
    )];

    let mut rounds = 0;
    for tick in 1..=sched.horizon {
        let mut events = Vec::new();
        let mut max_staleness = 0;
        let mut dc_iteration = None;

        if tick % sched.t_dc == 0 {
            let skips: Vec<bool> = (0..mk).map(|_| rng.random::<f64>() < sched.p_fail).collect();
            for consumer in 0..cells {
                #[allow(clippy::needless_range_loop)]
                for v in 0..mk {
                    let owner = s.user(v).cell;
                    if owner == consumer || !adj.linked(owner, consumer) {
                        continue;
                    }
                    let delay = if sched.d_max > 0 {
                        rng.random_range(0..=sched.d_max)
                    } else {
                        0
                    };
                    let origin = (tick - 1).saturating_sub(delay);
                    backhaul.deliver(consumer, v, history[origin][v], origin);
                    max_staleness = max_staleness.max(tick - 1 - backhaul.origin(consumer, v));
                }
            }
            let mut next = lambda.clone();
            for bs in 0..cells {
                let local = backhaul.local_view(bs, &lambda, s);
                let values = dual_map_cell(&view, &local, bs)?;
                for (i, value) in values.into_iter().enumerate() {
                    let u = UserId::new(bs, i);
                    let v = s.flat(u);
                    let kind = if skips[v] {
                        EventKind::Skip
                    } else {
                        next[v] = value;
                        EventKind::Update
                    };
                    events.push(Event {
                        agent: Agent::Dual(u),
                        kind,
                    });
                }
            }
            lambda = next;
            rounds += 1;
            dc_iteration = Some(rounds);
        }

        if tick % sched.t_bf == 0 {
            for bs in 0..cells {
                let local = backhaul.local_view(bs, &lambda, s);
                cell_beamformers(&view, &local, bs, &mut w)?;
                events.push(Event {
                    agent: Agent::Beam(bs),
                    kind: EventKind::Beamform,
                });
            }
            gains = gain_table(s, &BeamformerSet::new(w.clone())?)?;
        }

        if tick % sched.t_pc == 0 {
            p = power_map(s, &gains, &p)?;
            events.extend(s.users().map(|u| Event {
                agent: Agent::Power(u),
                kind: EventKind::Power,
            }));
        }

        history.push(lambda.clone());
        records.push(record(
            s,
            tick,
            dc_iteration,
            &lambda,
            &p,
            &gains,
            max_staleness,
            events,
        ));
    }

    Ok(SimTrace {
        cells,
        users_per_cell: s.users_per_cell(),
        records,
    })
}

/// SHA-256 of the scenario's canonical JSON form.
pub fn scenario_hash(s: &Scenario) -> String {
    hex::encode(Sha256::digest(s.to_json().as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub trace_schema: String,
    pub version: String,
    pub scenario_sha256: String,
    pub mode: Mode,
    pub schedule: ScheduleSpec,
    pub seed: u64,
    pub lambda0: Vec<f64>,
}

impl RunManifest {
    pub fn new(s: &Scenario, sched: &ScheduleSpec, mode: Mode, start: &DualState) -> Self {
        Self {
            trace_schema: TRACE_SCHEMA.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            scenario_sha256: scenario_hash(s),
            mode,
            schedule: *sched,
            seed: sched.seed,
            lambda0: start.lambda.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_scenario, LayoutKind, LayoutSpec};
    use crate::dualsolve::{sync_solve, sync_trajectory, DualOptions};
    use crate::hermlin::HermitianMatrix;

    fn two_cell(seed: u64) -> Scenario {
        generate_scenario(&LayoutSpec::new(LayoutKind::TwoCellLine), 2, 2, 4, 0.1, 1e-12, seed).unwrap()
    }

    #[test]
    fn synchronous_schedule_matches_sync_trajectory() {
        let s = two_cell(3);
        let trace = run(&s, &ScheduleSpec::synchronous(30), Mode::MultiCell).unwrap();
        let sync = sync_trajectory(&s.view(), &DualState::zeros(4), 30).unwrap();
        let dc = trace.dc_lambdas();
        assert_eq!(dc.len(), sync.len());
        for (a, b) in dc.iter().zip(&sync) {
            assert_eq!(*a, b.as_slice());
        }
    }

    #[test]
    fn convergence_tick_matches_sync_iterations() {
        let s = Scenario::from_fn(
            1,
            1,
            2,
            |_, _| HermitianMatrix::from_real_diagonal(&[2.0, 1.0]),
            vec![1e-12],
            vec![1.0],
        )
        .unwrap();
        let trace = run(&s, &ScheduleSpec::synchronous(60), Mode::MultiCell).unwrap();
        let rep = sync_solve(&s.view(), &DualState::zeros(1), &DualOptions::default()).unwrap();
        assert_eq!(convergence_tick(&trace, 1e-5), Some(rep.iterations));
        let short = run(&s, &ScheduleSpec::synchronous(5), Mode::MultiCell).unwrap();
        assert_eq!(convergence_tick(&short, 1e-5), None);
        let at_fixed = run_from(
            &s,
            &ScheduleSpec::synchronous(5),
            Mode::MultiCell,
            &DualState::new(vec![0.5]),
        )
        .unwrap();
        assert_eq!(convergence_tick(&at_fixed, 1e-5), Some(1));
    }

    #[test]
    fn runs_are_deterministic() {
        let s = two_cell(1);
        let sched = ScheduleSpec {
            p_fail: 0.4,
            d_max: 3,
            horizon: 50,
            seed: 9,
            ..ScheduleSpec::default()
        };
        let a = run(&s, &sched, Mode::MultiCell).unwrap();
        let b = run(&s, &sched, Mode::MultiCell).unwrap();
        assert_eq!(a, b);
        let c = run(&s, &ScheduleSpec { seed: 10, ..sched }, Mode::MultiCell).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn staleness_is_bounded() {
        let s = two_cell(2);
        let sched = ScheduleSpec {
            p_fail: 0.3,
            d_max: 4,
            horizon: 80,
            seed: 1,
            ..ScheduleSpec::default()
        };
        let trace = run(&s, &sched, Mode::MultiCell).unwrap();
        assert!(trace.records.iter().all(|r| r.max_staleness <= 4));
        assert!(trace.records.iter().any(|r| r.max_staleness > 0));
    }

    #[test]
    fn schedule_validation() {
        let bad = |f: fn(&mut ScheduleSpec)| {
            let mut s = ScheduleSpec::default();
            f(&mut s);
            s.validate().is_err()
        };
        assert!(bad(|s| s.p_fail = 1.0));
        assert!(bad(|s| s.p_fail = -0.1));
        assert!(bad(|s| s.t_dc = 0));
        assert!(bad(|s| s.neighbor_threshold = f64::NAN));
        assert!(ScheduleSpec::default().validate().is_ok());
    }

    #[test]
    fn neighborhoods() {
        let s = generate_scenario(&LayoutSpec::new(LayoutKind::SquareCorners), 4, 2, 4, 0.1, 1e-12, 0).unwrap();
        assert_eq!(interference_neighborhood(&s, 0.0), Adjacency::complete(4));
        let single = Scenario::from_fn(
            1,
            1,
            2,
            |_, _| HermitianMatrix::from_real_diagonal(&[2.0, 1.0]),
            vec![1e-12],
            vec![1.0],
        )
        .unwrap();
        assert_eq!(interference_neighborhood(&single, 0.0).edge_count(), 0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let s = two_cell(0);
        let trace = run(&s, &ScheduleSpec::synchronous(3), Mode::MultiCell).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "tick,agent,event,lambda_0_0,lambda_0_1,lambda_1_0,lambda_1_1,total_power,min_sinr_margin"
        );
        // init + 3 ticks of (4 dual + 2 beam + 4 power) events
        assert_eq!(lines.count(), 1 + 3 * 10);
    }
}
