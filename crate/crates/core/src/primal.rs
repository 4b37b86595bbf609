//! Primal recovery: beamformers from the null direction of `E_{m,i}(lambda)`
//! and powers from the fixed point of the power-control map.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{Coupling, Scenario, ScenarioView, UserId};
use crate::dualsolve::{
    dual_objective, interference_sum, sinr_weight, sync_solve, DualOptions, DualSolveReport, DualState,
};
use crate::error::{Error, Result};
use crate::feasibility::{build_coupling, is_feasible};
use crate::hermlin::{eig_hermitian, normalize_phase, CVector, HermitianMatrix};

/// Eigenvalues whose magnitude is within this of the smallest magnitude are
/// treated as tied in [`beamform`].
pub const TIE_TOL: f64 = 1e-12;

/// Unit-norm beamformers, one per user in flat order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamformerSet {
    w: Vec<CVector>,
}

impl BeamformerSet {
    /// Normalizes each vector; all must share one nonzero length.
    pub fn new(w: Vec<CVector>) -> Result<Self> {
        let n = w.first().map_or(0, |v| v.len());
        let mut out = Vec::with_capacity(w.len());
        for v in w {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
            let norm = v.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::InvalidParameter("beamformer must be nonzero and finite".into()));
            }
            out.push(v.unscale(norm));
        }
        Ok(Self { w: out })
    }

    /// Principal eigenvector of each user's own-link correlation.
    pub fn principal(s: &Scenario) -> Result<Self> {
        let w = s
            .users()
            .map(|u| {
                let e = eig_hermitian(s.corr(u.cell, u))?;
                Ok(normalize_phase(e.eigenvector(e.eigenvalues.len() - 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(w)
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn get(&self, flat: usize) -> &CVector {
        &self.w[flat]
    }

    pub fn iter(&self) -> impl Iterator<Item = &CVector> {
        self.w.iter()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerVector(Vec<f64>);

impl PowerVector {
    pub fn new(p: Vec<f64>) -> Self {
        Self(p)
    }

    pub fn zeros(users: usize) -> Self {
        Self(vec![0.0; users])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// `g[(tx, rx)] = w_tx^H R_{cell(tx), rx} w_tx`, the mean gain from the
/// beam of user `tx` at user `rx`.
#[derive(Clone, Debug, PartialEq)]
pub struct GainTable {
    g: DMatrix<f64>,
}

impl GainTable {
    pub fn from_matrix(g: DMatrix<f64>) -> Result<Self> {
        if g.nrows() != g.ncols() {
            return Err(Error::NotSquare {
                rows: g.nrows(),
                cols: g.ncols(),
            });
        }
        if g.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("gains must be finite and >= 0".into()));
        }
        Ok(Self { g })
    }

    pub fn get(&self, tx: usize, rx: usize) -> f64 {
        self.g[(tx, rx)]
    }

    pub fn len(&self) -> usize {
        self.g.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.g.nrows() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn self_gain(&self, u: usize) -> f64 {
        self.g[(u, u)]
    }
}

/// `I + sum lambda R_{m,.} - (1 + 1/gamma) lambda_{m,i} R_{m,m,i}`.
pub fn build_e(view: &ScenarioView<'_>, lambda: &[f64], u: UserId) -> HermitianMatrix {
    let s = view.scenario;
    let mut e = interference_sum(view, lambda, u.cell);
    let gamma = s.gamma(u);
    e.add_scaled(-(1.0 + 1.0 / gamma) * lambda[s.flat(u)], s.corr(u.cell, u));
    e
}

/// Unit eigenvector of `e` for its eigenvalue of least magnitude. Ties go to
/// the smallest index in ascending eigenvalue order.
pub fn beamform(e: &HermitianMatrix) -> Result<CVector> {
    let dec = eig_hermitian(e)?;
    let least = dec.eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    let k = dec
        .eigenvalues
        .iter()
        .position(|v| v.abs() - least <= TIE_TOL)
        .expect("nonempty spectrum");
    let v = dec.eigenvector(k);
    let norm = v.norm();
    Ok(normalize_phase(v.unscale(norm)))
}

pub fn beamformers(view: &ScenarioView<'_>, lambda: &[f64]) -> Result<BeamformerSet> {
    let s = view.scenario;
    let w = s
        .users()
        .map(|u| beamform(&build_e(view, lambda, u)))
        .collect::<Result<Vec<_>>>()?;
    BeamformerSet::new(w)
}

pub fn gain_table(s: &Scenario, w: &BeamformerSet) -> Result<GainTable> {
    let mk = s.num_users();
    if w.len() != mk {
        return Err(Error::DimensionMismatch {
            expected: mk,
            got: w.len(),
        });
    }
    let g = DMatrix::from_fn(mk, mk, |tx, rx| {
        let bs = s.user(tx).cell;
        s.corr(bs, s.user(rx)).quad_form(w.get(tx)).max(0.0)
    });
    GainTable::from_matrix(g)
}

fn check_self_gains(s: &Scenario, g: &GainTable) -> Result<()> {
    if g.len() != s.num_users() {
        return Err(Error::DimensionMismatch {
            expected: s.num_users(),
            got: g.len(),
        });
    }
    match (0..g.len()).find(|&u| !(g.self_gain(u) > 0.0)) {
        Some(u) => Err(Error::ZeroSelfGain(s.user(u))),
        None => Ok(()),
    }
}

fn apply_power_map(s: &Scenario, g: &GainTable, p: &[f64], out: &mut [f64]) {
    let mk = g.len();
    for (rx, slot) in out.iter_mut().enumerate().take(mk) {
        let received: f64 = (0..mk).map(|tx| p[tx] * g.get(tx, rx)).sum();
        *slot = (received + s.noise()[rx]) * sinr_weight(s.gammas()[rx]) / g.self_gain(rx);
    }
}

/// `I_{m,i}(p) = (sum_{n,j} p_{n,j} g_{(n,j),(m,i)} + sigma2) c / g_self`, with
/// the sum running over every user including `(m,i)`.
pub fn power_map(s: &Scenario, g: &GainTable, p: &PowerVector) -> Result<PowerVector> {
    check_self_gains(s, g)?;
    if p.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            got: p.len(),
        });
    }
    let mut out = vec![0.0; p.len()];
    apply_power_map(s, g, p.as_slice(), &mut out);
    Ok(PowerVector(out))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    /// Stop once `||p(t+1) - p(t)|| <= max(abs_tol, rel_tol ||p(t+1)||)`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            abs_tol: 0.0,
            max_iter: 100_000,
        }
    }
}

const POWER_DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSolution {
    pub p: PowerVector,
    pub iterations: usize,
}

/// Iterates `p <- I(p)` from `p0` to its fixed point.
pub fn power_solve(s: &Scenario, g: &GainTable, p0: &PowerVector, opts: &PowerOptions) -> Result<PowerSolution> {
    check_self_gains(s, g)?;
    if p0.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            got: p0.len(),
        });
    }
    if p0.as_slice().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("initial powers must be finite and >= 0".into()));
    }
    if !(opts.rel_tol >= 0.0 && opts.abs_tol >= 0.0) || opts.rel_tol + opts.abs_tol == 0.0 {
        return Err(Error::InvalidParameter("power tolerance must be positive".into()));
    }
    let mut p = p0.as_slice().to_vec();
    let mut next = vec![0.0; p.len()];
    let mut base = None;
    for it in 1..=opts.max_iter {
        apply_power_map(s, g, &p, &mut next);
        let step = crate::dualsolve::norm2(&next, &p);
        std::mem::swap(&mut p, &mut next);
        let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let first = *base.get_or_insert(norm.max(f64::MIN_POSITIVE));
        if !norm.is_finite() || norm > POWER_DIVERGENCE_FACTOR * first {
            return Err(Error::PowerDivergence { iterations: it });
        }
        if step <= opts.abs_tol.max(opts.rel_tol * norm) {
            return Ok(PowerSolution {
                p: PowerVector(p),
                iterations: it,
            });
        }
    }
    Err(Error::PowerNonConvergence {
        iterations: opts.max_iter,
    })
}

/// Mean SINR of every user under beamformers `w` and powers `p`.
pub fn achieved_sinr(s: &Scenario, w: &BeamformerSet, p: &PowerVector) -> Result<Vec<f64>> {
    let g = gain_table(s, w)?;
    Ok(sinr_from_gains(s, &g, p))
}

pub fn sinr_from_gains(s: &Scenario, g: &GainTable, p: &PowerVector) -> Vec<f64> {
    let mk = g.len();
    let p = p.as_slice();
    (0..mk)
        .map(|rx| {
            let interference: f64 = (0..mk).filter(|&tx| tx != rx).map(|tx| p[tx] * g.get(tx, rx)).sum();
            p[rx] * g.get(rx, rx) / (interference + s.noise()[rx])
        })
        .collect()
}

/// View in which each BS ignores other cells' users when forming duals and
/// beamformers.
pub fn single_cell_mode(s: &Scenario) -> ScenarioView<'_> {
    ScenarioView::new(s, Coupling::IntraCell)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkSolution {
    pub dual: DualSolveReport,
    pub beamformers: BeamformerSet,
    pub power: PowerVector,
    pub power_iterations: usize,
    pub sinr: Vec<f64>,
    pub total_power: f64,
    pub dual_objective: f64,
    /// `|total_power - dual_objective| / total_power`.
    pub gap_rel: f64,
    pub rho: f64,
}

impl NetworkSolution {
    /// `(sinr - gamma) / gamma` per user.
    pub fn sinr_margins(&self, s: &Scenario) -> Vec<f64> {
        self.sinr.iter().zip(s.gammas()).map(|(x, g)| (x - g) / g).collect()
    }
}

/// Dual solve, beamformer recovery and power control. Duals and beamformers
/// follow the view's coupling; gains and powers always use the full
/// scenario.
pub fn solve_network(
    view: &ScenarioView<'_>,
    start: &DualState,
    dual_opts: &DualOptions,
    power_opts: &PowerOptions,
) -> Result<NetworkSolution> {
    let s = view.scenario;
    let dual = sync_solve(view, start, dual_opts)?;
    let w = beamformers(view, &dual.lambda_star.lambda)?;
    let rho = is_feasible(&build_coupling(s, &w)?).rho;
    if !(rho < 1.0) {
        return Err(Error::Infeasible { rho });
    }
    let g = gain_table(s, &w)?;
    let sol = power_solve(s, &g, &PowerVector::zeros(s.num_users()), power_opts)?;
    let sinr = sinr_from_gains(s, &g, &sol.p);
    let total_power = sol.p.total();
    let dual_obj = dual_objective(s, &dual.lambda_star.lambda);
    Ok(NetworkSolution {
        gap_rel: (total_power - dual_obj).abs() / total_power,
        dual,
        beamformers: w,
        power_iterations: sol.iterations,
        power: sol.p,
        sinr,
        total_power,
        dual_objective: dual_obj,
        rho,
    })
}
