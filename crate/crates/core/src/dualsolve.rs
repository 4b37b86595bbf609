//! Fixed-point machinery for the dual of the power-minimization problem.
//!
//! The dual variable `lambda_{m,i}` of user `(m,i)` is bounded by
//! `J_{m,i}(lambda) = mu_plus(c_{m,i} (I + sum_{n,j} lambda_{n,j} R_{m,n,j}), R_{m,m,i})`
//! with `c = (1 + 1/gamma)^{-1}`. `J` is a standard function (positive,
//! monotone, scalable), so `lambda <- J(lambda)` converges to the unique
//! fixed point from any nonnegative start, synchronously or with stale
//! inputs, and the fixed point is the dual optimum.

use serde::{Deserialize, Serialize};

use crate::channel::{Scenario, ScenarioView, UserId};
use crate::error::{Error, Result};
use crate::hermlin::{min_eigenvalue, min_nonneg_pencil_eig, HermitianMatrix};

/// Dual iterate together with its iteration counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda: Vec<f64>,
    pub t: usize,
}

impl DualState {
    pub fn new(lambda: Vec<f64>) -> Self {
        Self { lambda, t: 0 }
    }

    pub fn zeros(users: usize) -> Self {
        Self::new(vec![0.0; users])
    }

    pub fn uniform(users: usize, value: f64) -> Self {
        Self::new(vec![value; users])
    }

    pub fn validate(&self, users: usize) -> Result<()> {
        if self.lambda.len() != users {
            return Err(Error::InvalidStart(format!(
                "expected {users} dual variables, got {}",
                self.lambda.len()
            )));
        }
        if let Some(v) = self.lambda.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidStart(format!(
                "dual variables must be finite and >= 0, got {v}"
            )));
        }
        Ok(())
    }
}

/// `(1 + 1/gamma)^{-1}`.
pub fn sinr_weight(gamma: f64) -> f64 {
    gamma / (1.0 + gamma)
}

/// `I + sum_{n,j} lambda_{n,j} R_{bs,n,j}` over the users coupled to `bs`.
pub fn interference_sum(view: &ScenarioView<'_>, lambda: &[f64], bs: usize) -> HermitianMatrix {
    let s = view.scenario;
    let mut acc = HermitianMatrix::identity(s.antennas());
    for (flat, &l) in lambda.iter().enumerate() {
        let u = s.user(flat);
        if l != 0.0 && view.couples(bs, u.cell) {
            acc.add_scaled(l, s.corr(bs, u));
        }
    }
    acc
}

/// `J_{m,i}(lambda)`.
pub fn dual_map_component(view: &ScenarioView<'_>, lambda: &[f64], u: UserId) -> Result<f64> {
    let s = view.scenario;
    let a = interference_sum(view, lambda, u.cell).scaled(sinr_weight(s.gamma(u)));
    Ok(min_nonneg_pencil_eig(&a, s.corr(u.cell, u))?.mu_plus)
}

/// `J_{bs,i}(lambda)` for the users of cell `bs`, sharing one interference sum.
pub fn dual_map_cell(view: &ScenarioView<'_>, lambda: &[f64], bs: usize) -> Result<Vec<f64>> {
    let s = view.scenario;
    let sum = interference_sum(view, lambda, bs);
    (0..s.users_per_cell())
        .map(|i| {
            let u = UserId::new(bs, i);
            let a = sum.scaled(sinr_weight(s.gamma(u)));
            Ok(min_nonneg_pencil_eig(&a, s.corr(bs, u))?.mu_plus)
        })
        .collect()
}

/// `J(lambda)` for every user.
pub fn dual_map_values(view: &ScenarioView<'_>, lambda: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(view.scenario.num_users());
    for bs in 0..view.scenario.cells() {
        out.extend(dual_map_cell(view, lambda, bs)?);
    }
    Ok(out)
}

pub fn dual_map(view: &ScenarioView<'_>, state: &DualState) -> Result<DualState> {
    Ok(DualState {
        lambda: dual_map_values(view, &state.lambda)?,
        t: state.t + 1,
    })
}

/// `sum_{m,i} lambda_{m,i} sigma2_{m,i}`.
pub fn dual_objective(s: &Scenario, lambda: &[f64]) -> f64 {
    lambda.iter().zip(s.noise()).map(|(l, s2)| l * s2).sum()
}

/// `c_{m,i} (I + sum lambda R_{m,.}) - lambda_{m,i} R_{m,m,i}`, which must be
/// PSD for a dual-feasible `lambda`.
pub fn constraint_matrix(view: &ScenarioView<'_>, lambda: &[f64], u: UserId) -> HermitianMatrix {
    let s = view.scenario;
    let mut m = interference_sum(view, lambda, u.cell).scaled(sinr_weight(s.gamma(u)));
    m.add_scaled(-lambda[s.flat(u)], s.corr(u.cell, u));
    m
}

/// Smallest eigenvalue of [`constraint_matrix`].
pub fn constraint_slack(view: &ScenarioView<'_>, lambda: &[f64], u: UserId) -> Result<f64> {
    min_eigenvalue(&constraint_matrix(view, lambda, u))
}

pub fn constraint_slacks(view: &ScenarioView<'_>, lambda: &[f64]) -> Result<Vec<f64>> {
    view.scenario
        .users()
        .map(|u| constraint_slack(view, lambda, u))
        .collect()
}

/// Position of a starting point relative to its image under `J`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    /// `lambda <= J(lambda)`: dual feasible, iterates are nondecreasing.
    Below,
    /// `lambda >= J(lambda)`: iterates are nonincreasing.
    Above,
    /// `lambda == J(lambda)` (both of the above).
    Fixed,
    /// Neither ordering holds.
    Mixed,
}

pub fn classify_start(view: &ScenarioView<'_>, start: &DualState) -> Result<StartKind> {
    start.validate(view.scenario.num_users())?;
    let image = dual_map_values(view, &start.lambda)?;
    let below = start.lambda.iter().zip(&image).all(|(l, j)| l <= j);
    let above = start.lambda.iter().zip(&image).all(|(l, j)| l >= j);
    Ok(match (below, above) {
        (true, true) => StartKind::Fixed,
        (true, false) => StartKind::Below,
        (false, true) => StartKind::Above,
        (false, false) => StartKind::Mixed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualOptions {
    /// Stop once the Euclidean step `||lambda(t+1) - lambda(t)||` is at most this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 10_000,
        }
    }
}

/// Growth factor over the first iterate beyond which the iteration is
/// declared divergent.
const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualSolveReport {
    pub lambda_star: DualState,
    pub iterations: usize,
    /// Last step norm.
    pub residual: f64,
    /// `||lambda* - J(lambda*)||`.
    pub fixed_point_residual: f64,
    pub objective: f64,
    pub constraint_slacks: Vec<f64>,
}

pub(crate) fn norm2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Synchronous iteration `lambda(t+1) = J(lambda(t))` until the step norm
/// drops to `opts.tol`.
pub fn sync_solve(view: &ScenarioView<'_>, start: &DualState, opts: &DualOptions) -> Result<DualSolveReport> {
    let s = view.scenario;
    start.validate(s.num_users())?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("dual tolerance must be positive".into()));
    }
    let mut lambda = start.lambda.clone();
    let mut first_norm = None;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let next = dual_map_values(view, &lambda)?;
        residual = norm2(&next, &lambda);
        lambda = next;
        let norm = lambda.iter().map(|v| v * v).sum::<f64>().sqrt();
        let base = *first_norm.get_or_insert(norm.max(f64::MIN_POSITIVE));
        if !norm.is_finite() || norm > DIVERGENCE_FACTOR * base {
            return Err(Error::DualDivergence { iterations: it });
        }
        if residual <= opts.tol {
            let image = dual_map_values(view, &lambda)?;
            return Ok(DualSolveReport {
                fixed_point_residual: norm2(&image, &lambda),
                objective: dual_objective(s, &lambda),
                constraint_slacks: constraint_slacks(view, &lambda)?,
                lambda_star: DualState {
                    lambda,
                    t: start.t + it,
                },
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::DualNonConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// The first `steps + 1` synchronous iterates, starting with `start`.
pub fn sync_trajectory(view: &ScenarioView<'_>, start: &DualState, steps: usize) -> Result<Vec<Vec<f64>>> {
    start.validate(view.scenario.num_users())?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start.lambda.clone());
    for _ in 0..steps {
        let next = dual_map_values(view, out.last().expect("nonempty"))?;
        out.push(next);
    }
    Ok(out)
}
