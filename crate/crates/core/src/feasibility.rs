//! Feasibility of the SINR targets for a fixed set of beamformers.
//!
//! With beamformers fixed, the SINR constraints read `(I - Gamma G) p >= eta`
//! where `G` holds the normalized cross gains and `eta` the noise-driven
//! lower bounds. Targets are reachable iff `rho(Gamma G) < 1`, equivalently
//! iff `I - Gamma G` is a K-matrix; the minimum power is then
//! `(I - Gamma G)^{-1} eta` with every constraint active.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::Scenario;
use crate::error::{Error, Result};
use crate::hermlin::spectral_radius_nonneg;
use crate::primal::{gain_table, BeamformerSet, PowerVector};

/// Spectral radii this close to 1 are reported infeasible and marginal.
pub const MARGINAL_BAND: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingSystem {
    g: DMatrix<f64>,
    gamma: Vec<f64>,
    eta: Vec<f64>,
}

impl CouplingSystem {
    pub fn new(g: DMatrix<f64>, gamma: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        let n = gamma.len();
        if g.nrows() != n || g.ncols() != n || eta.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: g.nrows().max(eta.len()),
            });
        }
        if g.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("coupling gains must be finite and >= 0".into()));
        }
        if (0..n).any(|k| g[(k, k)] != 0.0) {
            return Err(Error::InvalidParameter(
                "coupling matrix must have a zero diagonal".into(),
            ));
        }
        if gamma.iter().chain(&eta).any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("gamma and eta must be positive".into()));
        }
        Ok(Self { g, gamma, eta })
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// `Gamma G`.
    pub fn gamma_g(&self) -> DMatrix<f64> {
        let mut m = self.g.clone();
        for (r, &gam) in self.gamma.iter().enumerate() {
            m.row_mut(r).scale_mut(gam);
        }
        m
    }

    /// `I - Gamma G`.
    pub fn system_matrix(&self) -> DMatrix<f64> {
        DMatrix::identity(self.len(), self.len()) - self.gamma_g()
    }
}

/// `G[(m,i),(n,j)] = w_{n,j}^H R_{n,m,i} w_{n,j} / w_{m,i}^H R_{m,m,i} w_{m,i}`
/// off the diagonal, zero on it; `eta = gamma sigma2 / w^H R w`.
pub fn build_coupling(s: &Scenario, w: &BeamformerSet) -> Result<CouplingSystem> {
    let gains = gain_table(s, w)?;
    let mk = s.num_users();
    let mut eta = Vec::with_capacity(mk);
    for rx in 0..mk {
        let own = gains.get(rx, rx);
        if !(own > 0.0) {
            return Err(Error::DegenerateBeamformer(s.user(rx)));
        }
        eta.push(s.gammas()[rx] * s.noise()[rx] / own);
    }
    let g = DMatrix::from_fn(mk, mk, |rx, tx| {
        if rx == tx {
            0.0
        } else {
            gains.get(tx, rx) / gains.get(rx, rx)
        }
    });
    CouplingSystem::new(g, s.gammas().to_vec(), eta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub rho: f64,
    /// `|rho - 1| <= MARGINAL_BAND`; always reported infeasible.
    pub marginal: bool,
}

pub fn is_feasible(cs: &CouplingSystem) -> FeasibilityReport {
    let rho = spectral_radius_nonneg(&cs.gamma_g());
    let marginal = (rho - 1.0).abs() <= MARGINAL_BAND;
    FeasibilityReport {
        feasible: rho < 1.0 && !marginal,
        rho,
        marginal,
    }
}

/// Whether `I - Gamma G` is a K-matrix. It is a Z-matrix by construction,
/// and a Z-matrix is a K-matrix iff all its leading principal minors are
/// positive; the minors are tracked as pivots of unpivoted elimination.
pub fn k_matrix_test(cs: &CouplingSystem) -> bool {
    let mut a = cs.system_matrix();
    let n = a.nrows();
    debug_assert!((0..n).all(|r| (0..n).all(|c| r == c || a[(r, c)] <= 0.0)));
    for k in 0..n {
        let pivot = a[(k, k)];
        if !(pivot > 0.0) {
            return false;
        }
        for r in (k + 1)..n {
            let f = a[(r, k)] / pivot;
            if f != 0.0 {
                for c in (k + 1)..n {
                    a[(r, c)] -= f * a[(k, c)];
                }
            }
        }
    }
    true
}

/// `(I - Gamma G)^{-1} eta`.
pub fn min_power_vector(cs: &CouplingSystem) -> Result<PowerVector> {
    let report = is_feasible(cs);
    if !report.feasible {
        return Err(Error::Infeasible { rho: report.rho });
    }
    let eta = DVector::from_column_slice(cs.eta());
    let p = cs
        .system_matrix()
        .lu()
        .solve(&eta)
        .ok_or(Error::Infeasible { rho: report.rho })?;
    Ok(PowerVector::new(p.iter().map(|&v| v.max(0.0)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(gamma: f64, c: f64, eta: f64) -> CouplingSystem {
        CouplingSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.0, c, c, 0.0]),
            vec![gamma; 2],
            vec![eta; 2],
        )
        .unwrap()
    }

    #[test]
    fn symmetric_pair_radius() {
        let f = is_feasible(&pair(0.1, 2.0, 1.0));
        assert!(f.feasible && (f.rho - 0.2).abs() < 1e-12);
        let f = is_feasible(&pair(1.0, 2.0, 1.0));
        assert!(!f.feasible && (f.rho - 2.0).abs() < 1e-12);
    }

    #[test]
    fn k_matrix_pair() {
        assert!(k_matrix_test(&pair(0.1, 2.0, 1.0)));
        assert!(!k_matrix_test(&pair(1.0, 2.0, 1.0)));
        let none = CouplingSystem::new(DMatrix::zeros(3, 3), vec![0.5; 3], vec![1.0; 3]).unwrap();
        assert!(k_matrix_test(&none));
        assert_eq!(is_feasible(&none).rho, 0.0);
    }

    #[test]
    fn pair_min_power() {
        let eta0 = 3e-13;
        let p = min_power_vector(&pair(0.1, 2.0, eta0)).unwrap();
        for &v in p.as_slice() {
            assert!((v - eta0 / 0.8).abs() < 1e-12 * eta0);
        }
        assert!(matches!(
            min_power_vector(&pair(1.0, 2.0, eta0)),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn marginal_is_infeasible() {
        let f = is_feasible(&pair(0.5, 2.0, 1.0));
        assert!(f.marginal && !f.feasible);
    }

    #[test]
    fn rejects_malformed_systems() {
        assert!(CouplingSystem::new(DMatrix::from_element(2, 2, 1.0), vec![1.0; 2], vec![1.0; 2]).is_err());
        assert!(CouplingSystem::new(DMatrix::zeros(2, 2), vec![1.0; 2], vec![0.0; 2]).is_err());
        assert!(CouplingSystem::new(DMatrix::zeros(2, 2), vec![1.0; 3], vec![1.0; 3]).is_err());
    }
}
