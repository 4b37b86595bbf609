#![allow(dead_code)]

use mcbf::channel::{generate_with_sites, outward_sites, LayoutKind, LayoutSpec, Point, Scenario};
use mcbf::feasibility::CouplingSystem;
use mcbf::hermlin::{eig_hermitian, spectral_radius_nonneg, CMatrix, Complex64, HermitianMatrix};
use mcbf::primal::GainTable;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

/// `X X^H + eps I` with `eps` in `[0.05, 1)`.
pub fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> HermitianMatrix {
    let x = gaussian_matrix(rng, n, n);
    let eps = 0.05 + 0.95 * rng.random::<f64>();
    let m = &x * x.adjoint() + CMatrix::identity(n, n) * Complex64::new(eps, 0.0);
    HermitianMatrix::symmetrize(m)
}

/// PSD matrix of the given rank.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> HermitianMatrix {
    let y = gaussian_matrix(rng, n, rank);
    HermitianMatrix::symmetrize(&y * y.adjoint())
}

/// Reference `mu_plus` by restricting the pencil to `range(B)`: eliminate the
/// null-space block of `A` through its Schur complement, then whiten by the
/// nonzero eigenvalues of `B`.
pub fn schur_mu_plus(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    let eb = eig_hermitian(b).unwrap();
    let n = a.dim();
    let top = eb.max();
    let range: Vec<usize> = (0..n).filter(|&k| eb.eigenvalues[k] > 1e-10 * top).collect();
    let null: Vec<usize> = (0..n).filter(|&k| eb.eigenvalues[k] <= 1e-10 * top).collect();
    let u = &eb.eigenvectors;
    let at = u.adjoint() * a.matrix() * u;
    let pick = |rows: &[usize], cols: &[usize]| CMatrix::from_fn(rows.len(), cols.len(), |r, c| at[(rows[r], cols[c])]);
    let arr = pick(&range, &range);
    let s = if null.is_empty() {
        arr
    } else {
        let arn = pick(&range, &null);
        let ann = pick(&null, &null);
        let inv = ann.try_inverse().unwrap();
        arr - &arn * inv * arn.adjoint()
    };
    let d = CMatrix::from_fn(range.len(), range.len(), |r, c| {
        if r == c {
            Complex64::new(1.0 / eb.eigenvalues[range[r]].sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    eig_hermitian(&HermitianMatrix::symmetrize(&d * s * &d)).unwrap().min()
}

/// Physical scenario with `cells` sites on a regular polygon (or one site).
pub fn polygon_scenario(cells: usize, users: usize, antennas: usize, gamma: f64, seed: u64) -> Scenario {
    let params = LayoutSpec::new(LayoutKind::TwoCellLine);
    let d = params.inter_bs_distance;
    let positions: Vec<Point> = if cells == 1 {
        vec![Point::new(0.0, 0.0)]
    } else {
        let radius = d / (2.0 * (std::f64::consts::PI / cells as f64).sin());
        (0..cells)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / cells as f64;
                Point::new(radius * a.cos(), radius * a.sin())
            })
            .collect()
    };
    generate_with_sites(&params, &outward_sites(&positions), users, antennas, gamma, 1e-12, seed).unwrap()
}

/// Coupling system of size `n` with `rho(Gamma G) = target`.
pub fn random_coupling(rng: &mut ChaCha8Rng, n: usize, target: f64) -> CouplingSystem {
    let mut g = DMatrix::from_fn(n, n, |r, c| if r == c { 0.0 } else { rng.random::<f64>() });
    let gamma: Vec<f64> = (0..n).map(|_| 0.05 + 1.95 * rng.random::<f64>()).collect();
    let eta: Vec<f64> = (0..n).map(|_| 1e-13 * (0.1 + rng.random::<f64>())).collect();
    let mut gg = g.clone();
    for (r, &gm) in gamma.iter().enumerate() {
        gg.row_mut(r).scale_mut(gm);
    }
    let rho = spectral_radius_nonneg(&gg);
    if rho > 0.0 {
        g *= target / rho;
    }
    CouplingSystem::new(g, gamma, eta).unwrap()
}

/// A scenario and gain table whose power map has the fixed point
/// `(I - Gamma G)^{-1} eta` of `cs`: one user per cell, unit self gains.
pub fn realize_coupling(cs: &CouplingSystem) -> (Scenario, GainTable) {
    let n = cs.len();
    let sigma2: Vec<f64> = cs.eta().iter().zip(cs.gamma()).map(|(e, g)| e / g).collect();
    let s = Scenario::from_fn(
        n,
        1,
        2,
        |_, _| HermitianMatrix::identity(2),
        sigma2,
        cs.gamma().to_vec(),
    )
    .unwrap();
    let g = DMatrix::from_fn(n, n, |tx, rx| if tx == rx { 1.0 } else { cs.g()[(rx, tx)] });
    (s, GainTable::from_matrix(g).unwrap())
}
