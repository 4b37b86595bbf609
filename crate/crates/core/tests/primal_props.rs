mod common;

use common::{polygon_scenario, random_coupling, realize_coupling, rng};
use mcbf::dualsolve::{DualOptions, DualState};
use mcbf::experiments::square_scenario;
use mcbf::hermlin::HermitianMatrix;
use mcbf::primal::{
    beamform, build_e, power_map, power_solve, single_cell_mode, sinr_from_gains, solve_network, PowerOptions,
    PowerVector,
};
use mcbf::Error;
use proptest::prelude::*;
use rand::Rng;

fn solve(s: &mcbf::channel::Scenario) -> mcbf::primal::NetworkSolution {
    solve_network(
        &s.view(),
        &DualState::zeros(s.num_users()),
        &DualOptions::default(),
        &PowerOptions::default(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn beamformer_is_an_exact_eigenvector(seed in any::<u64>(), n in 2usize..8) {
        let mut r = rng(seed);
        let a = common::random_psd(&mut r, n, n);
        let mut e = HermitianMatrix::identity(n);
        e.add_scaled(-r.random::<f64>() * 2.0 / a.frobenius_norm(), &a);
        let w = beamform(&e).unwrap();
        prop_assert!((w.norm() - 1.0).abs() < 1e-14);
        let ew = e.matrix() * &w;
        let beta = w.dotc(&ew);
        prop_assert!((ew - &w * beta).norm() <= 1e-9);
    }

    #[test]
    fn power_map_is_standard(seed in any::<u64>(), n in 1usize..8) {
        let mut r = rng(seed);
        let target = 0.9 * r.random::<f64>();
        let cs = random_coupling(&mut r, n, target);
        let (s, g) = realize_coupling(&cs);
        let p: Vec<f64> = (0..n).map(|_| 1e-12 * r.random::<f64>()).collect();
        let q: Vec<f64> = p.iter().map(|v| v * r.random::<f64>()).collect();
        let ip = power_map(&s, &g, &PowerVector::new(p.clone())).unwrap();
        let iq = power_map(&s, &g, &PowerVector::new(q)).unwrap();
        prop_assert!(ip.as_slice().iter().all(|&v| v > 0.0));
        prop_assert!(ip.as_slice().iter().zip(iq.as_slice()).all(|(a, b)| a >= b));
        let scaled = power_map(&s, &g, &PowerVector::new(p.iter().map(|v| 2.0 * v).collect())).unwrap();
        prop_assert!(ip.as_slice().iter().zip(scaled.as_slice()).all(|(a, b)| 2.0 * a > *b));
        // p >= I(p) exactly when every SINR target is met
        let sinr = sinr_from_gains(&s, &g, &PowerVector::new(p.clone()));
        for k in 0..n {
            let meets = sinr[k] >= cs.gamma()[k];
            let dominates = p[k] >= ip.as_slice()[k];
            let close = ((sinr[k] - cs.gamma()[k]) / cs.gamma()[k]).abs() < 1e-9;
            prop_assert!(meets == dominates || close);
        }
    }

    #[test]
    fn optimum_is_dual_consistent(seed in 0u64..500) {
        let s = polygon_scenario(3, 2, 4, 0.1, seed);
        let sol = solve(&s);
        prop_assert!(sol.gap_rel <= 1e-6);
        for m in sol.sinr_margins(&s) {
            prop_assert!(m.abs() <= 1e-6);
        }
        let pmax = sol.power.as_slice().iter().fold(0.0f64, |a, &v| a.max(v));
        for u in s.users() {
            let k = s.flat(u);
            let e = build_e(&s.view(), &sol.dual.lambda_star.lambda, u);
            let cs = sol.power.as_slice()[k] * e.quad_form(sol.beamformers.get(k));
            prop_assert!(cs.abs() <= 1e-8 * pmax);
        }
    }
}

#[test]
fn single_link_beamformer_is_principal() {
    let s = mcbf::channel::Scenario::from_fn(
        1,
        1,
        2,
        |_, _| HermitianMatrix::from_real_diagonal(&[2.0, 1.0]),
        vec![1e-12],
        vec![1.0],
    )
    .unwrap();
    let e = build_e(&s.view(), &[0.5], mcbf::channel::UserId::new(0, 0));
    assert!((e.matrix() - HermitianMatrix::from_real_diagonal(&[0.0, 0.5]).matrix()).norm() < 1e-15);
}

#[test]
fn one_cell_modes_coincide() {
    let s = polygon_scenario(1, 3, 4, 0.2, 4);
    let a = solve(&s);
    let b = solve_network(
        &single_cell_mode(&s),
        &DualState::zeros(3),
        &DualOptions::default(),
        &PowerOptions::default(),
    )
    .unwrap();
    assert_eq!(a.dual.lambda_star, b.dual.lambda_star);
    assert_eq!(a.power, b.power);
}

#[test]
fn single_cell_costs_more() {
    for seed in 0..5 {
        let s = square_scenario(2, 0.3, seed).unwrap();
        let multi = solve(&s);
        let single = solve_network(
            &single_cell_mode(&s),
            &DualState::zeros(8),
            &DualOptions::default(),
            &PowerOptions::default(),
        )
        .unwrap();
        assert!(single.total_power >= multi.total_power * (1.0 - 1e-9));
    }
}

#[test]
fn infeasible_pair_diverges() {
    let mut r = rng(1);
    let cs = random_coupling(&mut r, 2, 1.5);
    let (s, g) = realize_coupling(&cs);
    let err = power_solve(&s, &g, &PowerVector::zeros(2), &PowerOptions::default()).unwrap_err();
    assert!(matches!(err, Error::PowerDivergence { .. }), "{err}");
}

#[test]
fn zero_power_gives_zero_sinr() {
    let mut r = rng(2);
    let cs = random_coupling(&mut r, 3, 0.5);
    let (s, g) = realize_coupling(&cs);
    let out = sinr_from_gains(&s, &g, &PowerVector::zeros(3));
    assert!(out.iter().all(|&v| v == 0.0));
}
