//! Oscillation counting: convergence, linearity, certificates and monotonicity.

mod common;

use common::*;
use proptest::prelude::*;
use specprop::index::{compute_index, index_trajectory, verify_monotonicity};
use specprop::ivp::asymptotics::FreeBasis;
use specprop::ivp::{count_zeros, integrate_ivp};
use specprop::operators::{commutator_operator, regularize, Block, Sign};
use specprop::{Problem, SolverSettings};

fn blocks(p: &Problem) -> Vec<(Sign, Block)> {
    specprop::certificate::certified_blocks(p)
}

#[test]
fn index_regression_values() {
    let p = Problem::cubic_3d();
    let pot = potentials(&p);
    let s = SolverSettings::for_problem(&p);
    let expected = [(Sign::Plus, 0, 1), (Sign::Plus, 1, 1), (Sign::Plus, 2, 0), (Sign::Minus, 0, 1), (Sign::Minus, 1, 0)];
    for (sign, k, n) in expected {
        let op = commutator_operator(pot.clone(), sign, Block::Harmonic(k), 3, 0.0).unwrap();
        assert_eq!(compute_index(&op, &s).unwrap().index, n, "{}", op.label());
    }
    for sigma in SIGMAS {
        let p = Problem::one_d(sigma);
        let pot = potentials(&p);
        let s = SolverSettings::for_problem(&p);
        for (sign, block, n) in [(Sign::Plus, Block::Even, 1), (Sign::Minus, Block::Even, 1), (Sign::Plus, Block::Odd, 1), (Sign::Minus, Block::Odd, 0)] {
            let op = commutator_operator(pot.clone(), sign, block, 1, 0.0).unwrap();
            assert_eq!(compute_index(&op, &s).unwrap().index, n, "sigma {sigma} {}", op.label());
        }
    }
}

#[test]
fn crossings_and_fits_converge_under_tolerance_halving() {
    for p in [Problem::cubic_3d(), Problem::one_d(2.5)] {
        let pot = potentials(&p);
        let s = SolverSettings::for_problem(&p);
        let half = SolverSettings { tol: s.tol / 2.0, ..s };
        for (sign, block) in blocks(&p) {
            let op = commutator_operator(pot.clone(), sign, block, p.dimension, 0.0).unwrap();
            let a = compute_index(&op, &s).unwrap();
            let b = compute_index(&op, &half).unwrap();
            assert_eq!(a.index, b.index);
            for (x, y) in a.crossings.iter().zip(&b.crossings) {
                assert!((x - y).abs() < 1e-8, "{}: {x} vs {y}", op.label());
            }
            let scale = a.c0.abs().max(a.c1.abs());
            assert!((a.c0 - b.c0).abs() < 1e-3 * scale && (a.c1 - b.c1).abs() < 1e-3 * scale, "{}", op.label());
        }
    }
}

#[test]
fn index_is_stable_under_longer_domains() {
    for p in [Problem::cubic_3d(), Problem::one_d(2.1)] {
        let pot = potentials(&p);
        let s = SolverSettings::for_problem(&p);
        let long = SolverSettings { r_max: 1.25 * s.r_max, ..s };
        for (sign, block) in blocks(&p) {
            let op = commutator_operator(pot.clone(), sign, block, p.dimension, 0.0).unwrap();
            assert_eq!(compute_index(&op, &s).unwrap().index, compute_index(&op, &long).unwrap().index);
        }
    }
}

#[test]
fn no_further_zeros_past_the_last_crossing() {
    let p = Problem::cubic_3d();
    let pot = potentials(&p);
    let s = SolverSettings::for_problem(&p);
    for (sign, block) in blocks(&p) {
        let op = commutator_operator(pot.clone(), sign, block, 3, 0.0).unwrap();
        let (res, traj) = index_trajectory(&op, &s).unwrap();
        let basis = FreeBasis { dimension: 3, k: block.k() };
        let start = res.crossings.last().copied().unwrap_or(0.0).max(0.8 * s.r_max);
        for i in 0..=100 {
            let r = start + (s.r_max - start) * i as f64 / 100.0;
            let (b0, b1) = basis.eval(r);
            let fit = res.c0 * b0 + res.c1 * b1;
            assert!(fit != 0.0 && fit.signum() == traj.physical(r).signum(), "{} at {r}", op.label());
        }
    }
}

#[test]
fn monotone_in_k_for_every_family() {
    let p = Problem::cubic_3d();
    let pot = potentials(&p);
    let s = SolverSettings::for_problem(&p);
    for sign in [Sign::Plus, Sign::Minus] {
        let fam: Vec<_> = (0..6)
            .map(|k| compute_index(&commutator_operator(pot.clone(), sign, Block::Harmonic(k), 3, 0.0).unwrap(), &s).unwrap())
            .collect();
        assert!(verify_monotonicity(&fam), "{sign:?}");
        assert_eq!(fam.last().unwrap().index, 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trajectories_scale_linearly(c in prop_oneof![-50.0..-0.01f64, 0.01..50.0f64], k in 0usize..3) {
        let p = Problem::cubic_3d();
        let pot = potentials(&p);
        let s = SolverSettings::for_problem(&p);
        let op = regularize(&commutator_operator(pot, Sign::Plus, Block::Harmonic(k), 3, 0.0).unwrap());
        let (u0, v0) = op.origin_ic();
        let a = integrate_ivp(&op, (u0, v0), s.r_max, s.tol).unwrap();
        let b = integrate_ivp(&op, (c * u0, c * v0), s.r_max, s.tol).unwrap();
        for i in 1..50 {
            let r = i as f64 * 0.2;
            let (x, y) = (a.value(r), b.value(r));
            prop_assert!((c * x - y).abs() <= 1e-10 * (c * x).abs().max(1e-300) + 1e-13 * c.abs());
        }
        prop_assert_eq!(count_zeros(&a).unwrap().0, count_zeros(&b).unwrap().0);
    }
}
