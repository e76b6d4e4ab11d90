//! Certificates: verdicts, ledger consistency, bound composition and Mourre bounds.

mod common;

use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use specprop::bvp::{solve_eigenmode, solve_linear_system, ArtificialBC, Rhs};
use specprop::certificate::{certify, compose_bound, final_delta, gram_reduce, Certificate, CertifyOptions, Conditions, Verdict};
use specprop::mourre::{harmonic_bound, large_eigenvalue_bound, mourre_report, ALPHA_CEILING};
use specprop::operators::{commutator_operator, regularize, Block, Sign};
use specprop::{Problem, SolverSettings};

fn run(p: Problem, conditions: Conditions) -> Certificate {
    let opts = CertifyOptions { conditions, ..CertifyOptions::default() };
    certify(profile(&p), &SolverSettings::for_problem(&p), &opts).unwrap().0
}

#[test]
fn verdicts_of_the_published_problems() {
    let c = run(Problem::cubic_3d(), Conditions::Natural);
    assert_eq!(c.verdict, Verdict::Holds);
    assert!(c.blocks.iter().all(|b| b.positive));
    for s in [2.5, 3.0] {
        assert_eq!(run(Problem::one_d(s), Conditions::Natural).verdict, Verdict::Holds, "sigma {s}");
    }
    let c = run(Problem::one_d(2.1), Conditions::Natural);
    assert_eq!(c.verdict, Verdict::Inconclusive);
    assert!(c.failing_block.as_deref().unwrap().contains("J1^(e)"));
    assert!((c.failing_value.unwrap() - 0.216284).abs() < 0.005 * 0.216284);

    let c = run(Problem::one_d(2.0), Conditions::Natural);
    assert_eq!(c.verdict, Verdict::Inconclusive);
    assert!(c.gram["J^(e)"].value > 0.0 && !c.gram["J^(e)"].positive);

    let c = run(Problem::one_d(2.0), Conditions::Fmr);
    let minus_even = c.blocks.iter().find(|b| b.operator == "calL-^(e)").unwrap();
    assert!(minus_even.positive && minus_even.rule == "gram");
}

#[test]
fn fmr_first_entry_equals_the_natural_value() {
    let c = run(Problem::one_d(2.0), Conditions::Fmr);
    let (a, b) = (c.ledger.get("Jhat1^(e)").unwrap(), c.ledger.get("J1^(e)").unwrap());
    assert!((a - b).abs() < 1e-6);
    assert!(c.consistency.jhat1_vs_j1.unwrap() < 1e-6);
}

#[test]
fn gram_values_recompute_from_the_ledger() {
    for (p, cond, name, parts, quoted) in [
        (Problem::cubic_3d(), Conditions::Natural, "K^(0)", ["K1^(0)", "K2^(0)", "K3^(0)"], -5.22138),
        (Problem::one_d(2.0), Conditions::Natural, "J^(e)", ["J1^(e)", "J2^(e)", "J3^(e)"], 0.0948958),
        (Problem::one_d(2.0), Conditions::Fmr, "Jhat^(e)", ["Jhat1^(e)", "Jhat2^(e)", "Jhat3^(e)"], -0.339932),
    ] {
        let c = run(p, cond);
        let [k1, k2, k3] = parts.map(|n| c.ledger.get(n).unwrap());
        let direct = k1 - k3 * k3 / k2;
        let g = c.gram[name].value;
        assert!((direct - g).abs() <= 1e-3 * g.abs());
        assert!((direct - quoted).abs() <= 1e-2 * quoted.abs(), "{name}: {direct}");
    }
}

#[test]
fn gram_is_independent_of_the_eigenmode_normalization() {
    let p = Problem::cubic_3d();
    let pot = potentials(&p);
    let s = SolverSettings::for_problem(&p);
    let em = Arc::new(solve_eigenmode(&pot, &s).unwrap());
    let prof = profile(&p);
    let op = commutator_operator(pot, Sign::Plus, Block::Harmonic(0), 3, 0.0).unwrap();
    let bc = ArtificialBC::for_operator(&regularize(&op));
    let gram_for = |c: f64| {
        let (pr, e) = (prof.clone(), em.clone());
        let rhs = [Rhs::new("R", move |r| pr.value(r)), Rhs::new("c phi2", move |r| c * e.phi2(r))];
        let g = solve_linear_system(&op, &rhs, bc, &s).unwrap().gram;
        gram_reduce(g[0][0].value, g[1][1].value, g[0][1].value).unwrap()
    };
    let base = gram_for(1.0);
    for c in [-3.7, 0.01, 250.0] {
        let g = gram_for(c);
        assert!((g - base).abs() < 1e-10 * base.abs(), "c = {c}: {g} vs {base}");
    }
}

proptest! {
    #[test]
    fn gram_reduce_scale_invariance(k1 in -10.0..10.0f64, k2 in 0.01..10.0f64, k3 in -10.0..10.0f64, c in prop_oneof![-1e3..-1e-3f64, 1e-3..1e3f64]) {
        let a = gram_reduce(k1, k2, k3).unwrap();
        let b = gram_reduce(k1, c * c * k2, c * k3).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn bound_composition_for_certified_problems() {
    for p in [Problem::cubic_3d(), Problem::one_d(3.0)] {
        let c = run(p, Conditions::Natural);
        let b = c.bound.expect("bound");
        assert!(b.theta_star > 0.0 && b.theta_star <= 1.0);
        assert_eq!(b.final_delta, final_delta(b.theta_star, b.delta0));
        assert!(b.final_delta > 0.0);
        // Perturbation keeps every positive block positive.
        let d0 = c.perturbation.delta0.unwrap();
        assert_eq!(b.delta0, d0);
        assert!(c.perturbation.ledger_checks.iter().any(|&(d, ok)| d == d0 && ok));
    }
    let p = Problem::one_d(2.5);
    assert!(compose_bound(-1.0, &potentials(&p), &SolverSettings::for_problem(&p)).is_err());
}

#[test]
fn mourre_bounds_are_finite_and_reported() {
    let p = Problem::cubic_3d();
    let pot = potentials(&p);
    let m = mourre_report(&pot).unwrap();
    let e = &m.eigenvalue;
    assert!(e.c1.is_finite() && e.c2.is_finite());
    if e.c2 < 1.0 {
        assert!(e.applicable && e.mu0.unwrap() > p.lambda);
    } else {
        assert!(!e.applicable && e.mu0.is_none());
    }
    let h = m.harmonic.unwrap();
    let (alpha, k) = (h.alpha0.unwrap(), h.k_cutoff.unwrap());
    assert!(alpha.is_finite() && alpha < ALPHA_CEILING);
    // k_cutoff is the first k with k(k+1) ≥ α0².
    assert!((k * (k + 1)) as f64 >= alpha * alpha);
    assert!(k == 0 || (((k - 1) * k) as f64) < alpha * alpha);
}

#[test]
fn mourre_constants_shrink_with_the_potentials() {
    let p = Problem::cubic_3d();
    let pot = potentials(&p);
    let half = pot.scaled(0.5);
    let (a, b) = (large_eigenvalue_bound(&pot), large_eigenvalue_bound(&half));
    assert!(b.c1 < a.c1 && b.c2 < a.c2);
    if let (Some(x), Some(y)) = (a.mu0, b.mu0) {
        assert!(y < x);
    }
    let ha = harmonic_bound(&pot, ALPHA_CEILING).unwrap().alpha0.unwrap();
    let hb = harmonic_bound(&half, ALPHA_CEILING).unwrap().alpha0.unwrap();
    assert!(hb < ha);
}

#[test]
fn harmonics_below_the_cutoff_are_certified() {
    let c = run(Problem::cubic_3d(), Conditions::Natural);
    let k_cut = c.mourre.harmonic.as_ref().unwrap().k_cutoff.unwrap() as usize;
    for sign in ["+", "-"] {
        for k in 0..k_cut {
            let covered = c.blocks.iter().any(|b| {
                let bk: usize = b.operator[7..b.operator.len() - 1].parse().unwrap();
                b.operator.starts_with(&format!("calL{sign}")) && b.positive && (bk == k || (b.covers_higher_harmonics && bk <= k))
            });
            assert!(covered, "calL{sign}^({k}) not covered");
        }
    }
}
