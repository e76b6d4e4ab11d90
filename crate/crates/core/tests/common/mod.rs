//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use specprop::operators::{build_potentials, PotentialSet};
use specprop::soliton::{solve_ground_state, RadialProfile};
use specprop::{Problem, SolverSettings};

pub const SIGMAS: [f64; 4] = [2.0, 2.1, 2.5, 3.0];

pub fn profile(p: &Problem) -> Arc<RadialProfile> {
    Arc::new(solve_ground_state(p, &SolverSettings::for_problem(p)).expect("soliton"))
}

pub fn potentials(p: &Problem) -> Arc<PotentialSet> {
    Arc::new(build_potentials(profile(p), p))
}

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// 1d ground state `((1+σ)λ sech²(σ√λ x))^{1/(2σ)}`.
pub fn sech_profile(sigma: f64, x: f64) -> f64 {
    ((1.0 + sigma) / (sigma * x).cosh().powi(2)).powf(0.5 / sigma)
}
