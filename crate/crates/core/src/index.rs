//! Index of the commutator forms by Sturm oscillation counting.
//!
//! The index of a block equals the number of zeros of its distinguished
//! solution from the origin. A count is only accepted together with a
//! far-field fit whose sign structure rules out zeros past `r_max`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ivp::asymptotics::FreeBasis;
use crate::ivp::{count_zeros, fit_asymptotics, integrate_ivp, Trajectory, FIT_FRACTION};
use crate::operators::{regularize, Block, RadialOperator, Sign};
use crate::problem::SolverSettings;

/// Zero count of one block with its no-further-zeros certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexResult {
    pub operator: String,
    pub sign: Sign,
    pub block: Block,
    pub index: usize,
    pub crossings: Vec<f64>,
    pub c0: f64,
    pub c1: f64,
    pub fit_residual: f64,
    pub stabilized: bool,
    pub delta0: f64,
}

/// Integrates the distinguished solution of `op` and returns it with its index.
pub fn index_trajectory(op: &RadialOperator, settings: &SolverSettings) -> Result<(IndexResult, Trajectory)> {
    let reg = regularize(op);
    let traj = integrate_ivp(&reg, op.origin_ic(), settings.r_max, settings.tol)?;
    let (n, crossings) = count_zeros(&traj).map_err(|e| match e {
        Error::AmbiguousCrossing { r } => Error::InconclusiveIndex(format!(
            "{}: tangential near-zero at r = {r}; tighten the tolerance",
            op.label()
        )),
        other => other,
    })?;
    let fit = fit_asymptotics(&traj, op.k(), op.dimension)?;

    let window = (1.0 - FIT_FRACTION) * settings.r_max;
    if let Some(&last) = crossings.last() {
        if last >= window {
            return Err(Error::InconclusiveIndex(format!(
                "{}: crossing at r = {last} lies inside the fit window",
                op.label()
            )));
        }
    }
    let basis = FreeBasis {
        dimension: op.dimension,
        k: op.k(),
    };
    if let Some(root) = basis.root_beyond(fit.c0, fit.c1, window) {
        return Err(Error::InconclusiveIndex(format!(
            "{}: far-field fit predicts a further zero at r = {root}",
            op.label()
        )));
    }
    for i in 0..=20 {
        let r = window + (settings.r_max - window) * i as f64 / 20.0;
        let (b0, b1) = basis.eval(r);
        let g = fit.c0 * b0 + fit.c1 * b1;
        if g * traj.physical(r) <= 0.0 {
            return Err(Error::InconclusiveIndex(format!(
                "{}: sign of the solution disagrees with its far-field fit at r = {r}",
                op.label()
            )));
        }
    }

    Ok((
        IndexResult {
            operator: op.label(),
            sign: op.sign,
            block: op.block,
            index: n,
            crossings,
            c0: fit.c0,
            c1: fit.c1,
            fit_residual: fit.residual,
            stabilized: fit.stabilized,
            delta0: op.delta0,
        },
        traj,
    ))
}

/// Index of one block: the number of zeros of its distinguished solution.
pub fn compute_index(op: &RadialOperator, settings: &SolverSettings) -> Result<IndexResult> {
    index_trajectory(op, settings).map(|(r, _)| r)
}

/// True iff the index is non-increasing along consecutive harmonics.
///
/// A violation contradicts the monotonicity theorem and signals a numerics fault.
pub fn verify_monotonicity(results: &[IndexResult]) -> bool {
    results.windows(2).all(|w| w[1].index <= w[0].index)
}

/// Outcome of the δ0 sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Largest listed δ0 up to which every index is unchanged.
    pub delta0: f64,
    /// Every tested δ0 with whether all indexes were preserved.
    pub tested: Vec<(f64, bool)>,
}

/// Largest δ0 in the ascending list for which every block keeps its index.
pub fn perturbation_sweep(
    ops: &[RadialOperator],
    delta0_list: &[f64],
    settings: &SolverSettings,
) -> Result<SweepResult> {
    if delta0_list.is_empty() {
        return Err(Error::InvalidArgument("empty delta0 list".into()));
    }
    if delta0_list.windows(2).any(|w| w[1] <= w[0]) || delta0_list[0] < 0.0 {
        return Err(Error::InvalidArgument(
            "delta0 list must be non-negative and strictly ascending".into(),
        ));
    }
    let base: Vec<usize> = ops
        .iter()
        .map(|op| {
            let mut unperturbed = op.clone();
            unperturbed.delta0 = 0.0;
            compute_index(&unperturbed, settings).map(|r| r.index)
        })
        .collect::<Result<_>>()?;

    let mut tested = Vec::new();
    let mut accepted = None;
    for &d0 in delta0_list {
        let mut same = true;
        for (op, &n0) in ops.iter().zip(&base) {
            let mut pert = op.clone();
            pert.delta0 = d0;
            match compute_index(&pert, settings) {
                Ok(r) if r.index == n0 => {}
                _ => {
                    same = false;
                    break;
                }
            }
        }
        tested.push((d0, same));
        if !same {
            break;
        }
        accepted = Some(d0);
    }
    match accepted {
        Some(d) => Ok(SweepResult { delta0: d, tested }),
        None => Err(Error::PerturbationFailure(delta0_list[0])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{commutator_operator, PotentialSet};
    use crate::problem::Problem;
    use std::sync::Arc;

    fn result(index: usize) -> IndexResult {
        IndexResult {
            operator: String::new(),
            sign: Sign::Plus,
            block: Block::Harmonic(0),
            index,
            crossings: vec![],
            c0: 1.0,
            c1: 0.0,
            fit_residual: 0.0,
            stabilized: true,
            delta0: 0.0,
        }
    }

    #[test]
    fn monotonicity_rule() {
        assert!(verify_monotonicity(&[result(1), result(1), result(0)]));
        assert!(!verify_monotonicity(&[result(0), result(1)]));
        assert!(verify_monotonicity(&[result(3)]));
        assert!(verify_monotonicity(&[]));
    }

    #[test]
    fn free_blocks_have_index_zero() {
        for (p, blocks) in [
            (Problem::cubic_3d(), vec![Block::Harmonic(0), Block::Harmonic(1), Block::Harmonic(3)]),
            (Problem::one_d(2.0), vec![Block::Even, Block::Odd]),
        ] {
            let pot = Arc::new(PotentialSet::zero(&p));
            let settings = SolverSettings::for_problem(&p);
            for b in blocks {
                let op = commutator_operator(pot.clone(), Sign::Minus, b, p.dimension, 0.0).unwrap();
                assert_eq!(compute_index(&op, &settings).unwrap().index, 0, "{b:?}");
            }
        }
    }

    #[test]
    fn sweep_rejects_unsorted_lists() {
        let p = Problem::one_d(2.0);
        let pot = Arc::new(PotentialSet::zero(&p));
        let op = commutator_operator(pot, Sign::Plus, Block::Even, 1, 0.0).unwrap();
        let s = SolverSettings::for_problem(&p);
        assert!(perturbation_sweep(&[op.clone()], &[1e-2, 1e-4], &s).is_err());
        let ok = perturbation_sweep(&[op], &[0.0], &s).unwrap();
        assert_eq!(ok.delta0, 0.0);
    }
}
