//! Commutator bounds excluding embedded eigenvalues at large frequency and on
//! high spherical harmonics.
//!
//! Every supremum is taken on a grid over `[r_min, r_max]` and extended past
//! `r_max` by an exponential envelope `A·e^{−2√λ r}` fitted on the outer half.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{Jet, Potential, PotentialSet};

/// Left end of the sampling grid.
pub const GRID_MIN: f64 = 1e-3;
/// Default ceiling for the harmonic bisection.
pub const ALPHA_CEILING: f64 = 1e4;
const GRID_POINTS: usize = 4000;

/// Outcome of the large-eigenvalue bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueBound {
    /// `√((λ² + C1)/(1 − C2))`, absent when `C2 ≥ 1`.
    pub mu0: Option<f64>,
    pub c1: f64,
    pub c2: f64,
    pub f_sup: f64,
    /// `‖r(V− + V+)'‖∞`.
    pub radial_sum_sup: f64,
    /// `‖r(V− − V+)'‖∞`, which bounds `max_{j,k} ‖∂_j(V− − V+) x_k‖∞`.
    pub radial_difference_sup: f64,
    /// Dimensional constant in front of the matrix term.
    pub c_d: f64,
    pub applicable: bool,
}

/// Outcome of the spherical-harmonic bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicBound {
    pub alpha0: Option<f64>,
    /// Smallest `k` with `k(k+d−2) ≥ α0²`.
    pub k_cutoff: Option<u64>,
    pub ceiling: f64,
    pub applicable: bool,
}

/// Both bounds with the grid they were evaluated on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MourreReport {
    pub eigenvalue: EigenvalueBound,
    /// Absent in 1d, where there are no spherical harmonics.
    pub harmonic: Option<HarmonicBound>,
    pub grid: (f64, f64, usize),
}

/// Sampling grid: logarithmic on `[r_min, 1]`, uniform on `[1, r_max]`.
pub fn grid(r_max: f64) -> Vec<f64> {
    let half = GRID_POINTS / 2;
    let mut g: Vec<f64> = (0..half)
        .map(|i| GRID_MIN * (1.0 / GRID_MIN).powf(i as f64 / half as f64))
        .collect();
    g.extend((0..=half).map(|i| 1.0 + (r_max - 1.0) * i as f64 / half as f64));
    g
}

/// Sup of `|t(r)|` over `[r_min, ∞)`, with the tail past `r_max` bounded by an
/// envelope `A·e^{−2√λ r}` whose amplitude is the largest `|t|e^{2√λ r}` over
/// the outer half of the grid.
fn sup_with_tail(grid: &[f64], values: &[f64], lambda: f64) -> f64 {
    let r_max = *grid.last().unwrap_or(&0.0);
    let k = 2.0 * lambda.sqrt();
    let mut sup: f64 = 0.0;
    let mut amp: f64 = 0.0;
    for (&r, &t) in grid.iter().zip(values) {
        sup = sup.max(t.abs());
        if r >= 0.5 * r_max {
            amp = amp.max(t.abs() * (k * r).exp());
        }
    }
    sup.max(amp * (-k * r_max).exp())
}

/// `ΔV = V'' + (d−1)V'/r`.
fn laplacian(j: &Jet, r: f64, d: f64) -> f64 {
    j.d2 + (d - 1.0) * j.d1 / r
}

/// `Δ(rV') = rV''' + (d+1)V'' + (d−1)V'/r`.
fn laplacian_of_radial_derivative(j: &Jet, r: f64, d: f64) -> f64 {
    r * j.d3 + (d + 1.0) * j.d2 + (d - 1.0) * j.d1 / r
}

/// `r(ΔV)' = rV''' + (d−1)V'' − (d−1)V'/r`.
fn radial_derivative_of_laplacian(j: &Jet, r: f64, d: f64) -> f64 {
    r * j.d3 + (d - 1.0) * j.d2 - (d - 1.0) * j.d1 / r
}

/// The function `F` of the large-eigenvalue commutator identity.
pub fn f_function(pot: &PotentialSet, r: f64) -> f64 {
    let p = pot.problem();
    let (l, d) = (p.lambda, p.d());
    let m = pot.jet(Potential::Minus, r);
    let q = pot.jet(Potential::Plus, r);
    let (xm, xp) = (r * m.d1, r * q.d1);
    4.0 * m.v * q.v - 2.0 * l * (xm + xp)
        + 2.0 * xm * q.v
        + 2.0 * xp * m.v
        + laplacian_of_radial_derivative(&m, r, d)
        + laplacian_of_radial_derivative(&q, r, d)
        - (radial_derivative_of_laplacian(&m, r, d) - radial_derivative_of_laplacian(&q, r, d))
        - d * (laplacian(&m, r, d) - laplacian(&q, r, d))
}

/// Frequency cutoff `μ0` above which `L−L+u = μ²u` has no `L²` solution.
///
/// `C1 = ¼‖F‖∞` and `C2 = ¼(2‖r(V−+V+)'‖∞ + d·‖r(V−−V+)'‖∞)`.
pub fn large_eigenvalue_bound(pot: &PotentialSet) -> EigenvalueBound {
    let p = pot.problem();
    let (l, d) = (p.lambda, p.d());
    let g = grid(pot.r_max());
    let mut f = Vec::with_capacity(g.len());
    let mut sum = Vec::with_capacity(g.len());
    let mut diff = Vec::with_capacity(g.len());
    for &r in &g {
        f.push(f_function(pot, r));
        let m = pot.jet(Potential::Minus, r);
        let q = pot.jet(Potential::Plus, r);
        sum.push(r * (m.d1 + q.d1));
        diff.push(r * (m.d1 - q.d1));
    }
    let f_sup = sup_with_tail(&g, &f, l);
    let radial_sum_sup = sup_with_tail(&g, &sum, l);
    let radial_difference_sup = sup_with_tail(&g, &diff, l);
    let c_d = d;
    let c1 = 0.25 * f_sup;
    let c2 = 0.25 * (2.0 * radial_sum_sup + c_d * radial_difference_sup);
    let applicable = c2 < 1.0;
    let mu0 = applicable.then(|| ((l * l + c1) / (1.0 - c2)).sqrt());
    EigenvalueBound {
        mu0,
        c1,
        c2,
        f_sup,
        radial_sum_sup,
        radial_difference_sup,
        c_d,
        applicable,
    }
}

/// Pointwise terms of the harmonic commutator form at radius `r`:
/// `(gradient dominator, gradient terms, value dominator, value terms)`.
fn harmonic_terms(pot: &PotentialSet, alpha: f64, r: f64) -> (f64, f64, f64, f64) {
    let p = pot.problem();
    let (l, d) = (p.lambda, p.d());
    let m = pot.jet(Potential::Minus, r);
    let q = pot.jet(Potential::Plus, r);
    let a2 = alpha * alpha;
    let grad_dom = 16.0 * a2 / (r * r) + 8.0 * l;
    let grad = (4.0 * (m.v + q.v) + 2.0 * r * m.d1 - 6.0 * r * q.d1).abs();
    let val_dom = 8.0 * a2 * a2 / r.powi(4) + 8.0 * l * a2 / (r * r);
    let val = (4.0 * a2 / (r * r) * (m.v + q.v)).abs()
        + ((d - 4.0) * a2 / r.powi(4)).abs()
        + ((d * (d - 1.0) + 2.0 * a2) / r * m.d1).abs()
        + (((d - 1.0) * (d - 2.0) - 2.0 * a2) / r * q.d1).abs()
        + ((d - 2.0) * m.d2).abs()
        + (3.0 * d * q.d2).abs()
        + (2.0 * r * (q.d1 * m.v + m.d1 * q.v)).abs()
        + (2.0 * r * q.d3).abs()
        + (2.0 * l * r * (m.d1 + q.d1)).abs();
    (grad_dom, grad, val_dom, val)
}

/// True when both dominators strictly exceed their terms on the grid and on
/// the exponential tail past `r_max`.
fn alpha_dominates(pot: &PotentialSet, alpha: f64, g: &[f64]) -> bool {
    let l = pot.problem().lambda;
    let k = 2.0 * l.sqrt();
    let r_max = *g.last().unwrap_or(&0.0);
    let (mut grad_amp, mut val_amp): (f64, f64) = (0.0, 0.0);
    for &r in g {
        let (gd, gt, vd, vt) = harmonic_terms(pot, alpha, r);
        if !(gt < gd && vt < vd) {
            return false;
        }
        if r >= 0.5 * r_max {
            grad_amp = grad_amp.max(gt * (k * r).exp());
            val_amp = val_amp.max(vt * (k * r).exp());
        }
    }
    // Past r_max the envelopes decay exponentially while the dominators decay
    // polynomially; r⁴e^{−kr} is decreasing there, so checking r_max suffices.
    let (gd, _, vd, _) = harmonic_terms(pot, alpha, r_max);
    grad_amp * (-k * r_max).exp() < gd && val_amp * (-k * r_max).exp() < vd
}

/// Harmonic cutoff `α0` by bisection, with `k_cutoff` from `k(k+d−2) ≥ α0²`.
pub fn harmonic_bound(pot: &PotentialSet, ceiling: f64) -> Result<HarmonicBound> {
    let p = pot.problem();
    if p.dimension != 3 {
        return Err(Error::UnsupportedDimension(p.dimension));
    }
    let d = p.d();
    let g = grid(pot.r_max());
    let k_of = |a: f64| -> u64 {
        let mut k = 0u64;
        while (k as f64) * (k as f64 + d - 2.0) < a * a {
            k += 1;
        }
        k
    };
    let none = |x: &PotentialSet| (0..g.len()).all(|i| {
        let r = g[i];
        let (_, gt, _, vt) = harmonic_terms(x, 0.0, r);
        gt == 0.0 && vt == 0.0
    });
    if none(pot) {
        return Ok(HarmonicBound {
            alpha0: Some(0.0),
            k_cutoff: Some(0),
            ceiling,
            applicable: true,
        });
    }
    let mut hi = 1.0;
    while !alpha_dominates(pot, hi, &g) {
        hi *= 2.0;
        if hi > ceiling {
            return Ok(HarmonicBound {
                alpha0: None,
                k_cutoff: None,
                ceiling,
                applicable: false,
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if alpha_dominates(pot, mid, &g) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-10 * hi {
            break;
        }
    }
    Ok(HarmonicBound {
        alpha0: Some(hi),
        k_cutoff: Some(k_of(hi)),
        ceiling,
        applicable: true,
    })
}

/// Both bounds; the harmonic bound only in 3d.
pub fn mourre_report(pot: &PotentialSet) -> Result<MourreReport> {
    let eigenvalue = large_eigenvalue_bound(pot);
    let harmonic = if pot.problem().dimension == 3 {
        Some(harmonic_bound(pot, ALPHA_CEILING)?)
    } else {
        None
    };
    Ok(MourreReport {
        eigenvalue,
        harmonic,
        grid: (GRID_MIN, pot.r_max(), grid(pot.r_max()).len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Problem;

    #[test]
    fn zero_potentials_give_trivial_bounds() {
        let pot = PotentialSet::zero(&Problem::cubic_3d());
        let b = large_eigenvalue_bound(&pot);
        assert_eq!((b.c1, b.c2), (0.0, 0.0));
        assert_eq!(b.mu0, Some(1.0));
        let h = harmonic_bound(&pot, ALPHA_CEILING).unwrap();
        assert_eq!(h.alpha0, Some(0.0));
        assert_eq!(h.k_cutoff, Some(0));
    }

    #[test]
    fn harmonic_bound_needs_three_dimensions() {
        let pot = PotentialSet::zero(&Problem::one_d(2.0));
        assert!(harmonic_bound(&pot, ALPHA_CEILING).is_err());
        assert!(mourre_report(&pot).unwrap().harmonic.is_none());
    }

    #[test]
    fn tail_envelope_bounds_decaying_samples() {
        let g: Vec<f64> = (0..=100).map(|i| i as f64 * 0.3).collect();
        let v: Vec<f64> = g.iter().map(|r| 5.0 * (-2.0 * r).exp()).collect();
        assert!((sup_with_tail(&g, &v, 1.0) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn radial_identities_match_a_gaussian() {
        // V = e^{−r²} in 3d: ΔV = (4r² − 6)e^{−r²}.
        let r: f64 = 0.7;
        let e = (-r * r).exp();
        let j = Jet {
            v: e,
            d1: -2.0 * r * e,
            d2: (4.0 * r * r - 2.0) * e,
            d3: (12.0 * r - 8.0 * r.powi(3)) * e,
        };
        assert!((laplacian(&j, r, 3.0) - (4.0 * r * r - 6.0) * e).abs() < 1e-14);
        // rV' = −2r²e^{−r²}; Δ of it is (−8r⁴ + 28r² − 12)e^{−r²}.
        let exact = (-8.0 * r.powi(4) + 28.0 * r * r - 12.0) * e;
        assert!((laplacian_of_radial_derivative(&j, r, 3.0) - exact).abs() < 1e-13);
        // r(ΔV)' = r(8r − 2r(4r² − 6))e^{−r²} = (20r² − 8r⁴)e^{−r²}.
        let exact = (20.0 * r * r - 8.0 * r.powi(4)) * e;
        assert!((radial_derivative_of_laplacian(&j, r, 3.0) - exact).abs() < 1e-13);
    }
}
