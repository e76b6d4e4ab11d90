//! Adaptive initial-value integration with dense output, zero detection and
//! far-field fits.

pub mod asymptotics;
pub mod dense;
pub mod dop853;
pub mod zeros;

use crate::error::{Error, Result};
use crate::operators::RadialOperator;
use asymptotics::{fit_free_behaviour, AsymptoticFit, FreeBasis};
use dense::{DenseOutput, DenseStep};
use dop853::{integrate, IvpOptions, IvpStats};

/// Start radius used when the drift term is singular at the origin.
pub const ORIGIN_START: f64 = 1e-6;

/// Fraction of the domain used for far-field fits.
pub const FIT_FRACTION: f64 = 0.2;

/// Dense solution `(u, u')` of a homogeneous radial equation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Components `(ũ, ũ')` in the variables the operator acts on.
    pub dense: DenseOutput,
    pub r_max: f64,
    pub dimension: usize,
    pub k: usize,
    /// Power `m` with `u = r^m ũ`.
    pub tilde_power: usize,
    pub stats: IvpStats,
    pub tol: f64,
}

impl Trajectory {
    /// `ũ` at `r`.
    pub fn value(&self, r: f64) -> f64 {
        self.dense.value(r, 0)
    }

    /// `ũ'` at `r`.
    pub fn derivative(&self, r: f64) -> f64 {
        self.dense.value(r, 1)
    }

    /// Untransformed solution `u = r^m ũ`.
    pub fn physical(&self, r: f64) -> f64 {
        r.powi(self.tilde_power as i32) * self.value(r)
    }
}

/// Fourth-order series start for `−u'' − (c/r)u' + q u = −s` with even `q`, `s`.
///
/// With `u = u0 + b r²/2 + e r⁴/24`, matching orders gives `b = (q0 u0 + s0)/(1+c)`
/// and `e = 3(q0 b + q2 u0 + s2)/(3+c)`, where `q2 = q''(0)`, `s2 = s''(0)`.
/// Returns `(u(r1), u'(r1), u''(0))`.
pub(crate) fn series_start4(c: f64, q: [f64; 2], s: [f64; 2], u0: f64, r1: f64) -> (f64, f64, f64) {
    let b = (q[0] * u0 + s[0]) / (1.0 + c);
    let e = 3.0 * (q[0] * b + q[1] * u0 + s[1]) / (3.0 + c);
    let r2 = r1 * r1;
    (u0 + 0.5 * b * r2 + e * r2 * r2 / 24.0, b * r1 + e * r2 * r1 / 6.0, b)
}

/// Value and second derivative at the origin of an even function.
pub(crate) fn even_jet(f: impl Fn(f64) -> f64) -> [f64; 2] {
    let h = 1e-3;
    let f0 = f(0.0);
    // Symmetric difference of an even function: 2(f(h) − f(0))/h², O(h²) accurate.
    [f0, 2.0 * (f(h) - f0) / (h * h)]
}

/// Integrates `−ũ'' − (c/r)ũ' + q ũ = 0` from the origin to `r_max`.
pub fn integrate_ivp(op: &RadialOperator, ic: (f64, f64), r_max: f64, tol: f64) -> Result<Trajectory> {
    if !(1e-13..=1e-8).contains(&tol) {
        return Err(Error::InvalidArgument(format!("tol {tol:e} outside [1e-13, 1e-8]")));
    }
    if op.dimension == 3 && op.k() >= 1 && !op.regularized {
        return Err(Error::InvalidArgument(
            "operator with k >= 1 must be regularized before integration".into(),
        ));
    }
    let c = op.drift();
    let rhs = |r: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1];
        let drift = if c == 0.0 { 0.0 } else { -c / r * y[1] };
        dy[1] = drift + op.q(r) * y[0];
    };
    let opts = IvpOptions {
        rtol: tol,
        atol: tol * 1e-3,
        ..IvpOptions::default()
    };
    let mut dense = DenseOutput::new(2);
    let sol = if c == 0.0 {
        integrate(rhs, 0.0, &[ic.0, ic.1], r_max, &opts)?
    } else {
        if ic.1 != 0.0 {
            return Err(Error::InvalidArgument(
                "regular solutions of a singular-origin equation need u'(0) = 0".into(),
            ));
        }
        let r1 = ORIGIN_START;
        let (u1, du1, u2) = series_start4(c, even_jet(|r| op.q(r)), [0.0, 0.0], ic.0, r1);
        let mut f1 = [0.0; 2];
        rhs(r1, &[u1, du1], &mut f1);
        dense.push(DenseStep::hermite(0.0, r1, &[ic.0, 0.0], &[u1, du1], &[0.0, u2], &f1));
        integrate(rhs, r1, &[u1, du1], r_max, &opts)?
    };
    let stats = sol.stats;
    let dense = dense.concat(sol.dense);
    Ok(Trajectory {
        dense,
        r_max,
        dimension: op.dimension,
        k: op.k(),
        tilde_power: op.tilde_power(),
        stats,
        tol,
    })
}

/// Zero crossings of `ũ` on `(0, r_max]`, refined by bisection.
///
/// Zeros of `ũ` and `u = r^m ũ` coincide for `r > 0`.
pub fn count_zeros(traj: &Trajectory) -> Result<(usize, Vec<f64>)> {
    let r_min = if traj.dense.value(0.0, 0) == 0.0 {
        // Odd solutions start at zero; skip the origin itself.
        1e-8
    } else {
        0.0
    };
    let roots = zeros::find_crossings(&traj.dense, 0, r_min, 10.0 * traj.tol)?;
    Ok((roots.len(), roots))
}

/// Least-squares fit of `u` on the outer 20% of the domain against the free
/// solutions `{r^k, r^{2−d−k}}` (3d) or `{1, x}` (1d).
pub fn fit_asymptotics(traj: &Trajectory, k: usize, d: usize) -> Result<AsymptoticFit> {
    let basis = FreeBasis { dimension: d, k };
    let a = (1.0 - FIT_FRACTION) * traj.r_max;
    let u = |r: f64| traj.physical(r);
    let fit = fit_free_behaviour(&u, basis, a, traj.r_max)?;
    if !fit.stabilized {
        return Err(Error::WindowTooSmall(format!(
            "coefficients (C0, C1) = ({:e}, {:e}) drift between half windows on [{a}, {}]",
            fit.c0, fit.c1, traj.r_max
        )));
    }
    Ok(fit)
}
