//! Ground-state soliton `ΔR − λR + R^{2σ}R = 0`.
//!
//! The profile is computed by two-sided shooting: a regular solution leaves
//! the origin with `R(0) = a`, a decaying solution leaves `r_max` through the
//! Robin condition with amplitude `A`, and Newton's method matches `(R, R')`
//! at an interior radius. A bisection on `a` supplies the starting iterate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ivp::dense::{DenseOutput, DenseStep};
use crate::ivp::dop853::{integrate, integrate_until, IvpOptions};
use crate::ivp::ORIGIN_START;
use crate::problem::{Problem, SolverSettings};

/// `R(x) = ((1+σ)λ)^{1/(2σ)} sech^{1/σ}(σ√λ x)`.
pub fn closed_form_1d(problem: &Problem, x: f64) -> Result<f64> {
    if problem.dimension != 1 {
        return Err(Error::UnsupportedDimension(problem.dimension));
    }
    let s = problem.sigma;
    let l = problem.lambda;
    let amp = ((1.0 + s) * l).powf(1.0 / (2.0 * s));
    let sech = 1.0 / (s * l.sqrt() * x).cosh();
    Ok(amp * sech.powf(1.0 / s))
}

/// Derivative of [`closed_form_1d`].
pub fn closed_form_1d_derivative(problem: &Problem, x: f64) -> Result<f64> {
    let r = closed_form_1d(problem, x)?;
    let z = problem.sigma * problem.lambda.sqrt() * x;
    Ok(-problem.lambda.sqrt() * z.tanh() * r)
}

/// Fitted far-field decay `R·r^{(d-1)/2} ≈ A·e^{slope·r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailMetadata {
    pub decay_slope: f64,
    pub amplitude: f64,
    pub window: (f64, f64),
}

/// Radial function with dense interpolant, sampled grid and tail metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub problem: Problem,
    pub r_max: f64,
    pub tol: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
    pub tail: TailMetadata,
    /// Max-norm substitution residual of the defining equation, sampled at
    /// the quarter points of every step (absolute).
    pub residual: f64,
    /// Shooting parameters `R(0)` and far amplitude `A`.
    pub origin_value: f64,
    pub far_amplitude: f64,
    /// Components `(R, R')`.
    pub dense: DenseOutput,
}

impl RadialProfile {
    /// `(R, R')` at `r`; even in 1d, extended by the free tail past `r_max`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let (r, flip) = if r < 0.0 { (-r, -1.0) } else { (r, 1.0) };
        if r <= self.r_max {
            let mut y = [0.0; 2];
            self.dense.eval(r, &mut y);
            return (y[0], flip * y[1]);
        }
        let d = self.problem.d();
        let sl = self.problem.lambda.sqrt();
        let mut y = [0.0; 2];
        self.dense.eval(self.r_max, &mut y);
        let v = y[0] * (self.r_max / r).powf(0.5 * (d - 1.0)) * (-sl * (r - self.r_max)).exp();
        (v, flip * -(sl + 0.5 * (d - 1.0) / r) * v)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.eval(r).1
    }
}

fn nonlinearity(problem: &Problem, r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        r.powf(2.0 * problem.sigma + 1.0)
    }
}

fn drift(problem: &Problem, r: f64, v: f64) -> f64 {
    if problem.dimension == 1 {
        0.0
    } else {
        -(problem.d() - 1.0) / r * v
    }
}

fn rhs(problem: &Problem, r: f64, y: &[f64], dy: &mut [f64]) {
    dy[0] = y[1];
    dy[1] = drift(problem, r, y[1]) + problem.lambda * y[0] - nonlinearity(problem, y[0]);
}

/// State plus variation with respect to the shooting parameter.
fn rhs_variational(problem: &Problem, r: f64, y: &[f64], dy: &mut [f64]) {
    let p = 2.0 * problem.sigma;
    let u = y[0];
    let np = if u > 0.0 { (p + 1.0) * u.powf(p) } else { 0.0 };
    dy[0] = y[1];
    dy[1] = drift(problem, r, y[1]) + problem.lambda * u - nonlinearity(problem, u);
    dy[2] = y[3];
    dy[3] = drift(problem, r, y[3]) + (problem.lambda - np) * y[2];
}

/// Regular data at the start radius for `R(0) = a`, plus its `a`-variation.
fn origin_data(problem: &Problem, a: f64) -> (f64, [f64; 4]) {
    if problem.dimension == 1 {
        return (0.0, [a, 0.0, 1.0, 0.0]);
    }
    let d = problem.d();
    let p = 2.0 * problem.sigma;
    let r1 = ORIGIN_START;
    // R = a + b r²/2 + c r⁴/24 with b = N(a)/d and c = 3 N'(a) b/(d+2), N(R) = λR − R^{p+1}.
    let np = problem.lambda - (p + 1.0) * a.powf(p);
    let b = (problem.lambda * a - a.powf(p + 1.0)) / d;
    let c = 3.0 * np * b / (d + 2.0);
    let db = np / d;
    let r2 = r1 * r1;
    (
        r1,
        [a + 0.5 * b * r2 + c * r2 * r2 / 24.0, b * r1 + c * r2 * r1 / 6.0, 1.0 + 0.5 * db * r2, db * r1],
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shot {
    /// R crossed zero: `R(0)` too large.
    Over,
    /// R turned upward while positive: `R(0)` too small.
    Under,
    /// Reached `r_max` without deciding.
    Neither,
}

fn shoot(problem: &Problem, a: f64, r_max: f64, opts: &IvpOptions) -> Result<Shot> {
    let (r0, y0) = origin_data(problem, a);
    let mut outcome = Shot::Neither;
    let sol = integrate_until(
        |r, y, dy| rhs(problem, r, y, dy),
        r0,
        &y0[..2],
        r_max,
        opts,
        |_, y| {
            if y[0] < 0.0 {
                outcome = Shot::Over;
                true
            } else if y[1] > 0.0 {
                outcome = Shot::Under;
                true
            } else {
                false
            }
        },
    );
    match sol {
        Ok(_) => Ok(outcome),
        Err(Error::BlowUp { .. }) => Ok(Shot::Under),
        Err(e) => Err(e),
    }
}

/// Bisection bracket on `R(0)`, starting from the scaled sech iterate.
fn bracket_origin_value(problem: &Problem, r_max: f64, opts: &IvpOptions) -> Result<f64> {
    let a0 = ((1.0 + problem.sigma) * problem.lambda).powf(1.0 / (2.0 * problem.sigma));
    let (mut lo, mut hi);
    match shoot(problem, a0, r_max, opts)? {
        Shot::Over => {
            hi = a0;
            lo = a0;
            for _ in 0..60 {
                lo *= 0.5;
                if shoot(problem, lo, r_max, opts)? == Shot::Under {
                    break;
                }
            }
        }
        Shot::Under => {
            lo = a0;
            hi = a0;
            for _ in 0..60 {
                hi *= 2.0;
                if shoot(problem, hi, r_max, opts)? == Shot::Over {
                    break;
                }
            }
        }
        Shot::Neither => return Ok(a0),
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shoot(problem, mid, r_max, opts)? {
            Shot::Over => hi = mid,
            Shot::Under => lo = mid,
            Shot::Neither => return Ok(mid),
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Robin coefficient κ with `R' = −κ R` at `r`.
fn robin_rate(problem: &Problem, r: f64) -> f64 {
    let sl = problem.lambda.sqrt();
    if problem.dimension == 1 {
        sl
    } else {
        (1.0 + sl * r) / r
    }
}

/// Mismatch `R + R'/κ(r)`: `R + R'/√λ` in 1d and `R + r/(1+√λr)·R'` in 3d.
pub fn robin_mismatch(problem: &Problem, r: f64, u: f64, du: f64) -> f64 {
    u + du / robin_rate(problem, r)
}

/// Mismatch curve on the outer half of the profile's domain.
pub fn check_artificial_bc(profile: &RadialProfile, problem: &Problem) -> Vec<(f64, f64)> {
    let n = 200;
    let a = 0.5 * profile.r_max;
    (0..=n)
        .map(|i| {
            let r = a + (profile.r_max - a) * i as f64 / n as f64;
            let (u, du) = profile.eval(r);
            (r, robin_mismatch(problem, r, u, du))
        })
        .collect()
}

struct Pieces {
    inner: DenseOutput,
    outer: DenseOutput,
    jump: [f64; 2],
    jac: [[f64; 2]; 2],
}

fn two_sided(
    problem: &Problem,
    a: f64,
    amp: f64,
    r_match: f64,
    r_max: f64,
    opts_in: &IvpOptions,
    opts_out: &IvpOptions,
) -> Result<Pieces> {
    let (r0, y0) = origin_data(problem, a);
    let fwd = integrate(
        |r, y, dy| rhs_variational(problem, r, y, dy),
        r0,
        &y0,
        r_match,
        opts_in,
    )?;
    let kappa = robin_rate(problem, r_max);
    let yb = [amp, -kappa * amp, amp, -kappa * amp];
    let bwd = integrate(
        |r, y, dy| rhs_variational(problem, r, y, dy),
        r_max,
        &yb,
        r_match,
        opts_out,
    )?;
    let f = &fwd.y_end;
    let b = &bwd.y_end;
    let mut inner = fwd.dense;
    if r0 > 0.0 {
        let mut f0 = [0.0; 4];
        let mut f1 = [0.0; 4];
        let p = 2.0 * problem.sigma;
        f0[1] = (problem.lambda * a - a.powf(p + 1.0)) / problem.d();
        f0[3] = (problem.lambda - (p + 1.0) * a.powf(p)) / problem.d();
        rhs_variational(problem, r0, &y0, &mut f1);
        let seg = DenseStep::hermite(0.0, r0, &[a, 0.0, 1.0, 0.0], &y0, &f0, &f1);
        let mut head = DenseOutput::new(4);
        head.push(seg);
        inner = head.concat(inner);
    }
    Ok(Pieces {
        inner,
        outer: bwd.dense,
        jump: [f[0] - b[0], f[1] - b[1]],
        // Columns: d/da of the forward piece, d/d(ln A) of the backward piece.
        jac: [[f[2], -b[2]], [f[3], -b[3]]],
    })
}

/// Max-norm defect of the dense interpolant in the first-order system.
fn dense_residual(problem: &Problem, dense: &DenseOutput) -> f64 {
    let mut worst: f64 = 0.0;
    let mesh = dense.mesh();
    for w in mesh.windows(2) {
        for q in 1..4 {
            let r = w[0] + (w[1] - w[0]) * q as f64 / 4.0;
            if r <= 0.0 {
                continue;
            }
            let u = dense.value(r, 0);
            let (v, dv) = dense.value_and_slope(r, 1);
            let mut f = [0.0; 2];
            rhs(problem, r, &[u, v], &mut f);
            let e = (dv - f[1]).abs();
            worst = worst.max(e);
        }
    }
    worst
}

/// Least-squares slope of `ln(R·r^{(d-1)/2})` over `[a, b]`.
fn fit_tail(problem: &Problem, dense: &DenseOutput, a: f64, b: f64) -> TailMetadata {
    let n = 200;
    let half = 0.5 * (problem.d() - 1.0);
    let pts: Vec<(f64, f64)> = (0..=n)
        .map(|i| {
            let r = a + (b - a) * i as f64 / n as f64;
            (r, (dense.value(r, 0) * r.powf(half)).ln())
        })
        .collect();
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let intercept = (sy - slope * sx) / m;
    TailMetadata {
        decay_slope: slope,
        amplitude: intercept.exp(),
        window: (a, b),
    }
}

/// Computes the positive radial ground state on `[0, r_max]`.
pub fn solve_ground_state(problem: &Problem, settings: &SolverSettings) -> Result<RadialProfile> {
    problem.validate()?;
    settings.validate()?;
    let r_max = settings.r_max;
    let tol = settings.tol;
    let sl = problem.lambda.sqrt();
    let itol = (1e-3 * tol).max(1e-15);
    let opts_in = IvpOptions {
        rtol: itol,
        atol: itol * 1e-3,
        ..IvpOptions::default()
    };
    // The outer piece is exponentially small; control it in relative terms only.
    let opts_out = IvpOptions {
        rtol: itol,
        atol: 1e-300,
        ..IvpOptions::default()
    };
    let shoot_opts = IvpOptions {
        rtol: 1e-13,
        atol: 1e-16,
        ..IvpOptions::default()
    };

    let mut a = bracket_origin_value(problem, r_max, &shoot_opts)?;
    if a < 1e-8 {
        return Err(Error::DegenerateSolution(format!("R(0) = {a:e}")));
    }
    let r_match = (6.0 / sl).min(0.5 * r_max);
    let d = problem.d();

    // Far amplitude from the free decay law, anchored on a forward shot.
    let (r0, y0) = origin_data(problem, a);
    let probe = integrate(|r, y, dy| rhs(problem, r, y, dy), r0, &y0[..2], r_match, &shoot_opts)?;
    let mut amp = probe.y_end[0].abs()
        * (r_match / r_max).powf(0.5 * (d - 1.0))
        * (-sl * (r_max - r_match)).exp();

    let mut last_norm = f64::INFINITY;
    let mut converged = None;
    for _ in 0..40 {
        let pieces = two_sided(problem, a, amp, r_match, r_max, &opts_in, &opts_out)?;
        let [f0, f1] = pieces.jump;
        last_norm = f0.abs().max(f1.abs());
        // Jacobian in (a, ln A).
        let [[j00, j01], [j10, j11]] = pieces.jac;
        let det = j00 * j11 - j01 * j10;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::IterationFailure {
                residual: last_norm,
            });
        }
        let da = (f0 * j11 - f1 * j01) / det;
        let dl = (j00 * f1 - j10 * f0) / det;
        if da.abs() <= 4.0 * f64::EPSILON * a && dl.abs() <= 1e-13 {
            converged = Some(pieces);
            break;
        }
        a -= da;
        amp *= (-dl.clamp(-2.0, 2.0)).exp();
        if !(a > 0.0) {
            return Err(Error::DegenerateSolution(format!(
                "shooting parameter left the positive cone (R(0) = {a:e})"
            )));
        }
    }
    let pieces = converged.ok_or(Error::IterationFailure {
        residual: last_norm,
    })?;

    let keep = vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]];
    let dense = pieces.inner.combine(&keep).concat(pieces.outer.combine(&keep));
    let residual = dense_residual(problem, &dense).max(pieces.jump[0].abs()).max(pieces.jump[1].abs());

    // Contract: residual below tol relative to the size of the terms balanced at the origin.
    let scale = (problem.lambda * a).max(a.powf(2.0 * problem.sigma + 1.0));
    if residual > tol * scale {
        return Err(Error::IterationFailure { residual });
    }

    let grid = dense.mesh();
    let mut values = Vec::with_capacity(grid.len());
    let mut derivatives = Vec::with_capacity(grid.len());
    for &r in &grid {
        let mut y = [0.0; 2];
        dense.eval(r, &mut y);
        values.push(y[0]);
        derivatives.push(y[1]);
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::DegenerateSolution("profile is not positive".into()));
    }
    if grid.iter().zip(&derivatives).any(|(&r, &dv)| r > 0.0 && dv >= 0.0) {
        return Err(Error::DegenerateSolution("profile is not decreasing".into()));
    }
    let v_far = values.last().copied().unwrap_or(0.0).powf(2.0 * problem.sigma);
    if v_far > tol {
        return Err(Error::DomainTooSmall {
            r: r_max,
            mismatch: v_far,
        });
    }
    let tail = fit_tail(problem, &dense, 0.75 * r_max, r_max);

    Ok(RadialProfile {
        problem: *problem,
        r_max,
        tol,
        grid,
        values,
        derivatives,
        tail,
        residual,
        origin_value: a,
        far_amplitude: amp,
        dense,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `R'' − λR + R^{2σ+1}` with `R''` differentiated by hand:
    /// `R' = −√λ tanh(z) R` and `R'' = λ(tanh²z − σ sech²z) R`, `z = σ√λ x`.
    fn closed_form_residual(problem: &Problem, x: f64) -> f64 {
        let (s, l) = (problem.sigma, problem.lambda);
        let z = s * l.sqrt() * x;
        let r = closed_form_1d(problem, x).unwrap();
        let d2 = l * (z.tanh().powi(2) - s / z.cosh().powi(2)) * r;
        d2 - l * r + r.powf(2.0 * s + 1.0)
    }

    #[test]
    fn closed_form_values() {
        let p1 = Problem::one_d(1.0);
        assert!((closed_form_1d(&p1, 0.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let p2 = Problem::one_d(2.0);
        assert!((closed_form_1d(&p2, 0.0).unwrap() - 3f64.powf(0.25)).abs() < 1e-15);
        assert_eq!(closed_form_1d(&p2, 1.3).unwrap(), closed_form_1d(&p2, -1.3).unwrap());
    }

    #[test]
    fn closed_form_satisfies_equation() {
        for &s in &[1.0, 2.0, 2.1, 2.5, 3.0] {
            let p = Problem::one_d(s);
            for i in 0..40 {
                let x = -4.0 + 0.2 * i as f64;
                assert!(closed_form_residual(&p, x).abs() < 1e-12, "sigma {s} x {x}");
            }
        }
    }

    #[test]
    fn closed_form_rejects_3d() {
        assert_eq!(
            closed_form_1d(&Problem::cubic_3d(), 0.0),
            Err(Error::UnsupportedDimension(3))
        );
    }

    #[test]
    fn robin_mismatch_vanishes_on_free_tails() {
        let p1 = Problem::one_d(2.0);
        for &x in &[10.0, 20.0, 30.0] {
            let u = (-x as f64).exp();
            assert!(robin_mismatch(&p1, x, u, -u).abs() < 1e-30);
        }
        let p3 = Problem::cubic_3d();
        for &r in &[10.0, 20.0, 40.0] {
            let u = (-r as f64).exp() / r;
            let du = -u - u / r;
            assert!(robin_mismatch(&p3, r, u, du).abs() <= 1e-15 * u);
        }
    }
}
