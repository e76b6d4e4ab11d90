//! Least-squares fits of the free far-field behaviour.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of fit samples per window.
const FIT_SAMPLES: usize = 200;

/// Coefficients of `u ≈ C0·b0(r) + C1·b1(r)` over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub c0: f64,
    pub c1: f64,
    /// Root-mean-square fit residual relative to `max |u|` on the window.
    pub residual: f64,
    pub window: (f64, f64),
    /// Both half-window fits agree to 1% of the solution scale.
    pub stabilized: bool,
}

/// Free radial solutions: `{r^k, r^{2-d-k}}` for d = 3 and `{1, x}` for d = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeBasis {
    pub dimension: usize,
    pub k: usize,
}

impl FreeBasis {
    pub fn eval(&self, r: f64) -> (f64, f64) {
        if self.dimension == 1 {
            (1.0, r)
        } else {
            let k = self.k as i32;
            let d = self.dimension as i32;
            (r.powi(k), r.powi(2 - d - k))
        }
    }

    /// Smallest `r ≥ from` where `C0·b0 + C1·b1` vanishes, if any.
    pub fn root_beyond(&self, c0: f64, c1: f64, from: f64) -> Option<f64> {
        if c1 == 0.0 {
            return None;
        }
        let ratio = -c0 / c1;
        if self.dimension == 1 {
            return (ratio >= from).then_some(ratio);
        }
        // r^k (C0 + C1 r^p) with p = 2 - d - 2k < 0.
        if ratio <= 0.0 {
            return None;
        }
        let p = 2.0 - self.dimension as f64 - 2.0 * self.k as f64;
        let root = ratio.powf(1.0 / p);
        (root >= from).then_some(root)
    }
}

fn fit_window(u: &dyn Fn(f64) -> f64, basis: FreeBasis, a: f64, b: f64) -> (f64, f64, f64, f64) {
    let m = FIT_SAMPLES;
    let rs: Vec<f64> = (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect();
    let us: Vec<f64> = rs.iter().map(|&r| u(r)).collect();
    // Column scaling keeps the normal matrix well conditioned.
    let (s0, s1) = rs.iter().fold((0.0_f64, 0.0_f64), |(x, y), &r| {
        let (b0, b1) = basis.eval(r);
        (x.max(b0.abs()), y.max(b1.abs()))
    });
    let a_mat = DMatrix::from_fn(m, 2, |i, j| {
        let (b0, b1) = basis.eval(rs[i]);
        if j == 0 {
            b0 / s0
        } else {
            b1 / s1
        }
    });
    let rhs = DVector::from_vec(us.clone());
    let svd = a_mat.clone().svd(true, true);
    let x = svd
        .solve(&rhs, 1e-14)
        .unwrap_or_else(|_| DVector::from_vec(vec![0.0, 0.0]));
    let (c0, c1) = (x[0] / s0, x[1] / s1);
    let scale = us.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let res = (&a_mat * &x - rhs).norm() / (m as f64).sqrt() / scale;
    (c0, c1, res, scale)
}

/// Fits `u` on `[a, b]` and checks stabilization across the two half windows.
pub fn fit_free_behaviour(
    u: &dyn Fn(f64) -> f64,
    basis: FreeBasis,
    a: f64,
    b: f64,
) -> Result<AsymptoticFit> {
    let (c0, c1, residual, scale) = fit_window(u, basis, a, b);
    let mid = 0.5 * (a + b);
    let (l0, l1, _, _) = fit_window(u, basis, a, mid);
    let (h0, h1, _, _) = fit_window(u, basis, mid, b);
    // Compare the contribution of each coefficient, not the raw coefficient,
    // so a negligible C1 cannot fail the test through noise alone.
    let (b0a, b1a) = basis.eval(a);
    let (b0b, b1b) = basis.eval(b);
    let m0 = b0a.abs().max(b0b.abs());
    let m1 = b1a.abs().max(b1b.abs());
    let drift = ((l0 - h0).abs() * m0).max((l1 - h1).abs() * m1);
    let stabilized = drift <= 0.01 * scale && residual.is_finite();
    if !c0.is_finite() || !c1.is_finite() {
        return Err(Error::WindowTooSmall("non-finite fit coefficients".into()));
    }
    Ok(AsymptoticFit {
        c0,
        c1,
        residual,
        window: (a, b),
        stabilized,
    })
}
