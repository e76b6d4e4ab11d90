//! Sign-change detection and bisection refinement on dense output.

use super::dense::DenseOutput;
use crate::error::{Error, Result};

/// Interior samples taken per integrator step when scanning for sign changes.
const SAMPLES_PER_STEP: usize = 7;

/// Bisection stops once the bracket is narrower than this.
pub const CROSSING_WIDTH: f64 = 1e-10;

/// Locates the simple zeros of component `comp` on `(r_min, upper]`.
///
/// Sign changes are bracketed on a fine sampling of the dense output and then
/// bisected on the interpolant itself. A local minimum of `|u|` that falls
/// below `ambiguity · max|u|` without a sign change is reported as an
/// ambiguous crossing instead of being silently ignored.
pub fn find_crossings(
    dense: &DenseOutput,
    comp: usize,
    r_min: f64,
    ambiguity: f64,
) -> Result<Vec<f64>> {
    let samples: Vec<(f64, f64)> = dense
        .sample(comp, SAMPLES_PER_STEP)
        .into_iter()
        .filter(|&(r, _)| r > r_min)
        .collect();
    if samples.len() < 2 {
        return Ok(Vec::new());
    }
    let scale = samples.iter().fold(0.0_f64, |m, &(_, u)| m.max(u.abs()));
    let mut roots = Vec::new();

    for w in samples.windows(2) {
        let (a, ua) = w[0];
        let (b, ub) = w[1];
        if ua == 0.0 {
            continue;
        }
        if ua * ub < 0.0 || (ub == 0.0 && b < dense.upper()) {
            roots.push(bisect(dense, comp, a, b, ua));
        }
    }

    for w in samples.windows(3) {
        let (u0, u1, u2) = (w[0].1, w[1].1, w[2].1);
        let local_min = u1.abs() <= u0.abs() && u1.abs() <= u2.abs();
        let same_sign = u0 * u1 > 0.0 && u1 * u2 > 0.0;
        if local_min && same_sign && u1.abs() < ambiguity * scale {
            return Err(Error::AmbiguousCrossing { r: w[1].0 });
        }
    }
    roots.dedup_by(|x, y| (*x - *y).abs() < CROSSING_WIDTH);
    Ok(roots)
}

fn bisect(dense: &DenseOutput, comp: usize, mut a: f64, mut b: f64, ua: f64) -> f64 {
    let sa = ua.signum();
    while b - a > CROSSING_WIDTH {
        let m = 0.5 * (a + b);
        let um = dense.value(m, comp);
        if um == 0.0 {
            return m;
        }
        if um.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
