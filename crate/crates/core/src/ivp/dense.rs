//! Piecewise polynomial dense output of the DOP853 integrator.
//!
//! Every accepted step stores the eight coefficient vectors of Hairer's
//! continuous extension. The interpolant is C¹ across step boundaries and
//! seventh-order accurate inside a step.

use serde::{Deserialize, Serialize};

/// Continuous extension of a single accepted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseStep {
    /// Start of the step (in integration direction).
    pub t_old: f64,
    /// Signed step size.
    pub h: f64,
    /// Coefficients `cont[j * dim + i]` for stage polynomial `j` and component `i`.
    pub cont: Vec<f64>,
}

impl DenseStep {
    /// Cubic Hermite step through `(y0, f0)` and `(y1, f1)` in the same
    /// coefficient layout; used for the series segment at a singular origin.
    pub fn hermite(t_old: f64, h: f64, y0: &[f64], y1: &[f64], f0: &[f64], f1: &[f64]) -> Self {
        let n = y0.len();
        let mut cont = vec![0.0; 8 * n];
        for i in 0..n {
            let ydiff = y1[i] - y0[i];
            let bspl = h * f0[i] - ydiff;
            cont[i] = y0[i];
            cont[n + i] = ydiff;
            cont[2 * n + i] = bspl;
            cont[3 * n + i] = ydiff - h * f1[i] - bspl;
        }
        DenseStep { t_old, h, cont }
    }

    fn lo(&self) -> f64 {
        self.t_old.min(self.t_old + self.h)
    }

    fn hi(&self) -> f64 {
        self.t_old.max(self.t_old + self.h)
    }
}

/// Dual number for simultaneous value/derivative evaluation in `s`.
#[derive(Clone, Copy)]
struct Dual(f64, f64);

impl Dual {
    fn add(self, c: f64) -> Dual {
        Dual(self.0 + c, self.1)
    }
    fn mul(self, o: Dual) -> Dual {
        Dual(self.0 * o.0, self.0 * o.1 + self.1 * o.0)
    }
}

/// Dense solution over a union of steps, sorted by position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseOutput {
    dim: usize,
    steps: Vec<DenseStep>,
}

impl DenseOutput {
    pub fn new(dim: usize) -> Self {
        DenseOutput {
            dim,
            steps: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[DenseStep] {
        &self.steps
    }

    /// Appends a step; steps are re-sorted lazily by [`DenseOutput::finish`].
    pub fn push(&mut self, step: DenseStep) {
        debug_assert_eq!(step.cont.len(), 8 * self.dim);
        self.steps.push(step);
    }

    /// Sorts steps by their lower endpoint so lookups can bisect.
    pub fn finish(&mut self) {
        self.steps
            .sort_by(|a, b| a.lo().partial_cmp(&b.lo()).expect("finite step bounds"));
    }

    /// Lower end of the covered interval.
    pub fn lower(&self) -> f64 {
        self.steps.first().map_or(f64::NAN, DenseStep::lo)
    }

    /// Upper end of the covered interval.
    pub fn upper(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, DenseStep::hi)
    }

    /// Sorted step boundaries (the integrator mesh).
    pub fn mesh(&self) -> Vec<f64> {
        let mut m: Vec<f64> = Vec::with_capacity(self.steps.len() + 1);
        for s in &self.steps {
            m.push(s.lo());
        }
        if let Some(s) = self.steps.last() {
            m.push(s.hi());
        }
        m
    }

    fn locate(&self, t: f64) -> &DenseStep {
        let idx = self.steps.partition_point(|s| s.lo() <= t);
        &self.steps[idx.saturating_sub(1).min(self.steps.len() - 1)]
    }

    /// Evaluates all components at `t` (clamped to the covered interval).
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let step = self.locate(t);
        let s = (t - step.t_old) / step.h;
        let s1 = 1.0 - s;
        let n = self.dim;
        let c = &step.cont;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let conpar = c[4 * n + i] + (c[5 * n + i] + (c[6 * n + i] + c[7 * n + i] * s) * s1) * s;
            *o = c[i] + (c[n + i] + (c[2 * n + i] + (c[3 * n + i] + conpar * s1) * s) * s1) * s;
        }
    }

    /// Value of a single component at `t`.
    pub fn value(&self, t: f64, i: usize) -> f64 {
        self.value_and_slope(t, i).0
    }

    /// Value and exact derivative (in `t`) of the interpolating polynomial.
    pub fn value_and_slope(&self, t: f64, i: usize) -> (f64, f64) {
        let step = self.locate(t);
        let n = self.dim;
        let c = &step.cont;
        let s = Dual((t - step.t_old) / step.h, 1.0);
        let s1 = Dual(1.0 - s.0, -1.0);
        let conpar = s
            .mul(s1.mul(s.mul(Dual(c[7 * n + i], 0.0)).add(c[6 * n + i])).add(c[5 * n + i]))
            .add(c[4 * n + i]);
        let y = s
            .mul(
                s1.mul(s.mul(conpar.mul(s1).add(c[3 * n + i])).add(c[2 * n + i]))
                    .add(c[n + i]),
            )
            .add(c[i]);
        (y.0, y.1 / step.h)
    }

    /// Linear recombination: output component `m` is `Σ_j weights[m][j] · y_j`.
    ///
    /// Exact because the continuous extension is linear in the stage data.
    pub fn combine(&self, weights: &[Vec<f64>]) -> DenseOutput {
        let m = weights.len();
        let n = self.dim;
        let steps = self
            .steps
            .iter()
            .map(|s| {
                let mut cont = vec![0.0; 8 * m];
                for j in 0..8 {
                    for (row, w) in weights.iter().enumerate() {
                        let mut acc = 0.0;
                        for (col, wc) in w.iter().enumerate().take(n) {
                            acc += wc * s.cont[j * n + col];
                        }
                        cont[j * m + row] = acc;
                    }
                }
                DenseStep {
                    t_old: s.t_old,
                    h: s.h,
                    cont,
                }
            })
            .collect();
        DenseOutput { dim: m, steps }
    }

    /// Restricts the output to `[a, b]`, keeping every step that overlaps it.
    pub fn restrict(&self, a: f64, b: f64) -> DenseOutput {
        let steps = self
            .steps
            .iter()
            .filter(|s| s.hi() > a && s.lo() < b)
            .cloned()
            .collect();
        DenseOutput {
            dim: self.dim,
            steps,
        }
    }

    /// Joins two outputs covering adjacent intervals.
    pub fn concat(mut self, other: DenseOutput) -> DenseOutput {
        assert_eq!(self.dim, other.dim, "dense outputs must share dimension");
        self.steps.extend(other.steps);
        self.finish();
        self
    }

    /// Samples a component at the mesh points and `inner` equispaced interior points per step.
    pub fn sample(&self, i: usize, inner: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.steps.len() * (inner + 1) + 1);
        for s in &self.steps {
            let (lo, hi) = (s.lo(), s.hi());
            for q in 0..=inner {
                let t = lo + (hi - lo) * q as f64 / (inner + 1) as f64;
                out.push((t, self.value(t, i)));
            }
        }
        let end = self.upper();
        out.push((end, self.value(end, i)));
        out
    }
}
