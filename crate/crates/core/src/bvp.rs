//! Linear boundary-value problems on `[0, r_max]` with artificial far-field
//! conditions, the coupled eigenmode problem and the auxiliary β problem.
//!
//! Commutator problems grow at most polynomially, so they are solved by
//! superposition from the origin with inner products accumulated as extra ODE
//! components. Problems whose homogeneous solution grows exponentially are
//! solved by two-sided shooting matched at an interior radius.

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ivp::dense::{DenseOutput, DenseStep};
use crate::ivp::dop853::{integrate, IvpOptions};
use crate::ivp::{even_jet, series_start4, ORIGIN_START};
use crate::operators::{regularize, Block, OperatorKind, Potential, PotentialSet, RadialOperator};
use crate::problem::{Problem, SolverSettings};

/// Right-hand side in the variables the operator acts on (tilde form when regularized).
pub type Source = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Named right-hand side.
#[derive(Clone)]
pub struct Rhs {
    pub name: String,
    pub f: Source,
}

impl Rhs {
    pub fn new(name: &str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Rhs {
            name: name.to_string(),
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for Rhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rhs({})", self.name)
    }
}

/// Far-field condition `α u + β(r) u' = 0` at `r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ArtificialBC {
    /// `ũ + r/(d−2+2k)·ũ' = 0` (3d, regularized variable).
    DecayRobin { k: usize, d: usize },
    /// `u' = 0` (1d).
    Neumann,
    /// `β' + (1 − 3/r)β = 0` for the 1d critical auxiliary problem.
    BetaRobin,
}

impl ArtificialBC {
    /// Natural condition for a commutator block.
    pub fn for_operator(op: &RadialOperator) -> Self {
        if op.dimension == 1 {
            ArtificialBC::Neumann
        } else {
            ArtificialBC::DecayRobin {
                k: op.tilde_power(),
                d: op.dimension,
            }
        }
    }

    /// Coefficients `(α, β)` at radius `r`.
    pub fn coefficients(&self, r: f64) -> (f64, f64) {
        match *self {
            ArtificialBC::DecayRobin { k, d } => (1.0, r / (d as f64 - 2.0 + 2.0 * k as f64)),
            ArtificialBC::Neumann => (0.0, 1.0),
            ArtificialBC::BetaRobin => (1.0 - 3.0 / r, 1.0),
        }
    }

    pub fn mismatch(&self, r: f64, u: f64, du: f64) -> f64 {
        let (a, b) = self.coefficients(r);
        a * u + b * du
    }
}

/// How a linear problem was solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BvpMethod {
    Superposition,
    TwoSided,
}

/// Solution of `𝓛u = f` with its source, for downstream inner products.
#[derive(Clone)]
pub struct BvpSolution {
    pub name: String,
    /// Components `(ũ, ũ')`.
    pub dense: DenseOutput,
    pub source: Source,
    pub operator: String,
    pub dimension: usize,
    pub tilde_power: usize,
    pub r_max: f64,
    pub bc: ArtificialBC,
    pub method: BvpMethod,
    /// Max relative defect of the equation at step quarter points.
    pub residual: f64,
    /// Max |bc mismatch| over the outer 20%, relative to max |u|.
    pub bc_mismatch: f64,
}

impl fmt::Debug for BvpSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BvpSolution")
            .field("name", &self.name)
            .field("operator", &self.operator)
            .field("method", &self.method)
            .field("residual", &self.residual)
            .field("bc_mismatch", &self.bc_mismatch)
            .finish()
    }
}

impl BvpSolution {
    pub fn value(&self, r: f64) -> f64 {
        self.dense.value(r, 0)
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.dense.value(r, 1)
    }

    /// Untransformed `u = r^m ũ`.
    pub fn physical(&self, r: f64) -> f64 {
        r.powi(self.tilde_power as i32) * self.value(r)
    }

    /// Weight `r^{d−1+2m}` of inner products in tilde variables.
    pub fn weight(&self, r: f64) -> f64 {
        r.powi(self.dimension as i32 - 1 + 2 * self.tilde_power as i32)
    }

    /// Mismatch of the far condition sampled on `[a, r_max]`.
    pub fn mismatch_curve(&self, a: f64, n: usize) -> Vec<(f64, f64, f64)> {
        (0..=n)
            .map(|i| {
                let r = a + (self.r_max - a) * i as f64 / n as f64;
                let (u, du) = self.dense.value_and_slope(r, 0);
                let (_, d2u) = self.dense.value_and_slope(r, 1);
                let (al, be) = self.bc.coefficients(r);
                let m = al * u + be * du;
                // d/dr of the mismatch with r-dependent coefficients.
                let h = 1e-6 * r.max(1.0);
                let (al2, be2) = self.bc.coefficients(r + h);
                let dm = (al2 - al) / h * u + (be2 - be) / h * du + al * du + be * d2u;
                (r, m, dm)
            })
            .collect()
    }
}

/// A converged inner product with its stabilization diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerProduct {
    pub value: f64,
    /// Value of the accumulation at `0.8 r_max`.
    pub at_window: f64,
    /// Flat over the final 20% to 1e-6 relative.
    pub stabilized: bool,
}

impl InnerProduct {
    fn new(value: f64, at_window: f64) -> Self {
        let stabilized = (value - at_window).abs() <= 1e-6 * value.abs().max(1e-300);
        InnerProduct {
            value,
            at_window,
            stabilized,
        }
    }
}

/// Solutions for several right-hand sides of one operator, with all pairwise
/// inner products `G[i][j] = ⟨f_i, u_j⟩` accumulated during the solve.
#[derive(Debug, Clone)]
pub struct LinearSolveSet {
    pub solutions: Vec<BvpSolution>,
    pub gram: Vec<Vec<InnerProduct>>,
    /// Accumulation curves `κ_ij(r)` (component `i * n + j`) with their slopes.
    pub accumulation: Option<DenseOutput>,
}

/// Growth of the homogeneous solution above which superposition is abandoned.
const GROWTH_LIMIT: f64 = 1e12;

/// Integrator tolerances three decades below the contract, so that the
/// differentiated dense output also meets it.
fn ivp_options(tol: f64) -> IvpOptions {
    let itol = (1e-3 * tol).max(1e-15);
    IvpOptions {
        rtol: itol,
        atol: itol * 1e-3,
        ..IvpOptions::default()
    }
}

/// Drift term `−(c/r) v`, zero when `c = 0`.
fn drift(c: f64, r: f64, v: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        -c / r * v
    }
}

/// Regular states at the start radius for the particular solutions (zero data)
/// and the homogeneous solution (block initial data).
fn origin_states(op: &RadialOperator, sources: &[Source]) -> (f64, Vec<[f64; 4]>) {
    let c = op.drift();
    let (h0, dh0) = op.origin_ic();
    let mut out = Vec::new();
    if c == 0.0 {
        for _ in sources {
            out.push([0.0, 0.0, 0.0, 0.0]);
        }
        out.push([h0, dh0, 0.0, 0.0]);
        return (0.0, out);
    }
    let r1 = ORIGIN_START;
    let q = even_jet(|r| op.q(r));
    for f in sources {
        let s = even_jet(|r| -f(r));
        let (u, du, u2) = series_start4(c, q, s, 0.0, r1);
        out.push([u, du, 0.0, u2]);
    }
    let (u, du, u2) = series_start4(c, q, [0.0, 0.0], h0, r1);
    out.push([u, du, h0, u2]);
    (r1, out)
}

/// Solves `op u_j = f_j` for every source with the far condition `bc`.
pub fn solve_linear_system(
    op: &RadialOperator,
    rhs: &[Rhs],
    bc: ArtificialBC,
    settings: &SolverSettings,
) -> Result<LinearSolveSet> {
    if rhs.is_empty() {
        return Err(Error::InvalidArgument("no right-hand sides".into()));
    }
    settings.validate()?;
    let op = &regularize(op);
    let set = superposition(op, rhs, bc, settings)?;
    match set {
        Some(s) => Ok(s),
        None => {
            let mut solutions = Vec::new();
            for r in rhs {
                solutions.push(two_sided(op, r, bc, settings)?);
            }
            let mut gram = Vec::new();
            for si in &solutions {
                let mut row = Vec::new();
                for sj in &solutions {
                    row.push(quadrature(&si.source, sj, settings.tol)?);
                }
                gram.push(row);
            }
            Ok(LinearSolveSet {
                solutions,
                gram,
                accumulation: None,
            })
        }
    }
}

/// Solves a single problem `op u = f`.
pub fn solve_linear_bvp(
    op: &RadialOperator,
    rhs: &Rhs,
    bc: ArtificialBC,
    settings: &SolverSettings,
) -> Result<BvpSolution> {
    let mut set = solve_linear_system(op, std::slice::from_ref(rhs), bc, settings)?;
    Ok(set.solutions.remove(0))
}

fn superposition(
    op: &RadialOperator,
    rhs: &[Rhs],
    bc: ArtificialBC,
    settings: &SolverSettings,
) -> Result<Option<LinearSolveSet>> {
    let n = rhs.len();
    let cols = n + 1;
    let dim = 2 * cols + n * cols;
    let c = op.drift();
    let r_max = settings.r_max;
    let sources: Vec<Source> = rhs.iter().map(|r| r.f.clone()).collect();
    let (r0, starts) = origin_states(op, &sources);

    let mut y0 = vec![0.0; dim];
    let mut f0 = vec![0.0; dim];
    for (j, s) in starts.iter().enumerate() {
        y0[2 * j] = s[0];
        y0[2 * j + 1] = s[1];
        f0[2 * j + 1] = s[3];
    }
    let system = |r: f64, y: &[f64], dy: &mut [f64]| {
        let q = op.q(r);
        let w = op.weight(r);
        let mut fv = [0.0; 16];
        for (i, s) in sources.iter().enumerate() {
            fv[i] = s(r);
        }
        for j in 0..cols {
            let (u, v) = (y[2 * j], y[2 * j + 1]);
            let src = if j < n { fv[j] } else { 0.0 };
            dy[2 * j] = v;
            dy[2 * j + 1] = drift(c, r, v) + q * u - src;
        }
        for i in 0..n {
            for j in 0..cols {
                dy[2 * cols + i * cols + j] = fv[i] * y[2 * j] * w;
            }
        }
    };
    if n > 16 {
        return Err(Error::InvalidArgument("at most 16 right-hand sides per solve".into()));
    }
    let sol = integrate(system, if r0 > 0.0 { r0 } else { 0.0 }, &y0, r_max, &ivp_options(settings.tol))?;
    let mut dense = DenseOutput::new(dim);
    if r0 > 0.0 {
        // Series segment on [0, r0]: value data at the origin, derivative data from the series.
        let mut origin = vec![0.0; dim];
        origin[2 * n] = starts[n][2];
        let mut f1 = vec![0.0; dim];
        system(r0, &y0, &mut f1);
        dense.push(DenseStep::hermite(0.0, r0, &origin, &y0, &f0, &f1));
    }
    let dense = dense.concat(sol.dense);

    // Homogeneous growth decides whether superposition is well conditioned.
    let h_start = dense.value(0.0, 2 * n).abs().max(dense.value(0.0, 2 * n + 1).abs());
    let h_end = sol.y_end[2 * n].abs().max(sol.y_end[2 * n + 1].abs());
    if h_end > GROWTH_LIMIT * h_start.max(1e-300) {
        return Ok(None);
    }

    let ye = &sol.y_end;
    let bh = bc.mismatch(r_max, ye[2 * n], ye[2 * n + 1]);
    if bh.abs() < 1e-300 {
        return Err(Error::DegenerateSolution(
            "homogeneous solution satisfies the far condition (operator has a zero mode)".into(),
        ));
    }
    let coeffs: Vec<f64> = (0..n)
        .map(|j| -bc.mismatch(r_max, ye[2 * j], ye[2 * j + 1]) / bh)
        .collect();

    let window = 0.8 * r_max;
    let mut at_window = vec![0.0; dim];
    dense.eval(window, &mut at_window);
    let mut gram = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for (j, a) in coeffs.iter().enumerate() {
            let base = 2 * cols + i * cols;
            let v_end = ye[base + j] + a * ye[base + n];
            let v_win = at_window[base + j] + a * at_window[base + n];
            row.push(InnerProduct::new(v_end, v_win));
        }
        gram.push(row);
    }

    let mut accumulation_weights = Vec::with_capacity(n * n);
    for i in 0..n {
        for (j, a) in coeffs.iter().enumerate() {
            let mut w = vec![0.0; dim];
            let base = 2 * cols + i * cols;
            w[base + j] = 1.0;
            w[base + n] = *a;
            accumulation_weights.push(w);
        }
    }
    let accumulation = dense.combine(&accumulation_weights);

    let mut solutions = Vec::with_capacity(n);
    for (j, a) in coeffs.iter().enumerate() {
        let mut wu = vec![0.0; dim];
        let mut wv = vec![0.0; dim];
        wu[2 * j] = 1.0;
        wu[2 * n] = *a;
        wv[2 * j + 1] = 1.0;
        wv[2 * n + 1] = *a;
        let d = dense.combine(&[wu, wv]);
        solutions.push(finish_solution(op, &rhs[j], d, bc, r_max, BvpMethod::Superposition)?);
    }
    Ok(Some(LinearSolveSet {
        solutions,
        gram,
        accumulation: Some(accumulation),
    }))
}

fn finish_solution(
    op: &RadialOperator,
    rhs: &Rhs,
    dense: DenseOutput,
    bc: ArtificialBC,
    r_max: f64,
    method: BvpMethod,
) -> Result<BvpSolution> {
    let c = op.drift();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mesh = dense.mesh();
    for w in mesh.windows(2) {
        for q in 1..4 {
            let r = w[0] + (w[1] - w[0]) * q as f64 / 4.0;
            if r <= 0.0 {
                continue;
            }
            let u = dense.value(r, 0);
            let (v, dv) = dense.value_and_slope(r, 1);
            let f = (rhs.f)(r);
            let qu = op.q(r) * u;
            let defect = -dv + drift(c, r, v) + qu - f;
            worst = worst.max(defect.abs());
            scale = scale.max(f.abs()).max(qu.abs()).max(dv.abs());
        }
    }
    let residual = worst / scale.max(1e-300);

    let mut sol = BvpSolution {
        name: rhs.name.clone(),
        dense,
        source: rhs.f.clone(),
        operator: op.label(),
        dimension: op.dimension,
        tilde_power: op.tilde_power(),
        r_max,
        bc,
        method,
        residual,
        bc_mismatch: 0.0,
    };
    let umax = sol.dense.sample(0, 3).iter().fold(0.0_f64, |m, p| m.max(p.1.abs()));
    let curve = sol.mismatch_curve(0.8 * r_max, 100);
    let mism = curve.iter().fold(0.0_f64, |m, p| m.max(p.1.abs()));
    sol.bc_mismatch = mism / umax.max(1e-300);
    if sol.bc_mismatch > 1e-6 {
        return Err(Error::DomainTooSmall {
            r: 0.8 * r_max,
            mismatch: sol.bc_mismatch,
        });
    }
    Ok(sol)
}

/// Two-sided shooting for a single source, matched at `r_m = r_max / 5`.
fn two_sided(op: &RadialOperator, rhs: &Rhs, bc: ArtificialBC, settings: &SolverSettings) -> Result<BvpSolution> {
    let c = op.drift();
    let r_max = settings.r_max;
    let r_m = 0.2 * r_max;
    let f = rhs.f.clone();
    let system = |r: f64, y: &[f64], dy: &mut [f64]| {
        let q = op.q(r);
        let s = f(r);
        dy[0] = y[1];
        dy[1] = drift(c, r, y[1]) + q * y[0] - s;
        dy[2] = y[3];
        dy[3] = drift(c, r, y[3]) + q * y[2];
    };
    let opts = ivp_options(settings.tol);
    let (r0, starts) = origin_states(op, std::slice::from_ref(&rhs.f));
    let y0 = [starts[0][0], starts[0][1], starts[1][0], starts[1][1]];
    let fwd = integrate(system, if r0 > 0.0 { r0 } else { 0.0 }, &y0, r_m, &opts)?;
    let mut inner = DenseOutput::new(4);
    if r0 > 0.0 {
        let origin = [0.0, 0.0, starts[1][2], 0.0];
        let f0 = [0.0, starts[0][3], 0.0, starts[1][3]];
        let mut f1 = [0.0; 4];
        system(r0, &y0, &mut f1);
        inner.push(DenseStep::hermite(0.0, r0, &origin, &y0, &f0, &f1));
    }
    let inner = inner.concat(fwd.dense);

    // Backward: particular with zero far data, homogeneous on the BC line.
    let (al, be) = bc.coefficients(r_max);
    let norm = (al * al + be * be).sqrt();
    let yb = [0.0, 0.0, be / norm, -al / norm];
    let bwd = integrate(system, r_max, &yb, r_m, &opts)?;
    let (p, b) = (&fwd.y_end, &bwd.y_end);
    // p + a h = pb + b hb at r_m, values and slopes.
    let m = nalgebra::Matrix2::new(p[2], -b[2], p[3], -b[3]);
    let rhs_v = nalgebra::Vector2::new(b[0] - p[0], b[1] - p[1]);
    let x = m
        .lu()
        .solve(&rhs_v)
        .ok_or_else(|| Error::DegenerateSolution("singular matching system".into()))?;
    let (a, bcoef) = (x[0], x[1]);
    let inner = inner.combine(&[vec![1.0, 0.0, a, 0.0], vec![0.0, 1.0, 0.0, a]]);
    let outer = bwd
        .dense
        .combine(&[vec![1.0, 0.0, bcoef, 0.0], vec![0.0, 1.0, 0.0, bcoef]]);
    finish_solution(op, rhs, inner.concat(outer), bc, r_max, BvpMethod::TwoSided)
}

/// `⟨f, v⟩ = ∫ f ṽ r^{d−1+2m} dr` by an independent quadrature ODE.
pub fn quadrature(f: &Source, v: &BvpSolution, tol: f64) -> Result<InnerProduct> {
    let window = 0.8 * v.r_max;
    let sys = |r: f64, _y: &[f64], dy: &mut [f64]| {
        dy[0] = f(r) * v.value(r) * v.weight(r);
    };
    let opts = IvpOptions {
        rtol: tol,
        atol: tol * 1e-6,
        ..IvpOptions::default()
    };
    let first = integrate(sys, 0.0, &[0.0], window, &opts)?;
    let second = integrate(sys, window, &first.y_end, v.r_max, &opts)?;
    Ok(InnerProduct::new(second.y_end[0], first.y_end[0]))
}

/// `⟨𝓛u, v⟩` using the source that produced `u`.
pub fn inner_product(u: &BvpSolution, v: &BvpSolution, tol: f64) -> Result<InnerProduct> {
    if u.tilde_power != v.tilde_power || u.dimension != v.dimension {
        return Err(Error::InvalidArgument(
            "inner product of solutions from different blocks".into(),
        ));
    }
    let ip = quadrature(&u.source, v, tol)?;
    if !ip.stabilized {
        return Err(Error::DomainTooSmall {
            r: v.r_max,
            mismatch: (ip.value - ip.at_window).abs(),
        });
    }
    Ok(ip)
}

/// Unstable eigenmode `L−φ2 = eφ1`, `L+φ1 = −eφ2` of the 3d cubic problem.
#[derive(Debug, Clone)]
pub struct EigenMode {
    pub e_unstable: f64,
    /// Components `(φ1, φ1', φ2, φ2')`, normalized so that `∫ φ2² r² dr = 1`.
    pub phi: DenseOutput,
    pub r_max: f64,
    pub residual_phi1: f64,
    pub residual_phi2: f64,
    /// Largest of `|φ1|, |φ2|` at `r_max` relative to the maximum.
    pub tail_ratio: f64,
}

impl EigenMode {
    pub fn phi1(&self, r: f64) -> f64 {
        self.phi.value(r, 0)
    }

    pub fn phi2(&self, r: f64) -> f64 {
        self.phi.value(r, 2)
    }
}

/// Far-field rates `(ρ cos θ, ρ sin θ)` with `θ = ½ arctan e`, `ρ = (1+e²)^{1/4}`.
pub fn eigen_bc_rates(e: f64) -> (f64, f64) {
    let theta = 0.5 * e.atan();
    let rho = (1.0 + e * e).powf(0.25);
    (rho * theta.cos(), rho * theta.sin())
}

struct EvansData {
    inner: DenseOutput,
    outer: DenseOutput,
    /// Matching matrix with unit columns.
    matrix: Matrix4<f64>,
    /// Column norms removed from `matrix`.
    norms: [f64; 4],
}

fn eigen_system(pot: &PotentialSet, lambda: f64, e: f64, r: f64, y: &[f64], dy: &mut [f64], cols: usize) {
    let vp = pot.v(Potential::Plus, r);
    let vm = pot.v(Potential::Minus, r);
    for j in 0..cols {
        let o = 4 * j;
        let (p1, dp1, p2, dp2) = (y[o], y[o + 1], y[o + 2], y[o + 3]);
        dy[o] = dp1;
        dy[o + 1] = drift(2.0, r, dp1) + (lambda - vp) * p1 + e * p2;
        dy[o + 2] = dp2;
        dy[o + 3] = drift(2.0, r, dp2) + (lambda - vm) * p2 - e * p1;
    }
}

fn evans(pot: &PotentialSet, lambda: f64, e: f64, r_m: f64, r_max: f64, tol: f64) -> Result<EvansData> {
    let r1 = ORIGIN_START;
    let c = 2.0;
    let (vp0, vm0) = (pot.v(Potential::Plus, 0.0), pot.v(Potential::Minus, 0.0));
    let mut y0 = [0.0; 8];
    let mut origin = [0.0; 8];
    let mut f0 = [0.0; 8];
    for (j, (a1, a2)) in [(1.0, 0.0), (0.0, 1.0)].into_iter().enumerate() {
        let s1 = ((lambda - vp0) * a1 + e * a2) / (1.0 + c);
        let s2 = ((lambda - vm0) * a2 - e * a1) / (1.0 + c);
        let o = 4 * j;
        y0[o] = a1 + 0.5 * s1 * r1 * r1;
        y0[o + 1] = s1 * r1;
        y0[o + 2] = a2 + 0.5 * s2 * r1 * r1;
        y0[o + 3] = s2 * r1;
        origin[o] = a1;
        origin[o + 2] = a2;
        f0[o + 1] = s1;
        f0[o + 3] = s2;
    }
    let sys = |r: f64, y: &[f64], dy: &mut [f64]| eigen_system(pot, lambda, e, r, y, dy, 2);
    let opts = ivp_options(tol);
    let fwd = integrate(sys, r1, &y0, r_m, &opts)?;
    let mut f1 = [0.0; 8];
    sys(r1, &y0, &mut f1);
    let mut inner = DenseOutput::new(8);
    inner.push(DenseStep::hermite(0.0, r1, &origin, &y0, &f0, &f1));
    let inner = inner.concat(fwd.dense);

    let (rc, rs) = eigen_bc_rates(e);
    let amp = (-rc * (r_max - r_m)).exp();
    let mut yb = [0.0; 8];
    for (j, (a1, a2)) in [(1.0, 0.0), (0.0, 1.0)].into_iter().enumerate() {
        let o = 4 * j;
        let (p1, p2) = (amp * a1, amp * a2);
        yb[o] = p1;
        yb[o + 1] = -(rc + 1.0 / r_max) * p1 - rs * p2;
        yb[o + 2] = p2;
        yb[o + 3] = -(rc + 1.0 / r_max) * p2 + rs * p1;
    }
    // Absolute tolerance follows the tiny starting amplitude.
    let bwd = integrate(sys, r_max, &yb, r_m, &IvpOptions { atol: opts.atol * amp, ..opts })?;
    let mut m = Matrix4::zeros();
    for j in 0..2 {
        for i in 0..4 {
            m[(i, j)] = fwd.y_end[4 * j + i];
            m[(i, j + 2)] = -bwd.y_end[4 * j + i];
        }
    }
    let mut norms = [1.0; 4];
    for (j, nj) in norms.iter_mut().enumerate() {
        let n = m.column(j).norm();
        if n > 0.0 {
            m.column_mut(j).scale_mut(1.0 / n);
            *nj = n;
        }
    }
    Ok(EvansData {
        inner,
        outer: bwd.dense,
        matrix: m,
        norms,
    })
}

/// Brent's method on a sign-changing bracket.
pub(crate) fn brent<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> Result<f64> {
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa * fb > 0.0 {
        return Err(Error::Shooting("root is not bracketed".into()));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b)?;
    }
    Err(Error::Shooting("Brent iteration did not converge".into()))
}

/// Finds the unstable eigenvalue by scanning the matching determinant for a
/// sign change on `(0, 20λ]` and refining with Brent's method.
pub fn solve_eigenmode(pot: &PotentialSet, settings: &SolverSettings) -> Result<EigenMode> {
    let problem = *pot.problem();
    if !problem.is_cubic_3d() {
        return Err(Error::InvalidArgument(
            "the eigenmode solver is specific to the 3d cubic problem".into(),
        ));
    }
    let lambda = problem.lambda;
    let r_max = settings.r_max;
    let r_m = (4.0 / lambda.sqrt()).min(0.25 * r_max);
    let tol = settings.tol;
    let det = |e: f64| -> Result<f64> { Ok(evans(pot, lambda, e, r_m, r_max, tol)?.matrix.determinant()) };

    // e = 0 is a root (generalized kernel); start the scan away from it.
    let step = 0.1 * lambda;
    let mut lo = 0.05 * lambda;
    let mut d_lo = det(lo)?;
    let mut bracket = None;
    while lo < 20.0 * lambda {
        let hi = lo + step;
        let d_hi = det(hi)?;
        if d_lo * d_hi < 0.0 {
            bracket = Some((lo, hi));
            break;
        }
        lo = hi;
        d_lo = d_hi;
    }
    let (a, b) = bracket.ok_or_else(|| Error::Shooting("no sign change of the matching determinant".into()))?;
    let e = brent(det, a, b, 1e-14)?;
    if !(e > 0.0) {
        return Err(Error::WrongBranch(e));
    }

    let data = evans(pot, lambda, e, r_m, r_max, tol)?;
    let svd = data.matrix.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Shooting("SVD failed".into()))?;
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let null: Vec<f64> = (0..4).map(|j| v_t[(imin, j)]).collect();

    // Undo the column scaling used in the determinant.
    let coef: Vec<f64> = (0..4).map(|j| null[j] / data.norms[j]).collect();
    let w_in: Vec<Vec<f64>> = (0..4)
        .map(|i| {
            let mut w = vec![0.0; 8];
            w[i] = coef[0];
            w[4 + i] = coef[1];
            w
        })
        .collect();
    let w_out: Vec<Vec<f64>> = (0..4)
        .map(|i| {
            let mut w = vec![0.0; 8];
            w[i] = coef[2];
            w[4 + i] = coef[3];
            w
        })
        .collect();
    let phi = data.inner.combine(&w_in).concat(data.outer.combine(&w_out));

    // Normalize ∫ φ2² r² dr = 1 and fix the sign by φ1(0) > 0.
    let norm2 = {
        let sys = |r: f64, _y: &[f64], dy: &mut [f64]| {
            let p2 = phi.value(r, 2);
            dy[0] = p2 * p2 * r * r;
        };
        integrate(sys, 0.0, &[0.0], r_max, &IvpOptions { rtol: tol, atol: tol * 1e-6, ..IvpOptions::default() })?.y_end[0]
    };
    let mut s = 1.0 / norm2.sqrt();
    if phi.value(0.0, 0) < 0.0 {
        s = -s;
    }
    let scale: Vec<Vec<f64>> = (0..4)
        .map(|i| {
            let mut w = vec![0.0; 4];
            w[i] = s;
            w
        })
        .collect();
    let phi = phi.combine(&scale);

    let (mut r1max, mut r2max, mut scale1, mut scale2): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let mesh = phi.mesh();
    for w in mesh.windows(2) {
        for q in 1..4 {
            let r = w[0] + (w[1] - w[0]) * q as f64 / 4.0;
            let p1 = phi.value(r, 0);
            let (dp1, d2p1) = phi.value_and_slope(r, 1);
            let p2 = phi.value(r, 2);
            let (dp2, d2p2) = phi.value_and_slope(r, 3);
            let vp = pot.v(Potential::Plus, r);
            let vm = pot.v(Potential::Minus, r);
            let l_plus = -d2p1 - 2.0 / r * dp1 + (lambda - vp) * p1;
            let l_minus = -d2p2 - 2.0 / r * dp2 + (lambda - vm) * p2;
            r1max = r1max.max((l_plus + e * p2).abs());
            r2max = r2max.max((l_minus - e * p1).abs());
            scale1 = scale1.max(d2p1.abs()).max((vp * p1).abs());
            scale2 = scale2.max(d2p2.abs()).max((vm * p2).abs());
        }
    }
    let peak = phi
        .sample(0, 3)
        .iter()
        .chain(phi.sample(2, 3).iter())
        .fold(0.0_f64, |m, p| m.max(p.1.abs()));
    let tail = phi.value(r_max, 0).abs().max(phi.value(r_max, 2).abs()) / peak;

    Ok(EigenMode {
        e_unstable: e,
        phi,
        r_max,
        residual_phi1: r1max / scale1.max(1e-300),
        residual_phi2: r2max / scale2.max(1e-300),
        tail_ratio: tail,
    })
}

/// Solves `L+β = −x²R` (1d, full operator with λ) with `β' + (1 − 3/x)β = 0`.
pub fn solve_beta(pot: Arc<PotentialSet>, settings: &SolverSettings) -> Result<BvpSolution> {
    let problem: Problem = *pot.problem();
    if problem.dimension != 1 {
        return Err(Error::UnsupportedDimension(problem.dimension));
    }
    let prof = pot
        .soliton()
        .cloned()
        .ok_or_else(|| Error::InvalidArgument("beta needs a soliton".into()))?;
    let op = crate::operators::full_operator(pot, crate::operators::Sign::Plus, Block::Even, 1)?;
    debug_assert_eq!(op.kind, OperatorKind::Full);
    let rhs = Rhs::new("-x^2 R", move |x| -x * x * prof.value(x));
    solve_linear_bvp(&op, &rhs, ArtificialBC::BetaRobin, settings)
}

/// Second-order finite differences with Richardson extrapolation, used as an
/// independent check of the superposition solver.
///
/// Supports the 1d even block and the 3d `k = 0` block (through `w = r u`).
/// Returns `(r_i, u(r_i))` on the coarse grid.
pub fn solve_linear_bvp_fd(op: &RadialOperator, rhs: &Rhs, r_max: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    let three_d = match (op.dimension, op.block) {
        (1, Block::Even) => false,
        (3, Block::Harmonic(0)) => true,
        _ => {
            return Err(Error::InvalidArgument(
                "finite-difference check supports the 1d even and 3d k = 0 blocks".into(),
            ))
        }
    };
    let solve = |m: usize| -> Vec<f64> {
        let h = r_max / m as f64;
        let mut a = vec![0.0; m + 1];
        let mut b = vec![0.0; m + 1];
        let mut c = vec![0.0; m + 1];
        let mut d = vec![0.0; m + 1];
        for i in 0..=m {
            let r = i as f64 * h;
            let q = op.q(r);
            let f = (rhs.f)(r);
            a[i] = -1.0 / (h * h);
            c[i] = -1.0 / (h * h);
            b[i] = 2.0 / (h * h) + q;
            d[i] = if three_d { r * f } else { f };
        }
        if three_d {
            // w(0) = 0.
            b[0] = 1.0;
            c[0] = 0.0;
            d[0] = 0.0;
        } else {
            // Ghost point for u'(0) = 0.
            c[0] = -2.0 / (h * h);
        }
        // Ghost point for the Neumann condition (w' = 0 in 3d, u' = 0 in 1d).
        a[m] = -2.0 / (h * h);
        thomas(&a, &b, &c, &d)
    };
    let coarse = solve(n);
    let fine = solve(2 * n);
    let h = r_max / n as f64;
    Ok((0..=n)
        .map(|i| {
            let r = i as f64 * h;
            let w = (4.0 * fine[2 * i] - coarse[i]) / 3.0;
            let u = if three_d {
                if i == 0 {
                    f64::NAN
                } else {
                    w / r
                }
            } else {
                w
            };
            (r, u)
        })
        .collect())
}

fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Sup-norm distance between a superposition solution and the FD check.
pub fn cross_check_distance(sol: &BvpSolution, fd: &[(f64, f64)]) -> f64 {
    fd.iter()
        .filter(|(r, u)| *r > 0.0 && u.is_finite())
        .fold(0.0_f64, |m, &(r, u)| m.max((sol.physical(r) - u).abs()))
}
