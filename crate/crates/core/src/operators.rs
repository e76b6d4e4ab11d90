//! Linearization potentials and the per-block radial operators.
//!
//! For the nonlinearity `g(s) = s^σ` the linearized potentials are
//! `V− = R^{2σ}`, `V+ = (1+2σ)R^{2σ}`, `V1 = (1+σ)R^{2σ}` and `V2 = σR^{2σ}`.
//! The commutator potentials are `𝒱± = ½ r V±'`. Radial derivatives of the
//! potentials are formed analytically from `R`, `R'` and the profile equation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::soliton::RadialProfile;

/// Which of the two scalar operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

/// Symmetry block: spherical harmonic `k` in 3d, parity in 1d.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Block {
    Harmonic(usize),
    Even,
    Odd,
}

impl Block {
    /// Superscript label: `0`, `1`, ... or `e`, `o`.
    pub fn label(self) -> String {
        match self {
            Block::Harmonic(k) => k.to_string(),
            Block::Even => "e".into(),
            Block::Odd => "o".into(),
        }
    }

    /// Harmonic index (0 for the 1d parities).
    pub fn k(self) -> usize {
        match self {
            Block::Harmonic(k) => k,
            _ => 0,
        }
    }
}

/// Full operator `L± = −Δ + λ − V±` or commutator `𝓛± = −Δ + 𝒱±`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    Full,
    Commutator,
}

#[derive(Debug, Clone)]
enum Source {
    Soliton(Arc<RadialProfile>),
    Zero,
}

/// The four linearization potentials with derivatives up to third order.
#[derive(Debug, Clone)]
pub struct PotentialSet {
    problem: Problem,
    source: Source,
    scale: f64,
}

/// Value and first three radial derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Jet {
    fn scaled(self, c: f64) -> Jet {
        Jet {
            v: c * self.v,
            d1: c * self.d1,
            d2: c * self.d2,
            d3: c * self.d3,
        }
    }
}

/// Which linearization potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Potential {
    Minus,
    Plus,
    V1,
    V2,
}

impl From<Sign> for Potential {
    fn from(s: Sign) -> Self {
        match s {
            Sign::Plus => Potential::Plus,
            Sign::Minus => Potential::Minus,
        }
    }
}

/// Builds the potential set from an accepted soliton.
pub fn build_potentials(profile: Arc<RadialProfile>, problem: &Problem) -> PotentialSet {
    PotentialSet {
        problem: *problem,
        source: Source::Soliton(profile),
        scale: 1.0,
    }
}

impl PotentialSet {
    /// Identically vanishing potentials (free operators).
    pub fn zero(problem: &Problem) -> Self {
        PotentialSet {
            problem: *problem,
            source: Source::Zero,
            scale: 0.0,
        }
    }

    /// Same potentials multiplied pointwise by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        PotentialSet {
            problem: self.problem,
            source: self.source.clone(),
            scale: self.scale * c,
        }
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    /// Soliton the potentials were built from, if any.
    pub fn soliton(&self) -> Option<&Arc<RadialProfile>> {
        match &self.source {
            Source::Soliton(p) => Some(p),
            Source::Zero => None,
        }
    }

    /// Truncation radius of the underlying soliton.
    pub fn r_max(&self) -> f64 {
        match &self.source {
            Source::Soliton(p) => p.r_max,
            Source::Zero => self.problem.default_r_max(),
        }
    }

    fn coefficient(&self, which: Potential) -> f64 {
        let s = self.problem.sigma;
        let c = match which {
            Potential::Minus => 1.0,
            Potential::Plus => 1.0 + 2.0 * s,
            Potential::V1 => 1.0 + s,
            Potential::V2 => s,
        };
        c * self.scale
    }

    /// `R, R', R'', R'''` from the interpolant and the profile equation.
    pub fn soliton_jet(&self, r: f64) -> Jet {
        let prof = match &self.source {
            Source::Soliton(p) => p,
            Source::Zero => return Jet::default(),
        };
        let r = r.abs();
        let (u, du) = prof.eval(r);
        let l = self.problem.lambda;
        let p = 2.0 * self.problem.sigma;
        let c = self.problem.d() - 1.0;
        if u <= 0.0 {
            return Jet::default();
        }
        let n = l * u - u.powf(p + 1.0);
        let np = l - (p + 1.0) * u.powf(p);
        let (d2, d3) = if c == 0.0 {
            (n, np * du)
        } else if r < 1e-3 {
            // Series R = a + b r²/2 + c4 r⁴/24 about the regular origin.
            let d = self.problem.d();
            let b = n / d;
            let c4 = 3.0 * np * b / (d + 2.0);
            (b + 0.5 * c4 * r * r, c4 * r)
        } else {
            let d2 = -c / r * du + n;
            (d2, c / (r * r) * du - c / r * d2 + np * du)
        };
        Jet {
            v: u,
            d1: du,
            d2,
            d3,
        }
    }

    /// `V` and its first three radial derivatives for one potential.
    pub fn jet(&self, which: Potential, r: f64) -> Jet {
        if matches!(self.source, Source::Zero) || self.scale == 0.0 {
            return Jet::default();
        }
        let s = self.soliton_jet(r);
        if s.v <= 0.0 {
            return Jet::default();
        }
        let p = 2.0 * self.problem.sigma;
        let rp = s.v.powf(p);
        let q = s.d1 / s.v;
        let q2 = s.d2 / s.v;
        let q3 = s.d3 / s.v;
        let base = Jet {
            v: rp,
            d1: p * rp * q,
            d2: p * rp * ((p - 1.0) * q * q + q2),
            d3: p * rp * ((p - 1.0) * (p - 2.0) * q * q * q + 3.0 * (p - 1.0) * q * q2 + q3),
        };
        base.scaled(self.coefficient(which))
    }

    pub fn v(&self, which: Potential, r: f64) -> f64 {
        self.jet(which, r).v
    }

    pub fn v_minus(&self, r: f64) -> f64 {
        self.v(Potential::Minus, r)
    }

    pub fn v_plus(&self, r: f64) -> f64 {
        self.v(Potential::Plus, r)
    }

    pub fn v1(&self, r: f64) -> f64 {
        self.v(Potential::V1, r)
    }

    pub fn v2(&self, r: f64) -> f64 {
        self.v(Potential::V2, r)
    }

    /// Commutator potential `𝒱± = ½ r V±'`.
    pub fn cal_v(&self, sign: Sign, r: f64) -> f64 {
        0.5 * r * self.jet(sign.into(), r).d1
    }

    pub fn cal_v_minus(&self, r: f64) -> f64 {
        self.cal_v(Sign::Minus, r)
    }

    pub fn cal_v_plus(&self, r: f64) -> f64 {
        self.cal_v(Sign::Plus, r)
    }
}

/// One symmetry block of `L±` or `𝓛±`, written as
/// `−u'' − (c/r)u' + q(r)u` with drift `c` and potential `q`.
#[derive(Debug, Clone)]
pub struct RadialOperator {
    pub sign: Sign,
    pub block: Block,
    pub kind: OperatorKind,
    pub dimension: usize,
    pub lambda: f64,
    /// Coefficient of the subtracted Gaussian `δ0·e^{−r²}`.
    pub delta0: f64,
    /// True once `W = r^k W̃` has been applied.
    pub regularized: bool,
    pub potentials: Arc<PotentialSet>,
    /// Multiplier on the commutator potential; 1 except in the bound composition.
    pub(crate) potential_scale: f64,
    /// Coefficient of an added `+e^{−r²}` barrier; 0 except in the bound composition.
    pub(crate) barrier: f64,
}

fn check_block(dimension: usize, block: Block) -> Result<()> {
    match (dimension, block) {
        (3, Block::Harmonic(_)) | (1, Block::Even) | (1, Block::Odd) => Ok(()),
        (1 | 3, b) => Err(Error::InvalidArgument(format!(
            "block {b:?} is not valid in dimension {dimension}"
        ))),
        (d, _) => Err(Error::UnsupportedDimension(d)),
    }
}

/// `𝓛 = −Δ_r + 𝒱_sign + k(k+d−2)/r² − δ0·e^{−r²}` on one block.
pub fn commutator_operator(
    pot: Arc<PotentialSet>,
    sign: Sign,
    block: Block,
    dimension: usize,
    delta0: f64,
) -> Result<RadialOperator> {
    check_block(dimension, block)?;
    if !(delta0 >= 0.0) {
        return Err(Error::InvalidArgument(format!("delta0 must be >= 0, got {delta0}")));
    }
    Ok(RadialOperator {
        sign,
        block,
        kind: OperatorKind::Commutator,
        dimension,
        lambda: pot.problem().lambda,
        delta0,
        regularized: false,
        potentials: pot,
        potential_scale: 1.0,
        barrier: 0.0,
    })
}

/// `L = −Δ_r + λ − V_sign + k(k+d−2)/r²` on one block.
pub fn full_operator(
    pot: Arc<PotentialSet>,
    sign: Sign,
    block: Block,
    dimension: usize,
) -> Result<RadialOperator> {
    let mut op = commutator_operator(pot, sign, block, dimension, 0.0)?;
    op.kind = OperatorKind::Full;
    Ok(op)
}

/// Applies `W = r^k W̃`; a no-op for `k = 0` and in 1d.
pub fn regularize(op: &RadialOperator) -> RadialOperator {
    let mut out = op.clone();
    if op.dimension == 3 && op.block.k() >= 1 {
        out.regularized = true;
    }
    out
}

impl RadialOperator {
    pub fn k(&self) -> usize {
        self.block.k()
    }

    /// `k(k+d−2)`; zero for `k = 0` and in 1d.
    pub fn centrifugal_coefficient(&self) -> f64 {
        if self.dimension == 1 {
            return 0.0;
        }
        let k = self.k() as f64;
        k * (k + self.dimension as f64 - 2.0)
    }

    /// Drift coefficient `c` in `−(c/r) u'`.
    pub fn drift(&self) -> f64 {
        let base = self.dimension as f64 - 1.0;
        if self.regularized {
            base + 2.0 * self.k() as f64
        } else {
            base
        }
    }

    /// Exponent `m` in the regularization `W = r^m W̃`.
    pub fn tilde_power(&self) -> usize {
        if self.regularized {
            self.k()
        } else {
            0
        }
    }

    /// Quadrature weight for `⟨f, u⟩` in the variables the operator acts on.
    pub fn weight(&self, r: f64) -> f64 {
        let m = self.dimension as i32 - 1 + 2 * self.tilde_power() as i32;
        r.powi(m)
    }

    /// Potential part excluding the centrifugal term.
    pub fn potential(&self, r: f64) -> f64 {
        let gauss = (-r * r).exp();
        let v = match self.kind {
            OperatorKind::Commutator => {
                self.potential_scale * self.potentials.cal_v(self.sign, r)
            }
            OperatorKind::Full => self.lambda - self.potentials.v(self.sign.into(), r),
        };
        v - self.delta0 * gauss + self.barrier * gauss
    }

    /// Full zeroth-order coefficient `q(r)`, including `k(k+d−2)/r²` unless regularized.
    pub fn q(&self, r: f64) -> f64 {
        let mut q = self.potential(r);
        if !self.regularized {
            let cf = self.centrifugal_coefficient();
            if cf != 0.0 {
                q += cf / (r * r);
            }
        }
        q
    }

    /// `−u'' − (c/r)u' + q u` for given derivatives.
    pub fn apply(&self, r: f64, u: f64, du: f64, d2u: f64) -> f64 {
        let c = self.drift();
        let drift = if c == 0.0 { 0.0 } else { c / r * du };
        -d2u - drift + self.q(r) * u
    }

    /// Short label such as `L+^(0)`, `calL-^(e)` or `L+^(1)` for the full operator.
    pub fn label(&self) -> String {
        let head = match self.kind {
            OperatorKind::Commutator => "calL",
            OperatorKind::Full => "L",
        };
        format!("{head}{}^({})", self.sign.symbol(), self.block.label())
    }

    /// Initial data `(u, u')` of the distinguished solution at the origin.
    pub fn origin_ic(&self) -> (f64, f64) {
        match self.block {
            Block::Odd => (0.0, 1.0),
            _ => (1.0, 0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centrifugal_coefficients() {
        let pot = Arc::new(PotentialSet::zero(&Problem::cubic_3d()));
        let op = commutator_operator(pot.clone(), Sign::Plus, Block::Harmonic(2), 3, 0.0).unwrap();
        assert_eq!(op.centrifugal_coefficient(), 6.0);
        assert_eq!(op.q(2.0), 6.0 / 4.0);
        let op0 = commutator_operator(pot, Sign::Plus, Block::Harmonic(0), 3, 0.0).unwrap();
        assert_eq!(op0.centrifugal_coefficient(), 0.0);
    }

    #[test]
    fn regularization_drift() {
        let pot = Arc::new(PotentialSet::zero(&Problem::cubic_3d()));
        let op = commutator_operator(pot.clone(), Sign::Minus, Block::Harmonic(1), 3, 0.0).unwrap();
        let reg = regularize(&op);
        assert_eq!(reg.drift(), 4.0);
        assert_eq!(reg.q(1.5), 0.0);
        let op0 = commutator_operator(pot, Sign::Minus, Block::Harmonic(0), 3, 0.0).unwrap();
        let reg0 = regularize(&op0);
        assert!(!reg0.regularized);
        assert_eq!(reg0.drift(), 2.0);
    }

    #[test]
    fn invalid_blocks_rejected() {
        let pot = Arc::new(PotentialSet::zero(&Problem::one_d(2.0)));
        assert!(commutator_operator(pot.clone(), Sign::Plus, Block::Harmonic(0), 1, 0.0).is_err());
        assert!(commutator_operator(pot.clone(), Sign::Plus, Block::Even, 3, 0.0).is_err());
        assert!(commutator_operator(pot, Sign::Plus, Block::Even, 1, -1.0).is_err());
    }

    #[test]
    fn free_operator_is_laplacian() {
        let pot = Arc::new(PotentialSet::zero(&Problem::cubic_3d()));
        let op = commutator_operator(pot, Sign::Plus, Block::Harmonic(0), 3, 0.0).unwrap();
        // u = e^{-r}/r is harmonic for −Δ + 1, so −Δu = −u.
        let r = 1.7;
        let u = (-r as f64).exp() / r;
        let du = -u - u / r;
        let d2u = u + 2.0 * u / r + 2.0 * u / (r * r);
        assert!((op.apply(r, u, du, d2u) + u).abs() < 1e-14);
    }
}
