//! Inner-product ledger, Gram reductions, per-block decision rules and the
//! assembled certificate.
//!
//! A block with index 0 is positive outright. A block with index 1 is
//! positive when the orthogonality conditions imposed on it remove the
//! negative direction: for one condition the corresponding inner product must
//! be negative, for two conditions the Gram reduction decides.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bvp::{
    cross_check_distance, solve_beta, solve_eigenmode, solve_linear_bvp_fd, solve_linear_system,
    ArtificialBC, BvpSolution, EigenMode, Rhs,
};
use crate::error::{Error, Result};
use crate::index::{index_trajectory, perturbation_sweep, verify_monotonicity, IndexResult, SweepResult};
use crate::ivp::dense::DenseOutput;
use crate::ivp::Trajectory;
use crate::mourre::{mourre_report, MourreReport};
use crate::operators::{build_potentials, commutator_operator, Block, PotentialSet, RadialOperator, Sign};
use crate::problem::{Problem, SolverSettings};
use crate::soliton::{closed_form_1d, RadialProfile};

/// Version of the certificate JSON layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Default δ0 sweep.
pub const DEFAULT_DELTA0: [f64; 5] = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2];

/// Orthogonality conditions imposed on the `𝓛−` even block in 1d.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Conditions {
    /// `g ⊥ ΛR`, plus `g ⊥ β` in the critical case.
    #[default]
    Natural,
    /// `g ⊥ R` (critical case only).
    Alternative,
    /// `g ⊥ ΛR, Λ²R` (critical case only).
    Fmr,
}

impl Conditions {
    pub fn as_str(self) -> &'static str {
        match self {
            Conditions::Natural => "natural",
            Conditions::Alternative => "alternative",
            Conditions::Fmr => "fmr",
        }
    }
}

impl std::str::FromStr for Conditions {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" => Ok(Conditions::Natural),
            "alternative" => Ok(Conditions::Alternative),
            "fmr" => Ok(Conditions::Fmr),
            other => Err(Error::Config(format!(
                "unknown condition set `{other}` (natural | alternative | fmr)"
            ))),
        }
    }
}

/// Right-hand side used for the second FMR direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FmrVariant {
    /// `R/σ² + (2/σ + 1)xR' + x²(λR − R³)`, which reproduces the published values.
    #[default]
    Published,
    /// `Λ²R = R/σ² + (2/σ + 1)xR' + x²R''` with the profile equation for `R''`.
    Exact,
}

/// Options of a certification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub conditions: Conditions,
    pub fmr_variant: FmrVariant,
    pub delta0: Vec<f64>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            conditions: Conditions::Natural,
            fmr_variant: FmrVariant::Published,
            delta0: DEFAULT_DELTA0.to_vec(),
        }
    }
}

impl CertifyOptions {
    pub fn validate(&self, problem: &Problem) -> Result<()> {
        if self.conditions != Conditions::Natural && !problem.is_critical_1d() {
            return Err(Error::Config(format!(
                "condition set `{}` is only defined for the 1d critical problem (sigma = 2)",
                self.conditions.as_str()
            )));
        }
        if self.delta0.is_empty() || self.delta0.windows(2).any(|w| w[1] <= w[0]) || self.delta0[0] <= 0.0 {
            return Err(Error::Config(
                "delta0 sweep must be positive and strictly ascending".into(),
            ));
        }
        Ok(())
    }
}

/// One inner product with its provenance and convergence metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub value: f64,
    pub operator: String,
    /// Right-hand sides `(f_i, f_j)` of `⟨f_i, u_j⟩`.
    pub rhs: (String, String),
    pub delta0: f64,
    pub r_max: f64,
    pub tol: f64,
    /// Accumulated value at `0.8 r_max`.
    pub at_window: f64,
    pub stabilized: bool,
}

/// Named inner products, ordered by name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InnerProductLedger {
    pub entries: BTreeMap<String, LedgerEntry>,
}

impl InnerProductLedger {
    pub fn get(&self, name: &str) -> Result<f64> {
        self.entries
            .get(name)
            .map(|e| e.value)
            .ok_or_else(|| Error::IncompleteRun(format!("ledger entry {name}")))
    }

    pub fn insert(&mut self, name: &str, entry: LedgerEntry) {
        self.entries.insert(name.to_string(), entry);
    }

    pub fn values(&self) -> BTreeMap<String, f64> {
        self.entries.iter().map(|(k, v)| (k.clone(), v.value)).collect()
    }
}

/// `K1 − K3²/K2`, the value of the form on the combination orthogonal to both conditions.
pub fn gram_reduce(k1: f64, k2: f64, k3: f64) -> Result<f64> {
    if !(k2.abs() >= 1e-12) {
        return Err(Error::DegenerateGram(k2));
    }
    Ok(k1 - k3 * k3 / k2)
}

/// Gram reduction with the positivity rule attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramValue {
    /// Ledger names of `(K1, K2, K3)`.
    pub entries: (String, String, String),
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub value: f64,
    /// `k2-positive` or `k2-negative`.
    pub branch: String,
    pub positive: bool,
}

impl GramValue {
    /// With `K2 > 0` the block is positive iff the reduction is negative; with
    /// `K2 < 0` the second condition alone already removes the negative direction.
    pub fn new(ledger: &InnerProductLedger, names: [&str; 3]) -> Result<Self> {
        let (k1, k2, k3) = (ledger.get(names[0])?, ledger.get(names[1])?, ledger.get(names[2])?);
        let value = gram_reduce(k1, k2, k3)?;
        let (branch, positive) = if k2 > 0.0 {
            ("k2-positive", value < 0.0)
        } else {
            ("k2-negative", true)
        };
        Ok(GramValue {
            entries: (names[0].into(), names[1].into(), names[2].into()),
            k1,
            k2,
            k3,
            value,
            branch: branch.into(),
            positive,
        })
    }
}

/// Decision for one symmetry block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub operator: String,
    pub index: usize,
    pub conditions: Vec<String>,
    /// `index-0`, `single-condition`, `gram` or `index-exceeds-conditions`.
    pub rule: String,
    /// Ledger entry or Gram name that decided the block.
    pub decided_by: Option<String>,
    pub value: Option<f64>,
    pub positive: bool,
    /// Higher harmonics covered through index monotonicity.
    pub covers_higher_harmonics: bool,
}

/// Overall outcome. A failure is never read as existence of an embedded eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Inconclusive,
    Fault,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Fault => "fault",
        }
    }
}

/// Outcome of the δ0 perturbation argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Largest swept δ0 that keeps every index and every positive block.
    pub delta0: Option<f64>,
    /// Index sweep: every tested δ0 with whether all indexes were preserved.
    pub index_sweep: Vec<(f64, bool)>,
    /// δ0 values whose perturbed ledger was checked, with the outcome.
    pub ledger_checks: Vec<(f64, bool)>,
    /// Ledger recomputed at the accepted δ0.
    pub perturbed_ledger: BTreeMap<String, f64>,
    pub perturbed_gram: BTreeMap<String, f64>,
}

/// Coercivity constants from the bound composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub delta0: f64,
    /// Largest `θ ≤ 1` with `−Δ + 2𝒱± + (δ0/θ)e^{−r²} ≥ 0` on every block.
    pub theta_star: f64,
    pub final_delta: f64,
    pub tested: Vec<(f64, bool)>,
}

/// Unstable eigenmode summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenmodeSummary {
    pub e_unstable: f64,
    pub residual_phi1: f64,
    pub residual_phi2: f64,
    pub tail_ratio: f64,
    pub normalization: String,
    pub phi1_origin: f64,
    pub phi2_origin: f64,
}

impl From<&EigenMode> for EigenmodeSummary {
    fn from(e: &EigenMode) -> Self {
        EigenmodeSummary {
            e_unstable: e.e_unstable,
            residual_phi1: e.residual_phi1,
            residual_phi2: e.residual_phi2,
            tail_ratio: e.tail_ratio,
            normalization: "int phi2^2 r^2 dr = 1, phi1(0) > 0".into(),
            phi1_origin: e.phi1(0.0),
            phi2_origin: e.phi2(0.0),
        }
    }
}

/// Soliton summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonSummary {
    pub origin_value: f64,
    pub residual: f64,
    pub decay_slope: f64,
    pub tail_amplitude: f64,
    /// Sup distance to the closed form on the profile grid (1d only).
    pub closed_form_error: Option<f64>,
}

impl SolitonSummary {
    pub fn new(profile: &RadialProfile) -> Self {
        let p = &profile.problem;
        let closed_form_error = (p.dimension == 1).then(|| {
            profile
                .grid
                .iter()
                .zip(&profile.values)
                .map(|(&x, &v)| (v - closed_form_1d(p, x).unwrap_or(f64::NAN)).abs())
                .fold(0.0, f64::max)
        });
        SolitonSummary {
            origin_value: profile.origin_value,
            residual: profile.residual,
            decay_slope: profile.tail.decay_slope,
            tail_amplitude: profile.tail.amplitude,
            closed_form_error,
        }
    }
}

/// Independent checks recorded alongside the ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    /// Largest `|⟨f_i, u_j⟩ − ⟨f_j, u_i⟩|` over solved pairs.
    pub symmetry_defect: f64,
    /// Sup distance between superposition and finite differences on the designated problem.
    pub fd_cross_check: f64,
    /// `|Ĵ1 − J1^(e)|` when both are computed.
    pub jhat1_vs_j1: Option<f64>,
    /// Largest BVP residual relative to the size of the equation's terms.
    pub max_bvp_residual: f64,
    /// Largest far-condition mismatch over the outer 20%, relative to max |u|.
    pub max_bc_mismatch: f64,
}

/// Problem descriptor as serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInfo {
    pub label: String,
    pub dimension: usize,
    pub sigma: f64,
    pub lambda: f64,
    pub r_max: f64,
    pub tol: f64,
}

/// The certificate written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub schema_version: u32,
    pub problem: ProblemInfo,
    pub conditions: Conditions,
    pub fmr_variant: Option<FmrVariant>,
    pub orthogonality_conditions: Vec<String>,
    pub soliton: SolitonSummary,
    pub indexes: BTreeMap<String, IndexResult>,
    pub monotonicity: bool,
    pub eigenmode: Option<EigenmodeSummary>,
    pub ledger: InnerProductLedger,
    pub gram: BTreeMap<String, GramValue>,
    pub blocks: Vec<BlockReport>,
    pub perturbation: Perturbation,
    pub bound: Option<BoundReport>,
    pub mourre: MourreReport,
    pub consistency: Consistency,
    pub verdict: Verdict,
    pub failing_block: Option<String>,
    pub failing_value: Option<f64>,
    pub notes: Vec<String>,
}

/// Numerical objects behind a certificate, for export.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub trajectories: Vec<(String, Trajectory)>,
    pub solutions: Vec<(String, BvpSolution)>,
    /// One-component accumulation curves keyed by ledger name.
    pub accumulations: Vec<(String, DenseOutput)>,
    pub eigenmode: Option<EigenMode>,
}

/// Blocks whose indexes are computed for a problem.
pub fn certified_blocks(problem: &Problem) -> Vec<(Sign, Block)> {
    if problem.dimension == 3 {
        vec![
            (Sign::Plus, Block::Harmonic(0)),
            (Sign::Plus, Block::Harmonic(1)),
            (Sign::Plus, Block::Harmonic(2)),
            (Sign::Minus, Block::Harmonic(0)),
            (Sign::Minus, Block::Harmonic(1)),
        ]
    } else {
        vec![
            (Sign::Plus, Block::Even),
            (Sign::Minus, Block::Even),
            (Sign::Plus, Block::Odd),
            (Sign::Minus, Block::Odd),
        ]
    }
}

/// Human-readable orthogonality conditions defining the subspace.
pub fn orthogonality_conditions(problem: &Problem, conditions: Conditions) -> Vec<String> {
    if problem.dimension == 3 {
        return vec![
            "<f, R> = 0".into(),
            "<g, R + x.grad R> = 0".into(),
            "<f, phi2> = 0".into(),
            "<f, x_j R> = 0, j = 1..d".into(),
        ];
    }
    let mut out = vec!["<f, R> = 0".to_string(), "<f, x R> = 0".to_string()];
    match conditions {
        Conditions::Natural => {
            out.push("<g, Lambda R> = 0".into());
            if problem.is_critical_1d() {
                out.push("<g, rho> = 0, rho = beta with L+ beta = -x^2 R".into());
            }
        }
        Conditions::Alternative => out.push("<g, R> = 0".into()),
        Conditions::Fmr => {
            out.push("<g, Lambda R> = 0".into());
            out.push("<g, Lambda^2 R> = 0".into());
        }
    }
    out
}

/// Conditions and decision source for one block: `(conditions, ledger entry or gram name)`.
fn block_plan(problem: &Problem, sign: Sign, block: Block, conditions: Conditions) -> (Vec<String>, Option<String>, bool) {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    match (problem.dimension, sign, block) {
        (3, Sign::Plus, Block::Harmonic(0)) => (s(&["R", "phi2"]), Some("K^(0)".into()), false),
        (3, Sign::Plus, Block::Harmonic(1)) => (s(&["x_j R"]), Some("K1^(1)".into()), false),
        (3, Sign::Minus, Block::Harmonic(0)) => (s(&["R + r R'"]), Some("J1^(0)".into()), false),
        (3, Sign::Plus, Block::Harmonic(2)) | (3, Sign::Minus, Block::Harmonic(1)) => (vec![], None, true),
        (1, Sign::Plus, Block::Even) => (s(&["R"]), Some("K1^(e)".into()), false),
        (1, Sign::Plus, Block::Odd) => (s(&["x R"]), Some("K1^(o)".into()), false),
        (1, Sign::Minus, Block::Even) => match conditions {
            Conditions::Natural if problem.is_critical_1d() => {
                (s(&["Lambda R", "rho"]), Some("J^(e)".into()), false)
            }
            Conditions::Natural => (s(&["Lambda R"]), Some("J1^(e)".into()), false),
            Conditions::Alternative => (s(&["R"]), Some("Jcheck1^(e)".into()), false),
            Conditions::Fmr => (s(&["Lambda R", "Lambda^2 R"]), Some("Jhat^(e)".into()), false),
        },
        _ => (vec![], None, false),
    }
}

/// Applies the per-block rule to every certified block.
pub fn block_reports(
    problem: &Problem,
    indexes: &BTreeMap<String, IndexResult>,
    ledger: &InnerProductLedger,
    gram: &BTreeMap<String, GramValue>,
    conditions: Conditions,
) -> Result<Vec<BlockReport>> {
    let mut out = Vec::new();
    for (sign, block) in certified_blocks(problem) {
        let label = format!("calL{}^({})", sign.symbol(), block.label());
        let idx = indexes
            .get(&label)
            .ok_or_else(|| Error::IncompleteRun(format!("index of {label}")))?;
        let (conds, source, higher) = block_plan(problem, sign, block, conditions);
        let (rule, decided_by, value, positive) = if idx.index == 0 {
            ("index-0", None, None, true)
        } else if idx.index == 1 && conds.len() == 1 {
            let name = source.clone().unwrap_or_default();
            let v = ledger.get(&name)?;
            ("single-condition", Some(name), Some(v), v < 0.0)
        } else if idx.index == 1 && conds.len() == 2 {
            let name = source.clone().unwrap_or_default();
            let g = gram
                .get(&name)
                .ok_or_else(|| Error::IncompleteRun(format!("Gram value {name}")))?;
            ("gram", Some(name), Some(g.value), g.positive)
        } else {
            ("index-exceeds-conditions", None, None, false)
        };
        out.push(BlockReport {
            operator: label,
            index: idx.index,
            conditions: conds,
            rule: rule.into(),
            decided_by,
            value,
            positive,
            covers_higher_harmonics: higher,
        });
    }
    Ok(out)
}

/// Everything the ledger needs besides the operators.
pub struct LedgerInputs<'a> {
    pub problem: Problem,
    pub settings: SolverSettings,
    pub pot: Arc<PotentialSet>,
    pub profile: Arc<RadialProfile>,
    pub eigenmode: Option<Arc<EigenMode>>,
    pub beta: Option<Arc<BvpSolution>>,
    pub options: &'a CertifyOptions,
}

struct SolveSpec {
    sign: Sign,
    block: Block,
    /// `(rhs name, source)`.
    rhs: Vec<Rhs>,
    /// `(ledger name, i, j)` entries to record from the Gram matrix.
    record: Vec<(&'static str, usize, usize)>,
}

/// `ΛR = R/σ + rR'`.
fn lambda_r(profile: &Arc<RadialProfile>, sigma: f64) -> Rhs {
    let p = profile.clone();
    Rhs::new("Lambda R", move |r| {
        let (u, du) = p.eval(r);
        u / sigma + r * du
    })
}

fn ledger_plan(inp: &LedgerInputs) -> Result<Vec<SolveSpec>> {
    let sigma = inp.problem.sigma;
    let lam = inp.problem.lambda;
    let prof = &inp.profile;
    let r_src = {
        let p = prof.clone();
        Rhs::new("R", move |r| p.value(r))
    };
    let mut plan = Vec::new();
    if inp.problem.dimension == 3 {
        let em = inp
            .eigenmode
            .clone()
            .ok_or_else(|| Error::IncompleteRun("eigenmode".into()))?;
        let phi2 = Rhs::new("phi2", move |r| em.phi2(r));
        plan.push(SolveSpec {
            sign: Sign::Plus,
            block: Block::Harmonic(0),
            rhs: vec![r_src.clone(), phi2],
            record: vec![("K1^(0)", 0, 0), ("K2^(0)", 1, 1), ("K3^(0)", 0, 1)],
        });
        // Physical source r R, i.e. R in the regularized variable.
        let p = prof.clone();
        plan.push(SolveSpec {
            sign: Sign::Plus,
            block: Block::Harmonic(1),
            rhs: vec![Rhs::new("r R", move |r| p.value(r))],
            record: vec![("K1^(1)", 0, 0)],
        });
        plan.push(SolveSpec {
            sign: Sign::Minus,
            block: Block::Harmonic(0),
            rhs: vec![lambda_r(prof, sigma)],
            record: vec![("J1^(0)", 0, 0)],
        });
        return Ok(plan);
    }
    plan.push(SolveSpec {
        sign: Sign::Plus,
        block: Block::Even,
        rhs: vec![r_src.clone()],
        record: vec![("K1^(e)", 0, 0)],
    });
    plan.push(SolveSpec {
        sign: Sign::Minus,
        block: Block::Even,
        rhs: vec![lambda_r(prof, sigma)],
        record: vec![("J1^(e)", 0, 0)],
    });
    let p = prof.clone();
    plan.push(SolveSpec {
        sign: Sign::Plus,
        block: Block::Odd,
        rhs: vec![Rhs::new("x R", move |x| x * p.value(x))],
        record: vec![("K1^(o)", 0, 0)],
    });
    match inp.options.conditions {
        Conditions::Natural if inp.problem.is_critical_1d() => {
            let b = inp
                .beta
                .clone()
                .ok_or_else(|| Error::IncompleteRun("beta".into()))?;
            plan.push(SolveSpec {
                sign: Sign::Minus,
                block: Block::Even,
                rhs: vec![lambda_r(prof, sigma), Rhs::new("rho = beta", move |x| b.value(x))],
                record: vec![("J2^(e)", 1, 1), ("J3^(e)", 0, 1)],
            });
        }
        Conditions::Natural => {}
        Conditions::Alternative => plan.push(SolveSpec {
            sign: Sign::Minus,
            block: Block::Even,
            rhs: vec![r_src],
            record: vec![("Jcheck1^(e)", 0, 0)],
        }),
        Conditions::Fmr => {
            let p = prof.clone();
            let exact = inp.options.fmr_variant == FmrVariant::Exact;
            let p2 = 2.0 * sigma;
            let second = Rhs::new(if exact { "Lambda^2 R" } else { "Lambda^2 R (published)" }, move |x| {
                let (u, du) = p.eval(x);
                let d2 = if exact { lam * u - u.powf(p2 + 1.0) } else { lam * u - u.powi(3) };
                u / (sigma * sigma) + (2.0 / sigma + 1.0) * x * du + x * x * d2
            });
            plan.push(SolveSpec {
                sign: Sign::Minus,
                block: Block::Even,
                rhs: vec![lambda_r(prof, sigma), second],
                record: vec![("Jhat1^(e)", 0, 0), ("Jhat2^(e)", 1, 1), ("Jhat3^(e)", 0, 1)],
            });
        }
    }
    Ok(plan)
}

/// Result of one ledger evaluation.
pub struct LedgerRun {
    pub ledger: InnerProductLedger,
    pub gram: BTreeMap<String, GramValue>,
    pub symmetry_defect: f64,
    pub max_residual: f64,
    pub max_bc_mismatch: f64,
    pub solutions: Vec<(String, BvpSolution)>,
    pub accumulations: Vec<(String, DenseOutput)>,
}

/// Solves every ledger problem at the given δ0 and forms the Gram values.
pub fn compute_ledger(inp: &LedgerInputs, delta0: f64) -> Result<LedgerRun> {
    let s = inp.settings;
    let d = inp.problem.dimension;
    let mut ledger = InnerProductLedger::default();
    let mut solutions = Vec::new();
    let mut accumulations = Vec::new();
    let (mut sym, mut res, mut bc): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for spec in ledger_plan(inp)? {
        let op = commutator_operator(inp.pot.clone(), spec.sign, spec.block, d, delta0)?;
        let bc_kind = ArtificialBC::for_operator(&crate::operators::regularize(&op));
        let set = solve_linear_system(&op, &spec.rhs, bc_kind, &s)?;
        let n = spec.rhs.len();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (set.gram[i][j].value, set.gram[j][i].value);
                sym = sym.max((a - b).abs() / a.abs().max(b.abs()).max(1e-300));
            }
        }
        for (name, i, j) in &spec.record {
            let ip = set.gram[*i][*j];
            if !ip.stabilized {
                return Err(Error::DomainTooSmall {
                    r: 0.8 * s.r_max,
                    mismatch: (ip.value - ip.at_window).abs(),
                });
            }
            ledger.insert(
                name,
                LedgerEntry {
                    value: ip.value,
                    operator: op.label(),
                    rhs: (spec.rhs[*i].name.clone(), spec.rhs[*j].name.clone()),
                    delta0,
                    r_max: s.r_max,
                    tol: s.tol,
                    at_window: ip.at_window,
                    stabilized: ip.stabilized,
                },
            );
            if let Some(acc) = &set.accumulation {
                let mut w = vec![0.0; acc.dim()];
                w[i * n + j] = 1.0;
                accumulations.push((name.to_string(), acc.combine(&[w])));
            }
        }
        for sol in set.solutions {
            res = res.max(sol.residual);
            bc = bc.max(sol.bc_mismatch);
            solutions.push((format!("{} {}", sol.operator, sol.name), sol));
        }
    }
    let mut gram = BTreeMap::new();
    let grams: &[(&str, [&str; 3])] = &[
        ("K^(0)", ["K1^(0)", "K2^(0)", "K3^(0)"]),
        ("J^(e)", ["J1^(e)", "J2^(e)", "J3^(e)"]),
        ("Jhat^(e)", ["Jhat1^(e)", "Jhat2^(e)", "Jhat3^(e)"]),
    ];
    for (name, parts) in grams {
        if parts.iter().all(|p| ledger.entries.contains_key(*p)) {
            gram.insert(name.to_string(), GramValue::new(&ledger, *parts)?);
        }
    }
    Ok(LedgerRun {
        ledger,
        gram,
        symmetry_defect: sym,
        max_residual: res,
        max_bc_mismatch: bc,
        solutions,
        accumulations,
    })
}

/// `min(θ/(2(1+θ)), δ0/(2(1+θ)))`.
pub fn final_delta(theta: f64, delta0: f64) -> f64 {
    (theta / (2.0 * (1.0 + theta))).min(delta0 / (2.0 * (1.0 + theta)))
}

/// Blocks whose nonnegativity the bound composition requires.
fn bound_blocks(problem: &Problem) -> Vec<(Sign, Block)> {
    let blocks = if problem.dimension == 3 {
        vec![Block::Harmonic(0)]
    } else {
        vec![Block::Even, Block::Odd]
    };
    let mut out = Vec::new();
    for s in [Sign::Plus, Sign::Minus] {
        for &b in &blocks {
            out.push((s, b));
        }
    }
    out
}

/// True when `−Δ + 2𝒱± + (δ0/θ)e^{−r²}` has index 0 on every required block.
fn theta_admissible(pot: &Arc<PotentialSet>, problem: &Problem, settings: &SolverSettings, delta0: f64, theta: f64) -> Result<bool> {
    for (sign, block) in bound_blocks(problem) {
        let mut op: RadialOperator = commutator_operator(pot.clone(), sign, block, problem.dimension, 0.0)?;
        op.potential_scale = 2.0;
        op.barrier = delta0 / theta;
        match crate::index::compute_index(&op, settings) {
            Ok(r) if r.index == 0 => {}
            Ok(_) => return Ok(false),
            Err(Error::InconclusiveIndex(_)) | Err(Error::WindowTooSmall(_)) => return Ok(false),
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

/// Turns the δ0-coercive bound into the final spectral-property constant.
///
/// From `(1+θ)𝓑 ≥ θ(‖∇z‖² + ∫𝒱+f² + ∫𝒱−g²) + δ0∫e^{−r²}|z|²`, keeping half
/// of the gradient term shows that `𝓑 ≥ θ/(2(1+θ))‖∇z‖² + δ0/(2(1+θ))∫e^{−r²}|z|²`
/// whenever `−Δ + 2𝒱± + (δ0/θ)e^{−r²} ≥ 0`. The largest such `θ ≤ 1` is found
/// by decades and refined by bisection in `log θ`.
pub fn compose_bound(delta0: f64, pot: &Arc<PotentialSet>, settings: &SolverSettings) -> Result<BoundReport> {
    if !(delta0 > 0.0) {
        return Err(Error::BoundComposition(format!(
            "delta0 = {delta0:e} gives no coercive margin"
        )));
    }
    let problem = *pot.problem();
    let mut tested = Vec::new();
    let mut bad: Option<f64> = None;
    let mut good: Option<f64> = None;
    let mut theta = 1.0;
    while theta >= 1e-12 {
        let ok = theta_admissible(pot, &problem, settings, delta0, theta)?;
        tested.push((theta, ok));
        if ok {
            good = Some(theta);
            break;
        }
        bad = Some(theta);
        theta /= 10.0;
    }
    let mut good = good.ok_or_else(|| {
        Error::BoundComposition("no admissible theta down to 1e-12".into())
    })?;
    if let Some(mut bad) = bad {
        for _ in 0..30 {
            let mid = (good.ln() + bad.ln()).mul_add(0.5, 0.0).exp();
            let ok = theta_admissible(pot, &problem, settings, delta0, mid)?;
            tested.push((mid, ok));
            if ok {
                good = mid;
            } else {
                bad = mid;
            }
        }
    }
    Ok(BoundReport {
        delta0,
        theta_star: good,
        final_delta: final_delta(good, delta0),
        tested,
    })
}

/// Runs the full certification for one problem from an accepted soliton.
pub fn certify(
    profile: Arc<RadialProfile>,
    settings: &SolverSettings,
    options: &CertifyOptions,
) -> Result<(Certificate, Artifacts)> {
    let problem = profile.problem;
    options.validate(&problem)?;
    settings.validate()?;
    let pot = Arc::new(build_potentials(profile.clone(), &problem));
    let d = problem.dimension;
    let mut artifacts = Artifacts::default();
    let mut notes = Vec::new();

    // Indexes at δ0 = 0.
    let mut indexes = BTreeMap::new();
    let mut ops = Vec::new();
    for (sign, block) in certified_blocks(&problem) {
        let op = commutator_operator(pot.clone(), sign, block, d, 0.0)?;
        let (res, traj) = index_trajectory(&op, settings).map_err(|e| e.in_stage("index"))?;
        artifacts.trajectories.push((op.label(), traj));
        indexes.insert(op.label(), res);
        ops.push(op);
    }
    let family = |s: Sign| -> Vec<IndexResult> {
        certified_blocks(&problem)
            .into_iter()
            .filter(|(sg, b)| *sg == s && matches!(b, Block::Harmonic(_)))
            .map(|(sg, b)| indexes[&format!("calL{}^({})", sg.symbol(), b.label())].clone())
            .collect()
    };
    let monotonicity = verify_monotonicity(&family(Sign::Plus)) && verify_monotonicity(&family(Sign::Minus));

    // Auxiliary functions.
    let eigenmode = if problem.is_cubic_3d() {
        Some(Arc::new(solve_eigenmode(&pot, settings).map_err(|e| e.in_stage("eigenmode"))?))
    } else if d == 3 {
        return Err(Error::InvalidArgument(
            "only the cubic problem is supported in 3d".into(),
        ));
    } else {
        None
    };
    let beta = if problem.is_critical_1d() && options.conditions == Conditions::Natural {
        Some(Arc::new(solve_beta(pot.clone(), settings).map_err(|e| e.in_stage("beta"))?))
    } else {
        None
    };
    let inputs = LedgerInputs {
        problem,
        settings: *settings,
        pot: pot.clone(),
        profile: profile.clone(),
        eigenmode: eigenmode.clone(),
        beta: beta.clone(),
        options,
    };
    let run = compute_ledger(&inputs, 0.0).map_err(|e| e.in_stage("ledger"))?;
    let blocks = block_reports(&problem, &indexes, &run.ledger, &run.gram, options.conditions)?;
    let all_positive = blocks.iter().all(|b| b.positive);

    // δ0 perturbation: indexes first, then the perturbed ledger.
    let mut perturbation = Perturbation {
        delta0: None,
        index_sweep: vec![],
        ledger_checks: vec![],
        perturbed_ledger: BTreeMap::new(),
        perturbed_gram: BTreeMap::new(),
    };
    let sweep: Option<SweepResult> = match perturbation_sweep(&ops, &options.delta0, settings) {
        Ok(s) => Some(s),
        Err(Error::PerturbationFailure(d0)) => {
            notes.push(format!("indexes change already at delta0 = {d0:e}"));
            perturbation.index_sweep = vec![(d0, false)];
            None
        }
        Err(e) => return Err(e.in_stage("perturbation")),
    };
    if let Some(sw) = &sweep {
        perturbation.index_sweep = sw.tested.clone();
        if all_positive {
            let candidates: Vec<f64> = options.delta0.iter().copied().filter(|&x| x <= sw.delta0).rev().collect();
            for d0 in candidates {
                let pr = compute_ledger(&inputs, d0).map_err(|e| e.in_stage("perturbed ledger"))?;
                let pb = block_reports(&problem, &indexes, &pr.ledger, &pr.gram, options.conditions)?;
                let ok = pb.iter().all(|b| b.positive);
                perturbation.ledger_checks.push((d0, ok));
                if ok {
                    perturbation.delta0 = Some(d0);
                    perturbation.perturbed_ledger = pr.ledger.values();
                    perturbation.perturbed_gram = pr.gram.iter().map(|(k, g)| (k.clone(), g.value)).collect();
                    break;
                }
            }
        }
    }

    let mut verdict;
    let mut failing_block = None;
    let mut failing_value = None;
    if !monotonicity {
        verdict = Verdict::Fault;
        failing_block = Some("index monotonicity".to_string());
    } else if let Some(b) = blocks.iter().find(|b| !b.positive) {
        verdict = Verdict::Inconclusive;
        failing_block = Some(match &b.decided_by {
            Some(name) => format!("{} ({name})", b.operator),
            None => b.operator.clone(),
        });
        failing_value = b.value;
    } else if perturbation.delta0.is_none() {
        verdict = Verdict::Inconclusive;
        failing_block = Some("delta0 perturbation".to_string());
    } else {
        verdict = Verdict::Holds;
    }

    let bound = if verdict == Verdict::Holds {
        match compose_bound(perturbation.delta0.unwrap_or(0.0), &pot, settings) {
            Ok(b) => Some(b),
            Err(e) => {
                verdict = Verdict::Fault;
                failing_block = Some("bound composition".into());
                notes.push(e.to_string());
                None
            }
        }
    } else {
        None
    };

    let mourre = mourre_report(&pot).map_err(|e| e.in_stage("mourre"))?;
    if !mourre.eigenvalue.applicable {
        notes.push(format!(
            "large-eigenvalue bound inapplicable: C2 = {:.6} >= 1",
            mourre.eigenvalue.c2
        ));
    }

    // Finite-difference cross-check on the designated problem.
    let fd_block = if d == 3 { Block::Harmonic(0) } else { Block::Even };
    let fd_op = commutator_operator(pot.clone(), Sign::Plus, fd_block, d, 0.0)?;
    let p = profile.clone();
    let fd = solve_linear_bvp_fd(&fd_op, &Rhs::new("R", move |r| p.value(r)), settings.r_max, 20000)?;
    let designated = &run
        .solutions
        .iter()
        .find(|(_, s)| s.operator == fd_op.label() && s.name == "R")
        .ok_or_else(|| Error::IncompleteRun("designated cross-check solution".into()))?
        .1;
    let fd_cross_check = cross_check_distance(designated, &fd);

    let jhat1_vs_j1 = match (run.ledger.get("Jhat1^(e)"), run.ledger.get("J1^(e)")) {
        (Ok(a), Ok(b)) => Some((a - b).abs()),
        _ => None,
    };

    artifacts.solutions = run.solutions;
    artifacts.accumulations = run.accumulations;
    if let Some(b) = &beta {
        artifacts.solutions.push(("L+^(e) beta".into(), (**b).clone()));
    }
    artifacts.eigenmode = eigenmode.as_deref().cloned();

    let cert = Certificate {
        schema_version: SCHEMA_VERSION,
        problem: ProblemInfo {
            label: problem.label(),
            dimension: d,
            sigma: problem.sigma,
            lambda: problem.lambda,
            r_max: settings.r_max,
            tol: settings.tol,
        },
        conditions: options.conditions,
        fmr_variant: (options.conditions == Conditions::Fmr).then_some(options.fmr_variant),
        orthogonality_conditions: orthogonality_conditions(&problem, options.conditions),
        soliton: SolitonSummary::new(&profile),
        indexes,
        monotonicity,
        eigenmode: eigenmode.as_deref().map(EigenmodeSummary::from),
        ledger: run.ledger,
        gram: run.gram,
        blocks,
        perturbation,
        bound,
        mourre,
        consistency: Consistency {
            symmetry_defect: run.symmetry_defect,
            fd_cross_check,
            jhat1_vs_j1,
            max_bvp_residual: run.max_residual,
            max_bc_mismatch: run.max_bc_mismatch,
        },
        verdict,
        failing_block,
        failing_value,
        notes,
    };
    Ok((cert, artifacts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_reduce_matches_quoted_combination() {
        // Published 3d values: K1 − K3²/K2 = −5.22138.
        let g = gram_reduce(1.04846, 0.00215981, -0.116369).unwrap();
        assert!((g + 5.22138).abs() / 5.22138 < 1e-3);
        assert!(matches!(gram_reduce(1.0, 1e-13, 1.0), Err(Error::DegenerateGram(_))));
    }

    #[test]
    fn gram_reduce_is_scale_invariant() {
        let (k1, k2, k3) = (1.0484627, 0.0627476, -0.6272303);
        let base = gram_reduce(k1, k2, k3).unwrap();
        for c in [1e-3, 0.5, -2.0, 17.0] {
            let scaled = gram_reduce(k1, c * c * k2, c * k3).unwrap();
            assert!((scaled - base).abs() <= 1e-12 * base.abs());
        }
    }

    #[test]
    fn gram_branches() {
        let mut ledger = InnerProductLedger::default();
        let entry = |v: f64| LedgerEntry {
            value: v,
            operator: String::new(),
            rhs: (String::new(), String::new()),
            delta0: 0.0,
            r_max: 1.0,
            tol: 1e-12,
            at_window: v,
            stabilized: true,
        };
        ledger.insert("a", entry(0.3));
        ledger.insert("b", entry(-2.0));
        ledger.insert("c", entry(5.0));
        let g = GramValue::new(&ledger, ["a", "b", "c"]).unwrap();
        assert_eq!(g.branch, "k2-negative");
        assert!(g.positive);
        ledger.insert("b", entry(3.779145));
        ledger.insert("c", entry(0.864273));
        let g = GramValue::new(&ledger, ["a", "b", "c"]).unwrap();
        assert!(!g.positive && g.value > 0.0);
        assert!(GramValue::new(&ledger, ["a", "b", "missing"]).is_err());
    }

    #[test]
    fn final_delta_is_monotone_in_theta() {
        assert_eq!(final_delta(1.0, 1e-2), 1e-2 / 4.0);
        let a = final_delta(0.2, 1.0);
        let b = final_delta(0.1, 1.0);
        assert!(b < a);
    }

    #[test]
    fn compose_bound_rejects_zero_delta() {
        let p = Problem::cubic_3d();
        let pot = Arc::new(PotentialSet::zero(&p));
        let s = SolverSettings::for_problem(&p);
        assert!(matches!(compose_bound(0.0, &pot, &s), Err(Error::BoundComposition(_))));
        let b = compose_bound(1e-2, &pot, &s).unwrap();
        assert_eq!(b.theta_star, 1.0);
    }

    #[test]
    fn option_validation() {
        let mut o = CertifyOptions::default();
        assert!(o.validate(&Problem::one_d(2.5)).is_ok());
        o.conditions = Conditions::Fmr;
        assert!(o.validate(&Problem::one_d(2.5)).is_err());
        assert!(o.validate(&Problem::one_d(2.0)).is_ok());
        o.delta0 = vec![1e-2, 1e-3];
        assert!(o.validate(&Problem::one_d(2.0)).is_err());
        assert_eq!("fmr".parse::<Conditions>().unwrap(), Conditions::Fmr);
        assert!("other".parse::<Conditions>().is_err());
    }
}
