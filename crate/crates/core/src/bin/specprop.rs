//! Command-line front end.
//!
//! Exit status: 0 on success (an inconclusive verdict is a success), 1 on an
//! error, 2 when the certificate records a numerics fault, 3 when `compare`
//! finds a mismatch.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use specprop::certificate::{certified_blocks, Conditions, EigenmodeSummary, FmrVariant, SolitonSummary, Verdict};
use specprop::compare::{compare_reports, Tolerances};
use specprop::config::{CachePolicy, ProblemKind, RunConfig};
use specprop::index::{compute_index, perturbation_sweep};
use specprop::operators::{build_potentials, commutator_operator};
use specprop::pipeline::{emit_profiles, obtain_soliton, read_json, run_pipeline, write_json, write_profile_csv, ExportSelection};
use specprop::{bvp, mourre, Error};

#[derive(Parser)]
#[command(name = "specprop", version, about = "Numerical certification of the spectral property for NLS solitons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the ground state and write its profile.
    Soliton(RunArgs),
    /// Count the index of every certified block and run the δ0 sweep.
    Index(RunArgs),
    /// Unstable eigenmode of the 3d cubic problem.
    Eigenmode(RunArgs),
    /// Full certification; writes the certificate JSON.
    Certify(RunArgs),
    /// Large-eigenvalue and large-harmonic bounds.
    Mourre(RunArgs),
    /// CSV profiles of a cached run.
    Export {
        #[command(flatten)]
        run: RunArgs,
        /// Interior samples per integrator step.
        #[arg(long, default_value_t = 3)]
        samples: usize,
    },
    /// Compare a certificate with a reference.
    Compare {
        candidate: PathBuf,
        reference: PathBuf,
        /// Tolerances file; without it every number must match exactly.
        #[arg(long)]
        tolerances: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `3d-cubic` or `1d`.
    #[arg(long)]
    problem: Option<ProblemKind>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    rmax: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Comma-separated ascending δ0 sweep.
    #[arg(long, value_delimiter = ',')]
    delta0: Option<Vec<f64>>,
    /// `natural`, `alternative` or `fmr`.
    #[arg(long)]
    conditions: Option<Conditions>,
    /// `published` or `exact` second FMR direction.
    #[arg(long)]
    fmr_variant: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `use`, `refresh` or `off`.
    #[arg(long)]
    cache: Option<CachePolicy>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => {
                let kind = self
                    .problem
                    .ok_or_else(|| Error::Config("either --config or --problem is required".into()))?;
                RunConfig::new(kind, None)
            }
        };
        if let Some(p) = self.problem {
            cfg.problem = p;
        }
        if self.sigma.is_some() {
            cfg.sigma = self.sigma;
        }
        if self.rmax.is_some() {
            cfg.r_max = self.rmax;
        }
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        if let Some(d) = &self.delta0 {
            cfg.delta0 = d.clone();
        }
        if let Some(c) = self.conditions {
            cfg.conditions = c;
        }
        if let Some(v) = &self.fmr_variant {
            cfg.fmr_variant = match v.as_str() {
                "published" => FmrVariant::Published,
                "exact" => FmrVariant::Exact,
                other => return Err(Error::Config(format!("unknown fmr variant `{other}` (published | exact)"))),
            };
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(c) = self.cache {
            cfg.cache = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn print_json(v: &impl serde::Serialize) {
    emit(&serde_json::to_string_pretty(v).unwrap_or_default());
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Soliton(a) => {
            let cfg = a.config()?;
            let (profile, cached) = obtain_soliton(&cfg)?;
            let label = cfg.problem()?.label();
            let rows: Vec<_> = profile
                .grid
                .iter()
                .zip(profile.values.iter().zip(&profile.derivatives))
                .map(|(&r, (&v, &d))| (r, v, d))
                .collect();
            write_profile_csv(&cfg.output_dir.join(format!("soliton-{label}.csv")), &rows)?;
            let summary = json!({"problem": label, "from_cache": cached, "soliton": SolitonSummary::new(&profile)});
            write_json(&cfg.output_dir.join(format!("soliton-{label}.json")), &summary)?;
            print_json(&summary);
        }
        Command::Index(a) => {
            let cfg = a.config()?;
            let problem = cfg.problem()?;
            let settings = cfg.settings()?;
            let (profile, _) = obtain_soliton(&cfg)?;
            let pot = Arc::new(build_potentials(Arc::new(profile), &problem));
            let mut ops = Vec::new();
            let mut indexes = BTreeMap::new();
            for (sign, block) in certified_blocks(&problem) {
                let op = commutator_operator(pot.clone(), sign, block, problem.dimension, 0.0)?;
                let res = compute_index(&op, &settings).map_err(|e| e.in_stage("index"))?;
                indexes.insert(op.label(), res);
                ops.push(op);
            }
            let sweep = perturbation_sweep(&ops, &cfg.delta0, &settings).map_err(|e| e.in_stage("perturbation"))?;
            let out = json!({"problem": problem.label(), "indexes": indexes, "perturbation": sweep});
            write_json(&cfg.output_dir.join(format!("index-{}.json", problem.label())), &out)?;
            print_json(&out);
        }
        Command::Eigenmode(a) => {
            let cfg = a.config()?;
            let problem = cfg.problem()?;
            if !problem.is_cubic_3d() {
                return Err(Error::Config("the eigenmode is computed for the 3d cubic problem only".into()));
            }
            let (profile, _) = obtain_soliton(&cfg)?;
            let pot = build_potentials(Arc::new(profile), &problem);
            let em = bvp::solve_eigenmode(&pot, &cfg.settings()?).map_err(|e| e.in_stage("eigenmode"))?;
            let summary = EigenmodeSummary::from(&em);
            write_json(&cfg.output_dir.join("eigenmode-3d-cubic.json"), &summary)?;
            print_json(&summary);
        }
        Command::Certify(a) => {
            let cfg = a.config()?;
            let outcome = run_pipeline(&cfg)?;
            let c = &outcome.certificate;
            print_json(&json!({
                "problem": c.problem.label,
                "conditions": c.conditions,
                "verdict": c.verdict,
                "failing_block": c.failing_block,
                "failing_value": c.failing_value,
                "certificate": outcome.certificate_path,
            }));
            if c.verdict == Verdict::Fault {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Mourre(a) => {
            let cfg = a.config()?;
            let problem = cfg.problem()?;
            let (profile, _) = obtain_soliton(&cfg)?;
            let pot = build_potentials(Arc::new(profile), &problem);
            let report = mourre::mourre_report(&pot).map_err(|e| e.in_stage("mourre"))?;
            write_json(&cfg.output_dir.join(format!("mourre-{}.json", problem.label())), &report)?;
            print_json(&report);
        }
        Command::Export { run, samples } => {
            let cfg = run.config()?;
            let sel = ExportSelection {
                inner_samples: samples,
                ..ExportSelection::default()
            };
            for p in emit_profiles(&cfg, &sel)? {
                emit(&p.display().to_string());
            }
        }
        Command::Compare { candidate, reference, tolerances } => {
            let cand: serde_json::Value = read_json(&candidate)?;
            let refr: serde_json::Value = read_json(&reference)?;
            let tol = match tolerances {
                Some(p) => read_json::<Tolerances>(&p)?,
                None => Tolerances::default(),
            };
            let report = compare_reports(&cand, &refr, &tol)?;
            print_json(&report);
            if !report.passed {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            let stage = match &e {
                Error::Stage { stage, .. } => Some(stage.clone()),
                _ => None,
            };
            eprintln!("{}", json!({"error": e.to_string(), "stage": stage}));
            ExitCode::from(1)
        }
    }
}
