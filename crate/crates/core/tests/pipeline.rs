//! Pipeline orchestration, cache, export, regression comparison and the CLI.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use specprop::certificate::Conditions;
use specprop::compare::{compare_reports, flatten, Tolerances};
use specprop::config::{CachePolicy, ProblemKind, RunConfig};
use specprop::pipeline::{emit_profiles, profiles_dir, read_json, run_pipeline, ExportSelection};
use specprop::Error;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/reference")
}

fn config(dir: &Path, kind: ProblemKind, sigma: Option<f64>, conditions: Conditions) -> RunConfig {
    let mut c = RunConfig::new(kind, sigma);
    c.conditions = conditions;
    c.output_dir = dir.to_path_buf();
    c
}

fn numeric_leaves(v: &Value) -> Vec<(String, f64)> {
    flatten(v).into_iter().filter_map(|(k, x)| x.as_f64().map(|f| (k, f))).collect()
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), ProblemKind::Cubic3d, None, Conditions::Natural);
    cfg.cache = CachePolicy::Off;
    let a = serde_json::to_value(run_pipeline(&cfg).unwrap().certificate).unwrap();
    let b = serde_json::to_value(run_pipeline(&cfg).unwrap().certificate).unwrap();
    let (la, lb) = (numeric_leaves(&a), numeric_leaves(&b));
    assert_eq!(la.len(), lb.len());
    for ((k, x), (_, y)) in la.iter().zip(&lb) {
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{k}: {x} vs {y}");
    }
}

#[test]
fn cached_soliton_reproduces_the_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), ProblemKind::OneD, Some(2.0), Conditions::Fmr);
    let fresh = run_pipeline(&cfg).unwrap();
    assert!(!fresh.soliton_from_cache);
    let cached = run_pipeline(&cfg).unwrap();
    assert!(cached.soliton_from_cache);
    for (name, e) in &fresh.certificate.ledger.entries {
        let c = cached.certificate.ledger.get(name).unwrap();
        assert!((e.value - c).abs() <= 1e-9, "{name}");
    }
    let mut refresh = cfg.clone();
    refresh.cache = CachePolicy::Refresh;
    assert!(!run_pipeline(&refresh).unwrap().soliton_from_cache);
}

#[test]
fn certificates_match_the_reference_fixtures() {
    let tol: Tolerances = read_json(&fixtures().join("tolerances.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("3d-cubic", ProblemKind::Cubic3d, None, Conditions::Natural),
        ("1d-sigma2", ProblemKind::OneD, Some(2.0), Conditions::Natural),
        ("1d-sigma2-fmr", ProblemKind::OneD, Some(2.0), Conditions::Fmr),
        ("1d-sigma2-alternative", ProblemKind::OneD, Some(2.0), Conditions::Alternative),
        ("1d-sigma2.1", ProblemKind::OneD, Some(2.1), Conditions::Natural),
        ("1d-sigma2.5", ProblemKind::OneD, Some(2.5), Conditions::Natural),
        ("1d-sigma3", ProblemKind::OneD, Some(3.0), Conditions::Natural),
    ];
    for (name, kind, sigma, cond) in cases {
        let out = run_pipeline(&config(dir.path(), kind, sigma, cond)).unwrap();
        let cand: Value = read_json(&out.certificate_path).unwrap();
        let reference: Value = read_json(&fixtures().join(format!("{name}.json"))).unwrap();
        let rep = compare_reports(&cand, &reference, &tol).unwrap();
        assert!(rep.passed, "{name}: {:?}", rep.mismatches);
    }
}

#[test]
fn export_requires_a_cached_run_and_writes_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), ProblemKind::Cubic3d, None, Conditions::Natural);
    assert!(matches!(emit_profiles(&cfg, &ExportSelection::default()), Err(Error::MissingCache(_))));
    run_pipeline(&cfg).unwrap();
    let files = emit_profiles(&cfg, &ExportSelection::default()).unwrap();
    assert!(files.len() > 20);
    let read = |name: &str| -> Vec<[f64; 3]> {
        let mut r = csv::Reader::from_path(profiles_dir(&cfg).unwrap().join(name)).unwrap();
        assert_eq!(r.headers().unwrap(), vec!["r", "value", "derivative"]);
        r.deserialize().map(|x| x.unwrap()).collect()
    };
    // One sign change of the distinguished solution of 𝓛+^(0).
    let t = read("trajectory-calLplus_0.csv");
    let changes = t.windows(2).filter(|w| w[0][1] * w[1][1] < 0.0).count();
    assert_eq!(changes, 1);
    // The K1 accumulation curve is flat over the final window.
    let acc = read("accumulation-K1_0.csv");
    let end = acc.last().unwrap()[1];
    let window: Vec<_> = acc.iter().filter(|x| x[0] >= 32.0).collect();
    assert!(window.iter().all(|x| (x[1] - end).abs() < 1e-9 * end.abs()));
    assert!((end - 1.04846).abs() < 0.005 * 1.04846);
    // Soliton column is monotone.
    let s = read("soliton.csv");
    assert!(s.windows(2).all(|w| w[1][1] <= w[0][1]));
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_specprop"))
}

#[test]
fn cli_certify_compare_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cache = dir.path().join("cache");
    let st = cli()
        .args(["certify", "--problem", "1d", "--sigma", "2.1", "--out"])
        .arg(&out)
        .env("SPECPROP_CACHE_DIR", &cache)
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let summary: Value = serde_json::from_slice(&st.stdout).unwrap();
    assert_eq!(summary["verdict"], "inconclusive");
    assert!(std::fs::read_dir(&cache).unwrap().count() == 1);

    let cert = out.join("certificate-1d-sigma2.1.json");
    let ok = cli()
        .arg("compare")
        .arg(&cert)
        .arg(fixtures().join("1d-sigma2.1.json"))
        .arg("--tolerances")
        .arg(fixtures().join("tolerances.json"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = cli()
        .arg("compare")
        .arg(&cert)
        .arg(fixtures().join("1d-sigma2.5.json"))
        .arg("--tolerances")
        .arg(fixtures().join("tolerances.json"))
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(3));

    let err = cli().args(["certify", "--problem", "1d", "--sigma", "2.5", "--conditions", "fmr"]).output().unwrap();
    assert_eq!(err.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&err.stderr).unwrap();
    assert!(report["error"].as_str().unwrap().contains("sigma = 2"));

    let cfg_path = dir.path().join("run.toml");
    std::fs::write(&cfg_path, format!("schema_version = 1\nproblem = \"1d\"\nsigma = 3.0\noutput_dir = {:?}\n", out)).unwrap();
    let st = cli().arg("mourre").arg("--config").arg(&cfg_path).env("SPECPROP_CACHE_DIR", &cache).output().unwrap();
    assert!(st.status.success());
    let m: Value = serde_json::from_slice(&st.stdout).unwrap();
    assert_eq!(m["eigenvalue"]["applicable"], false);
}

#[test]
fn cli_subcommands_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    for args in [
        vec!["soliton", "--problem", "3d-cubic"],
        vec!["index", "--problem", "3d-cubic", "--delta0", "1e-4,1e-3"],
        vec!["eigenmode", "--problem", "3d-cubic"],
    ] {
        let st = cli().args(&args).arg("--out").arg(out).env("SPECPROP_CACHE_DIR", out.join("c")).output().unwrap();
        assert!(st.status.success(), "{args:?}: {}", String::from_utf8_lossy(&st.stderr));
    }
    let idx: Value = read_json(&out.join("index-3d-cubic.json")).unwrap();
    assert_eq!(idx["indexes"]["calL+^(0)"]["index"], 1);
    assert_eq!(idx["perturbation"]["delta0"], 1e-3);
    let em: Value = read_json(&out.join("eigenmode-3d-cubic.json")).unwrap();
    assert!((em["e_unstable"].as_f64().unwrap() - 5.49907).abs() < 1e-4);
    assert!(out.join("soliton-3d-cubic.csv").exists());
    let st = cli().args(["eigenmode", "--problem", "1d", "--sigma", "2"]).arg("--out").arg(out).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
}
