//! Pipeline orchestration, soliton cache and profile export.
//!
//! Every file is written to a temporary sibling and renamed into place, so a
//! reader never sees a partially written certificate or cache entry.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::certificate::{certify, Artifacts, Certificate, SCHEMA_VERSION};
use crate::config::{CachePolicy, RunConfig};
use crate::error::{Error, Result};
use crate::ivp::dense::DenseOutput;
use crate::operators::{build_potentials, Potential, Sign};
use crate::problem::{Problem, SolverSettings};
use crate::soliton::{solve_ground_state, RadialProfile};

/// Soliton cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonCache {
    pub schema_version: u32,
    pub problem: Problem,
    pub settings: SolverSettings,
    pub profile: RadialProfile,
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Pretty JSON written atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&s).map_err(|e| Error::SchemaMismatch(format!("{}: {e}", path.display())))
}

/// Cache file of the soliton for a problem and settings.
pub fn soliton_cache_path(dir: &Path, problem: &Problem, settings: &SolverSettings) -> PathBuf {
    dir.join(format!(
        "soliton-{}-rmax{}-tol{:e}.json",
        problem.label(),
        settings.r_max,
        settings.tol
    ))
}

/// Loads a cached soliton, `None` if absent or produced for other parameters.
pub fn load_cached_soliton(dir: &Path, problem: &Problem, settings: &SolverSettings) -> Result<Option<RadialProfile>> {
    let path = soliton_cache_path(dir, problem, settings);
    if !path.exists() {
        return Ok(None);
    }
    let cache: SolitonCache = read_json(&path)?;
    if cache.schema_version != SCHEMA_VERSION || cache.problem != *problem || cache.settings != *settings {
        return Ok(None);
    }
    Ok(Some(cache.profile))
}

/// Soliton for the run, honoring the cache policy. Returns the profile and
/// whether it came from the cache.
pub fn obtain_soliton(config: &RunConfig) -> Result<(RadialProfile, bool)> {
    let problem = config.problem()?;
    let settings = config.settings()?;
    let dir = config.cache_dir();
    if config.cache == CachePolicy::Use {
        if let Some(p) = load_cached_soliton(&dir, &problem, &settings)? {
            return Ok((p, true));
        }
    }
    let profile = solve_ground_state(&problem, &settings).map_err(|e| e.in_stage("soliton"))?;
    if config.cache != CachePolicy::Off {
        write_json(
            &soliton_cache_path(&dir, &problem, &settings),
            &SolitonCache {
                schema_version: SCHEMA_VERSION,
                problem,
                settings,
                profile: profile.clone(),
            },
        )?;
    }
    Ok((profile, false))
}

/// Certificate path of a run.
pub fn certificate_path(config: &RunConfig) -> Result<PathBuf> {
    Ok(config.output_dir.join(format!("certificate-{}.json", config.run_stem()?)))
}

/// Result of a pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub certificate: Certificate,
    pub certificate_path: PathBuf,
    pub soliton_from_cache: bool,
    pub artifacts: Artifacts,
}

/// Soliton, potentials, indexes, eigenmode, BVPs, ledger, Mourre bounds and
/// certificate, in that order. The certificate is written to the output directory.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let settings = config.settings()?;
    let (profile, cached) = obtain_soliton(config)?;
    let (certificate, artifacts) =
        certify(Arc::new(profile), &settings, &config.certify_options()).map_err(|e| e.in_stage("certify"))?;
    let path = certificate_path(config)?;
    write_json(&path, &certificate)?;
    Ok(PipelineOutcome {
        certificate,
        certificate_path: path,
        soliton_from_cache: cached,
        artifacts,
    })
}

/// Which profiles to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExportSelection {
    pub soliton: bool,
    pub potentials: bool,
    pub trajectories: bool,
    pub solutions: bool,
    pub accumulations: bool,
    pub bc_mismatch: bool,
    pub eigenmode: bool,
    /// Interior samples per integrator step.
    pub inner_samples: usize,
}

impl Default for ExportSelection {
    fn default() -> Self {
        ExportSelection {
            soliton: true,
            potentials: true,
            trajectories: true,
            solutions: true,
            accumulations: true,
            bc_mismatch: true,
            eigenmode: true,
            inner_samples: 3,
        }
    }
}

/// File-name-safe form of an operator or ledger label.
pub fn file_stem(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        match c {
            '+' => out.push_str("plus"),
            '-' => out.push_str("minus"),
            c if c.is_ascii_alphanumeric() || c == '.' => out.push(c),
            _ => {
                if !out.ends_with('_') {
                    out.push('_')
                }
            }
        }
    }
    out.trim_matches('_').to_string()
}

/// CSV with columns `r, value, derivative`.
pub fn write_profile_csv(path: &Path, rows: &[(f64, f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["r", "value", "derivative"]).map_err(err)?;
    for &(r, v, d) in rows {
        w.write_record(&[r.to_string(), v.to_string(), d.to_string()]).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Rows `(r, y_i, y_j)` of a dense output at its mesh plus interior points.
fn pair_rows(d: &DenseOutput, i: usize, j: usize, inner: usize) -> Vec<(f64, f64, f64)> {
    d.sample(i, inner).into_iter().map(|(r, v)| (r, v, d.value(r, j))).collect()
}

/// Rows `(r, y, y')` of a one-component dense output.
fn slope_rows(d: &DenseOutput, inner: usize) -> Vec<(f64, f64, f64)> {
    d.sample(0, inner)
        .into_iter()
        .map(|(r, _)| {
            let (v, s) = d.value_and_slope(r, 0);
            (r, v, s)
        })
        .collect()
}

/// Directory receiving the CSV profiles of a run.
pub fn profiles_dir(config: &RunConfig) -> Result<PathBuf> {
    Ok(config.output_dir.join(format!("profiles-{}", config.run_stem()?)))
}

/// Writes the CSV profiles of a cached run. Returns the written paths.
pub fn emit_profiles(config: &RunConfig, selection: &ExportSelection) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let problem = config.problem()?;
    let settings = config.settings()?;
    let dir = config.cache_dir();
    let cert_path = certificate_path(config)?;
    let profile = match load_cached_soliton(&dir, &problem, &settings)? {
        Some(p) if cert_path.exists() => p,
        _ => {
            return Err(Error::MissingCache(format!(
                "no cached run for {} in {}; run `specprop certify` with the same settings first",
                config.run_stem()?,
                dir.display()
            )))
        }
    };
    let profile = Arc::new(profile);
    let (_, art) = certify(profile.clone(), &settings, &config.certify_options()).map_err(|e| e.in_stage("export"))?;
    let out = profiles_dir(config)?;
    let n = selection.inner_samples;
    let mut written = Vec::new();
    let mut emit = |name: String, rows: Vec<(f64, f64, f64)>| -> Result<()> {
        let p = out.join(format!("{name}.csv"));
        write_profile_csv(&p, &rows)?;
        written.push(p);
        Ok(())
    };

    if selection.soliton {
        emit("soliton".into(), pair_rows(&profile.dense, 0, 1, n))?;
    }
    if selection.potentials {
        let pot = build_potentials(profile.clone(), &problem);
        let mesh: Vec<f64> = profile.dense.sample(0, n).into_iter().map(|(r, _)| r).collect();
        for (name, which) in [("V_minus", Potential::Minus), ("V_plus", Potential::Plus), ("V1", Potential::V1), ("V2", Potential::V2)] {
            let rows = mesh.iter().map(|&r| {
                let j = pot.jet(which, r);
                (r, j.v, j.d1)
            });
            emit(format!("potential-{name}"), rows.collect())?;
        }
        for (name, sign) in [("calV_minus", Sign::Minus), ("calV_plus", Sign::Plus)] {
            let rows = mesh.iter().map(|&r| {
                let j = pot.jet(sign.into(), r);
                (r, pot.cal_v(sign, r), 0.5 * (j.d1 + r * j.d2))
            });
            emit(format!("potential-{name}"), rows.collect())?;
        }
    }
    if selection.trajectories {
        for (label, t) in &art.trajectories {
            emit(format!("trajectory-{}", file_stem(label)), pair_rows(&t.dense, 0, 1, n))?;
        }
    }
    for (label, sol) in &art.solutions {
        if selection.solutions {
            emit(format!("bvp-{}", file_stem(label)), pair_rows(&sol.dense, 0, 1, n))?;
        }
        if selection.bc_mismatch {
            emit(
                format!("bc-mismatch-{}", file_stem(label)),
                sol.mismatch_curve(0.8 * sol.r_max, 200),
            )?;
        }
    }
    if selection.accumulations {
        for (name, acc) in &art.accumulations {
            emit(format!("accumulation-{}", file_stem(name)), slope_rows(acc, n))?;
        }
    }
    if selection.eigenmode {
        if let Some(em) = &art.eigenmode {
            emit("eigenmode-phi1".into(), pair_rows(&em.phi, 0, 1, n))?;
            emit("eigenmode-phi2".into(), pair_rows(&em.phi, 2, 3, n))?;
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_stems_are_distinct_and_safe() {
        assert_eq!(file_stem("calL+^(0) R"), "calLplus_0_R");
        assert_eq!(file_stem("calL-^(e) Lambda R"), "calLminus_e_Lambda_R");
        assert_eq!(file_stem("K1^(0)"), "K1_0");
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = std::env::temp_dir().join(format!("specprop-atomic-{}", std::process::id()));
        let p = dir.join("a/b.json");
        write_json(&p, &vec![1.0, 2.0]).unwrap();
        write_json(&p, &vec![3.0]).unwrap();
        let v: Vec<f64> = read_json(&p).unwrap();
        assert_eq!(v, vec![3.0]);
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
        fs::remove_dir_all(dir).unwrap();
    }
}
