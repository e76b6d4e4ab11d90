//! Run configuration: a flat TOML file with a schema version.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certificate::{CertifyOptions, Conditions, FmrVariant, DEFAULT_DELTA0};
use crate::error::{Error, Result};
use crate::problem::{Problem, SolverSettings};

/// Version of the configuration layout.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the cache directory.
pub const CACHE_ENV: &str = "SPECPROP_CACHE_DIR";

/// Problem selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    #[serde(rename = "3d-cubic")]
    Cubic3d,
    #[serde(rename = "1d")]
    OneD,
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "3d-cubic" => Ok(ProblemKind::Cubic3d),
            "1d" => Ok(ProblemKind::OneD),
            other => Err(Error::Config(format!("unknown problem `{other}` (3d-cubic | 1d)"))),
        }
    }
}

/// How the soliton cache is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CachePolicy {
    /// Reuse a cached soliton when present, store a fresh one otherwise.
    #[default]
    Use,
    /// Always solve and overwrite the cache.
    Refresh,
    /// Neither read nor write the cache.
    Off,
}

impl std::str::FromStr for CachePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "use" => Ok(CachePolicy::Use),
            "refresh" => Ok(CachePolicy::Refresh),
            "off" => Ok(CachePolicy::Off),
            other => Err(Error::Config(format!("unknown cache policy `{other}` (use | refresh | off)"))),
        }
    }
}

fn default_schema() -> u32 {
    CONFIG_SCHEMA_VERSION
}
fn default_lambda() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    SolverSettings::DEFAULT_TOL
}
fn default_delta0() -> Vec<f64> {
    DEFAULT_DELTA0.to_vec()
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Everything a pipeline run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub problem: ProblemKind,
    /// Nonlinearity exponent; required for `1d`, must be 1 (or absent) for `3d-cubic`.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Truncation radius; defaults to 30 in 1d and 40 in 3d.
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_delta0")]
    pub delta0: Vec<f64>,
    #[serde(default)]
    pub conditions: Conditions,
    #[serde(default)]
    pub fmr_variant: FmrVariant,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub cache: CachePolicy,
}

impl RunConfig {
    /// Default configuration for a problem.
    pub fn new(problem: ProblemKind, sigma: Option<f64>) -> Self {
        RunConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            problem,
            sigma,
            lambda: 1.0,
            r_max: None,
            tol: SolverSettings::DEFAULT_TOL,
            delta0: default_delta0(),
            conditions: Conditions::Natural,
            fmr_variant: FmrVariant::Published,
            output_dir: default_out(),
            cache: CachePolicy::Use,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::SchemaMismatch(format!(
                "config schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn problem(&self) -> Result<Problem> {
        match self.problem {
            ProblemKind::Cubic3d => {
                if let Some(s) = self.sigma {
                    if s != 1.0 {
                        return Err(Error::Config(format!("3d-cubic requires sigma = 1, got {s}")));
                    }
                }
                Problem::new(3, 1.0, self.lambda)
            }
            ProblemKind::OneD => {
                let s = self
                    .sigma
                    .ok_or_else(|| Error::Config("problem 1d requires sigma".into()))?;
                Problem::new(1, s, self.lambda)
            }
        }
    }

    pub fn settings(&self) -> Result<SolverSettings> {
        let p = self.problem()?;
        let s = SolverSettings {
            r_max: self.r_max.unwrap_or_else(|| p.default_r_max()),
            tol: self.tol,
        };
        s.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(s)
    }

    pub fn certify_options(&self) -> CertifyOptions {
        CertifyOptions {
            conditions: self.conditions,
            fmr_variant: self.fmr_variant,
            delta0: self.delta0.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problem()?;
        self.settings()?;
        self.certify_options().validate(&p)
    }

    /// Cache directory: the environment override or `<output_dir>/cache`.
    pub fn cache_dir(&self) -> PathBuf {
        match std::env::var_os(CACHE_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => self.output_dir.join("cache"),
        }
    }

    /// Stem shared by the run's files, e.g. `1d-sigma2-fmr`.
    pub fn run_stem(&self) -> Result<String> {
        let label = self.problem()?.label();
        Ok(match self.conditions {
            Conditions::Natural => label,
            c => format!("{label}-{}", c.as_str()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_full_files() {
        let c = RunConfig::from_toml_str("problem = \"3d-cubic\"\n").unwrap();
        assert_eq!(c.problem().unwrap(), Problem::cubic_3d());
        assert_eq!(c.settings().unwrap().r_max, 40.0);
        let full = "schema_version = 1\nproblem = \"1d\"\nsigma = 2.0\nr_max = 25.0\ntol = 1e-11\n\
                    delta0 = [1e-4, 1e-3]\nconditions = \"fmr\"\nfmr_variant = \"exact\"\n\
                    output_dir = \"runs\"\ncache = \"off\"\n";
        let c = RunConfig::from_toml_str(full).unwrap();
        c.validate().unwrap();
        assert_eq!(c.conditions, Conditions::Fmr);
        assert_eq!(c.cache, CachePolicy::Off);
        assert_eq!(c.run_stem().unwrap(), "1d-sigma2-fmr");
        let back = RunConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(matches!(
            RunConfig::from_toml_str("schema_version = 2\nproblem = \"1d\"\nsigma = 2.0\n"),
            Err(Error::SchemaMismatch(_))
        ));
        assert!(RunConfig::from_toml_str("problem = \"2d\"\n").is_err());
        assert!(RunConfig::from_toml_str("problem = \"1d\"\nsigma = 2\nbogus = 1\n").is_err());
        let c = RunConfig::from_toml_str("problem = \"1d\"\n").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_toml_str("problem = \"1d\"\nsigma = 2.5\nconditions = \"fmr\"\n").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_toml_str("problem = \"1d\"\nsigma = 2.0\ntol = 1e-6\n").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_toml_str("problem = \"3d-cubic\"\nsigma = 2.0\n").unwrap();
        assert!(c.validate().is_err());
    }
}
