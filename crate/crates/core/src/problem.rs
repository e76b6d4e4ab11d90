//! Problem descriptor and solver settings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// NLS instance `i u_t + Δu + |u|^{2σ} u = 0` about the soliton of frequency λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub dimension: usize,
    pub sigma: f64,
    pub lambda: f64,
}

impl Problem {
    /// Validated constructor.
    pub fn new(dimension: usize, sigma: f64, lambda: f64) -> Result<Self> {
        let p = Problem {
            dimension,
            sigma,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    /// The 3d cubic equation (σ = 1, λ = 1).
    pub fn cubic_3d() -> Self {
        Problem {
            dimension: 3,
            sigma: 1.0,
            lambda: 1.0,
        }
    }

    /// The 1d equation with nonlinearity `|u|^{2σ}` and λ = 1.
    pub fn one_d(sigma: f64) -> Self {
        Problem {
            dimension: 1,
            sigma,
            lambda: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension != 1 && self.dimension != 3 {
            return Err(Error::UnsupportedDimension(self.dimension));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Spatial dimension as a float, for the radial formulas.
    pub fn d(&self) -> f64 {
        self.dimension as f64
    }

    pub fn is_cubic_3d(&self) -> bool {
        self.dimension == 3 && (self.sigma - 1.0).abs() < 1e-12
    }

    /// The L²-critical 1d case σ = 2.
    pub fn is_critical_1d(&self) -> bool {
        self.dimension == 1 && (self.sigma - 2.0).abs() < 1e-12
    }

    /// Default truncation radius: 30 in 1d, 40 in 3d.
    pub fn default_r_max(&self) -> f64 {
        if self.dimension == 1 {
            30.0
        } else {
            40.0
        }
    }

    /// Short human-readable label, e.g. `3d-cubic` or `1d-sigma2.5`.
    pub fn label(&self) -> String {
        if self.is_cubic_3d() {
            "3d-cubic".to_string()
        } else {
            format!("{}d-sigma{}", self.dimension, self.sigma)
        }
    }
}

/// Truncation radius and local error tolerance shared by all solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub r_max: f64,
    pub tol: f64,
}

impl SolverSettings {
    pub const DEFAULT_TOL: f64 = 1e-12;

    pub fn for_problem(problem: &Problem) -> Self {
        SolverSettings {
            r_max: problem.default_r_max(),
            tol: Self::DEFAULT_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1e-13..=1e-8).contains(&self.tol) {
            return Err(Error::InvalidArgument(format!(
                "tol must lie in [1e-13, 1e-8], got {:e}",
                self.tol
            )));
        }
        if !(self.r_max > 5.0 && self.r_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "r_max must exceed 5, got {}",
                self.r_max
            )));
        }
        Ok(())
    }
}
