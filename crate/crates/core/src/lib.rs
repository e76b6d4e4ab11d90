//! Numerical certification of the spectral property for NLS solitons.

pub mod bvp;
pub mod certificate;
pub mod compare;
pub mod config;
pub mod error;
pub mod index;
pub mod ivp;
pub mod mourre;
pub mod operators;
pub mod pipeline;
pub mod problem;
pub mod soliton;

pub use error::{Error, Result};
pub use problem::{Problem, SolverSettings};
