//! Pseudo-spectral solver for the 2½-dimensional Hall MHD equations and the
//! reduced Hall system, with the diagnostics used to check their decay,
//! asymptotic profiles and blow-up functionals.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod models;
pub mod oracle;
pub mod output;
pub mod runner;
pub mod spectral;
pub mod timestepper;

pub use error::{Error, Result};
