//! Exact asymptotics of generalized margin maximizers (GMM) for
//! high-dimensional binary classification, with finite-size Monte Carlo
//! validation.

pub mod checks;
pub mod empirical;
pub mod error;
pub mod experiments;
mod newton;
pub mod numerics;
pub mod potentials;
pub mod summary;
pub mod theory;

pub use error::{Error, Result};
