//! Fair principal component analysis for two groups.
//!
//! The fair basis minimizes the larger of the two groups' reconstruction
//! losses. [`eigopt::solve`] finds it by maximizing a concave eigenvalue
//! function of one variable; [`numrange`] samples the joint numerical range
//! of the two loss matrices for inspection.

pub mod dataio;
pub mod eigopt;
pub mod error;
pub mod fairloss;
pub mod linalg;
pub mod numrange;
pub mod pca;
pub mod report;

pub use eigopt::{solve, EigOptConfig, EigOptSolution};
pub use error::{FpcaError, Result};
pub use fairloss::LossOperator;
pub use linalg::{EigMode, EigSettings};
