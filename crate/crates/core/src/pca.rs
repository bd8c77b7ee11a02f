//! Standard (unfair) PCA baseline.

use nalgebra::DMatrix;

use crate::error::{FpcaError, Result};
use crate::linalg::{self, EigSettings, GramOperator};

#[derive(Clone, Debug)]
pub struct PcaBasis {
    /// `n x r` eigenvectors of `M^T M` for its `r` largest eigenvalues.
    pub basis: DMatrix<f64>,
    /// Those eigenvalues, descending (the squared leading singular values).
    pub variances: Vec<f64>,
}

/// Leading `r` principal directions of a centered data matrix.
pub fn principal_basis(m: &DMatrix<f64>, r: usize, settings: &EigSettings) -> Result<PcaBasis> {
    let n = m.ncols();
    if r == 0 || r > n {
        return Err(FpcaError::arg(format!("rank {r} out of range for n = {n}")));
    }
    let dense = match settings.mode {
        linalg::EigMode::Dense => true,
        linalg::EigMode::Iterative => false,
        linalg::EigMode::Auto => n <= settings.dense_threshold,
    };
    let pairs = if dense {
        linalg::sym_eigs_largest(&linalg::gram(m), r, settings)?
    } else {
        linalg::sym_eigs_largest(&GramOperator::new(m), r, settings)?
    };
    Ok(PcaBasis {
        basis: pairs.vectors,
        variances: pairs.values.iter().map(|v| v.max(0.0)).collect(),
    })
}
