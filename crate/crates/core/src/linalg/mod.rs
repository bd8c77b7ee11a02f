//! Symmetric eigensolvers, singular values and orthonormalization.
//!
//! Everything here is a pure function of its inputs. The eigensolvers have a
//! dense path (full decomposition of a materialized matrix) and an iterative
//! path (Lanczos with full reorthogonalization) that needs only products
//! `H * v`; [`EigMode::Auto`] switches on the operator dimension.

mod eigen;
mod operator;

use nalgebra::{DMatrix, DVector};

pub use eigen::{
    max_residual, normalize_signs, sym_eigs_largest, sym_eigs_smallest, sym_eigvals_smallest, EigMode, EigPairs,
    EigSettings,
};
pub use operator::{gershgorin_bounds, materialize, trace_form, LinearCombination, SymOperator};

use crate::error::{FpcaError, Result};

/// Relative rank tolerance used by [`orthonormalize`].
pub const RANK_TOL: f64 = 1e-12;

/// `D^T D`.
pub fn gram(d: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = d.tr_mul(d);
    operator::symmetrize(&mut g);
    g
}

/// Implicit Gram operator `D^T D` (or `D D^T` when `transposed`).
pub struct GramOperator<'a> {
    d: &'a DMatrix<f64>,
    transposed: bool,
    frob2: f64,
}

impl<'a> GramOperator<'a> {
    pub fn new(d: &'a DMatrix<f64>) -> Self {
        Self {
            d,
            transposed: false,
            frob2: d.norm_squared(),
        }
    }

    pub fn outer(d: &'a DMatrix<f64>) -> Self {
        Self {
            transposed: true,
            ..Self::new(d)
        }
    }
}

impl SymOperator for GramOperator<'_> {
    fn dim(&self) -> usize {
        if self.transposed {
            self.d.nrows()
        } else {
            self.d.ncols()
        }
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.transposed {
            self.d * self.d.tr_mul(x)
        } else {
            self.d.tr_mul(&(self.d * x))
        }
    }

    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        if self.transposed {
            self.d * self.d.tr_mul(x)
        } else {
            self.d.tr_mul(&(self.d * x))
        }
    }

    fn eig_bounds(&self) -> (f64, f64) {
        (0.0, self.frob2)
    }
}

/// The `r` largest singular values of `d`, descending.
pub fn top_singular_values(d: &DMatrix<f64>, r: usize) -> Result<Vec<f64>> {
    top_singular_values_with(d, r, &EigSettings::default())
}

/// [`top_singular_values`] with explicit eigensolver settings. The values
/// come from the eigenvalues of the smaller of `D^T D` and `D D^T`, with
/// negative round-off clamped to zero.
pub fn top_singular_values_with(d: &DMatrix<f64>, r: usize, settings: &EigSettings) -> Result<Vec<f64>> {
    let (p, n) = d.shape();
    if r == 0 || r > p.min(n) {
        return Err(FpcaError::arg(format!(
            "rank {r} out of range for a {p}x{n} matrix"
        )));
    }
    let transposed = p < n;
    let small = p.min(n);
    let eigenvalues = if matches!(settings.mode, EigMode::Dense)
        || (matches!(settings.mode, EigMode::Auto) && small <= settings.dense_threshold)
    {
        let g = if transposed { gram(&d.transpose()) } else { gram(d) };
        largest_from_gram(&g, r)
    } else {
        let op = if transposed {
            GramOperator::outer(d)
        } else {
            GramOperator::new(d)
        };
        let neg = LinearCombination::negated(&op);
        sym_eigvals_smallest(&neg, r, settings)?
            .into_iter()
            .map(|v| -v)
            .collect()
    };
    Ok(eigenvalues.into_iter().map(|v| v.max(0.0).sqrt()).collect())
}

/// Largest `r` eigenvalues of a dense Gram matrix, descending.
pub(crate) fn largest_from_gram(g: &DMatrix<f64>, r: usize) -> Vec<f64> {
    let mut values: Vec<f64> = g.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    values.truncate(r);
    values
}

/// Orthonormal basis of `range(X)` via thin QR with a positive diagonal.
///
/// Fails when `X` is rank deficient, i.e. when some singular value is at or
/// below `RANK_TOL * sigma_max`.
pub fn orthonormalize(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, k) = x.shape();
    if k == 0 || k > n {
        return Err(FpcaError::arg(format!("cannot orthonormalize a {n}x{k} matrix")));
    }
    let sv = x.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let deficient = sv.iter().filter(|&&s| s.is_nan() || s <= RANK_TOL * smax).count();
    if deficient > 0 {
        return Err(FpcaError::RankDeficient { deficient, columns: k });
    }
    Ok(gram_schmidt(x))
}

/// Modified Gram-Schmidt with one reorthogonalization pass. Columns are
/// assumed linearly independent.
pub(crate) fn gram_schmidt(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = x.clone();
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let c = q.column(i).dot(&q.column(j));
                let qi = q.column(i).into_owned();
                q.column_mut(j).axpy(-c, &qi, 1.0);
            }
        }
        let norm = q.column(j).norm();
        q.column_mut(j).unscale_mut(norm);
    }
    q
}

/// `||U^T U - I||_max`.
pub fn orthonormality_error(u: &DMatrix<f64>) -> f64 {
    let k = u.ncols();
    let g = u.tr_mul(u);
    (g - DMatrix::<f64>::identity(k, k)).amax()
}
