//! Group loss matrices and reconstruction measures.
//!
//! For a data block `D` (`p x n`) and target rank `r`, the average
//! reconstruction loss of an orthonormal basis `U` is the excess of its
//! reconstruction error over the best rank-`r` basis of `D`, divided by `p`.
//! It equals the trace form `Tr(U^T H_D U)` with
//!
//! ```text
//! H_D = gamma_D * I - D^T D / p,   gamma_D = (1 / (p r)) * sum_{i<=r} sigma_i(D)^2
//! ```

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};

use crate::error::{FpcaError, Result};
use crate::linalg::{self, EigSettings, SymOperator};

/// Orthonormality tolerance accepted for input bases.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Losses within this relative distance below zero are clamped to zero.
pub const CLAMP_TOL: f64 = 1e-12;

/// The loss matrix `H_D` of one group, stored implicitly as
/// `(gamma_D, D)` and optionally also densely.
#[derive(Clone, Debug)]
pub struct LossOperator {
    data: DMatrix<f64>,
    rank: usize,
    singular_values: Vec<f64>,
    gamma: f64,
    dense: Option<DMatrix<f64>>,
}

impl LossOperator {
    /// Builds `H_D` for `d`. The dense matrix is formed when `materialize`
    /// is set or `n` is within the dense threshold of `settings`.
    pub fn build(d: &DMatrix<f64>, r: usize, materialize: bool, settings: &EigSettings) -> Result<Self> {
        Self::from_owned(d.clone(), r, materialize, settings)
    }

    pub fn from_owned(d: DMatrix<f64>, r: usize, materialize: bool, settings: &EigSettings) -> Result<Self> {
        let (p, n) = d.shape();
        if r == 0 || r > p.min(n) {
            return Err(FpcaError::arg(format!(
                "rank {r} out of range for a {p}x{n} group"
            )));
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(FpcaError::arg("group data contains non-finite values"));
        }
        let materialize = materialize || n <= settings.dense_threshold;
        let (singular_values, dense) = if materialize {
            let g = linalg::gram(&d);
            let sv: Vec<f64> = linalg::largest_from_gram(&g, r)
                .into_iter()
                .map(|v| v.max(0.0).sqrt())
                .collect();
            (sv, Some(g))
        } else {
            (linalg::top_singular_values_with(&d, r, settings)?, None)
        };
        let pf = p as f64;
        let gamma = singular_values.iter().map(|s| s * s).sum::<f64>() / (pf * r as f64);
        let dense = dense.map(|g| {
            let mut h = g / -pf;
            for i in 0..n {
                h[(i, i)] += gamma;
            }
            h
        });
        Ok(Self {
            data: d,
            rank: r,
            singular_values,
            gamma,
            dense,
        })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn group_size(&self) -> usize {
        self.data.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// The `r` leading singular values of the group data.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn dense_matrix(&self) -> Option<&DMatrix<f64>> {
        self.dense.as_ref()
    }

    /// `loss_D(U)`, the trace form clamped at zero within round-off.
    pub fn loss(&self, u: &DMatrix<f64>) -> Result<f64> {
        loss(self, u)
    }
}

impl SymOperator for LossOperator {
    fn dim(&self) -> usize {
        self.data.ncols()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.dense {
            Some(h) => h * x,
            None => {
                let p = self.data.nrows() as f64;
                let mut out = self.data.tr_mul(&(&self.data * x)) / -p;
                out.axpy(self.gamma, x, 1.0);
                out
            }
        }
    }

    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.dense {
            Some(h) => h * x,
            None => {
                let p = self.data.nrows() as f64;
                let mut out = self.data.tr_mul(&(&self.data * x)) / -p;
                out += x * self.gamma;
                out
            }
        }
    }

    fn dense(&self) -> Option<Cow<'_, DMatrix<f64>>> {
        self.dense.as_ref().map(Cow::Borrowed)
    }

    fn eig_bounds(&self) -> (f64, f64) {
        let p = self.data.nrows() as f64;
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        (self.gamma - top * top / p, self.gamma)
    }
}

/// `||D - D U U^T||_F^2`, evaluated as `||D||_F^2 - ||D U||_F^2`.
pub fn reconstruction_error(d: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<f64> {
    check_basis(d.ncols(), u)?;
    let total = d.norm_squared();
    let kept = (d * u).norm_squared();
    Ok((total - kept).max(0.0))
}

/// `loss_D(U) = Tr(U^T H_D U)`, clamped to zero when within
/// `CLAMP_TOL * ||H_D||` below it.
pub fn loss(op: &LossOperator, u: &DMatrix<f64>) -> Result<f64> {
    let value = trace_loss(op, u)?;
    if value < 0.0 && value >= -CLAMP_TOL * op.norm_bound() {
        Ok(0.0)
    } else {
        Ok(value)
    }
}

/// The unclamped trace form `Tr(U^T H_D U)`.
pub fn trace_loss(op: &LossOperator, u: &DMatrix<f64>) -> Result<f64> {
    check_basis(op.dim(), u)?;
    if u.ncols() != op.rank() {
        return Err(FpcaError::arg(format!(
            "basis has {} columns but the loss operator was built for rank {}",
            u.ncols(),
            op.rank()
        )));
    }
    Ok(linalg::trace_form(op, u))
}

fn check_basis(n: usize, u: &DMatrix<f64>) -> Result<()> {
    if u.nrows() != n {
        return Err(FpcaError::arg(format!(
            "basis has {} rows, expected {n}",
            u.nrows()
        )));
    }
    if u.ncols() == 0 {
        return Err(FpcaError::arg("basis has no columns"));
    }
    let err = linalg::orthonormality_error(u);
    if err.is_nan() || err > ORTHONORMAL_TOL {
        return Err(FpcaError::arg(format!(
            "basis is not orthonormal (||U^T U - I||_max = {err:.3e})"
        )));
    }
    Ok(())
}

/// `H(t) = t * left + (1 - t) * right`.
#[derive(Clone, Copy)]
pub struct Pencil<'a> {
    left: &'a dyn SymOperator,
    right: &'a dyn SymOperator,
    t: f64,
}

impl<'a> Pencil<'a> {
    pub fn new(left: &'a dyn SymOperator, right: &'a dyn SymOperator, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(FpcaError::arg(format!("pencil parameter {t} outside [0, 1]")));
        }
        if left.dim() != right.dim() {
            return Err(FpcaError::arg(format!(
                "pencil operators have dimensions {} and {}",
                left.dim(),
                right.dim()
            )));
        }
        Ok(Self { left, right, t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn at(&self, t: f64) -> Result<Self> {
        Self::new(self.left, self.right, t)
    }

    pub fn left(&self) -> &'a dyn SymOperator {
        self.left
    }

    pub fn right(&self) -> &'a dyn SymOperator {
        self.right
    }
}

/// Pencil of two group loss operators, which must share `n` and `r`.
pub fn pencil<'a>(left: &'a LossOperator, right: &'a LossOperator, t: f64) -> Result<Pencil<'a>> {
    if left.rank() != right.rank() {
        return Err(FpcaError::arg(format!(
            "loss operators built for ranks {} and {}",
            left.rank(),
            right.rank()
        )));
    }
    Pencil::new(left, right, t)
}

impl SymOperator for Pencil<'_> {
    fn dim(&self) -> usize {
        self.left.dim()
    }

    // For loss operators without a dense form this is the four-product
    // expansion (t gA + (1-t) gB) v - (t/m1 A^T A v + (1-t)/m2 B^T B v).
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let t = self.t;
        if t == 1.0 {
            return self.left.apply(x);
        }
        if t == 0.0 {
            return self.right.apply(x);
        }
        let mut out = self.left.apply(x) * t;
        out.axpy(1.0 - t, &self.right.apply(x), 1.0);
        out
    }

    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let t = self.t;
        if t == 1.0 {
            return self.left.apply_block(x);
        }
        if t == 0.0 {
            return self.right.apply_block(x);
        }
        self.left.apply_block(x) * t + self.right.apply_block(x) * (1.0 - t)
    }

    fn dense(&self) -> Option<Cow<'_, DMatrix<f64>>> {
        let t = self.t;
        if t == 1.0 {
            return self.left.dense();
        }
        if t == 0.0 {
            return self.right.dense();
        }
        let l = self.left.dense()?;
        let r = self.right.dense()?;
        let mut out = l.into_owned() * t;
        out.zip_apply(r.as_ref(), |o, v| *o += (1.0 - t) * v);
        Some(Cow::Owned(out))
    }

    fn eig_bounds(&self) -> (f64, f64) {
        let (l0, l1) = self.left.eig_bounds();
        let (r0, r1) = self.right.eig_bounds();
        let t = self.t;
        (t * l0 + (1.0 - t) * r0, t * l1 + (1.0 - t) * r1)
    }
}
