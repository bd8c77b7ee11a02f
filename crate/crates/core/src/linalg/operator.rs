use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};

/// A real symmetric linear operator on `R^n`.
///
/// Implementors must provide an exact matrix-vector product. A dense
/// materialization is optional; when absent, dense solvers probe the operator
/// column by column.
pub trait SymOperator: Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Applies the operator to every column of `x`.
    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for j in 0..x.ncols() {
            let col = self.apply(&x.column(j).into_owned());
            out.set_column(j, &col);
        }
        out
    }

    fn dense(&self) -> Option<Cow<'_, DMatrix<f64>>> {
        None
    }

    /// Lower and upper bounds on the spectrum.
    fn eig_bounds(&self) -> (f64, f64);

    /// Upper bound on the spectral norm; the reference scale for tolerances.
    fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.eig_bounds();
        lo.abs().max(hi.abs())
    }
}

/// Returns the dense matrix of `op`, probing with unit vectors if the
/// operator has no materialization. The result is symmetrized.
pub fn materialize(op: &dyn SymOperator) -> DMatrix<f64> {
    let mut m = match op.dense() {
        Some(d) => d.into_owned(),
        None => {
            let n = op.dim();
            op.apply_block(&DMatrix::identity(n, n))
        }
    };
    symmetrize(&mut m);
    m
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Gershgorin disc bounds `(min_i a_ii - R_i, max_i a_ii + R_i)`.
pub fn gershgorin_bounds(m: &DMatrix<f64>) -> (f64, f64) {
    let n = m.nrows();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let radius: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
        lo = lo.min(m[(i, i)] - radius);
        hi = hi.max(m[(i, i)] + radius);
    }
    (lo, hi)
}

impl SymOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self * x
    }

    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self * x
    }

    fn dense(&self) -> Option<Cow<'_, DMatrix<f64>>> {
        Some(Cow::Borrowed(self))
    }

    fn eig_bounds(&self) -> (f64, f64) {
        gershgorin_bounds(self)
    }
}

/// `sum_i c_i * op_i`, evaluated lazily.
pub struct LinearCombination<'a> {
    terms: Vec<(f64, &'a dyn SymOperator)>,
    n: usize,
}

impl<'a> LinearCombination<'a> {
    /// Panics if the terms are empty or have mismatched dimensions.
    pub fn new(terms: Vec<(f64, &'a dyn SymOperator)>) -> Self {
        assert!(!terms.is_empty(), "empty linear combination");
        let n = terms[0].1.dim();
        assert!(
            terms.iter().all(|(_, op)| op.dim() == n),
            "dimension mismatch in linear combination"
        );
        Self { terms, n }
    }

    pub fn negated(op: &'a dyn SymOperator) -> Self {
        Self::new(vec![(-1.0, op)])
    }
}

impl SymOperator for LinearCombination<'_> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (c, op) in &self.terms {
            if *c != 0.0 {
                out.axpy(*c, &op.apply(x), 1.0);
            }
        }
        out
    }

    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (c, op) in &self.terms {
            if *c != 0.0 {
                out += op.apply_block(x) * *c;
            }
        }
        out
    }

    fn dense(&self) -> Option<Cow<'_, DMatrix<f64>>> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for (c, op) in &self.terms {
            if *c != 0.0 {
                let d = op.dense()?;
                out.zip_apply(d.as_ref(), |o, v| *o += *c * v);
            }
        }
        Some(Cow::Owned(out))
    }

    fn eig_bounds(&self) -> (f64, f64) {
        // Weyl: bounds of a sum are sums of bounds.
        self.terms.iter().fold((0.0, 0.0), |(lo, hi), (c, op)| {
            let (l, h) = op.eig_bounds();
            if *c >= 0.0 {
                (lo + c * l, hi + c * h)
            } else {
                (lo + c * h, hi + c * l)
            }
        })
    }
}

/// `Tr(U^T H U)`.
pub fn trace_form(op: &dyn SymOperator, u: &DMatrix<f64>) -> f64 {
    let hu = op.apply_block(u);
    u.dot(&hu)
}
