use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::operator::{materialize, LinearCombination, SymOperator};
use crate::error::{FpcaError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigMode {
    Dense,
    Iterative,
    Auto,
}

impl std::str::FromStr for EigMode {
    type Err = FpcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(EigMode::Dense),
            "iterative" => Ok(EigMode::Iterative),
            "auto" => Ok(EigMode::Auto),
            other => Err(FpcaError::arg(format!("unknown eigensolver mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigSettings {
    pub mode: EigMode,
    /// `Auto` uses the dense path when `n <= dense_threshold`.
    pub dense_threshold: usize,
    /// Relative residual target for the Lanczos path, `||Hv - lv|| <= tol * ||H||`.
    pub tol: f64,
    /// Maximum Krylov dimension. `None` picks `min(n, max(300, 10k))`.
    pub max_iters: Option<usize>,
    /// Seed of the Lanczos starting vector.
    pub seed: u64,
}

impl Default for EigSettings {
    fn default() -> Self {
        Self {
            mode: EigMode::Auto,
            dense_threshold: 2000,
            tol: 1e-10,
            max_iters: None,
            seed: 0x5eed,
        }
    }
}

impl EigSettings {
    pub fn with_mode(mode: EigMode) -> Self {
        Self { mode, ..Self::default() }
    }

    fn use_dense(&self, n: usize) -> bool {
        match self.mode {
            EigMode::Dense => true,
            EigMode::Iterative => false,
            EigMode::Auto => n <= self.dense_threshold,
        }
    }
}

/// Eigenvalues with matching orthonormal eigenvectors (one per column).
#[derive(Clone, Debug)]
pub struct EigPairs {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Keeps the first `k` pairs.
    pub fn truncate(self, k: usize) -> EigPairs {
        EigPairs {
            values: self.values.rows(0, k).into_owned(),
            vectors: self.vectors.columns(0, k).into_owned(),
        }
    }
}

/// The `k` algebraically smallest eigenpairs of `op`, ascending.
pub fn sym_eigs_smallest(op: &dyn SymOperator, k: usize, settings: &EigSettings) -> Result<EigPairs> {
    let n = op.dim();
    check_count(k, n)?;
    if settings.use_dense(n) {
        Ok(dense_smallest(&materialize(op), k))
    } else {
        let (values, vectors) = lanczos_smallest(op, k, true, settings)?;
        Ok(EigPairs {
            values: DVector::from_vec(values),
            vectors: vectors.expect("vectors requested"),
        })
    }
}

/// Eigenvalues only; skips eigenvector accumulation on the dense path.
pub fn sym_eigvals_smallest(op: &dyn SymOperator, k: usize, settings: &EigSettings) -> Result<Vec<f64>> {
    let n = op.dim();
    check_count(k, n)?;
    if settings.use_dense(n) {
        let mut values: Vec<f64> = materialize(op).symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        values.truncate(k);
        Ok(values)
    } else {
        lanczos_smallest(op, k, false, settings).map(|(v, _)| v)
    }
}

/// The `k` largest eigenpairs of `op`, in descending order of eigenvalue.
pub fn sym_eigs_largest(op: &dyn SymOperator, k: usize, settings: &EigSettings) -> Result<EigPairs> {
    let neg = LinearCombination::negated(op);
    let mut pairs = sym_eigs_smallest(&neg, k, settings)?;
    pairs.values.neg_mut();
    Ok(pairs)
}

fn check_count(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(FpcaError::arg(format!(
            "requested {k} eigenpairs of a {n}-dimensional operator"
        )));
    }
    Ok(())
}

/// Full dense decomposition, sorted ascending (stable on ties), first `k` kept.
pub(crate) fn dense_smallest(m: &DMatrix<f64>, k: usize) -> EigPairs {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(Ordering::Equal)
    });
    let values = DVector::from_iterator(k, order[..k].iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = eig.eigenvectors.select_columns(&order[..k]);
    normalize_signs(&mut vectors);
    EigPairs { values, vectors }
}

/// Flips each column so its largest-magnitude entry is positive.
pub fn normalize_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &x in col.iter() {
            if x.abs() > best {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

/// Accepted true residual of a returned Lanczos pair, relative to `||H||`.
const RESIDUAL_BOUND: f64 = 1e-8;

/// Lanczos with full reorthogonalization on `sigma*I - H`, where `sigma` is
/// an upper bound on the spectrum of `H`, so the wanted eigenvalues are the
/// dominant ones of the shifted operator.
fn lanczos_smallest(
    op: &dyn SymOperator,
    k: usize,
    want_vectors: bool,
    settings: &EigSettings,
) -> Result<(Vec<f64>, Option<DMatrix<f64>>)> {
    let n = op.dim();
    let (_, sigma) = op.eig_bounds();
    let scale = op.norm_bound().max(f64::MIN_POSITIVE);
    let required = settings.tol * scale;
    let max_dim = settings
        .max_iters
        .unwrap_or_else(|| n.min(300.max(10 * k)))
        .clamp(k.min(n), n);

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut basis = DMatrix::<f64>::zeros(n, max_dim);
    let mut alpha = Vec::with_capacity(max_dim);
    let mut beta: Vec<f64> = Vec::with_capacity(max_dim);

    let start = random_unit_orthogonal(&mut rng, &basis, 0);
    basis.set_column(0, &start);

    let check_every = |m: usize| (m / 8).max(5);
    let mut last_check = 0;
    let mut last_residual = f64::INFINITY;

    for j in 0..max_dim {
        let q = basis.column(j).into_owned();
        let mut w = &q * sigma - op.apply(&q);
        let a = q.dot(&w);
        w.axpy(-a, &q, 1.0);
        if j > 0 {
            w.axpy(-beta[j - 1], &basis.column(j - 1), 1.0);
        }
        // Two passes of classical Gram-Schmidt against the whole basis.
        let active = basis.columns(0, j + 1);
        for _ in 0..2 {
            let c = active.tr_mul(&w);
            w -= active * c;
        }
        let b = w.norm();
        alpha.push(a);
        beta.push(b);
        let m = j + 1;

        let exhausted = m == n;
        let breakdown = b <= 1e-13 * scale;
        if m >= k && (exhausted || m == max_dim || m - last_check >= check_every(m)) {
            last_check = m;
            let (theta, s) = tridiagonal_eig(&alpha, &beta[..m - 1]);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&x, &y| theta[y].partial_cmp(&theta[x]).unwrap_or(Ordering::Equal));
            let tail = if exhausted { 0.0 } else { b };
            last_residual = order[..k]
                .iter()
                .map(|&i| (tail * s[(m - 1, i)]).abs())
                .fold(0.0, f64::max);
            if last_residual <= required || exhausted {
                let (values, vectors) = finish(sigma, &basis, m, &theta, &s, &order[..k], want_vectors);
                if let Some(v) = &vectors {
                    let residual = max_residual(op, &values, v);
                    if residual > RESIDUAL_BOUND * scale {
                        return Err(FpcaError::NonConvergence {
                            iterations: m,
                            residual,
                            required: RESIDUAL_BOUND * scale,
                        });
                    }
                }
                return Ok((values, vectors));
            }
        }
        if exhausted {
            break;
        }
        if m < max_dim {
            let next = if breakdown {
                // Invariant subspace: continue from a fresh direction. The
                // tridiagonal decouples because the coupling is zero.
                *beta.last_mut().unwrap() = 0.0;
                random_unit_orthogonal(&mut rng, &basis, m)
            } else {
                w / b
            };
            basis.set_column(m, &next);
        }
    }

    Err(FpcaError::NonConvergence {
        iterations: max_dim,
        residual: last_residual,
        required,
    })
}

fn finish(
    sigma: f64,
    basis: &DMatrix<f64>,
    m: usize,
    theta: &DVector<f64>,
    s: &DMatrix<f64>,
    picked: &[usize],
    want_vectors: bool,
) -> (Vec<f64>, Option<DMatrix<f64>>) {
    // Ritz values of sigma*I - H are picked in descending order, so the
    // eigenvalues of H come out ascending.
    let values: Vec<f64> = picked.iter().map(|&i| sigma - theta[i]).collect();
    if !want_vectors {
        return (values, None);
    }
    let mut vectors = basis.columns(0, m) * s.select_columns(picked);
    normalize_signs(&mut vectors);
    (values, Some(vectors))
}

/// Largest `||H v_i - l_i v_i||` over the given pairs.
pub fn max_residual(op: &dyn SymOperator, values: &[f64], vectors: &DMatrix<f64>) -> f64 {
    let hv = op.apply_block(vectors);
    (0..values.len())
        .map(|i| (hv.column(i) - vectors.column(i) * values[i]).norm())
        .fold(0.0, f64::max)
}

fn tridiagonal_eig(alpha: &[f64], beta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    (eig.eigenvalues, eig.eigenvectors)
}

fn random_unit_orthogonal(rng: &mut ChaCha8Rng, basis: &DMatrix<f64>, filled: usize) -> DVector<f64> {
    let n = basis.nrows();
    loop {
        let mut v = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
        if filled > 0 {
            let active = basis.columns(0, filled);
            for _ in 0..2 {
                let c = active.tr_mul(&v);
                v -= active * c;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            return v / norm;
        }
    }
}
