//! Fairness repair for a repeated `r`-th eigenvalue of `H(t*)`.
//!
//! When `lambda_r` has multiplicity `q` over indices `p+1..p+q`, any basis
//! `[U1, U2 V]` with `V` orthonormal `q x (r-p)` is optimal for `H(t*)`, but
//! only some of them equalize the two losses. The loss difference of such a
//! basis is `g(V) = gamma + Tr(V^T C V)` with `gamma = Tr(U1^T D U1)`,
//! `C = U2^T D U2` and `D = H_A - H_B`. Its extremes are attained at the
//! smallest and largest eigenvectors of `C`; a root is found by bisection
//! along `V(s) = orth(s V_M + (1-s) V_m)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::EigOptConfig;
use crate::error::{FpcaError, Result};
use crate::linalg::{self, EigPairs, SymOperator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairRecord {
    /// Number of eigenvalues strictly below the repeated one.
    pub p: usize,
    /// Multiplicity of the repeated eigenvalue.
    pub q: usize,
    pub gamma: f64,
    pub g_min: f64,
    pub g_max: f64,
    /// Bisection parameter of the returned basis.
    pub t_hat: f64,
    /// `g(V(t_hat))`.
    pub residual: f64,
    pub bisection_steps: usize,
}

/// Location of the eigenvalue block containing index `r` (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DegenerateBlock {
    pub p: usize,
    pub q: usize,
    /// False when the block may continue past the last computed pair.
    pub complete: bool,
}

/// Scans `values` (ascending) down and up from index `r` for values within
/// `tol` of `lambda_r`. Returns `None` when `lambda_{r+1}` is not in the block.
pub fn degenerate_block(values: &[f64], r: usize, total: usize, tol: f64) -> Option<DegenerateBlock> {
    if r == 0 || r >= values.len() {
        return None;
    }
    let pivot = values[r - 1];
    if values[r] - pivot > tol {
        return None;
    }
    let mut lo = r - 1;
    while lo > 0 && pivot - values[lo - 1] <= tol {
        lo -= 1;
    }
    let mut hi = r;
    while hi + 1 < values.len() && values[hi + 1] - pivot <= tol {
        hi += 1;
    }
    let complete = hi + 1 < values.len() || values.len() == total;
    Some(DegenerateBlock {
        p: lo,
        q: hi + 1 - lo,
        complete,
    })
}

/// Rotates within the repeated eigenspace of `pairs` so that
/// `Tr(U^T H_A U) = Tr(U^T H_B U)`. `pairs` must hold every pair of the
/// block containing index `r`.
pub fn degenerate_repair(
    pairs: &EigPairs,
    left: &dyn SymOperator,
    right: &dyn SymOperator,
    r: usize,
    cfg: &EigOptConfig,
) -> Result<(DMatrix<f64>, RepairRecord)> {
    let scale = left.norm_bound().max(right.norm_bound());
    let values: Vec<f64> = pairs.values.iter().copied().collect();
    let block = degenerate_block(&values, r, left.dim(), cfg.gap_tol * scale)
        .filter(|b| b.q >= 2)
        .ok_or_else(|| FpcaError::arg(format!("eigenvalue {r} is not repeated")))?;
    if !block.complete {
        return Err(FpcaError::arg("eigenpairs do not cover the whole repeated block"));
    }
    let (p, q) = (block.p, block.q);
    let k = r - p;

    let diff = |x: &DMatrix<f64>| left.apply_block(x) - right.apply_block(x);
    let u1 = pairs.vectors.columns(0, p).into_owned();
    let u2 = pairs.vectors.columns(p, q).into_owned();
    let gamma = if p > 0 { u1.dot(&diff(&u1)) } else { 0.0 };
    let mut c = u2.tr_mul(&diff(&u2));
    c = (&c + c.transpose()) * 0.5;

    let c_eig = linalg::sym_eigs_smallest(&c, q, &linalg::EigSettings::with_mode(linalg::EigMode::Dense))?;
    let v_min = c_eig.vectors.columns(0, k).into_owned();
    let v_max = c_eig.vectors.columns(q - k, k).into_owned();
    let g = |v: &DMatrix<f64>| gamma + v.dot(&(&c * v));
    let g_min = g(&v_min);
    let g_max = g(&v_max);
    let tol = cfg.bisect_tol * scale;

    if g_min > tol || g_max < -tol {
        return Err(FpcaError::Repair(format!(
            "loss difference does not change sign over the repeated eigenspace \
             (g(V_m) = {g_min:.3e}, g(V_M) = {g_max:.3e}); the multiplicity was likely mis-detected"
        )));
    }

    let mut record = RepairRecord {
        p,
        q,
        gamma,
        g_min,
        g_max,
        t_hat: 0.0,
        residual: g_min,
        bisection_steps: 0,
    };
    let v = if g_min.abs() <= tol {
        v_min
    } else if g_max.abs() <= tol {
        record.t_hat = 1.0;
        record.residual = g_max;
        v_max
    } else {
        let interpolate = |s: f64| -> Result<DMatrix<f64>> {
            linalg::orthonormalize(&(&v_max * s + &v_min * (1.0 - s))).map_err(|e| match e {
                FpcaError::RankDeficient { .. } => FpcaError::RepairUnsupported(format!(
                    "interpolated basis V({s}) lost rank"
                )),
                other => other,
            })
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut best: Option<(f64, f64, DMatrix<f64>)> = None;
        for step in 1..=200 {
            let mid = 0.5 * (lo + hi);
            let v = interpolate(mid)?;
            let gv = g(&v);
            record.bisection_steps = step;
            let better = best.as_ref().is_none_or(|(_, gb, _)| gv.abs() < gb.abs());
            if better {
                best = Some((mid, gv, v));
            }
            if gv.abs() <= tol || hi - lo <= 2.0 * f64::EPSILON {
                break;
            }
            if gv < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (t_hat, residual, v) = best.expect("at least one bisection step");
        record.t_hat = t_hat;
        record.residual = residual;
        v
    };

    let mut u = DMatrix::zeros(pairs.vectors.nrows(), r);
    u.columns_mut(0, p).copy_from(&u1);
    u.columns_mut(p, k).copy_from(&(&u2 * v));
    Ok((u, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn block_scan() {
        let v = [0.0, 1.0, 1.0, 1.0, 2.0];
        let b = degenerate_block(&v, 2, 5, 1e-12).unwrap();
        assert_eq!((b.p, b.q, b.complete), (1, 3, true));
        assert!(degenerate_block(&v, 1, 5, 1e-12).is_none());
        // Block reaches the end of a truncated list.
        let b = degenerate_block(&v[..4], 3, 5, 1e-12).unwrap();
        assert!(!b.complete);
    }

    #[test]
    fn two_by_two_closed_form_root() {
        // H_A - H_B = diag(1, -1); H(1/2) = 0 has a double eigenvalue.
        let ha = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -0.5]));
        let hb = DMatrix::from_diagonal(&DVector::from_vec(vec![-0.5, 0.5]));
        let pairs = EigPairs {
            values: DVector::from_vec(vec![0.0, 0.0]),
            vectors: DMatrix::identity(2, 2),
        };
        let (u, rec) = degenerate_repair(&pairs, &ha, &hb, 1, &EigOptConfig::default()).unwrap();
        assert_eq!((rec.p, rec.q), (0, 2));
        assert_eq!(rec.gamma, 0.0);
        assert!(rec.residual.abs() <= 1e-10);
        let s = 0.5f64.sqrt();
        assert!((u[(0, 0)].abs() - s).abs() < 1e-9 && (u[(1, 0)].abs() - s).abs() < 1e-9);
    }

    #[test]
    fn boundary_root_skips_bisection() {
        // C = diag(0, 2): g(V_m) = 0 exactly.
        let ha = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0]));
        let hb = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -1.0]));
        let pairs = EigPairs {
            values: DVector::from_vec(vec![0.0, 0.0]),
            vectors: DMatrix::identity(2, 2),
        };
        let (u, rec) = degenerate_repair(&pairs, &ha, &hb, 1, &EigOptConfig::default()).unwrap();
        assert_eq!(rec.bisection_steps, 0);
        assert_eq!(rec.t_hat, 0.0);
        assert_eq!(u.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn missing_straddle_is_reported() {
        // D = diag(1, 2) is positive definite: g > 0 everywhere.
        let ha = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let hb = DMatrix::<f64>::zeros(2, 2);
        let pairs = EigPairs {
            values: DVector::from_vec(vec![0.0, 0.0]),
            vectors: DMatrix::identity(2, 2),
        };
        let err = degenerate_repair(&pairs, &ha, &hb, 1, &EigOptConfig::default()).unwrap_err();
        assert!(matches!(err, FpcaError::Repair(_)), "{err}");
    }

    #[test]
    fn simple_eigenvalue_is_rejected() {
        let ha = DMatrix::<f64>::identity(2, 2);
        let pairs = EigPairs {
            values: DVector::from_vec(vec![0.0, 1.0]),
            vectors: DMatrix::identity(2, 2),
        };
        assert!(degenerate_repair(&pairs, &ha, &ha, 1, &EigOptConfig::default()).is_err());
    }
}
