//! Test-only reference implementations. Nothing here calls into the
//! library's numerical routines.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthonormal `n x r` via QR of a Gaussian matrix with
/// column signs fixed by the diagonal of R.
pub fn haar(rng: &mut impl Rng, n: usize, r: usize) -> DMatrix<f64> {
    let qr = gaussian(rng, n, r).qr();
    let mut q = qr.q();
    let rdiag = qr.r().diagonal();
    for j in 0..r {
        if rdiag[j] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Rows drawn from a zero-mean Gaussian whose covariance has random axes
/// and spread `scales`.
pub fn anisotropic(rng: &mut impl Rng, rows: usize, scales: &[f64]) -> DMatrix<f64> {
    let n = scales.len();
    let rot = haar(rng, n, n);
    let g = gaussian(rng, rows, n);
    let scaled = DMatrix::from_fn(rows, n, |i, j| g[(i, j)] * scales[j]);
    scaled * rot.transpose()
}

/// Two groups with different random covariances.
pub fn two_groups(rng: &mut impl Rng, m1: usize, m2: usize, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let sa: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..5.0)).collect();
    let sb: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..5.0)).collect();
    (anisotropic(rng, m1, &sa), anisotropic(rng, m2, &sb))
}

/// Cyclic Jacobi rotations. Returns ascending eigenvalues and matching
/// eigenvector columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    (values, vectors)
}

/// Singular values from nalgebra's bidiagonal SVD, descending.
pub fn singular_values(d: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = d.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Loss matrix assembled from scratch: `(mean of top-r sigma^2) I - D^T D`,
/// all over the row count.
pub fn loss_matrix(d: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let (p, n) = d.shape();
    let s = singular_values(d);
    let gamma: f64 = s.iter().take(r).map(|x| x * x).sum::<f64>() / r as f64;
    let mut h = -(d.transpose() * d);
    for i in 0..n {
        h[(i, i)] += gamma;
    }
    h / p as f64
}

/// Excess reconstruction error of `U` over the best rank-r approximation,
/// per row, from explicit residual norms.
pub fn direct_loss(d: &DMatrix<f64>, u: &DMatrix<f64>) -> f64 {
    let r = u.ncols();
    let p = d.nrows() as f64;
    let resid = d - d * u * u.transpose();
    let best: f64 = singular_values(d).iter().skip(r).map(|x| x * x).sum();
    (resid.norm_squared() - best) / p
}

pub fn frob_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

pub fn projector(u: &DMatrix<f64>) -> DMatrix<f64> {
    u * u.transpose()
}

/// `|| U_a U_a^T - U_b U_b^T ||_F`.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    frob_diff(&projector(a), &projector(b))
}

/// Sum of the `r` smallest eigenvalues of `t H_A + (1 - t) H_B` by Jacobi.
pub fn phi_reference(ha: &DMatrix<f64>, hb: &DMatrix<f64>, r: usize, t: f64) -> f64 {
    let h = ha * t + hb * (1.0 - t);
    jacobi_eigen(&h).0.iter().take(r).sum()
}

pub fn spectral_bound(h: &DMatrix<f64>) -> f64 {
    let (v, _) = jacobi_eigen(h);
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn column(values: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(values)
}

/// `min over θ in [0, π)` of `max(loss_A, loss_B)` at `U(θ) = (cos θ, sin θ)`
/// by an equispaced grid. Returns `(grid minimum, refined minimum)`, where
/// the refinement runs golden-section search on the two cells around the
/// best grid angle.
pub fn angle_search(a: &DMatrix<f64>, b: &DMatrix<f64>, points: usize) -> (f64, f64) {
    let worst = |th: f64| {
        let u = DMatrix::from_column_slice(2, 1, &[th.cos(), th.sin()]);
        direct_loss_2d(a, &u).max(direct_loss_2d(b, &u))
    };
    let h = std::f64::consts::PI / points as f64;
    let (mut best, mut at) = (f64::INFINITY, 0);
    for k in 0..points {
        let v = worst(k as f64 * h);
        if v < best {
            best = v;
            at = k;
        }
    }
    let (mut lo, mut hi) = ((at as f64 - 1.0) * h, (at as f64 + 1.0) * h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (worst(x1), worst(x2));
    for _ in 0..200 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = worst(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = worst(x2);
        }
    }
    (best, best.min(f1).min(f2))
}

/// [`direct_loss`] specialised to two columns, with the best rank-1 error
/// computed once per call from the 2x2 Gram eigenvalues in closed form.
fn direct_loss_2d(d: &DMatrix<f64>, u: &DMatrix<f64>) -> f64 {
    let p = d.nrows() as f64;
    let (g00, g01, g11) = (
        d.column(0).norm_squared(),
        d.column(0).dot(&d.column(1)),
        d.column(1).norm_squared(),
    );
    let mean = 0.5 * (g00 + g11);
    let rad = (0.25 * (g00 - g11).powi(2) + g01 * g01).sqrt();
    let small = mean - rad;
    let (c, s) = (u[(0, 0)], u[(1, 0)]);
    let captured = c * c * g00 + 2.0 * c * s * g01 + s * s * g11;
    let resid = g00 + g11 - captured;
    (resid - small) / p
}
