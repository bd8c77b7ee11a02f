#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar orthonormal `n x r` from the QR of a Gaussian matrix.
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

/// Gaussian rows with covariance `Q diag(scales^2) Q^T` for a random `Q`.
pub fn anisotropic(rng: &mut impl Rng, rows: usize, scales: &[f64]) -> DMatrix<f64> {
    let n = scales.len();
    let rot = haar(rng, n, n);
    let g = gaussian(rng, rows, n);
    DMatrix::from_fn(rows, n, |i, j| g[(i, j)] * scales[j]) * rot.transpose()
}

pub fn two_groups(rng: &mut impl Rng, m1: usize, m2: usize, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let sa: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..5.0)).collect();
    let sb: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..5.0)).collect();
    (anisotropic(rng, m1, &sa), anisotropic(rng, m2, &sb))
}

/// Writes groups `a` and `b` as a headed CSV with a `group` column last.
pub fn write_groups(path: &Path, a: &DMatrix<f64>, b: &DMatrix<f64>) {
    let n = a.ncols();
    let mut text: String = (0..n).map(|j| format!("x{j},")).collect();
    text.push_str("group\n");
    for (m, label) in [(a, "a"), (b, "b")] {
        for i in 0..m.nrows() {
            for j in 0..n {
                text.push_str(&format!("{:e},", m[(i, j)]));
            }
            text.push_str(label);
            text.push('\n');
        }
    }
    std::fs::write(path, text).unwrap();
}

pub fn fpca_bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_fpca"))
}

pub fn run(args: &[&str]) -> Output {
    Command::new(fpca_bin()).args(args).output().expect("spawn fpca")
}

pub fn group_args<'a>(input: &'a str, rank: &'a str) -> Vec<&'a str> {
    vec![
        "--input",
        input,
        "--group-column",
        "group",
        "--group-a",
        "a",
        "--group-b",
        "b",
        "--rank",
        rank,
        "--quiet",
    ]
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
