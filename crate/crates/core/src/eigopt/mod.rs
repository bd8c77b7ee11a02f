//! Fair PCA by univariate eigenvalue optimization.
//!
//! The min-max problem `min_U max(loss_A(U), loss_B(U))` over orthonormal
//! `n x r` bases has the same value as `max_{t in [0,1]} phi(t)`, where
//! `phi(t)` is the sum of the `r` smallest eigenvalues of
//! `H(t) = t H_A + (1 - t) H_B`. `phi` is concave, so [`solve`] maximizes it
//! with Brent's method and returns the eigenbasis of `H(t*)`.
//!
//! Two refinements sit on top of the plain scheme:
//!
//! * Function values only locate a smooth maximum to about `sqrt(eps)`, while
//!   the loss gap `loss_A - loss_B` is the derivative of `phi`. After Brent,
//!   the gap's sign change is bracketed and narrowed by Illinois regula falsi
//!   so the returned losses agree to round-off.
//! * If `lambda_r(H(t*))` is repeated, the eigenbasis is not unique and is
//!   rotated within the repeated eigenspace by [`degenerate_repair`].

mod brent;
mod repair;

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use brent::{brent_maximize, BrentResult};
pub use repair::{degenerate_block, degenerate_repair, DegenerateBlock, RepairRecord};

use crate::error::{FpcaError, Result};
use crate::fairloss::{self, LossOperator, Pencil};
use crate::linalg::{self, EigPairs, EigSettings, SymOperator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigOptConfig {
    /// Absolute tolerance on `t*` for Brent's method.
    pub tol_t: f64,
    pub eig: EigSettings,
    /// Relative eigengap `(lambda_{r+1} - lambda_r) / ||H||` below which
    /// `lambda_r` counts as repeated.
    pub gap_tol: f64,
    /// Repair stops once `|g(V)| <= bisect_tol * scale`.
    pub bisect_tol: f64,
    pub max_brent_iters: usize,
    /// Target `|loss_A - loss_B| <= fairness_tol * scale` of the polishing
    /// stage.
    pub fairness_tol: f64,
    pub max_polish_iters: usize,
}

impl Default for EigOptConfig {
    fn default() -> Self {
        Self {
            tol_t: 1e-8,
            eig: EigSettings::default(),
            gap_tol: 1e-10,
            bisect_tol: 1e-10,
            max_brent_iters: 200,
            fairness_tol: 1e-12,
            max_polish_iters: 100,
        }
    }
}

impl EigOptConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_t", self.tol_t),
            ("gap_tol", self.gap_tol),
            ("bisect_tol", self.bisect_tol),
            ("fairness_tol", self.fairness_tol),
            ("eig.tol", self.eig.tol),
        ];
        for (name, v) in positive {
            if v.is_nan() || v <= 0.0 {
                return Err(FpcaError::arg(format!("{name} must be positive, got {v}")));
            }
        }
        if self.tol_t >= 1.0 {
            return Err(FpcaError::arg(format!("tol_t must be below 1, got {}", self.tol_t)));
        }
        if self.max_brent_iters == 0 {
            return Err(FpcaError::arg("max_brent_iters must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub svd_seconds: f64,
    pub brent_seconds: f64,
    pub polish_seconds: f64,
    pub final_eig_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub brent_evaluations: usize,
    pub brent_iterations: usize,
    pub brent_converged: bool,
    pub brent_t: f64,
    pub endpoint_evaluations: usize,
    pub polish_evaluations: usize,
    /// `lambda_{r+1} - lambda_r` of `H(t*)`, when `r < n`.
    pub eigen_gap: Option<f64>,
    /// Reference scale `max(||H_A||, ||H_B||)` for the tolerances.
    pub scale: f64,
    /// `phi` vanished on the whole interval; `t* = 1/2` was used.
    pub flat: bool,
    #[serde(skip)]
    pub timings: StageTimings,
}

impl SolveDiagnostics {
    pub fn total_evaluations(&self) -> usize {
        self.brent_evaluations + self.endpoint_evaluations + self.polish_evaluations
    }
}

#[derive(Clone, Debug)]
pub struct EigOptSolution {
    pub t_star: f64,
    pub u_star: DMatrix<f64>,
    /// `(Tr(U*^T H_A U*), Tr(U*^T H_B U*))`.
    pub y_star: [f64; 2],
    pub phi_star: f64,
    pub degenerate: bool,
    pub repair: Option<RepairRecord>,
    pub diagnostics: SolveDiagnostics,
}

impl EigOptSolution {
    pub fn fairness_residual(&self) -> f64 {
        (self.y_star[0] - self.y_star[1]).abs()
    }
}

/// `phi(t)`, the sum of the `r` smallest eigenvalues of `t*L + (1-t)*R`.
#[derive(Clone, Copy)]
pub struct Phi<'a> {
    left: &'a dyn SymOperator,
    right: &'a dyn SymOperator,
    r: usize,
    settings: &'a EigSettings,
}

/// Eigen-information of `H(t)` at one parameter value.
#[derive(Clone, Debug)]
pub struct PhiPoint {
    pub t: f64,
    pub phi: f64,
    /// At least `r` (and `r + 1` when `r < n`) smallest pairs.
    pub pairs: EigPairs,
    pub y: [f64; 2],
}

impl PhiPoint {
    /// `y_A - y_B`, the derivative of `phi` along the chosen eigenbasis.
    pub fn gap(&self) -> f64 {
        self.y[0] - self.y[1]
    }
}

impl<'a> Phi<'a> {
    pub fn new(left: &'a dyn SymOperator, right: &'a dyn SymOperator, r: usize, settings: &'a EigSettings) -> Result<Self> {
        if left.dim() != right.dim() {
            return Err(FpcaError::arg("pencil operators have different dimensions"));
        }
        if r == 0 || r > left.dim() {
            return Err(FpcaError::arg(format!("rank {r} out of range for n = {}", left.dim())));
        }
        Ok(Self { left, right, r, settings })
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn pencil(&self, t: f64) -> Result<Pencil<'a>> {
        Pencil::new(self.left, self.right, t)
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let h = self.pencil(t)?;
        Ok(linalg::sym_eigvals_smallest(&h, self.r, self.settings)?.iter().sum())
    }

    /// The `k` smallest eigenpairs of `H(t)`.
    pub fn eigenpairs(&self, t: f64, k: usize) -> Result<EigPairs> {
        linalg::sym_eigs_smallest(&self.pencil(t)?, k, self.settings)
    }

    pub fn point(&self, t: f64) -> Result<PhiPoint> {
        let n = self.left.dim();
        let pairs = self.eigenpairs(t, (self.r + 1).min(n))?;
        let u = pairs.vectors.columns(0, self.r).into_owned();
        let y = [linalg::trace_form(self.left, &u), linalg::trace_form(self.right, &u)];
        let phi = pairs.values.rows(0, self.r).sum();
        Ok(PhiPoint { t, phi, pairs, y })
    }

    /// `phi` on `points` equispaced values of `[0, 1]`, evaluated in parallel.
    pub fn profile(&self, points: usize) -> Result<Vec<(f64, f64)>> {
        if points < 2 {
            return Err(FpcaError::arg("profile needs at least 2 points"));
        }
        let last = (points - 1) as f64;
        (0..points)
            .into_par_iter()
            .map(|i| {
                let t = i as f64 / last;
                self.value(t).map(|v| (t, v))
            })
            .collect()
    }
}

/// Fair PCA of groups `a` and `b` with `r` components.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>, r: usize, cfg: &EigOptConfig) -> Result<EigOptSolution> {
    check_groups(a, b, r)?;
    let start = Instant::now();
    let la = LossOperator::build(a, r, false, &cfg.eig)?;
    let lb = LossOperator::build(b, r, false, &cfg.eig)?;
    let svd_seconds = start.elapsed().as_secs_f64();
    let mut sol = solve_losses(&la, &lb, cfg)?;
    sol.diagnostics.timings.svd_seconds = svd_seconds;
    Ok(sol)
}

fn check_groups(a: &DMatrix<f64>, b: &DMatrix<f64>, r: usize) -> Result<()> {
    if a.ncols() != b.ncols() {
        return Err(FpcaError::arg(format!(
            "groups have {} and {} features",
            a.ncols(),
            b.ncols()
        )));
    }
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(FpcaError::arg("both groups need at least one row"));
    }
    let n = a.ncols();
    if r == 0 || r >= n {
        return Err(FpcaError::arg(format!("rank must satisfy 1 <= r < n = {n}, got {r}")));
    }
    if r > a.nrows().min(b.nrows()) {
        return Err(FpcaError::arg(format!(
            "rank {r} exceeds a group size ({} / {})",
            a.nrows(),
            b.nrows()
        )));
    }
    Ok(())
}

/// [`solve`] on prebuilt loss operators. Reported losses are clamped at zero
/// within round-off.
pub fn solve_losses(la: &LossOperator, lb: &LossOperator, cfg: &EigOptConfig) -> Result<EigOptSolution> {
    if la.rank() != lb.rank() {
        return Err(FpcaError::arg("loss operators built for different ranks"));
    }
    let mut sol = solve_pencil(la, lb, la.rank(), cfg)?;
    sol.y_star = [fairloss::loss(la, &sol.u_star)?, fairloss::loss(lb, &sol.u_star)?];
    Ok(sol)
}

/// EigOpt on an arbitrary symmetric pencil `t*left + (1-t)*right`.
pub fn solve_pencil(
    left: &dyn SymOperator,
    right: &dyn SymOperator,
    r: usize,
    cfg: &EigOptConfig,
) -> Result<EigOptSolution> {
    cfg.validate()?;
    let n = left.dim();
    if r == 0 || r >= n {
        return Err(FpcaError::arg(format!("rank must satisfy 1 <= r < n = {n}, got {r}")));
    }
    let phi = Phi::new(left, right, r, &cfg.eig)?;
    let scale = left.norm_bound().max(right.norm_bound());
    let mut timings = StageTimings::default();

    let clock = Instant::now();
    let phi0 = phi.value(0.0)?;
    let phi1 = phi.value(1.0)?;
    let brent = brent_maximize(|t| phi.value(t), 0.0, 1.0, cfg.tol_t, cfg.max_brent_iters)?;
    timings.brent_seconds = clock.elapsed().as_secs_f64();

    let flat_tol = 1e-12 * scale;
    let flat = (brent.fx - phi0).abs() <= flat_tol && (brent.fx - phi1).abs() <= flat_tol;

    let clock = Instant::now();
    let mut polish_evaluations = 0;
    let point = if flat {
        phi.point(0.5)?
    } else if phi0 > brent.fx || phi1 > brent.fx {
        phi.point(if phi0 >= phi1 { 0.0 } else { 1.0 })?
    } else {
        polish(&phi, brent.x, cfg, scale, &mut polish_evaluations)?
    };
    timings.polish_seconds = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let t_star = point.t;
    let gap_abs = cfg.gap_tol * scale;
    let mut pairs = point.pairs;
    let eigen_gap = (pairs.len() > r).then(|| pairs.values[r] - pairs.values[r - 1]);

    let (u_star, degenerate, repair) = match degenerate_block(pairs.values.as_slice(), r, n, gap_abs) {
        Some(mut block) if block.q >= 2 => {
            // Widen until the repeated block is fully captured.
            while !block.complete {
                let k = (pairs.len() * 2).min(n);
                pairs = phi.eigenpairs(t_star, k)?;
                block = degenerate_block(pairs.values.as_slice(), r, n, gap_abs)
                    .ok_or_else(|| FpcaError::Inconsistent("repeated block vanished on recomputation".into()))?;
            }
            let (u, record) = degenerate_repair(&pairs, left, right, r, cfg)?;
            (u, true, Some(record))
        }
        _ => (pairs.vectors.columns(0, r).into_owned(), false, None),
    };
    timings.final_eig_seconds = clock.elapsed().as_secs_f64();

    let phi_star = pairs.values.rows(0, r).sum();
    let y_star = [linalg::trace_form(left, &u_star), linalg::trace_form(right, &u_star)];

    Ok(EigOptSolution {
        t_star,
        u_star,
        y_star,
        phi_star,
        degenerate,
        repair,
        diagnostics: SolveDiagnostics {
            brent_evaluations: brent.evaluations,
            brent_iterations: brent.iterations,
            brent_converged: brent.converged,
            brent_t: brent.x,
            endpoint_evaluations: 2,
            polish_evaluations,
            eigen_gap,
            scale,
            flat,
            timings,
        },
    })
}

/// Narrows the sign change of `y_A(t) - y_B(t)` around `t0`.
///
/// The gap is non-increasing in `t` because it is a supergradient of the
/// concave `phi`. Returns the evaluated point with the smallest gap, or an
/// end of the final bracket.
fn polish(phi: &Phi<'_>, t0: f64, cfg: &EigOptConfig, scale: f64, evals: &mut usize) -> Result<PhiPoint> {
    let target = cfg.fairness_tol * scale;
    let mut eval = |t: f64| -> Result<PhiPoint> {
        *evals += 1;
        phi.point(t)
    };
    let start = eval(t0)?;
    if start.gap().abs() <= target {
        return Ok(start);
    }
    let mut best = start.clone();
    let keep_best = |best: &mut PhiPoint, cand: &PhiPoint| {
        if cand.gap().abs() < best.gap().abs() {
            *best = cand.clone();
        }
    };

    // Bracket: root lies right of t0 when the gap is positive.
    let dir = if start.gap() > 0.0 { 1.0 } else { -1.0 };
    let mut inner = start;
    let mut step = 4.0 * cfg.tol_t;
    let outer = loop {
        let t = (inner.t + dir * step).clamp(0.0, 1.0);
        let cand = eval(t)?;
        keep_best(&mut best, &cand);
        if cand.gap().abs() <= target {
            return Ok(cand);
        }
        if cand.gap() * dir < 0.0 {
            break cand;
        }
        if t == 0.0 || t == 1.0 {
            return Ok(best);
        }
        inner = cand;
        step *= 4.0;
    };
    let (mut lo, mut hi) = if dir > 0.0 { (inner, outer) } else { (outer, inner) };

    // Illinois regula falsi on [lo, hi] with gap(lo) > 0 > gap(hi).
    let (mut glo, mut ghi) = (lo.gap(), hi.gap());
    let mut side = 0i8;
    for _ in 0..cfg.max_polish_iters {
        if hi.t - lo.t <= 4.0 * f64::EPSILON * hi.t.abs().max(1.0) {
            break;
        }
        let mut t = (lo.t * ghi - hi.t * glo) / (ghi - glo);
        if !(t > lo.t && t < hi.t) {
            t = 0.5 * (lo.t + hi.t);
        }
        let cand = eval(t)?;
        keep_best(&mut best, &cand);
        let g = cand.gap();
        if g.abs() <= target {
            return Ok(cand);
        }
        if g > 0.0 {
            glo = g;
            lo = cand;
            if side == 1 {
                ghi *= 0.5;
            }
            side = 1;
        } else {
            ghi = g;
            hi = cand;
            if side == -1 {
                glo *= 0.5;
            }
            side = -1;
        }
    }
    // At a jump of the gap every point on one side has the same |gap|, so
    // the tightened bracket end is preferred over earlier ties.
    let end = if lo.gap().abs() <= hi.gap().abs() { lo } else { hi };
    Ok(if end.gap().abs() <= best.gap().abs() { end } else { best })
}
