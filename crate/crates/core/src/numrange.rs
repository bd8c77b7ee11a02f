//! Sampling of the joint numerical range
//! `W_r(S, T) = { (Tr(U^T S U), Tr(U^T T U)) : U^T U = I_r }`.
//!
//! The support point in direction `(cos θ, sin θ)` comes from the top-`r`
//! eigenspace of `cos θ S + sin θ T`. The convex hull of the support points
//! for `ℓ` equispaced angles is an inner approximation of the range.

use std::cmp::Ordering;
use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FpcaError, Result};
use crate::linalg::{self, EigSettings, LinearCombination, SymOperator};

/// Hull construction tolerance, relative to the polygon scale.
pub const HULL_TOL: f64 = 1e-12;

/// Relative eigengap below which a support point is flagged as set-valued.
pub const FLAT_GAP_TOL: f64 = 1e-10;

pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeSample {
    pub theta: f64,
    pub y: Point,
    /// The `r`-th and `(r+1)`-th eigenvalues of `B(θ)` coincide, so the
    /// support set in this direction is a segment and `y` is one of its points.
    pub set_valued: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangePolygon {
    pub samples: Vec<RangeSample>,
    /// Counter-clockwise hull vertices.
    pub hull: Vec<Point>,
    /// Index into `samples` of each hull vertex.
    pub hull_indices: Vec<usize>,
    /// Reference magnitude for tolerances (largest absolute coordinate).
    pub scale: f64,
}

impl RangePolygon {
    pub fn from_samples(samples: Vec<RangeSample>) -> Self {
        let points: Vec<Point> = samples.iter().map(|s| s.y).collect();
        let scale = points
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let hull_indices = convex_hull(&points, HULL_TOL * scale);
        let hull = hull_indices.iter().map(|&i| points[i]).collect();
        Self {
            samples,
            hull,
            hull_indices,
            scale,
        }
    }

    /// Point or segment hulls.
    pub fn is_degenerate(&self) -> bool {
        self.hull.len() < 3
    }

    pub fn on_hull(&self, sample: usize) -> bool {
        self.hull_indices.contains(&sample)
    }

    pub fn area(&self) -> f64 {
        let n = self.hull.len();
        if n < 3 {
            return 0.0;
        }
        let twice: f64 = (0..n)
            .map(|i| {
                let (a, b) = (self.hull[i], self.hull[(i + 1) % n]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum();
        0.5 * twice
    }

    /// Distance from `p` to the hull, negated when `p` is strictly inside.
    pub fn signed_distance(&self, p: Point) -> f64 {
        match self.hull.len() {
            0 => f64::INFINITY,
            1 => dist(p, self.hull[0]),
            2 => segment_distance(p, self.hull[0], self.hull[1]),
            n => {
                let mut inside = true;
                let mut best = f64::INFINITY;
                for i in 0..n {
                    let (a, b) = (self.hull[i], self.hull[(i + 1) % n]);
                    let len = dist(a, b);
                    if len > 0.0 && cross(a, b, p) / len < 0.0 {
                        inside = false;
                    }
                    best = best.min(segment_distance(p, a, b));
                }
                if inside {
                    -best
                } else {
                    best
                }
            }
        }
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.signed_distance(p) <= tol
    }
}

/// Support point of `W_r(S, T)` in direction `θ`, with the basis attaining it.
pub fn boundary_point(
    s: &dyn SymOperator,
    t: &dyn SymOperator,
    r: usize,
    theta: f64,
    settings: &EigSettings,
) -> Result<(RangeSample, DMatrix<f64>)> {
    let n = s.dim();
    if t.dim() != n {
        return Err(FpcaError::arg("operators have different dimensions"));
    }
    if r == 0 || r > n {
        return Err(FpcaError::arg(format!("rank {r} out of range for n = {n}")));
    }
    let b = LinearCombination::new(vec![(theta.cos(), s), (theta.sin(), t)]);
    let k = (r + 1).min(n);
    let pairs = linalg::sym_eigs_largest(&b, k, settings)?;
    let u = pairs.vectors.columns(0, r).into_owned();
    let set_valued = k > r && pairs.values[r - 1] - pairs.values[r] <= FLAT_GAP_TOL * b.norm_bound();
    let y = [linalg::trace_form(s, &u), linalg::trace_form(t, &u)];
    Ok((RangeSample { theta, y, set_valued }, u))
}

/// Support points at `θ_j = 2πj/ℓ`, `j = 1..=ℓ`, and their convex hull.
pub fn sample_range(
    s: &dyn SymOperator,
    t: &dyn SymOperator,
    r: usize,
    samples: usize,
    settings: &EigSettings,
) -> Result<RangePolygon> {
    if samples < 3 {
        return Err(FpcaError::arg(format!("need at least 3 search angles, got {samples}")));
    }
    let step = TAU / samples as f64;
    let points = (1..=samples)
        .into_par_iter()
        .map(|j| boundary_point(s, t, r, j as f64 * step, settings).map(|(p, _)| p))
        .collect::<Result<Vec<_>>>()?;
    Ok(RangePolygon::from_samples(points))
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let s = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + s * d[0], a[1] + s * d[1]])
}

/// Andrew's monotone chain. Points within `tol` of each other are merged and
/// vertices within `tol` of the line through their neighbours are dropped.
/// Returns indices of the hull vertices in counter-clockwise order.
pub fn convex_hull(points: &[Point], tol: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (points[i], points[j]);
        a[0].partial_cmp(&b[0])
            .unwrap_or(Ordering::Equal)
            .then(a[1].partial_cmp(&b[1]).unwrap_or(Ordering::Equal))
    });

    let mut unique: Vec<usize> = Vec::with_capacity(order.len());
    for &i in &order {
        let p = points[i];
        let duplicate = unique
            .iter()
            .rev()
            .take_while(|&&k| p[0] - points[k][0] <= tol)
            .any(|&k| (points[k][1] - p[1]).abs() <= tol);
        if !duplicate {
            unique.push(i);
        }
    }
    if unique.len() <= 2 {
        return unique;
    }

    let turns_left = |o: usize, a: usize, b: usize| {
        let len = dist(points[o], points[b]);
        cross(points[o], points[a], points[b]) > tol * len
    };
    let mut hull: Vec<usize> = Vec::with_capacity(2 * unique.len());
    for &i in &unique {
        while hull.len() >= 2 && !turns_left(hull[hull.len() - 2], hull[hull.len() - 1], i) {
            hull.pop();
        }
        hull.push(i);
    }
    let lower_len = hull.len() + 1;
    for &i in unique.iter().rev().skip(1) {
        while hull.len() >= lower_len && !turns_left(hull[hull.len() - 2], hull[hull.len() - 1], i) {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();
    hull
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DiagonalIntersection {
    Empty,
    Point { at: Point },
    Segment { from: Point, to: Point },
}

impl DiagonalIntersection {
    pub fn is_empty(&self) -> bool {
        matches!(self, DiagonalIntersection::Empty)
    }

    /// Distance from `p` to the intersection (infinite when empty).
    pub fn distance(&self, p: Point) -> f64 {
        match *self {
            DiagonalIntersection::Empty => f64::INFINITY,
            DiagonalIntersection::Point { at } => dist(p, at),
            DiagonalIntersection::Segment { from, to } => segment_distance(p, from, to),
        }
    }

    /// Errors when empty; fair-PCA ranges always meet the diagonal.
    pub fn require_nonempty(self) -> Result<Self> {
        if self.is_empty() {
            Err(FpcaError::Inconsistent(
                "numerical range hull does not meet the diagonal y1 = y2".into(),
            ))
        } else {
            Ok(self)
        }
    }
}

/// Intersection of the hull with the line `y1 = y2`.
pub fn diagonal_intersection(poly: &RangePolygon) -> DiagonalIntersection {
    let tol = HULL_TOL * poly.scale;
    let h = &poly.hull;
    match h.len() {
        0 => DiagonalIntersection::Empty,
        1 => {
            if (h[0][0] - h[0][1]).abs() <= tol {
                DiagonalIntersection::Point { at: h[0] }
            } else {
                DiagonalIntersection::Empty
            }
        }
        2 => {
            let (p, q) = (h[0], h[1]);
            let (dp, dq) = (p[0] - p[1], q[0] - q[1]);
            if (dq - dp).abs() <= tol {
                return if dp.abs() <= tol {
                    DiagonalIntersection::Segment { from: p, to: q }
                } else {
                    DiagonalIntersection::Empty
                };
            }
            let s = -dp / (dq - dp);
            let slack = tol / dist(p, q);
            if s < -slack || s > 1.0 + slack {
                return DiagonalIntersection::Empty;
            }
            let s = s.clamp(0.0, 1.0);
            let x = p[0] + s * (q[0] - p[0]);
            let y = p[1] + s * (q[1] - p[1]);
            let v = 0.5 * (x + y);
            DiagonalIntersection::Point { at: [v, v] }
        }
        n => {
            // Clip the parametrized line (s, s) against every edge half-plane
            // cross(e, (s, s) - a) >= 0.
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in 0..n {
                let (a, b) = (h[i], h[(i + 1) % n]);
                let e = [b[0] - a[0], b[1] - a[1]];
                let slope = e[0] - e[1];
                let offset = e[1] * a[0] - e[0] * a[1] + tol * dist(a, b);
                if slope.abs() <= f64::EPSILON * (e[0].abs() + e[1].abs()) {
                    if offset < 0.0 {
                        return DiagonalIntersection::Empty;
                    }
                } else if slope > 0.0 {
                    lo = lo.max(-offset / slope);
                } else {
                    hi = hi.min(-offset / slope);
                }
            }
            if lo > hi {
                DiagonalIntersection::Empty
            } else if hi - lo <= tol {
                let v = 0.5 * (lo + hi);
                DiagonalIntersection::Point { at: [v, v] }
            } else {
                DiagonalIntersection::Segment {
                    from: [lo, lo],
                    to: [hi, hi],
                }
            }
        }
    }
}
