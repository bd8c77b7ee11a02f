use crate::error::{FpcaError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BrentResult {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Maximizes `f` on `[lo, hi]` with Brent's method (golden-section search
/// safeguarding successive parabolic interpolation), run as minimization of
/// `-f`. `tol` is an absolute tolerance on the abscissa.
///
/// When `max_iters` is exhausted the best point so far is returned with
/// `converged == false`.
pub fn brent_maximize<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iters: usize) -> Result<BrentResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(FpcaError::arg(format!("invalid bracket [{lo}, {hi}]")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(FpcaError::arg(format!("tolerance must be positive, got {tol}")));
    }
    const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 - sqrt 5) / 2
    let rel = 2.0 * f64::EPSILON;
    let mut neg = |x: f64| -> Result<f64> {
        let v = f(x)?;
        if !v.is_finite() {
            return Err(FpcaError::arg(format!("objective is not finite at {x}")));
        }
        Ok(-v)
    };

    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = neg(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let mut evaluations = 1;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for iter in 0..max_iters {
        let xm = 0.5 * (a + b);
        let tol1 = rel * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return Ok(BrentResult {
                x,
                fx: -fx,
                iterations: iter,
                evaluations,
                converged: true,
            });
        }

        let mut golden = true;
        if e.abs() > tol1 {
            // Parabola through (v, fv), (w, fw), (x, fx).
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = neg(u)?;
        evaluations += 1;

        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }

    Ok(BrentResult {
        x,
        fx: -fx,
        iterations: max_iters,
        evaluations,
        converged: false,
    })
}
