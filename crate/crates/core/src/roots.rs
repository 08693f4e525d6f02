//! Derivative-free root finding: coarse sign-change scan plus Brent's method.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError<E> {
    #[error("f(a) and f(b) have the same sign")]
    NotBracketed,
    #[error("no convergence after {0} iterations")]
    MaxIterations(usize),
    #[error(transparent)]
    Function(E),
}

/// Brent's method on a bracket `[a, b]` with `f(a)·f(b) ≤ 0`.
///
/// Terminates when the bracket is narrower than `2·(4·ε·|x| + xtol)` or an
/// exact zero is hit.
pub fn brent<E, F>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Result<f64, RootError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a).map_err(RootError::Function)?;
    let mut fb = f(b).map_err(RootError::Function)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NotBracketed);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;

    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, or secant when a == c
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * m * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b).map_err(RootError::Function)?;
    }
    Err(RootError::MaxIterations(max_iter))
}

/// Samples `f` at `points` evenly spaced abscissae over `[lo, hi]` and returns
/// every sub-interval on which the sign changes. An exact zero at a sample
/// is reported as the degenerate bracket `(x, x)`.
pub fn scan_sign_changes<E, F>(mut f: F, lo: f64, hi: f64, points: usize) -> Result<Vec<(f64, f64)>, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    assert!(points >= 2, "scan needs at least two points");
    let step = (hi - lo) / (points - 1) as f64;
    let x_at = |k: usize| if k == points - 1 { hi } else { lo + step * k as f64 };
    let mut out = Vec::new();
    let mut prev_x = x_at(0);
    let mut prev_f = f(prev_x)?;
    if prev_f == 0.0 {
        out.push((prev_x, prev_x));
    }
    for k in 1..points {
        let x = x_at(k);
        let fx = f(x)?;
        if fx == 0.0 {
            out.push((x, x));
        } else if prev_f != 0.0 && prev_f.signum() != fx.signum() {
            out.push((prev_x, x));
        }
        prev_x = x;
        prev_f = fx;
    }
    Ok(out)
}
