//! Bracketed scalar root finding.

use crate::error::{numerical, validation, Result};

/// Newton iteration safeguarded by bisection on a sign-changing bracket.
///
/// `f` returns the function value and its derivative. The root is accepted
/// once a step or the bracket width falls below `tol`.
pub fn safeguarded_newton<F>(f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (fa, _) = f(a);
    let (fb, _) = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(validation(format!(
            "root not bracketed on [{a}, {b}]: f(a)={fa}, f(b)={fb}"
        )));
    }
    let increasing = fb > 0.0;
    let mut x = 0.5 * (a + b);
    for _ in 0..max_iter {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == increasing {
            b = x;
        } else {
            a = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx != 0.0 && newton.is_finite() && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - x).abs() <= tol || (b - a) <= tol {
            return Ok(next);
        }
        x = next;
    }
    Err(numerical(format!(
        "root finder did not converge within {max_iter} iterations (bracket [{a}, {b}])"
    )))
}

/// Plain bisection; kept separate from the Newton path so tests can use it as
/// an independent reference.
pub fn bisection<F>(f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    if fa.signum() == f(b).signum() {
        return Err(validation("root not bracketed"));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (a + b);
        if b - a <= tol {
            return Ok(mid);
        }
        if f(mid).signum() == fa.signum() {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cube_root() {
        let r = safeguarded_newton(|x| (x * x * x - 2.0, 3.0 * x * x), 0.0, 2.0, 1e-14, 100).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn decreasing_function() {
        let r = safeguarded_newton(|x| ((-x).exp() - 0.5, -(-x).exp()), 0.0, 5.0, 1e-14, 100).unwrap();
        assert!((r - 2f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn rejects_unbracketed() {
        assert!(safeguarded_newton(|x| (x * x + 1.0, 2.0 * x), -1.0, 1.0, 1e-12, 10).is_err());
        assert!(bisection(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 10).is_err());
    }
}
