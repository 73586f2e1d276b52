//! Bracketed scalar root finders.
//!
//! Every solver keeps a sign-changing bracket, so it cannot wander off the
//! interval it was handed. Newton steps are used when they land inside the
//! bracket and shrink the residual fast enough; otherwise the step falls back
//! to bisection.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Absolute bracket width at which iteration stops.
    pub x_tol: f64,
    /// Residual magnitude at which iteration stops.
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            x_tol: 1e-15,
            f_tol: 0.0,
            max_iter: 200,
        }
    }
}

fn check_bracket(what: &'static str, lo: f64, hi: f64, flo: f64, fhi: f64) -> Result<()> {
    if flo.is_nan() || fhi.is_nan() || flo * fhi > 0.0 {
        return Err(Error::Bracket { what, lo, hi });
    }
    Ok(())
}

/// Plain bisection on `[lo, hi]`. Returns the midpoint of the final bracket.
pub fn bisect<F>(what: &'static str, mut f: F, lo: f64, hi: f64, opts: RootOptions) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    check_bracket(what, lo, hi, fa, fb)?;
    let neg_at_a = fa < 0.0;
    for _ in 0..opts.max_iter {
        let m = 0.5 * (a + b);
        if m <= a || m >= b || (b - a) <= opts.x_tol {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 || fm.abs() <= opts.f_tol {
            return Ok(m);
        }
        if (fm < 0.0) == neg_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Newton's method safeguarded by a maintained bracket.
///
/// `f` returns the value and derivative. `guess` seeds the first step and is
/// clamped into the bracket.
pub fn newton_bracketed<F>(
    what: &'static str,
    f: F,
    lo: f64,
    hi: f64,
    guess: Option<f64>,
    opts: RootOptions,
) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    newton_with_status(what, f, lo, hi, guess, opts).map(|(x, _)| x)
}

/// As [`newton_bracketed`], also reporting whether a stopping test fired
/// before `max_iter` was exhausted.
pub fn newton_with_status<F>(
    what: &'static str,
    mut f: F,
    lo: f64,
    hi: f64,
    guess: Option<f64>,
    opts: RootOptions,
) -> Result<(f64, bool)>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut a, mut b) = (lo, hi);
    let (fa, _) = f(a);
    if fa == 0.0 {
        return Ok((a, true));
    }
    let (fb, _) = f(b);
    if fb == 0.0 {
        return Ok((b, true));
    }
    check_bracket(what, lo, hi, fa, fb)?;
    let neg_at_a = fa < 0.0;

    let mut x = match guess {
        Some(g) if g > a && g < b => g,
        _ => 0.5 * (a + b),
    };
    let mut prev_abs = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let (fx, dfx) = f(x);
        if fx == 0.0 || fx.abs() <= opts.f_tol {
            return Ok((x, true));
        }
        if (fx < 0.0) == neg_at_a {
            a = x;
        } else {
            b = x;
        }
        if b - a <= opts.x_tol {
            return Ok((0.5 * (a + b), true));
        }
        let newton = x - fx / dfx;
        if newton.is_finite() && (newton - x).abs() <= 0.5 * opts.x_tol && newton > a && newton < b
        {
            return Ok((newton, true));
        }
        let fast = fx.abs() <= 0.5 * prev_abs;
        prev_abs = fx.abs();
        x = if newton.is_finite() && newton > a && newton < b && fast {
            newton
        } else {
            0.5 * (a + b)
        };
        if x <= a || x >= b {
            return Ok((0.5 * (a + b), true));
        }
    }
    Ok((x, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect("sqrt2", |x| x * x - 2.0, 0.0, 2.0, RootOptions::default()).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn newton_finds_cube_root() {
        let r = newton_bracketed(
            "cbrt",
            |x| (x * x * x - 5.0, 3.0 * x * x),
            0.0,
            5.0,
            None,
            RootOptions::default(),
        )
        .unwrap();
        assert!((r - 5f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn newton_survives_bad_derivative() {
        // A derivative that is wrong by a constant factor still converges via the bracket.
        let r = newton_bracketed(
            "bad",
            |x| (x.exp() - 3.0, 100.0),
            -5.0,
            5.0,
            Some(4.0),
            RootOptions::default(),
        )
        .unwrap();
        assert!((r - 3f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn missing_sign_change_is_reported() {
        let e = bisect("none", |x| x * x + 1.0, -1.0, 1.0, RootOptions::default());
        assert!(matches!(e, Err(Error::Bracket { .. })));
    }
}
