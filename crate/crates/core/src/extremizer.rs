//! Finite pairs whose `Psi` approaches `B(-1, y3)` as `eps -> 0`.
//!
//! In the first case the pair is self-similar: one level puts mass `eps` on
//! each of two constant pieces and rescales the whole construction onto the
//! remaining `1 - 2 eps`. In the second case each step splits off the constant
//! pair of the last cup chord's right end and reflects the rest.

use serde::Serialize;

use crate::constant::Case;
use crate::error::{Error, Result};
use crate::martingale::{MartingalePair, PairBuilder, PsiStats};
use crate::params::ProblemParams;
use crate::roots::{RootOptions, bisect};
use crate::surface::{Surface, h_of_s};

/// Cap on levels or steps of a single construction.
pub const MAX_STEPS: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremizerKind {
    Vertical,
    Iterative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremizerReport {
    pub kind: ExtremizerKind,
    pub p: f64,
    pub tau: f64,
    pub y3: f64,
    pub eps: f64,
    /// Recursion levels or iteration steps.
    pub steps: usize,
    pub nodes: usize,
    pub moments: PsiStats,
    /// `B(-1, y3)`.
    pub bellman: f64,
    /// `(B - Psi) / B`.
    pub rel_gap: f64,
}

/// Limit `eps -> 0` of the vertical construction's parameter: the root of
/// `y3 = 2 (2 - w)^p / (2 - p w)` on `[0, 2/p)`.
pub fn vertical_w0(params: &ProblemParams, y3: f64) -> Result<f64> {
    let p = params.p();
    let lo_val = 2f64.powf(p);
    if !(y3 >= lo_val) || !y3.is_finite() {
        return Err(Error::NoSolution(format!("y3 = {y3} below 2^p")));
    }
    let f = |w: f64| 2.0 * (2.0 - w).powf(p) / (2.0 - p * w) - y3;
    bisect(
        "vertical w0",
        f,
        0.0,
        (2.0 / p) * (1.0 - 1e-15),
        RootOptions::default(),
    )
    .map_err(|_| Error::NoSolution(format!("no w0 for y3 = {y3}")))
}

fn vertical_level(p: f64, eps: f64, w: f64) -> (f64, f64, f64, f64) {
    let gamma = 1.0 + eps * w / (1.0 - eps);
    let dm = 2.0 - w;
    let dp = 2.0 * gamma - w;
    let rho = (1.0 - 2.0 * eps) * gamma.powf(p);
    (gamma, dm, dp, rho)
}

/// Self-similar pair with `EF = 2`, `EG = 0`, `E|F|^p = y3` in the first case.
pub fn vertical_extremizer(
    surface: &Surface,
    y3: f64,
    eps: f64,
) -> Result<(MartingalePair, usize)> {
    let params = surface.params();
    let p = params.p();
    if surface.case() != Case::I {
        return Err(Error::CaseMismatch {
            expected: "CaseI",
            actual: "CaseII",
        });
    }
    if !(eps > 0.0 && eps <= 0.1) {
        return Err(Error::Domain(format!("eps = {eps} outside (0, 0.1]")));
    }
    let s0 = surface.s0();
    let h0 = if s0 <= -1.0 {
        2f64.powf(p)
    } else {
        h_of_s(params, s0)?
    };
    if !(y3 >= h0 * (1.0 - 1e-12)) || !y3.is_finite() {
        return Err(Error::Domain(format!(
            "y3 = {y3} below the fan start h(s0) = {h0}"
        )));
    }

    // Largest w with a positive denominator and a nonnegative left piece.
    let w_pole = ((1.0 - 2.0 * eps).powf(-1.0 / p) - 1.0) * (1.0 - eps) / eps;
    let w_max = w_pole.min(2.0) * (1.0 - 1e-12);
    let level_y3 = |w: f64| {
        let (_, dm, dp, rho) = vertical_level(p, eps, w);
        eps * (dp.powf(p) + dm.abs().powf(p)) / (1.0 - rho)
    };
    if level_y3(w_max) < y3 {
        return Err(Error::NoSolution(format!(
            "vertical construction cannot reach y3 = {y3} at eps = {eps}"
        )));
    }
    let w = bisect(
        "vertical w",
        |w| level_y3(w) - y3,
        0.0,
        w_max,
        RootOptions::default(),
    )
    .map_err(|_| Error::NoSolution(format!("no level parameter for y3 = {y3}")))?;
    let (gamma, dm, dp, rho) = vertical_level(p, eps, w);

    let target = eps * eps;
    let levels = if rho <= 0.0 {
        1
    } else {
        ((target.ln() / rho.ln()).ceil() as usize).max(1)
    };
    if levels > MAX_STEPS {
        return Err(Error::NoSolution(format!(
            "{levels} levels needed at eps = {eps}"
        )));
    }

    let mut b = PairBuilder::new();
    // The truncated tail is a symmetric split with the same mean and p-th moment.
    let d = surrogate_spread(p, y3)?;
    let l = b.leaf(2.0 - d, -d);
    let r = b.leaf(2.0 + d, d);
    let mut node = b.split(0.5, l, r);
    let alpha_inner = (1.0 - 2.0 * eps) / (1.0 - eps);
    for _ in 0..levels {
        let sc = b.scale(gamma, false, node);
        let plus = b.leaf(dp, w);
        let x = b.split(alpha_inner, sc, plus);
        let minus = b.leaf(dm, -w);
        node = b.split(eps, minus, x);
    }
    Ok((b.finish(node), levels))
}

/// `d >= 0` with `(|2 - d|^p + (2 + d)^p) / 2 = y3`.
fn surrogate_spread(p: f64, y3: f64) -> Result<f64> {
    let phi = |d: f64| 0.5 * ((2.0 - d).abs().powf(p) + (2.0 + d).powf(p)) - y3;
    if phi(0.0) >= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 2.0;
    while phi(hi) < 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NoSolution(format!("no spread for y3 = {y3}")));
        }
    }
    bisect("surrogate spread", phi, 0.0, hi, RootOptions::default())
}

/// `(f(-1) + 2 f(s0)/d0) / (g(-1) + 2 g(s0)/d0)` with `d0 = p + p s0 - 2`.
pub fn iterative_limit_slope(params: &ProblemParams, s0: f64) -> f64 {
    let p = params.p();
    let d0 = p + p * s0 - 2.0;
    let f = |s: f64| ((1.0 + s).powi(2) + params.tau2() * (1.0 - s).powi(2)).powf(0.5 * p);
    let g = |s: f64| (1.0 - s).powf(p);
    (f(-1.0) + 2.0 * f(s0) / d0) / (g(-1.0) + 2.0 * g(s0) / d0)
}

/// Iterated splitting in the second case: returns the pair and the number of steps.
pub fn iterative_extremizer(
    surface: &Surface,
    y3: f64,
    eps: f64,
) -> Result<(MartingalePair, usize)> {
    match iterative_once(surface, y3, eps) {
        Err(Error::StepTooLarge { .. }) => iterative_once(surface, y3, 0.5 * eps),
        other => other,
    }
}

fn iterative_once(surface: &Surface, y3: f64, eps: f64) -> Result<(MartingalePair, usize)> {
    let params = surface.params();
    let p = params.p();
    if surface.case() != Case::II {
        return Err(Error::CaseMismatch {
            expected: "CaseII",
            actual: "CaseI",
        });
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Domain(format!("eps = {eps} outside (0, 0.5)")));
    }
    let bottom = 2f64.powf(p);
    if !(y3 > bottom) || !y3.is_finite() {
        return Err(Error::Domain(format!(
            "y3 = {y3} must exceed g(-1) = {bottom}"
        )));
    }
    let s0 = surface.s0();
    let g0 = surface.curves().g(s0);
    let step = |y: f64, e: f64| -> Result<f64> {
        let delta = e / (1.0 + e * s0);
        let w3 = (y - e * g0) * (1.0 - e).powf(p - 1.0) / (1.0 + e * s0).powf(p);
        let f_in = delta * (1.0 - s0) + 2.0 * (1.0 - delta);
        if w3 < f_in.powf(p) {
            return Err(Error::StepTooLarge { eps: e });
        }
        Ok((w3 - delta * g0) / (1.0 - delta))
    };

    let mut steps_eps = Vec::new();
    let mut y = y3;
    loop {
        let next = step(y, eps)?;
        if next >= y {
            return Err(Error::StepTooLarge { eps });
        }
        if next > bottom {
            steps_eps.push(eps);
            y = next;
        } else {
            // Shorten the last step so that it lands exactly on the corner.
            let yc = y;
            let e = bisect(
                "last step",
                |e| step(yc, e).map(|v| v - bottom).unwrap_or(f64::NAN),
                1e-300,
                eps,
                RootOptions {
                    x_tol: 0.0,
                    f_tol: 0.0,
                    max_iter: 2000,
                },
            )?;
            steps_eps.push(e);
            break;
        }
        if steps_eps.len() > MAX_STEPS {
            return Err(Error::NoSolution(format!(
                "more than {MAX_STEPS} steps at eps = {eps}"
            )));
        }
    }

    let mut b = PairBuilder::new();
    let mut node = b.leaf(2.0, 0.0);
    for &e in steps_eps.iter().rev() {
        let delta = e / (1.0 + e * s0);
        let lambda = (1.0 + e * s0) / (1.0 - e);
        let c_in = b.leaf(1.0 - s0, 1.0 + s0);
        let inner = b.split(delta, c_in, node);
        let sc = b.scale(lambda, true, inner);
        let c_out = b.leaf(1.0 - s0, 1.0 + s0);
        node = b.split(e, c_out, sc);
    }
    Ok((b.finish(node), steps_eps.len()))
}

/// Builds the construction that fits the case and compares it with `B(-1, y3)`.
pub fn certify(surface: &Surface, y3: f64, eps: f64) -> Result<(MartingalePair, ExtremizerReport)> {
    let (pair, steps, kind) = match surface.case() {
        Case::I => {
            let (pair, n) = vertical_extremizer(surface, y3, eps)?;
            (pair, n, ExtremizerKind::Vertical)
        }
        Case::II => {
            let (pair, n) = iterative_extremizer(surface, y3, eps)?;
            (pair, n, ExtremizerKind::Iterative)
        }
    };
    let params = surface.params();
    let moments = pair.psi(params);
    let bellman = surface.b(-1.0, y3)?;
    let report = ExtremizerReport {
        kind,
        p: params.p(),
        tau: params.tau(),
        y3,
        eps,
        steps,
        nodes: pair.len(),
        moments,
        bellman,
        rel_gap: (bellman - moments.psi) / bellman,
    };
    Ok((pair, report))
}
