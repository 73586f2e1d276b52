//! Residual checks for an assembled surface: the Monge–Ampère equation,
//! concavity in several senses, gluing across region interfaces and the
//! Neumann conditions on the edges `y2 = -1` and `y2 = 1`.
//!
//! Every check is a maximum over sampled points of a quantity that must stay
//! below a bound. Failures are reported, not raised.

use rayon::prelude::*;
use serde::Serialize;

use crate::constant::Case;
use crate::surface::{OmegaPoint, Region, Surface};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub n_y2: usize,
    pub n_y3: usize,
    pub y3_max: f64,
    /// Points closer than this to a region interface are skipped.
    pub band: f64,
    /// Base step of the extrapolated Hessians.
    pub hessian_step: f64,
    /// Step of the second differences used for sign checks.
    pub diff_step: f64,
    /// Offset on each side of an interface for the gluing check.
    pub gluing_offset: f64,
    /// Samples along each interface and edge.
    pub line_samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            n_y2: 200,
            n_y3: 200,
            y3_max: 12.0,
            band: 1e-4,
            hessian_step: 2e-4,
            diff_step: 1e-3,
            gluing_offset: 1e-9,
            line_samples: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub det: f64,
    pub trace: f64,
    pub gluing: f64,
    pub diagonal: f64,
    pub neumann: f64,
    pub block: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            det: 1e-4,
            trace: 1e-6,
            gluing: 1e-6,
            diagonal: 1e-6,
            neumann: 1e-6,
            block: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// Largest sampled value of the checked quantity.
    pub max_value: f64,
    /// Upper bound the quantity must respect.
    pub bound: f64,
    /// `(y2, y3)` where the maximum was attained.
    pub location: Option<(f64, f64)>,
    pub samples: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub p: f64,
    pub tau: f64,
    pub case: Case,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// Running maximum that keeps the first location attaining it.
#[derive(Debug, Clone, Copy)]
struct Peak {
    value: f64,
    at: Option<(f64, f64)>,
    count: usize,
}

impl Peak {
    fn new() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            at: None,
            count: 0,
        }
    }

    fn push(&mut self, v: f64, at: (f64, f64)) {
        self.count += 1;
        // NaN counts as a violation.
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v > self.value {
            self.value = v;
            self.at = Some(at);
        }
    }

    fn merge(mut self, other: Peak) -> Peak {
        self.count += other.count;
        if other.value > self.value {
            self.value = other.value;
            self.at = other.at;
        }
        self
    }

    fn result(self, name: &str, bound: f64) -> CheckResult {
        let max_value = if self.count == 0 { 0.0 } else { self.value };
        CheckResult {
            name: name.to_string(),
            max_value,
            bound,
            location: self.at,
            samples: self.count,
            passed: max_value <= bound,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct GridPeaks {
    det: Peak,
    trace: Peak,
    diagonal: Peak,
    block: Peak,
    n33: Peak,
    analytic: Peak,
}

impl GridPeaks {
    fn new() -> Self {
        Self {
            det: Peak::new(),
            trace: Peak::new(),
            diagonal: Peak::new(),
            block: Peak::new(),
            n33: Peak::new(),
            analytic: Peak::new(),
        }
    }

    fn merge(self, o: GridPeaks) -> GridPeaks {
        GridPeaks {
            det: self.det.merge(o.det),
            trace: self.trace.merge(o.trace),
            diagonal: self.diagonal.merge(o.diagonal),
            block: self.block.merge(o.block),
            n33: self.n33.merge(o.n33),
            analytic: self.analytic.merge(o.analytic),
        }
    }
}

/// Runs the whole suite.
pub fn verify_surface(
    surface: &Surface,
    opts: &VerifyOptions,
    tol: &Tolerances,
) -> VerificationReport {
    let params = *surface.params();
    let rows: Vec<GridPeaks> = (0..opts.n_y2)
        .into_par_iter()
        .map(|i| grid_row(surface, opts, i))
        .collect();
    let grid = rows.into_iter().fold(GridPeaks::new(), GridPeaks::merge);
    let checks = vec![
        grid.det.result("monge_ampere_det", tol.det),
        grid.trace.result("trace", tol.trace),
        gluing(surface, opts).result("gluing", tol.gluing),
        grid.diagonal.result("diagonal_concavity", tol.diagonal),
        neumann(surface, opts).result("neumann", tol.neumann),
        grid.block.result("block_determinant", tol.block),
        grid.n33.result("block_n33", tol.block),
        grid.analytic.result("block_analytic", tol.block),
    ];
    let passed = checks.iter().all(|c| c.passed);
    VerificationReport {
        p: params.p(),
        tau: params.tau(),
        case: surface.case(),
        checks,
        passed,
    }
}

fn grid_row(surface: &Surface, opts: &VerifyOptions, i: usize) -> GridPeaks {
    let params = surface.params();
    let cv = surface.curves();
    let mut peaks = GridPeaks::new();
    let y2 = -1.0 + 2.0 * (i as f64 + 0.5) / opts.n_y2 as f64;
    let g = cv.g(y2);
    for j in 0..opts.n_y3 {
        let eta = (j as f64 + 1.0) / opts.n_y3 as f64;
        let y3 = g + (opts.y3_max - g) * eta * eta;
        if y3 - g < opts.band {
            continue;
        }
        let Ok(pt) = OmegaPoint::new(params, y2, y3) else {
            continue;
        };
        let Ok(center) = surface.eval(pt) else {
            continue;
        };
        if !interior(surface, center.region, center.s, y2, y3, opts) {
            continue;
        }
        let at = (y2, y3);
        let b = |a: f64, c: f64| surface.b(a, c).unwrap_or(f64::NAN);

        // Curvature grows like (1 + y2)^{p-2} near the corner when tau = 0.
        let h = opts.hessian_step * (20.0 * (1.0 + y2)).min(1.0);
        let (b22, b33, b23) = richardson(|k| hessian(&b, y2, y3, k), h);
        let norm = (b22 * b22 + b33 * b33 + 2.0 * b23 * b23).sqrt();
        peaks
            .det
            .push((b22 * b33 - b23 * b23).abs() / (1.0 + norm).powi(2), at);

        let d = opts.diff_step;
        let tr = (b(y2 + d, y3) + b(y2 - d, y3) + b(y2, y3 + d) + b(y2, y3 - d)
            - 4.0 * center.value)
            / (d * d);
        peaks.trace.push(tr, at);

        peaks.diagonal.push(diagonal_peak(surface, y2, y3, d), at);

        let (block, n33) = block_checks(surface, y2, y3, opts.hessian_step, d);
        peaks.block.push(block, at);
        peaks.n33.push(n33, at);
        peaks.analytic.push(
            analytic_block(surface, center.region, center.s, center.grad, y2),
            at,
        );
    }
    peaks
}

/// True when the point sits at least `band` away from every region interface.
fn interior(
    surface: &Surface,
    region: Region,
    s: f64,
    y2: f64,
    y3: f64,
    opts: &VerifyOptions,
) -> bool {
    let band = opts.band;
    if let (Region::Cup, Some(prof)) = (region, surface.profile()) {
        let span = prof.s0 - prof.c;
        if s - prof.c < band * span || prof.s0 - s < band * span {
            return false;
        }
    }
    let r = band.max(2.0 * opts.hessian_step).max(opts.diff_step);
    let p = surface.params().p();
    let mut probes = Vec::with_capacity(24);
    for (dy2, dy3) in [
        (1.0, 0.0),
        (-1.0, 0.0),
        (0.0, 1.0),
        (0.0, -1.0),
        (1.0, 1.0),
        (1.0, -1.0),
        (-1.0, 1.0),
        (-1.0, -1.0),
    ] {
        probes.push((y2 + r * dy2, y3 + r * dy3));
    }
    // Images of the (y1, y3) stencil of N after normalising y1 to 1.
    for y1 in [1.0 - r, 1.0 + r] {
        for dy3 in [-r, 0.0, r] {
            probes.push((y2 / y1, (y3 + dy3) / y1.powf(p)));
        }
    }
    for (a, b) in probes {
        let Ok(pt) = OmegaPoint::new(surface.params(), a, b) else {
            return false;
        };
        if b - surface.curves().g(a) < r {
            return false;
        }
        match surface.classify(pt) {
            Ok((reg, _)) if reg == region => {}
            _ => return false,
        }
    }
    true
}

/// Largest second difference of `H` along directions inside the diagonal planes
/// through `x = (1 - y2, 1 + y2, y3)`.
fn diagonal_peak(surface: &Surface, y2: f64, y3: f64, d: f64) -> f64 {
    let x = [1.0 - y2, 1.0 + y2, y3];
    let h = |v: [f64; 3]| surface.h(v[0], v[1], v[2]);
    let Ok(h0) = h(x) else { return f64::NAN };
    let mut worst = f64::NEG_INFINITY;
    for lam in [0.0, 1.0, -1.0, 4.0, -4.0] {
        for dir in [[1.0f64, -1.0, lam], [1.0, 1.0, lam]] {
            let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
            let step = [d * dir[0] / n, d * dir[1] / n, d * dir[2] / n];
            let plus = [x[0] + step[0], x[1] + step[1], x[2] + step[2]];
            let minus = [x[0] - step[0], x[1] - step[1], x[2] - step[2]];
            let (Ok(hp), Ok(hm)) = (h(plus), h(minus)) else {
                continue;
            };
            worst = worst.max((hp + hm - 2.0 * h0) / (d * d));
        }
    }
    let up = [x[0], x[1], x[2] + d];
    let down = [x[0], x[1], x[2] - d];
    if let (Ok(hp), Ok(hm)) = (h(up), h(down)) {
        worst = worst.max((hp + hm - 2.0 * h0) / (d * d));
    }
    worst
}

/// Central-difference Hessian `(f_xx, f_yy, f_xy)` of `f` at `(x, y)` with step `h`.
fn hessian(f: &impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> (f64, f64, f64) {
    let f0 = f(x, y);
    let fxx = (f(x + h, y) - 2.0 * f0 + f(x - h, y)) / (h * h);
    let fyy = (f(x, y + h) - 2.0 * f0 + f(x, y - h)) / (h * h);
    let fxy =
        (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h);
    (fxx, fyy, fxy)
}

/// Combines estimates at steps `h` and `2h` to cancel the leading error term.
fn richardson(est: impl Fn(f64) -> (f64, f64, f64), h: f64) -> (f64, f64, f64) {
    let (a1, b1, c1) = est(h);
    let (a2, b2, c2) = est(2.0 * h);
    (
        (4.0 * a1 - a2) / 3.0,
        (4.0 * b1 - b2) / 3.0,
        (4.0 * c1 - c2) / 3.0,
    )
}

/// Concavity of `N` in `(y1, y3)` at `(1, y2, y3)`: returns the negated scaled
/// determinant of the block and `N33`.
fn block_checks(surface: &Surface, y2: f64, y3: f64, h: f64, d: f64) -> (f64, f64) {
    let n = |a: f64, c: f64| surface.n(a, y2, c).unwrap_or(f64::NAN);
    let (n11, n33, n13) = richardson(|k| hessian(&n, 1.0, y3, k), h);
    let scale = (1.0 + n11.abs() + n33.abs()).powi(2);
    // The sign of N33 only needs a plain second difference, which is exact for concave N.
    let n33_sign = (n(1.0, y3 + d) - 2.0 * n(1.0, y3) + n(1.0, y3 - d)) / (d * d);
    (-(n11 * n33 - n13 * n13) / scale, n33_sign)
}

/// Closed-form sign conditions equivalent to the block concavity on each region.
/// Returns the largest violation (nonpositive when all hold).
fn analytic_block(surface: &Surface, region: Region, s: f64, grad: (f64, f64), y2: f64) -> f64 {
    let cv = surface.curves();
    let p = surface.params().p();
    let (t1, t2) = grad;
    match region {
        Region::LeftFan => -t1,
        Region::Ang => {
            // N = A y1^p + t1 y2 y1^{p-1} + t2 y3 with B = A + t1 y2 + t2 y3.
            let s0 = surface.s0();
            let a = cv.f(s0) - t1 * s0 - t2 * cv.g(s0);
            let n11 = (p - 1.0) * (p * a + (p - 2.0) * t1 * y2);
            n11 / (1.0 + a.abs() + t1.abs())
        }
        Region::Vertical => {
            let v = p * cv.f(s) - 2.0 * s * cv.f1(s) - cv.r(s) * (cv.g(s) * p - 2.0 * s * cv.g1(s));
            v / (1.0 + cv.f(s))
        }
        Region::Cup => {
            let Some(prof) = surface.profile() else {
                return f64::NAN;
            };
            let a = prof.a_at(s);
            let v = cv.g(a) * t2 - cv.f(a) + 2.0 * a / p * t1;
            -v / (1.0 + cv.f(a))
        }
        Region::Boundary => f64::NEG_INFINITY,
    }
}

/// Gradient mismatch across every interface present in the case.
fn gluing(surface: &Surface, opts: &VerifyOptions) -> Peak {
    let cv = *surface.curves();
    let params = *surface.params();
    let yp = params.y_p();
    let s0 = surface.s0();
    let n = opts.line_samples;
    let off = opts.gluing_offset;
    let mut peak = Peak::new();
    let mut compare = |a: (f64, f64), b: (f64, f64), at: (f64, f64)| {
        let (Ok(pa), Ok(pb)) = (
            OmegaPoint::new(&params, a.0, a.1),
            OmegaPoint::new(&params, b.0, b.1),
        ) else {
            return;
        };
        let (Ok(ea), Ok(eb)) = (surface.eval(pa), surface.eval(pb)) else {
            peak.push(f64::INFINITY, at);
            return;
        };
        if ea.region == eb.region {
            return;
        }
        peak.push(
            (ea.grad.0 - eb.grad.0)
                .abs()
                .max((ea.grad.1 - eb.grad.1).abs()),
            at,
        );
    };
    let frac = |k: usize| (k as f64 + 0.5) / n as f64;
    let gm = cv.g(-1.0);
    if surface.profile().is_some() {
        // Last cup chord.
        for k in 0..n {
            let y2 = -1.0 + (s0 + 1.0) * frac(k);
            let y3 = gm + (cv.g(s0) - gm) * (y2 + 1.0) / (s0 + 1.0);
            compare((y2, y3 - off * y3), (y2, y3 + off * y3), (y2, y3));
        }
    }
    match surface.case() {
        Case::I => {
            let h0 = crate::surface::h_of_s(&params, s0).unwrap_or(f64::NAN);
            if surface.profile().is_some() {
                // Fan segment from s0.
                for k in 0..n {
                    let y2 = -1.0 + (s0 + 1.0) * frac(k);
                    let y3 = cv.g(s0) + (h0 - cv.g(s0)) * (s0 - y2) / (s0 + 1.0);
                    compare((y2, y3 - off * y3), (y2, y3 + off * y3), (y2, y3));
                }
            }
            // Vertical line y2 = y_p.
            for k in 0..n {
                let y3 = cv.g(yp) + (opts.y3_max - cv.g(yp)) * frac(k);
                compare((yp - off, y3), (yp + off, y3), (yp, y3));
            }
        }
        Case::II => {
            for k in 0..n {
                let y3 = cv.g(s0) + 1e-6 + (opts.y3_max - cv.g(s0)) * frac(k);
                if y3 <= gm + (cv.g(s0) - gm) * (s0 - off + 1.0) / (s0 + 1.0) {
                    continue;
                }
                compare((s0 - off, y3), (s0 + off, y3), (s0, y3));
            }
        }
    }
    peak
}

/// Residuals of `p B + 2 t1 - p y3 t2 = 0` on `y2 = -1` and
/// `p B - 2 t1 - p y3 t2 = 0` on `y2 = 1`.
fn neumann(surface: &Surface, opts: &VerifyOptions) -> Peak {
    let params = *surface.params();
    let p = params.p();
    let n = opts.line_samples;
    let mut peak = Peak::new();
    for (y2, sign) in [(-1.0, 1.0), (1.0, -1.0)] {
        let g = surface.curves().g(y2);
        for k in 0..n {
            let y3 = g + (opts.y3_max - g) * (k as f64 + 0.5) / n as f64;
            let at = (y2, y3);
            match OmegaPoint::new(&params, y2, y3).and_then(|pt| surface.eval(pt)) {
                Ok(e) => peak.push(
                    (p * e.value + sign * 2.0 * e.grad.0 - p * y3 * e.grad.1).abs(),
                    at,
                ),
                Err(_) => peak.push(f64::INFINITY, at),
            }
        }
    }
    peak
}
