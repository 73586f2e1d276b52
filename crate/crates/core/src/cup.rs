//! The cup: the family of chords `(a(s), g(a(s)))`–`(s, g(s))` of the lower
//! boundary rooted at the torsion root `c` and closing at `s0`, where the chord
//! reaches the corner `(-1, g(-1))`.
//!
//! Short chords near `c` are numerically delicate: the cup equation and the
//! force are differences of nearly equal quantities there. For chords shorter
//! than [`QUAD_SWITCH`] the relevant integrals are evaluated by Gauss–Legendre
//! quadrature of `f''/g''` and its derivative, which never subtracts large
//! numbers. Longer chords use the closed forms directly.

use std::io::Write;

use serde::Serialize;

use crate::boundary::{Curves, TorsionPoly, torsion_root, u_prime, u_raw};
use crate::error::{Error, Result};
use crate::params::ProblemParams;
use crate::quad::GaussLegendre;
use crate::roots::{RootOptions, newton_bracketed, newton_with_status};

/// Chords shorter than this are evaluated by quadrature.
pub const QUAD_SWITCH: f64 = 0.1;
/// The tabulated cup stops at `c + TIP_FRACTION * (s0 - c)`.
pub const TIP_FRACTION: f64 = 1e-7;
const GL_POINTS: usize = 12;
const REFINE_TOL: f64 = 1e-10;

/// Literal 3x3 cup determinant with rows `(1, 1, a-b)`,
/// `(g'(a), g'(b), g(a)-g(b))` and `(f'(a), f'(b), f(a)-f(b))`.
pub fn cup_determinant(params: &ProblemParams, a: f64, b: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&a) || !(-1.0..=1.0).contains(&b) {
        return Err(Error::Domain(format!("chord ({a}, {b}) outside [-1, 1]")));
    }
    let c = Curves::new(params);
    let m = [
        [1.0, 1.0, a - b],
        [c.g1(a), c.g1(b), c.g(a) - c.g(b)],
        [c.f1(a), c.f1(b), c.f(a) - c.f(b)],
    ];
    Ok(m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))
}

/// Cup-equation quantities of a chord `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChordEq {
    pub a: f64,
    pub b: f64,
    /// The cup determinant.
    pub phi: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    /// `g'(b) - g'(a)`.
    pub mu: f64,
    /// Chord slope `(f'(b) - f'(a)) / (g'(b) - g'(a))`.
    pub t2: f64,
    /// `f''(b)/g''(b) - t2`.
    pub force: f64,
    /// `t2 - f''(a)/g''(a)`.
    pub d_a: f64,
}

impl ChordEq {
    /// Scale-free residual `phi / mu^2`, the weighted covariance of `x` and `f''/g''`.
    pub fn residual(&self) -> f64 {
        self.phi / (self.mu * self.mu)
    }

    fn residual_da(&self, g2a: f64) -> f64 {
        self.phi_a / (self.mu * self.mu) + 2.0 * self.phi * g2a / self.mu.powi(3)
    }
}

/// Evaluator for chord quantities that switches between closed forms and quadrature.
#[derive(Debug, Clone)]
pub struct ChordSolver {
    curves: Curves,
    rule: GaussLegendre,
    panel: f64,
}

impl ChordSolver {
    pub fn new(params: &ProblemParams) -> Self {
        // Complex zeros of Q sit at distance 2 tau / (1 + tau^2) from the real axis.
        let tau = params.tau();
        let dist = 2.0 * tau / (1.0 + tau * tau);
        let panel = (0.5 * dist).clamp(1e-4, 0.05);
        Self {
            curves: Curves::new(params),
            rule: GaussLegendre::new(GL_POINTS),
            panel,
        }
    }

    pub fn curves(&self) -> &Curves {
        &self.curves
    }

    pub fn eval(&self, a: f64, b: f64) -> ChordEq {
        if b - a < QUAD_SWITCH {
            self.by_quadrature(a, b)
        } else {
            self.closed_form(a, b)
        }
    }

    pub fn closed_form(&self, a: f64, b: f64) -> ChordEq {
        let c = &self.curves;
        let (ga, gb, g1a, g1b) = (c.g(a), c.g(b), c.g1(a), c.g1(b));
        let (fa, fb, f1a, f1b) = (c.f(a), c.f(b), c.f1(a), c.f1(b));
        let (g2a, g2b, f2a, f2b) = (c.g2(a), c.g2(b), c.f2(a), c.f2(b));
        let g_1 = g1b - g1a;
        let f_1 = f1b - f1a;
        let g_2 = gb - ga - g1a * (b - a);
        let f_2 = fb - fa - f1a * (b - a);
        let ug = ga - gb - g1b * (a - b);
        let uf = fa - fb - f1b * (a - b);
        let t2 = f_1 / g_1;
        ChordEq {
            a,
            b,
            phi: f_1 * g_2 - f_2 * g_1,
            phi_a: f2a * ug - g2a * uf,
            phi_b: f2b * g_2 - g2b * f_2,
            mu: g_1,
            t2,
            force: f2b / g2b - t2,
            d_a: t2 - f2a / g2a,
        }
    }

    pub fn by_quadrature(&self, a: f64, b: f64) -> ChordEq {
        let c = &self.curves;
        let len = b - a;
        let panels = ((len / self.panel).ceil() as usize).clamp(1, 256);
        let h = len / panels as f64;
        // tail[k] = integral of r' from the left end of panel k to b.
        let mut tail = vec![0.0; panels + 1];
        for k in (0..panels).rev() {
            let lo = a + k as f64 * h;
            tail[k] = tail[k + 1] + self.rule.integrate(lo, lo + h, |t| c.r1(t));
        }
        let mut mu = 0.0;
        let mut m1 = 0.0;
        let mut nodes = Vec::with_capacity(panels * GL_POINTS);
        for k in 0..panels {
            let lo = a + k as f64 * h;
            let hi = lo + h;
            for (x, w) in self.rule.mapped(lo, hi) {
                // r(x) - r(b) = -(integral of r' over [x, b]).
                let rx = -(self.rule.integrate(x, hi, |t| c.r1(t)) + tail[k + 1]);
                let mw = w * c.g2(x);
                mu += mw;
                m1 += mw * x;
                nodes.push((x, mw, rx));
            }
        }
        let xbar = m1 / mu;
        let ra = -tail[0];
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        let mut sa = 0.0;
        let mut sb = 0.0;
        for &(x, mw, rx) in &nodes {
            s0 += mw * rx;
            s1 += mw * (x - xbar) * rx;
            sa += mw * (x - a) * (rx - ra);
            sb += mw * (b - x) * rx;
        }
        let d_b = s0 / mu;
        let rb = c.r(b);
        ChordEq {
            a,
            b,
            phi: mu * s1,
            phi_a: -c.g2(a) * sa,
            phi_b: -c.g2(b) * sb,
            mu,
            t2: rb + d_b,
            force: -d_b,
            d_a: d_b - ra,
        }
    }

    /// Solves the cup equation for the left endpoint `a` of the chord ending at `b`,
    /// inside the bracket `[lo, hi]`.
    fn solve_a(
        &self,
        b: f64,
        lo: f64,
        hi: f64,
        guess: Option<f64>,
        max_iter: usize,
    ) -> Result<(f64, bool)> {
        let c = self.curves;
        let opts = RootOptions {
            x_tol: 4e-16,
            f_tol: 0.0,
            max_iter,
        };
        newton_with_status(
            "cup endpoint a(s)",
            |a| {
                let eq = self.eval(a, b);
                (eq.residual(), eq.residual_da(c.g2(a)))
            },
            lo,
            hi,
            guess,
            opts,
        )
    }
}

/// Right endpoint `s0` of the cup: the root of `u((1+s)/(1-s))` on `(c, 1)`.
pub fn solve_s0(params: &ProblemParams, c: f64) -> Result<f64> {
    if params.is_unperturbed() {
        return Err(Error::Domain("cup endpoint requires tau > 0".into()));
    }
    let z = |s: f64| (1.0 + s) / (1.0 - s);
    let lo = c;
    let hi = 1.0 - 1e-12;
    if !(u_raw(params, z(lo)) > 0.0) || !(u_raw(params, z(hi)) < 0.0) {
        return Err(Error::Bracket {
            what: "cup endpoint s0",
            lo,
            hi,
        });
    }
    newton_bracketed(
        "cup endpoint s0",
        |s| {
            let zs = z(s);
            (
                u_raw(params, zs),
                u_prime(params, zs) * 2.0 / ((1.0 - s) * (1.0 - s)),
            )
        },
        lo,
        hi,
        None,
        RootOptions::default(),
    )
}

/// One tabulated chord of the cup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CupNode {
    pub s: f64,
    pub a: f64,
    /// `a'(s)`.
    pub da: f64,
    pub t1: f64,
    pub t2: f64,
    /// `t2'(s)`.
    pub dt2: f64,
    pub force: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Uniform nodes on the part of the cup away from the tip.
    pub uniform_nodes: usize,
    /// Ratio of the geometric node spacing near the tip.
    pub tip_ratio: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            uniform_nodes: 120,
            tip_ratio: 1.25,
        }
    }
}

impl BuildOptions {
    /// Same layout with every initial step halved.
    pub fn finer(self) -> Self {
        Self {
            uniform_nodes: 2 * self.uniform_nodes,
            tip_ratio: self.tip_ratio.sqrt(),
        }
    }
}

/// Tabulated cup with C1 interpolation of `a(s)` and `t2(s)`.
#[derive(Debug, Clone)]
pub struct CupProfile {
    params: ProblemParams,
    solver: ChordSolver,
    pub torsion: TorsionPoly,
    pub c: f64,
    pub s0: f64,
    /// Smallest tabulated `s`; chords below it form the tip band.
    pub tip: f64,
    nodes: Vec<CupNode>,
}

impl CupProfile {
    pub fn build(params: &ProblemParams) -> Result<Self> {
        Self::build_with(params, BuildOptions::default())
    }

    pub fn build_with(params: &ProblemParams, opts: BuildOptions) -> Result<Self> {
        let torsion = torsion_root(params)?;
        let c = torsion.root;
        let s0 = solve_s0(params, c)?;
        let span = s0 - c;
        let tip = c + TIP_FRACTION * span;
        let solver = ChordSolver::new(params);

        let mut sigmas = Vec::new();
        let knee = 0.02;
        let mut x = TIP_FRACTION;
        while x < knee {
            sigmas.push(x);
            x *= opts.tip_ratio;
        }
        let n = opts.uniform_nodes.max(4);
        for i in 0..=n {
            sigmas.push(knee + (1.0 - knee) * i as f64 / n as f64);
        }
        let mut grid: Vec<f64> = sigmas.iter().map(|sg| c + sg * span).collect();
        *grid.last_mut().expect("nonempty") = s0;

        let mut profile = Self {
            params: *params,
            solver,
            torsion,
            c,
            s0,
            tip,
            nodes: Vec::new(),
        };
        profile.continuation(&grid)?;
        profile.refine()?;
        Ok(profile)
    }

    /// Walks from `s0` (where `a = -1`) down to the tip, predicting with the
    /// implicit-function slope and correcting with safeguarded Newton.
    fn continuation(&mut self, grid: &[f64]) -> Result<()> {
        let mut nodes = Vec::with_capacity(grid.len());
        let first = self.node_at(self.s0, -1.0)?;
        nodes.push(first);
        let mut prev = first;
        for &s in grid.iter().rev().skip(1) {
            let mut target = s;
            let mut halvings = 0;
            loop {
                let guess = prev.a + prev.da * (target - prev.s);
                let (a, ok) = self
                    .solver
                    .solve_a(target, prev.a, self.c, Some(guess), 50)?;
                if ok {
                    let node = self.node_at(target, a)?;
                    nodes.push(node);
                    prev = node;
                    if target == s {
                        break;
                    }
                    target = s;
                    continue;
                }
                halvings += 1;
                if halvings > 40 {
                    return Err(Error::ContinuationStall {
                        s: target,
                        halvings,
                    });
                }
                target = 0.5 * (prev.s + target);
            }
        }
        nodes.reverse();
        self.nodes = nodes;
        Ok(())
    }

    fn node_at(&self, s: f64, a: f64) -> Result<CupNode> {
        let eq = self.solver.eval(a, s);
        let cv = self.solver.curves();
        let gap = (cv.g1(s) - cv.g1(a)).abs();
        if gap < 1e-14 {
            return Err(Error::DegenerateChord { s, gap });
        }
        let da = -eq.phi_b / eq.phi_a;
        let dt2 = (cv.g2(s) * eq.force + da * cv.g2(a) * eq.d_a) / eq.mu;
        Ok(CupNode {
            s,
            a,
            da,
            t1: cv.f1(s) - eq.t2 * cv.g1(s),
            t2: eq.t2,
            dt2,
            force: eq.force,
        })
    }

    /// Inserts midpoints until Hermite interpolation of `a` and `t2` matches the
    /// solved values at every midpoint.
    fn refine(&mut self) -> Result<()> {
        for _ in 0..40 {
            let mut inserted = Vec::new();
            for w in self.nodes.windows(2) {
                let sm = 0.5 * (w[0].s + w[1].s);
                let (ai, ti) = (
                    hermite(&w[0], &w[1], sm, |n| (n.a, n.da)),
                    hermite(&w[0], &w[1], sm, |n| (n.t2, n.dt2)),
                );
                let (a, _) = self.solver.solve_a(
                    sm,
                    w[0].a.min(w[1].a),
                    w[0].a.max(w[1].a),
                    Some(ai.0),
                    200,
                )?;
                let node = self.node_at(sm, a)?;
                if (ai.0 - a).abs() > REFINE_TOL
                    || (ti.0 - node.t2).abs() > REFINE_TOL * (1.0 + node.t2.abs())
                {
                    inserted.push(node);
                }
            }
            if inserted.is_empty() {
                return Ok(());
            }
            self.nodes.extend(inserted);
            self.nodes.sort_by(|x, y| x.s.total_cmp(&y.s));
        }
        Ok(())
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn solver(&self) -> &ChordSolver {
        &self.solver
    }

    pub fn nodes(&self) -> &[CupNode] {
        &self.nodes
    }

    fn locate(&self, s: f64) -> usize {
        let i = self.nodes.partition_point(|n| n.s <= s);
        i.clamp(1, self.nodes.len() - 1) - 1
    }

    /// Interpolated left endpoint `a(s)`. Inside the tip band the chord is
    /// continued linearly towards `(c, c)`.
    pub fn a_at(&self, s: f64) -> f64 {
        if s < self.tip {
            let first = &self.nodes[0];
            return self.c + (first.a - self.c) * (s - self.c) / (first.s - self.c);
        }
        let i = self.locate(s);
        hermite(&self.nodes[i], &self.nodes[i + 1], s, |n| (n.a, n.da)).0
    }

    /// Interpolated `(t2, t2')`. Inside the tip band the tip value is held.
    pub fn t2_at(&self, s: f64) -> (f64, f64) {
        if s < self.tip {
            return (self.nodes[0].t2, 0.0);
        }
        let i = self.locate(s);
        hermite(&self.nodes[i], &self.nodes[i + 1], s, |n| (n.t2, n.dt2))
    }

    /// Gradient `(t1, t2)` of the surface on the chord with right end `s`.
    pub fn gradient(&self, s: f64) -> (f64, f64) {
        let (t2, _) = self.t2_at(s);
        let cv = self.solver.curves();
        let s = s.max(self.tip);
        (cv.f1(s) - t2 * cv.g1(s), t2)
    }

    /// Solves the cup equation afresh at `s` (no interpolation).
    pub fn exact_at(&self, s: f64) -> Result<CupNode> {
        if !(s >= self.tip && s <= self.s0) {
            return Err(Error::Domain(format!(
                "s = {s} outside tabulated cup [{}, {}]",
                self.tip, self.s0
            )));
        }
        if s == self.s0 {
            return self.node_at(s, -1.0);
        }
        let guess = self.a_at(s);
        let (a, _) = self.solver.solve_a(s, -1.0, self.c, Some(guess), 200)?;
        self.node_at(s, a)
    }

    /// Right endpoint `s` of the chord whose left endpoint is `z` in `[-1, c)`.
    pub fn s_of_left(&self, z: f64) -> Result<f64> {
        if !(z >= -1.0 && z < self.c) {
            return Err(Error::Domain(format!("left endpoint {z} outside [-1, c)")));
        }
        if z == -1.0 {
            return Ok(self.s0);
        }
        let (mut lo, mut hi) = (self.c, self.s0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m <= lo || m >= hi {
                break;
            }
            if self.a_at(m) > z {
                lo = m;
            } else {
                hi = m;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Chord angle `theta` (pointing from `(s, g(s))` to `(a, g(a))`) and
    /// `K = g'(s) cos(theta) - sin(theta)`.
    pub fn chord_angle(&self, s: f64, a: f64) -> (f64, f64) {
        let cv = self.solver.curves();
        let theta = std::f64::consts::PI + ((cv.g(s) - cv.g(a)) / (s - a)).atan();
        let k = cv.g1(s) * theta.cos() - theta.sin();
        (theta, k)
    }

    /// Writes `s,a,t1,t2,force` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "a", "t1", "t2", "force"])?;
        for n in &self.nodes {
            w.write_record([n.s, n.a, n.t1, n.t2, n.force].map(crate::io::fmt17))?;
        }
        w.flush()
    }
}

/// Cubic Hermite value and derivative between two nodes, with a Fritsch–Carlson
/// guard that keeps the interpolant monotone where the data are.
fn hermite(
    n0: &CupNode,
    n1: &CupNode,
    s: f64,
    pick: impl Fn(&CupNode) -> (f64, f64),
) -> (f64, f64) {
    let (y0, mut m0) = pick(n0);
    let (y1, mut m1) = pick(n1);
    let h = n1.s - n0.s;
    let secant = (y1 - y0) / h;
    if secant == 0.0 {
        m0 = 0.0;
        m1 = 0.0;
    } else {
        let al = m0 / secant;
        let be = m1 / secant;
        if al < 0.0 {
            m0 = 0.0;
        }
        if be < 0.0 {
            m1 = 0.0;
        }
        let r2 = al * al + be * be;
        if r2 > 9.0 {
            let k = 3.0 / r2.sqrt();
            m0 = k * al * secant;
            m1 = k * be * secant;
        }
    }
    let t = (s - n0.s) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * m1;
    let d = (6.0 * t2 - 6.0 * t) / h * y0
        + (3.0 * t2 - 4.0 * t + 1.0) * m0
        + (-6.0 * t2 + 6.0 * t) / h * y1
        + (3.0 * t2 - 2.0 * t) * m1;
    (v, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(p: f64, tau: f64) -> ProblemParams {
        ProblemParams::new(p, tau).unwrap()
    }

    #[test]
    fn determinant_at_full_chord() {
        // Direct expansion gives 2^{2p-1} p (p-2) for every tau.
        for tau in [0.5, 1.0, 3.0] {
            let q = pp(1.5, tau);
            let d = cup_determinant(&q, -1.0, 1.0).unwrap();
            assert!((d - (-3.0)).abs() < 1e-12, "tau={tau}: {d}");
        }
        let q = pp(1.3, 2.0);
        let expect = 2f64.powf(2.0 * 1.3 - 1.0) * 1.3 * (1.3 - 2.0);
        assert!((cup_determinant(&q, -1.0, 1.0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn determinant_vanishes_for_short_chords() {
        let q = pp(1.5, 3.0);
        assert!(cup_determinant(&q, 0.3, 0.3 + 1e-5).unwrap().abs() <= 1e-8);
        assert!(cup_determinant(&q, -1.1, 0.0).is_err());
    }

    #[test]
    fn determinant_changes_sign_between_tip_and_full_chord() {
        let q = pp(1.5, 3.0);
        let c = torsion_root(&q).unwrap().root;
        let at_c = cup_determinant(&q, -1.0, c).unwrap();
        let at_one = cup_determinant(&q, -1.0, 1.0).unwrap();
        assert!(at_c * at_one < 0.0);
        assert!(at_c > 0.0);
    }

    #[test]
    fn closed_form_matches_literal_determinant() {
        let q = pp(1.5, 1.0);
        let solver = ChordSolver::new(&q);
        for (a, b) in [(-0.9, 0.3), (-1.0, 0.2), (-0.5, 0.7)] {
            let eq = solver.closed_form(a, b);
            let d = cup_determinant(&q, a, b).unwrap();
            assert!((eq.phi - d).abs() < 1e-13 * (1.0 + d.abs()));
        }
    }

    #[test]
    fn quadrature_matches_closed_form_on_moderate_chords() {
        let q = pp(1.5, 1.0);
        let solver = ChordSolver::new(&q);
        for (a, b) in [(-0.45, -0.15), (-0.35, -0.2), (-0.6, -0.05)] {
            let x = solver.closed_form(a, b);
            let y = solver.by_quadrature(a, b);
            assert!(
                (x.residual() - y.residual()).abs() < 1e-11,
                "{a},{b}: {} {}",
                x.residual(),
                y.residual()
            );
            assert!((x.t2 - y.t2).abs() < 1e-11 * x.t2.abs());
            assert!((x.force - y.force).abs() < 1e-11);
            assert!((x.phi_a - y.phi_a).abs() < 1e-10 * (1.0 + x.phi_a.abs()));
            assert!((x.phi_b - y.phi_b).abs() < 1e-10 * (1.0 + x.phi_b.abs()));
            assert!((x.d_a - y.d_a).abs() < 1e-10);
        }
    }

    #[test]
    fn partial_derivatives_match_differences() {
        let q = pp(1.5, 3.0);
        let solver = ChordSolver::new(&q);
        let (a, b) = (-0.7, 0.8);
        let eq = solver.closed_form(a, b);
        let h = 1e-6;
        let fa = (solver.closed_form(a + h, b).phi - solver.closed_form(a - h, b).phi) / (2.0 * h);
        let fb = (solver.closed_form(a, b + h).phi - solver.closed_form(a, b - h).phi) / (2.0 * h);
        assert!((fa - eq.phi_a).abs() < 1e-6 * (1.0 + fa.abs()));
        assert!((fb - eq.phi_b).abs() < 1e-6 * (1.0 + fb.abs()));
    }

    #[test]
    fn s0_examples() {
        // Frozen from an independent double-precision bisection on u.
        let q1 = pp(1.5, 1.0);
        let c1 = torsion_root(&q1).unwrap().root;
        let s1 = solve_s0(&q1, c1).unwrap();
        assert!((s1 - 0.22439388425127618).abs() < 1e-12);
        assert!(s1 < q1.y_p());
        let q3 = pp(1.5, 3.0);
        let c3 = torsion_root(&q3).unwrap().root;
        let s3 = solve_s0(&q3, c3).unwrap();
        assert!((s3 - 0.9257015964556096).abs() < 1e-12);
        assert!(s3 > q3.y_p());
        let z = (1.0 + s3) / (1.0 - s3);
        assert!(u_raw(&q3, z).abs() < 1e-12);
        // Determinant form of the same equation.
        let d = cup_determinant(&q3, -1.0, s3).unwrap();
        assert!(d.abs() < 1e-8 * cup_determinant(&q3, -1.0, 1.0).unwrap().abs());
    }

    #[test]
    fn profile_endpoint_and_tip() {
        let q = pp(1.5, 3.0);
        let prof = CupProfile::build(&q).unwrap();
        let last = prof.nodes().last().unwrap();
        assert_eq!(last.s, prof.s0);
        assert_eq!(last.a, -1.0);
        let near = prof.exact_at(prof.c + 1e-6).unwrap();
        assert!((near.a - prof.c).abs() <= 1e-3);
        assert!((prof.a_at(prof.c + 1e-6) - prof.c).abs() <= 1e-3);
    }

    #[test]
    fn profile_residuals_monotonicity_and_force() {
        let q = pp(1.5, 1.0);
        let prof = CupProfile::build(&q).unwrap();
        let nodes = prof.nodes();
        for n in nodes {
            let eq = prof.solver().eval(n.a, n.s);
            assert!(
                eq.residual().abs() < 1e-10,
                "residual at {}: {}",
                n.s,
                eq.residual()
            );
            assert!(n.force <= 1e-10);
            assert!(n.t1 >= -1e-10);
            assert!(n.da < 0.0);
        }
        for w in nodes.windows(2) {
            assert!(w[1].a < w[0].a, "a not decreasing at {}", w[0].s);
            assert!(w[1].t2 <= w[0].t2 + 1e-14, "t2 increasing at {}", w[0].s);
        }
        let mid = &nodes[nodes.len() / 2];
        let dd = (prof.a_at(mid.s + 1e-5) - prof.a_at(mid.s - 1e-5)) / 2e-5;
        assert!(dd < 0.0);
    }

    #[test]
    fn chord_slope_exceeds_ratio_and_k_negative() {
        let q = pp(1.5, 3.0);
        let prof = CupProfile::build(&q).unwrap();
        let cv = prof.solver().curves();
        for n in prof.nodes() {
            let (_, k) = prof.chord_angle(n.s, n.a);
            assert!(k < 0.0);
            assert!(n.t2 - cv.r(n.s) > 0.0);
        }
        let first = prof.nodes().last().unwrap();
        assert!(first.t2 > cv.r(-1.0));
    }

    #[test]
    fn t2_at_s0_matches_chord_formula() {
        let q = pp(1.5, 3.0);
        let prof = CupProfile::build(&q).unwrap();
        let cv = prof.solver().curves();
        let direct = (cv.f1(-1.0) - cv.f1(prof.s0)) / (cv.g1(-1.0) - cv.g1(prof.s0));
        assert!((prof.t2_at(prof.s0).0 - direct).abs() < 1e-12 * direct);
        assert!((direct - 7.2275996372577).abs() < 1e-10);
    }

    #[test]
    fn force_satisfies_its_ode() {
        let q = pp(1.5, 1.0);
        let prof = CupProfile::build(&q).unwrap();
        let cv = prof.solver().curves();
        let span = prof.s0 - prof.c;
        for frac in [0.001, 0.01, 0.2, 0.5, 0.9] {
            let s = prof.c + frac * span;
            let h = 1e-5 * span;
            let fp = prof.exact_at(s + h).unwrap().force;
            let fm = prof.exact_at(s - h).unwrap().force;
            let n = prof.exact_at(s).unwrap();
            let (theta, k) = prof.chord_angle(s, n.a);
            let res = (fp - fm) / (2.0 * h) + n.force * theta.cos() / k * cv.g2(s) - cv.r1(s);
            assert!(res.abs() < 1e-6, "s={s}: {res}");
        }
    }

    #[test]
    fn refinement_is_discretization_independent() {
        let q = pp(1.5, 3.0);
        let a = CupProfile::build(&q).unwrap();
        let b = CupProfile::build_with(&q, BuildOptions::default().finer()).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=997 {
            let s = a.tip + (a.s0 - a.tip) * i as f64 / 997.0;
            worst = worst.max((a.a_at(s) - b.a_at(s)).abs());
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn cauchy_and_determinant_forms_agree_in_sign() {
        use rand::{RngExt, SeedableRng};
        let q = pp(1.5, 3.0);
        let cv = Curves::new(&q);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 100 {
            let a: f64 = rng.random_range(-1.0..0.9);
            let b: f64 = rng.random_range(a + 0.05..0.99);
            let lhs =
                (cv.f(a) - cv.f(b) - cv.f1(a) * (a - b)) / (cv.g(a) - cv.g(b) - cv.g1(a) * (a - b));
            let rhs = (cv.f1(b) - cv.f1(a)) / (cv.g1(b) - cv.g1(a));
            let cauchy = lhs - rhs;
            let det = cup_determinant(&q, a, b).unwrap();
            if cauchy.abs() < 1e-9 || det.abs() < 1e-9 {
                continue;
            }
            // Both sides of the Cauchy form have positive denominators of opposite orientation.
            assert_eq!(cauchy.signum(), -det.signum(), "a={a} b={b}");
            checked += 1;
        }
    }
}
