//! The minimal concave function `B` on `{(y2, y3) : y3 >= (1-y2)^p}` and its
//! homogeneous extensions `N` and `H`.
//!
//! `B` is affine along each segment of a foliation. Depending on the case the
//! domain splits into the cup, an affine gluing region next to the last cup
//! chord, a fan of segments ending on the left edge, and vertical rays.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::boundary::Curves;
use crate::constant::{Case, select_case};
use crate::cup::{CupNode, CupProfile};
use crate::error::{Error, Result};
use crate::params::ProblemParams;

/// Width of the classification bands around region interfaces, relative to `y3`.
pub const REGION_BAND: f64 = 1e-10;
const MEMBERSHIP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Region {
    Cup,
    Ang,
    LeftFan,
    Vertical,
    Boundary,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Region::Cup => "cup",
            Region::Ang => "ang",
            Region::LeftFan => "left_fan",
            Region::Vertical => "vertical",
            Region::Boundary => "boundary",
        };
        f.write_str(name)
    }
}

/// A point of the reduced domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaPoint {
    pub y2: f64,
    pub y3: f64,
}

impl OmegaPoint {
    /// Checks membership. Points a hair below the boundary (relative
    /// `1e-12`) are snapped onto it.
    pub fn new(params: &ProblemParams, y2: f64, y3: f64) -> Result<Self> {
        if !y2.is_finite() || !y3.is_finite() || !(-1.0..=1.0).contains(&y2) {
            return Err(Error::Domain(format!(
                "({y2}, {y3}) outside the reduced domain"
            )));
        }
        let g = (1.0 - y2).powf(params.p());
        if y3 < g {
            if g - y3 > MEMBERSHIP_SLACK * g.max(1.0) {
                return Err(Error::Domain(format!(
                    "({y2}, {y3}) lies below y3 = (1-y2)^p = {g}"
                )));
            }
            return Ok(Self { y2, y3: g });
        }
        Ok(Self { y2, y3 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceEval {
    pub region: Region,
    /// Foliation parameter of the segment through the point.
    pub s: f64,
    pub value: f64,
    /// `(t1, t2) = (dB/dy2, dB/dy3)`.
    pub grad: (f64, f64),
}

/// Left-edge height `h(s) = 2 g(s) / (p (y_p - s))` of the fan segment from `(s, g(s))`.
pub fn h_of_s(params: &ProblemParams, s: f64) -> Result<f64> {
    let yp = params.y_p();
    if !(s >= -1.0 && s < yp) {
        return Err(Error::Domain(format!(
            "h(s) needs s in [-1, y_p = {yp}), got {s}"
        )));
    }
    Ok(h_raw(params.p(), yp, s))
}

fn h_raw(p: f64, yp: f64, s: f64) -> f64 {
    2.0 * (1.0 - s).powf(p) / (p * (yp - s))
}

/// The assembled surface. Immutable once built and shareable across threads.
#[derive(Debug, Clone)]
pub struct Surface {
    params: ProblemParams,
    curves: Curves,
    case: Case,
    profile: Option<CupProfile>,
    s0: f64,
    g0: f64,
    /// Gradient on the gluing region, the cup value at `s0`.
    t_s0: (f64, f64),
    /// `t2` on the vertical rays.
    t2_vertical: f64,
    /// Faults injected for falsifiability probes.
    flip_t2: bool,
}

impl Surface {
    pub fn build(params: &ProblemParams) -> Result<Self> {
        let profile = if params.is_unperturbed() {
            None
        } else {
            Some(CupProfile::build(params)?)
        };
        Self::from_profile(params, profile)
    }

    pub fn from_profile(params: &ProblemParams, profile: Option<CupProfile>) -> Result<Self> {
        let curves = Curves::new(params);
        let case = select_case(params);
        let yp = params.y_p();
        let (s0, t_s0) = match &profile {
            Some(prof) => {
                let node = prof.exact_at(prof.s0)?;
                (prof.s0, (node.t1, node.t2))
            }
            None => {
                if !params.is_unperturbed() {
                    return Err(Error::Domain(
                        "a cup profile is required for tau > 0".into(),
                    ));
                }
                // Without a cup the fan starts at the corner.
                let t2 = fan_t2_raw(&curves, yp, -1.0);
                (-1.0, (curves.f1(-1.0) - t2 * curves.g1(-1.0), t2))
            }
        };
        let t2_vertical = match case {
            Case::I => curves.f(yp) / curves.g(yp),
            Case::II => t_s0.1,
        };
        Ok(Self {
            params: *params,
            curves,
            case,
            profile,
            s0,
            g0: curves.g(s0),
            t_s0,
            t2_vertical,
            flip_t2: false,
        })
    }

    /// Returns a copy whose `t2` has the wrong sign everywhere off the boundary.
    pub fn with_flipped_t2(mut self) -> Self {
        self.flip_t2 = true;
        self
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn case(&self) -> Case {
        self.case
    }

    pub fn profile(&self) -> Option<&CupProfile> {
        self.profile.as_ref()
    }

    pub fn curves(&self) -> &Curves {
        &self.curves
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    /// Gradient on the gluing region.
    pub fn t_at_s0(&self) -> (f64, f64) {
        self.t_s0
    }

    /// Slope `dB/dy3` on the vertical rays, also the limit of `B/y3` as `y3` grows.
    pub fn t2_vertical(&self) -> f64 {
        self.t2_vertical
    }

    /// `t2` on the fan segment from `(s, g(s))`.
    pub fn fan_t2(&self, s: f64) -> f64 {
        fan_t2_raw(&self.curves, self.params.y_p(), s)
    }

    /// Gradient `(t1, t2)` on the fan segment from `(s, g(s))`.
    pub fn fan_gradient(&self, s: f64) -> (f64, f64) {
        let t2 = self.fan_t2(s);
        (self.curves.f1(s) - t2 * self.curves.g1(s), t2)
    }

    /// Height of the last cup chord above `y2`.
    fn chord0(&self, y2: f64) -> f64 {
        let gm = self.curves.g(-1.0);
        gm + (self.g0 - gm) * (y2 + 1.0) / (self.s0 + 1.0)
    }

    /// Height above `y2` of the fan segment from `(s, g(s))` to `(-1, h(s))`.
    fn fan_line(&self, s: f64, y2: f64) -> f64 {
        let g = self.curves.g(s);
        let h = h_raw(self.params.p(), self.params.y_p(), s);
        g + (h - g) * (s - y2) / (s + 1.0)
    }

    /// Region and foliation parameter of a point.
    pub fn classify(&self, pt: OmegaPoint) -> Result<(Region, f64)> {
        let OmegaPoint { y2, y3 } = pt;
        let band = REGION_BAND * y3.max(1.0);
        if y3 - self.curves.g(y2) <= 1e-13 * y3.max(1.0) {
            return Ok((Region::Boundary, y2));
        }
        let yp = self.params.y_p();
        match self.case {
            Case::I => {
                if y2 >= yp {
                    return Ok((Region::Vertical, y2));
                }
                if self.profile.is_some() && y2 <= self.s0 {
                    let chord = self.chord0(y2);
                    if y3 < chord - band {
                        return Ok((Region::Cup, self.cup_parameter(y2, y3)));
                    }
                    if y3 <= self.fan_line(self.s0, y2) + band {
                        return Ok((Region::Ang, self.s0));
                    }
                }
                Ok((Region::LeftFan, self.fan_parameter(y2, y3)?))
            }
            Case::II => {
                if y2 >= self.s0 {
                    return Ok((Region::Vertical, y2));
                }
                if y3 < self.chord0(y2) - band {
                    return Ok((Region::Cup, self.cup_parameter(y2, y3)));
                }
                Ok((Region::Ang, self.s0))
            }
        }
    }

    /// Smallest cup parameter whose chord lies above the point.
    fn cup_parameter(&self, y2: f64, y3: f64) -> f64 {
        let prof = self
            .profile
            .as_ref()
            .expect("cup region requires a profile");
        let cv = &self.curves;
        let covers = |s: f64| {
            let a = prof.a_at(s);
            if y2 < a || y2 > s {
                return false;
            }
            let chord = cv.g(a) + (cv.g(s) - cv.g(a)) * (y2 - a) / (s - a);
            y3 <= chord
        };
        let (mut lo, mut hi) = (prof.c, prof.s0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m <= lo || m >= hi {
                break;
            }
            if covers(m) {
                hi = m;
            } else {
                lo = m;
            }
        }
        hi
    }

    fn fan_parameter(&self, y2: f64, y3: f64) -> Result<f64> {
        let yp = self.params.y_p();
        let mut lo = self.s0.max(y2);
        if self.fan_line(lo, y2) >= y3 {
            return Ok(lo);
        }
        // The line height blows up as s approaches y_p.
        let mut hi = yp;
        let mut found = false;
        for k in 1..60 {
            let cand = yp - (yp - lo) * 0.5f64.powi(k);
            if self.fan_line(cand, y2) >= y3 {
                hi = cand;
                found = true;
                break;
            }
            lo = cand;
        }
        if !found {
            return Err(Error::ClassifyAmbiguity { y2, y3 });
        }
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m <= lo || m >= hi {
                break;
            }
            if self.fan_line(m, y2) >= y3 {
                hi = m;
            } else {
                lo = m;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Gradient on the segment labelled `(region, s)`.
    fn gradient(&self, region: Region, s: f64) -> (f64, f64) {
        let cv = &self.curves;
        match region {
            Region::Cup => self.profile.as_ref().expect("profile").gradient(s),
            Region::Ang => self.t_s0,
            Region::LeftFan => self.fan_gradient(s),
            Region::Vertical => (cv.f1(s) - self.t2_vertical * cv.g1(s), self.t2_vertical),
            Region::Boundary => unreachable!("boundary gradient resolved by the caller"),
        }
    }

    /// Evaluates `B` at a checked point.
    pub fn eval(&self, pt: OmegaPoint) -> Result<SurfaceEval> {
        let (region, s) = self.classify(pt)?;
        if region == Region::Boundary {
            let lifted = OmegaPoint {
                y2: pt.y2,
                y3: pt.y3 + 1e-9 * pt.y3.max(1.0),
            };
            let (r, s_in) = self.classify(lifted)?;
            let grad = self.gradient(r, s_in);
            return Ok(SurfaceEval {
                region,
                s,
                value: self.curves.f(pt.y2),
                grad,
            });
        }
        let cv = &self.curves;
        let (mut t1, mut t2) = self.gradient(region, s);
        let (s_anchor, value) = match (region, &self.profile) {
            (Region::Cup, Some(prof)) if s < prof.tip => {
                // Inside the tip band the chord is shorter than the table resolves.
                (pt.y2, cv.f(pt.y2) + t2 * (pt.y3 - cv.g(pt.y2)))
            }
            _ => (s, cv.f(s) + t1 * (pt.y2 - s) + t2 * (pt.y3 - cv.g(s))),
        };
        if self.flip_t2 {
            t2 = -t2;
            t1 = cv.f1(s_anchor) - t2 * cv.g1(s_anchor);
            let value = cv.f(s_anchor) + t1 * (pt.y2 - s_anchor) + t2 * (pt.y3 - cv.g(s_anchor));
            return Ok(SurfaceEval {
                region,
                s,
                value,
                grad: (t1, t2),
            });
        }
        Ok(SurfaceEval {
            region,
            s,
            value,
            grad: (t1, t2),
        })
    }

    /// Evaluates `B(y2, y3)`.
    pub fn b(&self, y2: f64, y3: f64) -> Result<f64> {
        Ok(self.eval(OmegaPoint::new(&self.params, y2, y3)?)?.value)
    }

    /// Homogeneous extension to `{y3 >= |y1 - y2|^p}`, symmetric under swapping
    /// and joint negation of `y1, y2`.
    pub fn n(&self, y1: f64, y2: f64, y3: f64) -> Result<f64> {
        let p = self.params.p();
        if !y1.is_finite() || !y2.is_finite() || !y3.is_finite() {
            return Err(Error::Domain(format!("({y1}, {y2}, {y3}) is not finite")));
        }
        let floor = (y1 - y2).abs().powf(p);
        if y3 < floor * (1.0 - MEMBERSHIP_SLACK) {
            return Err(Error::Domain(format!(
                "y3 = {y3} below |y1 - y2|^p = {floor}"
            )));
        }
        let (mut u, mut v) = if y1.abs() >= y2.abs() {
            (y1, y2)
        } else {
            (y2, y1)
        };
        if u < 0.0 {
            u = -u;
            v = -v;
        }
        if u < 1e-300 {
            // All directions share the same asymptotic slope.
            return Ok(self.t2_vertical * y3);
        }
        let scale = u.powf(p);
        let z2 = (v / u).clamp(-1.0, 1.0);
        let z3 = (y3 / scale).max((1.0 - z2).powf(p));
        if !z3.is_finite() {
            return Err(Error::DegenerateScale);
        }
        Ok(scale * self.b(z2, z3)?)
    }

    /// `H(x1, x2, x3) = N((x1 + x2)/2, (x2 - x1)/2, x3)` on `{|x1|^p <= x3}`.
    pub fn h(&self, x1: f64, x2: f64, x3: f64) -> Result<f64> {
        let floor = x1.abs().powf(self.params.p());
        if !(x3 >= floor * (1.0 - MEMBERSHIP_SLACK)) {
            return Err(Error::Domain(format!("x3 = {x3} below |x1|^p = {floor}")));
        }
        self.n(0.5 * (x1 + x2), 0.5 * (x2 - x1), x3)
    }

    /// Gradient of `B` on the cup tabulation node, for diagnostics.
    pub fn cup_node(&self, s: f64) -> Option<Result<CupNode>> {
        self.profile.as_ref().map(|p| p.exact_at(s))
    }

    /// Writes `y2,y3,region,s,B,t1,t2` for a row-major grid.
    pub fn write_grid_csv<W: Write>(&self, grid: &GridSpec, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["y2", "y3", "region", "s", "B", "t1", "t2"])
            .map_err(io)?;
        for (y2, y3) in grid.points(&self.params) {
            let e = self.eval(OmegaPoint::new(&self.params, y2, y3)?)?;
            let f = crate::io::fmt17;
            w.write_record([
                f(y2),
                f(y3),
                e.region.to_string(),
                f(e.s),
                f(e.value),
                f(e.grad.0),
                f(e.grad.1),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

fn fan_t2_raw(cv: &Curves, yp: f64, s: f64) -> f64 {
    (cv.f(s) - (s - yp) * cv.f1(s)) / (cv.g(s) - (s - yp) * cv.g1(s))
}

/// Rectangular grid in `(y2, y3)`: `y2` uniform on `[-1, 1]` and `y3` uniform
/// from the boundary `g(y2)` up to `y3_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub n_y2: usize,
    pub n_y3: usize,
    pub y3_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_y2: 41,
            n_y3: 41,
            y3_max: 20.0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self, params: &ProblemParams) -> Result<()> {
        let gmax = 2f64.powf(params.p());
        if !(self.y3_max.is_finite() && self.y3_max > gmax) {
            return Err(Error::Domain(format!("y3-max must exceed 2^p = {gmax}")));
        }
        Ok(())
    }

    /// Row-major points (`y2` outer, `y3` inner). The first point of each row sits on the boundary.
    pub fn points(&self, params: &ProblemParams) -> Vec<(f64, f64)> {
        let p = params.p();
        let mut out = Vec::with_capacity(self.n_y2 * self.n_y3);
        for i in 0..self.n_y2 {
            let y2 = if self.n_y2 == 1 {
                0.0
            } else {
                -1.0 + 2.0 * i as f64 / (self.n_y2 - 1) as f64
            };
            let g = (1.0 - y2).powf(p);
            for j in 0..self.n_y3 {
                let y3 = if self.n_y3 == 1 {
                    g
                } else {
                    g + (self.y3_max - g) * j as f64 / (self.n_y3 - 1) as f64
                };
                out.push((y2, y3));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surf(p: f64, tau: f64) -> Surface {
        Surface::build(&ProblemParams::new(p, tau).unwrap()).unwrap()
    }

    #[test]
    fn h_examples() {
        let q = ProblemParams::new(1.5, 1.0).unwrap();
        assert!((h_of_s(&q, -1.0).unwrap() - 2f64.powf(1.5)).abs() < 1e-14);
        assert!((h_of_s(&q, 0.0).unwrap() - 4.0).abs() < 1e-14);
        assert!(h_of_s(&q, 1.0 / 3.0).is_err());
        assert!(h_of_s(&q, 1.0 / 3.0 - 1e-12).unwrap() > 1e11);
    }

    #[test]
    fn membership_is_enforced() {
        let q = ProblemParams::new(1.5, 1.0).unwrap();
        assert!(OmegaPoint::new(&q, 0.0, 0.5).is_err());
        assert!(OmegaPoint::new(&q, 1.5, 5.0).is_err());
        let snapped = OmegaPoint::new(&q, 0.0, 1.0 - 1e-15).unwrap();
        assert_eq!(snapped.y3, 1.0);
    }

    #[test]
    fn boundary_points_return_boundary_data() {
        let s = surf(1.5, 3.0);
        for i in 0..=40 {
            let y2 = -1.0 + i as f64 / 20.0;
            let g = s.curves().g(y2);
            let e = s.eval(OmegaPoint::new(s.params(), y2, g).unwrap()).unwrap();
            assert_eq!(e.region, Region::Boundary);
            assert_eq!(e.value, s.curves().f(y2));
        }
    }

    #[test]
    fn case_one_vertical_slope() {
        let s = surf(1.5, 1.0);
        assert_eq!(s.case(), Case::I);
        let slope = 5f64.powf(0.75);
        assert!((s.t2_vertical() - slope).abs() < 1e-12);
        let e = s
            .eval(OmegaPoint::new(s.params(), 0.6, 3.0).unwrap())
            .unwrap();
        assert_eq!(e.region, Region::Vertical);
        assert!((e.value - (s.curves().f(0.6) + slope * (3.0 - s.curves().g(0.6)))).abs() < 1e-12);
    }

    #[test]
    fn regions_in_both_cases() {
        let one = surf(1.5, 1.0);
        let prof = one.profile().unwrap();
        let mid = 0.5 * (prof.c + prof.s0);
        let below = 0.5 * (one.curves().g(mid) + one.chord0(mid));
        assert_eq!(
            one.classify(OmegaPoint { y2: mid, y3: below }).unwrap().0,
            Region::Cup
        );
        let ang_y3 = 0.5 * (one.chord0(-0.9) + one.fan_line(one.s0(), -0.9));
        assert_eq!(
            one.classify(OmegaPoint {
                y2: -0.9,
                y3: ang_y3
            })
            .unwrap()
            .0,
            Region::Ang
        );
        let (r, s) = one.classify(OmegaPoint { y2: -1.0, y3: 50.0 }).unwrap();
        assert_eq!(r, Region::LeftFan);
        assert!((h_of_s(one.params(), s).unwrap() - 50.0).abs() < 1e-9);

        let two = surf(1.5, 3.0);
        assert_eq!(two.case(), Case::II);
        assert_eq!(
            two.classify(OmegaPoint { y2: -1.0, y3: 50.0 }).unwrap().0,
            Region::Ang
        );
        assert_eq!(
            two.classify(OmegaPoint { y2: 0.95, y3: 50.0 }).unwrap().0,
            Region::Vertical
        );
    }

    #[test]
    fn cup_points_recover_their_chord() {
        let s = surf(1.5, 3.0);
        let prof = s.profile().unwrap();
        for frac in [0.01, 0.3, 0.7, 0.99] {
            let sv = prof.c + frac * (prof.s0 - prof.c);
            let a = prof.a_at(sv);
            let y2 = 0.4 * a + 0.6 * sv;
            let y3 = 0.4 * s.curves().g(a) + 0.6 * s.curves().g(sv);
            let (r, found) = s.classify(OmegaPoint { y2, y3 }).unwrap();
            assert_eq!(r, Region::Cup);
            assert!((found - sv).abs() < 1e-9, "{found} vs {sv}");
        }
    }

    #[test]
    fn fan_gradient_matches_cup_at_s0() {
        let s = surf(1.5, 0.5);
        assert_eq!(s.case(), Case::I);
        let (t1, t2) = s.t_at_s0();
        let (f1, f2) = s.fan_gradient(s.s0());
        assert!((t2 - f2).abs() < 1e-8 * f2);
        assert!((t1 - f1).abs() < 1e-8 * (1.0 + f1.abs()));
    }

    #[test]
    fn fan_t2_solves_gradient_ode() {
        // t2' = g'' (f''/g'' - t2) cos(theta) / K along the fan, integrated with RK4 from s0.
        let s = surf(1.5, 0.5);
        let cv = *s.curves();
        let q = *s.params();
        let rhs = |x: f64, t2: f64| {
            let h = h_of_s(&q, x).unwrap();
            let theta = (h - cv.g(x)).atan2(-1.0 - x);
            let k = cv.g1(x) * theta.cos() - theta.sin();
            cv.g2(x) * (cv.r(x) - t2) * theta.cos() / k
        };
        let mut x = s.s0();
        let mut t2 = s.t_at_s0().1;
        let end = 0.3;
        let n = 2000;
        let h = (end - x) / n as f64;
        for _ in 0..n {
            let k1 = rhs(x, t2);
            let k2 = rhs(x + 0.5 * h, t2 + 0.5 * h * k1);
            let k3 = rhs(x + 0.5 * h, t2 + 0.5 * h * k2);
            let k4 = rhs(x + h, t2 + h * k3);
            t2 += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            x += h;
        }
        assert!(
            (t2 - s.fan_t2(end)).abs() < 1e-7 * t2,
            "{t2} vs {}",
            s.fan_t2(end)
        );
    }

    #[test]
    fn linear_along_segments() {
        let s = surf(1.5, 1.0);
        let prof = s.profile().unwrap();
        let cv = *s.curves();
        let sv = prof.c + 0.5 * (prof.s0 - prof.c);
        let a = prof.a_at(sv);
        let (pa, pb) = ((a, cv.g(a)), (sv, cv.g(sv)));
        for al in [0.2, 0.5, 0.8] {
            let y2 = al * pa.0 + (1.0 - al) * pb.0;
            let y3 = al * pa.1 + (1.0 - al) * pb.1;
            let v = s.b(y2, y3).unwrap();
            let lin = al * cv.f(a) + (1.0 - al) * cv.f(sv);
            assert!((v - lin).abs() < 1e-10 * lin, "{v} vs {lin}");
        }
    }

    #[test]
    fn unperturbed_surface_has_no_cup() {
        let s = surf(1.5, 0.0);
        assert!(s.profile().is_none());
        assert_eq!(s.s0(), -1.0);
        assert!((s.t2_vertical() - 2f64.powf(1.5)).abs() < 1e-12);
        let e = s
            .eval(OmegaPoint::new(s.params(), -0.5, 4.0).unwrap())
            .unwrap();
        assert_eq!(e.region, Region::LeftFan);
    }

    #[test]
    fn n_symmetry_and_homogeneity() {
        let s = surf(1.5, 3.0);
        let v = s.n(2.0, 0.5, 5.0).unwrap();
        assert!((v - s.n(0.5, 2.0, 5.0).unwrap()).abs() < 1e-12 * v);
        assert!((v - s.n(-2.0, -0.5, 5.0).unwrap()).abs() < 1e-12 * v);
        let lam: f64 = 3.0;
        let w = s.n(lam * 2.0, lam * 0.5, lam.powf(1.5) * 5.0).unwrap();
        assert!((w - lam.powf(1.5) * v).abs() < 1e-11 * w);
        assert!(s.n(1.0, 0.0, 0.5).is_err());
        assert!((s.n(0.0, 0.0, 2.0).unwrap() - 2.0 * s.t2_vertical()).abs() < 1e-12);
    }

    #[test]
    fn h_reproduces_boundary_condition() {
        let s = surf(1.5, 3.0);
        for (x1, x2) in [(0.3, -1.2), (-2.0, 0.7), (1.0, 1.0), (0.0, 2.0)] {
            let x3 = f64::abs(x1).powf(1.5);
            let v = s.h(x1, x2, x3).unwrap();
            let exact = (x2 * x2 + 9.0 * x1 * x1).powf(0.75);
            assert!((v - exact).abs() < 1e-10 * exact.max(1.0), "{v} vs {exact}");
        }
        assert!(s.h(2.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn grid_rows_start_on_boundary() {
        let q = ProblemParams::new(1.5, 1.0).unwrap();
        let g = GridSpec {
            n_y2: 3,
            n_y3: 4,
            y3_max: 10.0,
        };
        let pts = g.points(&q);
        assert_eq!(pts.len(), 12);
        assert_eq!(pts[0], (-1.0, 2f64.powf(1.5)));
        assert_eq!(pts[11], (1.0, 10.0));
        assert!(GridSpec { y3_max: 1.0, ..g }.validate(&q).is_err());
    }
}
