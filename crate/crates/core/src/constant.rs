//! Sharp constants `C(beta)` in `E(G^2 + tau^2 F^2)^{p/2} <= C(beta) E|F|^p`
//! for pairs starting with `|EG| <= beta |EF|`.
//!
//! Which branch applies depends on the case selector `u(1/(p-1))` and, in the
//! second case, on where `beta' = (beta - 1)/(beta + 1)` falls relative to
//! `y_p` and the auxiliary root `s*`.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::boundary::{Curves, u_raw};
use crate::cup::CupProfile;
use crate::error::{Error, Result};
use crate::params::ProblemParams;
use crate::roots::{RootOptions, bisect};

/// Residual band of the case selector treated as the first case.
pub const CASE_TOL: f64 = 1e-12;
/// Agreement required between the closed form and the chord slope at `s0`.
pub const CLOSED_FORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Case {
    I,
    II,
}

impl Case {
    pub fn name(self) -> &'static str {
        match self {
            Case::I => "CaseI",
            Case::II => "CaseII",
        }
    }
}

/// Value of the case selector `u(1/(p-1))`.
pub fn case_selector(params: &ProblemParams) -> f64 {
    u_raw(params, 1.0 / (params.p() - 1.0))
}

pub fn select_case(params: &ProblemParams) -> Case {
    if params.is_unperturbed() || case_selector(params) <= CASE_TOL {
        Case::I
    } else {
        Case::II
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Branch {
    CaseI,
    #[serde(rename = "CaseII_HighBeta")]
    CaseIIHighBeta,
    #[serde(rename = "CaseII_LowBeta")]
    CaseIILowBeta,
    #[serde(rename = "CaseII_Middle")]
    CaseIIMiddle,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::CaseI => "CaseI",
            Branch::CaseIIHighBeta => "CaseII_HighBeta",
            Branch::CaseIILowBeta => "CaseII_LowBeta",
            Branch::CaseIIMiddle => "CaseII_Middle",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantReport {
    pub case: Branch,
    pub beta: f64,
    pub beta_prime: f64,
    pub s0: Option<f64>,
    pub s_star: Option<f64>,
    pub s1: Option<f64>,
    #[serde(rename = "C_power")]
    pub c_power: f64,
    #[serde(rename = "C_norm")]
    pub c_norm: f64,
    pub residuals: BTreeMap<String, f64>,
}

/// `beta' = (beta - 1)/(beta + 1)`, with `beta = inf` mapped to 1.
pub fn beta_prime(beta: f64) -> f64 {
    if beta.is_infinite() {
        1.0
    } else {
        (beta - 1.0) / (beta + 1.0)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::Domain(format!(
            "beta must be nonnegative, got {beta}"
        )));
    }
    Ok(())
}

fn report(case: Branch, beta: f64, c_power: f64) -> ConstantReport {
    ConstantReport {
        case,
        beta,
        beta_prime: beta_prime(beta),
        s0: None,
        s_star: None,
        s1: None,
        c_power,
        c_norm: f64::NAN,
        residuals: BTreeMap::new(),
    }
}

/// First-case constant `(tau^2 + max(beta, 1/(p-1))^2)^{p/2}`.
pub fn constant_case_i(params: &ProblemParams, beta: f64) -> Result<ConstantReport> {
    check_beta(beta)?;
    if select_case(params) != Case::I {
        return Err(Error::CaseMismatch {
            expected: "CaseI",
            actual: "CaseII",
        });
    }
    let p = params.p();
    let m = beta.max(1.0 / (p - 1.0));
    let c_norm = (params.tau2() + m * m).sqrt();
    let mut r = report(Branch::CaseI, beta, c_norm.powf(p));
    r.c_norm = c_norm;
    Ok(r)
}

/// Closed form of the chord slope `t2(s0)` from the last cup chord.
pub fn low_beta_closed_form(params: &ProblemParams, s0: f64) -> f64 {
    let p = params.p();
    let tau = params.tau();
    let t2 = params.tau2();
    let q = 2f64.powf(2.0 - p) * (1.0 - s0).powf(p - 1.0)
        / ((t2 + 1.0) * (p - 1.0) * (1.0 - s0) + 2.0 * (2.0 - p));
    tau.powf(p) / (1.0 - q)
}

/// Second-case machinery around a built cup profile.
#[derive(Debug, Clone)]
pub struct CaseTwo<'a> {
    params: ProblemParams,
    profile: &'a CupProfile,
    curves: Curves,
    s_star: f64,
}

impl<'a> CaseTwo<'a> {
    pub fn new(params: &ProblemParams, profile: &'a CupProfile) -> Result<Self> {
        if select_case(params) != Case::II {
            return Err(Error::CaseMismatch {
                expected: "CaseII",
                actual: "CaseI",
            });
        }
        let s_star = solve_s_star(params, profile)?;
        Ok(Self {
            params: *params,
            profile,
            curves: Curves::new(params),
            s_star,
        })
    }

    pub fn s_star(&self) -> f64 {
        self.s_star
    }

    pub fn profile(&self) -> &CupProfile {
        self.profile
    }

    /// Smallest `s` whose segment meets the vertical line `y2 = z`.
    pub fn s_min(&self, z: f64) -> Result<f64> {
        if z >= self.profile.c {
            Ok(z)
        } else {
            self.profile.s_of_left(z)
        }
    }

    pub fn r(&self, s: f64, z: f64) -> Result<f64> {
        r_of(&self.params, self.profile, s, z)
    }

    /// Constant for `beta' = z` in the middle branch, with the root `s1`.
    fn middle(&self, z: f64) -> Result<(f64, f64, f64)> {
        let prof = self.profile;
        let lo = (self.s_min(z)? + 1e-12).max(prof.tip);
        let hi = prof.s0 - 1e-12;
        let cv = self.curves;
        let r_interp = |s: f64| {
            let (t1, t2) = prof.gradient(s);
            -cv.f(s) - t1 * (z - s) + t2 * cv.g(s)
        };
        // R(s0, y_p) = 0 and R(s*, s*) = 0, so at the seams the root sits on a bracket end.
        let seam_tol = 1e-9 * cv.f(prof.s0);
        let r_hi = r_interp(hi);
        if r_hi >= 0.0 && r_hi <= seam_tol {
            let (_, t2) = prof.gradient(prof.s0);
            return Ok((prof.s0, t2, r_interp(prof.s0)));
        }
        let r_lo = r_interp(lo);
        if r_lo <= 0.0 && r_lo >= -seam_tol {
            let (_, t2) = prof.gradient(lo);
            return Ok((lo, t2, r_lo));
        }
        let opts = RootOptions {
            x_tol: 1e-15,
            f_tol: 0.0,
            max_iter: 200,
        };
        let s1 = bisect("middle-branch root s1", r_interp, lo, hi, opts)?;
        let (_, t2) = prof.gradient(s1);
        Ok((s1, t2, r_interp(s1)))
    }

    pub fn constant(&self, beta: f64) -> Result<ConstantReport> {
        check_beta(beta)?;
        if beta.is_infinite() {
            return Err(Error::Domain(
                "beta = inf has no finite constant in this case".into(),
            ));
        }
        let z = beta_prime(beta);
        let p = self.params.p();
        let prof = self.profile;
        let mut r = if z <= self.params.y_p() {
            let closed = low_beta_closed_form(&self.params, prof.s0);
            let chord = prof.exact_at(prof.s0)?.t2;
            let rel = (closed - chord).abs() / chord;
            if rel > CLOSED_FORM_TOL {
                return Err(Error::NoSolution(format!(
                    "closed form {closed} disagrees with chord slope {chord}"
                )));
            }
            let mut r = report(Branch::CaseIILowBeta, beta, closed);
            r.residuals.insert("closed_form_vs_chord".into(), rel);
            r
        } else if z <= self.s_star {
            let (s1, c, res) = self.middle(z)?;
            let mut r = report(Branch::CaseIIMiddle, beta, c);
            r.s1 = Some(s1);
            r.residuals.insert("r_at_s1".into(), res);
            r
        } else {
            report(
                Branch::CaseIIHighBeta,
                beta,
                (self.params.tau2() + beta * beta).powf(0.5 * p),
            )
        };
        r.c_norm = r.c_power.powf(1.0 / p);
        r.s0 = Some(prof.s0);
        r.s_star = Some(self.s_star);
        Ok(r)
    }

    /// Constant alone, for bulk callers.
    pub fn c_power(&self, beta: f64) -> Result<f64> {
        let z = beta_prime(beta);
        if z <= self.params.y_p() {
            Ok(low_beta_closed_form(&self.params, self.profile.s0))
        } else if z <= self.s_star {
            Ok(self.middle(z)?.1)
        } else {
            Ok((self.params.tau2() + beta * beta).powf(0.5 * self.params.p()))
        }
    }
}

/// Root `s*` of `t2(s) = f(s)/g(s)` on `[y_p, s0]`.
pub fn solve_s_star(params: &ProblemParams, profile: &CupProfile) -> Result<f64> {
    let cv = Curves::new(params);
    let lo = params.y_p().max(profile.tip);
    let hi = profile.s0;
    let gap = |s: f64| profile.t2_at(s).0 - cv.f(s) / cv.g(s);
    let opts = RootOptions {
        x_tol: 1e-15,
        f_tol: 0.0,
        max_iter: 200,
    };
    bisect("s*", gap, lo, hi, opts)
}

/// `R(s, z) = -f(s) - t1(s)(z - s) + t2(s) g(s)` on the cup.
pub fn r_of(params: &ProblemParams, profile: &CupProfile, s: f64, z: f64) -> Result<f64> {
    if !(z >= -1.0 && z <= profile.s0) {
        return Err(Error::Domain(format!("z = {z} outside [-1, s0]")));
    }
    let s_min = if z >= profile.c {
        z
    } else {
        profile.s_of_left(z)?
    };
    let slack = 1e-12;
    if !(s >= s_min - slack && s <= profile.s0 + slack) {
        return Err(Error::Domain(format!(
            "s = {s} outside [{s_min}, {}] for z = {z}",
            profile.s0
        )));
    }
    let cv = Curves::new(params);
    let s = s.clamp(profile.tip, profile.s0);
    let (t1, t2) = profile.gradient(s);
    Ok(-cv.f(s) - t1 * (z - s) + t2 * cv.g(s))
}

/// Branch-dispatching constant that builds the cup only when needed.
#[derive(Debug, Clone)]
pub struct ConstantSolver {
    params: ProblemParams,
    case: Case,
    profile: Option<CupProfile>,
    s_star: Option<f64>,
}

impl ConstantSolver {
    pub fn new(params: &ProblemParams) -> Result<Self> {
        let case = select_case(params);
        let (profile, s_star) = match case {
            Case::I => (None, None),
            Case::II => {
                let prof = CupProfile::build(params)?;
                let s = solve_s_star(params, &prof)?;
                (Some(prof), Some(s))
            }
        };
        Ok(Self {
            params: *params,
            case,
            profile,
            s_star,
        })
    }

    pub fn case(&self) -> Case {
        self.case
    }

    pub fn profile(&self) -> Option<&CupProfile> {
        self.profile.as_ref()
    }

    fn two(&self) -> Option<CaseTwo<'_>> {
        self.profile.as_ref().map(|profile| CaseTwo {
            params: self.params,
            profile,
            curves: Curves::new(&self.params),
            s_star: self.s_star.expect("s* computed with the profile"),
        })
    }

    pub fn report(&self, beta: f64) -> Result<ConstantReport> {
        match self.two() {
            None => constant_case_i(&self.params, beta),
            Some(two) => two.constant(beta),
        }
    }

    pub fn c_power(&self, beta: f64) -> Result<f64> {
        match self.two() {
            None => Ok(constant_case_i(&self.params, beta)?.c_power),
            Some(two) => {
                check_beta(beta)?;
                two.c_power(beta)
            }
        }
    }
}

/// One-shot constant for `(params, beta)`.
pub fn sharp_constant(params: &ProblemParams, beta: f64) -> Result<ConstantReport> {
    ConstantSolver::new(params)?.report(beta)
}

/// Largest `tau` of the first case at this `p`, by bisection on the case selector.
pub fn case_threshold(p: f64) -> Result<f64> {
    let sel = |tau: f64| case_selector(&ProblemParams::new(p, tau).expect("valid p"));
    ProblemParams::new(p, 0.0)?;
    let mut hi = 1.0;
    while sel(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Bracket {
                what: "case threshold",
                lo: 0.0,
                hi,
            });
        }
    }
    bisect(
        "case threshold",
        sel,
        1e-6,
        hi,
        RootOptions {
            x_tol: 1e-13,
            f_tol: 0.0,
            max_iter: 200,
        },
    )
}
