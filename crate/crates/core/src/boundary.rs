//! Boundary curves of the reduced domain and the scalar functions built on them.
//!
//! The lower boundary is `g(s) = (1-s)^p` and the boundary data is
//! `f(s) = Q(s)^{p/2}` with `Q(s) = (1+s)^2 + tau^2 (1-s)^2`, for `s` in [-1, 1].
//! Everything here is closed form; nothing is differentiated numerically.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ProblemParams;
use crate::roots::{RootOptions, newton_bracketed};

/// Values and derivatives of `g` and `f` at one parameter value.
///
/// Index `k` of `g` and `f` holds the `k`-th derivative. Entries above the
/// requested order are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub s: f64,
    pub g: [f64; 4],
    pub f: [f64; 4],
}

/// Cheap unchecked evaluators used on hot paths.
#[derive(Debug, Clone, Copy)]
pub struct Curves {
    p: f64,
    t2: f64,
}

impl Curves {
    pub fn new(params: &ProblemParams) -> Self {
        Self {
            p: params.p(),
            t2: params.tau2(),
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn g(&self, s: f64) -> f64 {
        (1.0 - s).powf(self.p)
    }

    pub fn g1(&self, s: f64) -> f64 {
        -self.p * (1.0 - s).powf(self.p - 1.0)
    }

    pub fn g2(&self, s: f64) -> f64 {
        self.p * (self.p - 1.0) * (1.0 - s).powf(self.p - 2.0)
    }

    pub fn g3(&self, s: f64) -> f64 {
        self.p * (self.p - 1.0) * (2.0 - self.p) * (1.0 - s).powf(self.p - 3.0)
    }

    pub fn q(&self, s: f64) -> f64 {
        (1.0 + s).powi(2) + self.t2 * (1.0 - s).powi(2)
    }

    fn q1(&self, s: f64) -> f64 {
        2.0 * (1.0 + s) - 2.0 * self.t2 * (1.0 - s)
    }

    fn q2(&self) -> f64 {
        2.0 + 2.0 * self.t2
    }

    pub fn f(&self, s: f64) -> f64 {
        self.q(s).powf(0.5 * self.p)
    }

    pub fn f1(&self, s: f64) -> f64 {
        let h = 0.5 * self.p;
        let q = self.q(s);
        if q == 0.0 {
            return 0.0;
        }
        h * q.powf(h - 1.0) * self.q1(s)
    }

    pub fn f2(&self, s: f64) -> f64 {
        let h = 0.5 * self.p;
        let q = self.q(s);
        let q1 = self.q1(s);
        h * (h - 1.0) * q.powf(h - 2.0) * q1 * q1 + h * q.powf(h - 1.0) * self.q2()
    }

    pub fn f3(&self, s: f64) -> f64 {
        let h = 0.5 * self.p;
        let q = self.q(s);
        let q1 = self.q1(s);
        h * (h - 1.0) * (h - 2.0) * q.powf(h - 3.0) * q1.powi(3)
            + 3.0 * h * (h - 1.0) * q.powf(h - 2.0) * q1 * self.q2()
    }

    /// Ratio `f''/g''`.
    pub fn r(&self, s: f64) -> f64 {
        self.f2(s) / self.g2(s)
    }

    /// Derivative of `f''/g''` through the torsion polynomial, free of cancellation
    /// near the torsion root.
    pub fn r1(&self, s: f64) -> f64 {
        let p = self.p;
        2.0 * (2.0 - p) / (p - 1.0)
            * self.v(s)
            * self.q(s).powf(0.5 * p - 3.0)
            * (1.0 - s).powf(1.0 - p)
    }

    pub fn v(&self, t: f64) -> f64 {
        let c = torsion_coefficients(self.p, self.t2);
        ((c[3] * t + c[2]) * t + c[1]) * t + c[0]
    }
}

/// Coefficients `[c0, c1, c2, c3]` of the torsion cubic.
pub fn torsion_coefficients(p: f64, t2: f64) -> [f64; 4] {
    let t4 = t2 * t2;
    [
        -p + 5.0 * t4 + 2.0 * t2 * p - t4 * p - 10.0 * t2 + 1.0,
        2.0 * t2 * p - 9.0 * t4 + t4 * p + 3.0 - 3.0 * p - 6.0 * t2,
        (1.0 + t2) * (3.0 * t2 + t2 * p + 3.0 - 3.0 * p),
        -(1.0 + t2).powi(2) * (p - 1.0),
    ]
}

/// Evaluates `g`, `f` and their derivatives up to `order`.
pub fn curve_eval(params: &ProblemParams, s: f64, order: u8) -> Result<CurvePoint> {
    if !(-1.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("s = {s} outside [-1, 1]")));
    }
    if order > 3 {
        return Err(Error::Domain(format!("derivative order {order} above 3")));
    }
    if s == 1.0 && order >= 2 {
        return Err(Error::Singularity { order: 2, s });
    }
    if params.is_unperturbed() && s == -1.0 && order >= 2 {
        return Err(Error::Singularity { order: 2, s });
    }
    let c = Curves::new(params);
    let mut g = [f64::NAN; 4];
    let mut f = [f64::NAN; 4];
    g[0] = c.g(s);
    f[0] = c.f(s);
    if order >= 1 {
        g[1] = c.g1(s);
        f[1] = c.f1(s);
    }
    if order >= 2 {
        g[2] = c.g2(s);
        f[2] = c.f2(s);
    }
    if order >= 3 {
        g[3] = c.g3(s);
        f[3] = c.f3(s);
    }
    Ok(CurvePoint { s, g, f })
}

/// Case selector `u(z)`.
pub fn u_of_z(params: &ProblemParams, z: f64) -> Result<f64> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!(
            "z = {z} must be finite and nonnegative"
        )));
    }
    Ok(u_raw(params, z))
}

pub(crate) fn u_raw(params: &ProblemParams, z: f64) -> f64 {
    let p = params.p();
    let tau = params.tau();
    let t2 = params.tau2();
    let lead = if tau == 0.0 {
        0.0
    } else {
        tau.powf(p) * (p - 1.0) * (t2 + z * z).powf(0.5 * (2.0 - p))
    };
    lead - t2 * (p - 1.0) + (1.0 + z).powf(2.0 - p) - z * (2.0 - p) - 1.0
}

pub(crate) fn u_prime(params: &ProblemParams, z: f64) -> f64 {
    let p = params.p();
    let tau = params.tau();
    let t2 = params.tau2();
    let lead = if tau == 0.0 {
        0.0
    } else {
        tau.powf(p) * (p - 1.0) * (2.0 - p) * z * (t2 + z * z).powf(-0.5 * p)
    };
    lead + (2.0 - p) * (1.0 + z).powf(1.0 - p) - (2.0 - p)
}

/// The torsion cubic together with its unique root in (-1, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TorsionPoly {
    pub coeffs: [f64; 4],
    pub root: f64,
}

impl TorsionPoly {
    pub fn eval(&self, t: f64) -> f64 {
        let c = &self.coeffs;
        ((c[3] * t + c[2]) * t + c[1]) * t + c[0]
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let c = &self.coeffs;
        (3.0 * c[3] * t + 2.0 * c[2]) * t + c[1]
    }
}

/// Root `c` of the torsion cubic. Requires `tau > 0`.
pub fn torsion_root(params: &ProblemParams) -> Result<TorsionPoly> {
    if params.is_unperturbed() {
        return Err(Error::Domain("torsion root requires tau > 0".into()));
    }
    let coeffs = torsion_coefficients(params.p(), params.tau2());
    let mut poly = TorsionPoly {
        coeffs,
        root: f64::NAN,
    };
    let lo = -1.0;
    let hi = 1.0;
    if !(poly.eval(lo) > 0.0) || !(poly.eval(hi) < 0.0) {
        return Err(Error::Bracket {
            what: "torsion root",
            lo,
            hi,
        });
    }
    let opts = RootOptions {
        x_tol: 1e-15,
        f_tol: 0.0,
        max_iter: 200,
    };
    let c = newton_bracketed(
        "torsion root",
        |t| (poly.eval(t), poly.deriv(t)),
        lo,
        hi,
        None,
        opts,
    )?;
    poly.root = c;
    Ok(poly)
}

/// Sign of the torsion of the space curve `(s, g, f)`: +1 left of the root,
/// -1 right of it, 0 where `|v(s)| <= tol`.
pub fn torsion_sign(params: &ProblemParams, s: f64, tol: f64) -> Result<i8> {
    if !(s > -1.0 && s < 1.0) {
        return Err(Error::Domain(format!("s = {s} outside (-1, 1)")));
    }
    let v = Curves::new(params).v(s);
    Ok(if v.abs() <= tol {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    })
}
