use serde::Serialize;

use crate::error::{Error, Result};

/// Margin that keeps `p` away from the endpoints of (1, 2).
pub const P_MARGIN: f64 = 1e-9;

/// Exponent `p` and perturbation `tau` of the inequality.
///
/// `tau` enters only through its square, so it is stored as `|tau|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemParams {
    p: f64,
    tau: f64,
}

impl ProblemParams {
    pub fn new(p: f64, tau: f64) -> Result<Self> {
        if !p.is_finite() || p <= 1.0 + P_MARGIN || p >= 2.0 - P_MARGIN {
            return Err(Error::Domain(format!("p must lie in (1,2), got {p}")));
        }
        if !tau.is_finite() {
            return Err(Error::Domain(format!("tau must be finite, got {tau}")));
        }
        Ok(Self { p, tau: tau.abs() })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn tau2(&self) -> f64 {
        self.tau * self.tau
    }

    /// Abscissa `-1 + 2/p` where the left fan turns vertical.
    pub fn y_p(&self) -> f64 {
        -1.0 + 2.0 / self.p
    }

    /// True in the unperturbed case, where no cup exists.
    pub fn is_unperturbed(&self) -> bool {
        self.tau == 0.0
    }
}
