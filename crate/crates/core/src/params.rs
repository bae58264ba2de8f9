use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Scalar parameters of the model problem.
///
/// `x_shift` is the small positive shift of the Holmgren transformation
/// (written `X` in reports), `t_horizon` the time horizon `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Fractional time order, in (0, 1).
    pub alpha: f64,
    /// Exponential time conjugation rate, strictly negative.
    pub tau0: f64,
    /// Holmgren shift X, 0 < X <= 0.25.
    #[serde(rename = "x")]
    pub x_shift: f64,
    /// Time horizon T > 0.
    #[serde(rename = "t")]
    pub t_horizon: f64,
    /// Space dimension n >= 1.
    pub n: usize,
    /// Half-width of the localization box.
    pub l: f64,
    /// Time-cutoff margin, 0 < eps < T.
    pub eps: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            alpha: 0.5,
            tau0: -1.0,
            x_shift: 0.1,
            t_horizon: 1.0,
            n: 2,
            l: 1.0,
            eps: 0.2,
        }
    }
}

impl ProblemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(LabError::Domain(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if !(self.tau0 < 0.0) {
            return Err(LabError::Domain(format!(
                "tau0 must be negative, got {}",
                self.tau0
            )));
        }
        if !(self.x_shift > 0.0 && self.x_shift <= 0.25) {
            return Err(LabError::Domain(format!(
                "x must satisfy 0 < x <= 0.25, got {}",
                self.x_shift
            )));
        }
        if !(self.t_horizon > 0.0) {
            return Err(LabError::Domain(format!(
                "t must be positive, got {}",
                self.t_horizon
            )));
        }
        if self.n < 1 {
            return Err(LabError::Domain("n must be >= 1".into()));
        }
        if !(self.l > 0.0) {
            return Err(LabError::Domain(format!(
                "l must be positive, got {}",
                self.l
            )));
        }
        if !(self.eps > 0.0 && self.eps < self.t_horizon) {
            return Err(LabError::Domain(format!(
                "eps must satisfy 0 < eps < t, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// A point (x; tau, xi, sigma) of the extended phase space.
///
/// `x` and `xi` have length `n`; the last entries are `x_n`, `xi_n` and the
/// leading `n-1` entries form `x'`, `xi'`. Symbols only use `|sigma|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub tau: f64,
    pub xi: Vec<f64>,
    pub sigma: f64,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, tau: f64, xi: Vec<f64>, sigma: f64) -> Self {
        assert_eq!(x.len(), xi.len(), "x and xi must have equal length");
        PhasePoint { x, tau, xi, sigma }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn x_n(&self) -> f64 {
        *self.x.last().expect("phase point has dimension >= 1")
    }

    pub fn xi_n(&self) -> f64 {
        *self.xi.last().expect("phase point has dimension >= 1")
    }

    /// g(x', xi') = sum_{j<n} x_j xi_j.
    pub fn g(&self) -> f64 {
        let n = self.dim();
        (0..n - 1).map(|j| self.x[j] * self.xi[j]).sum()
    }

    /// f(x') = 1 + 4|x'|^2.
    pub fn f(&self) -> f64 {
        let n = self.dim();
        1.0 + 4.0 * (0..n - 1).map(|j| self.x[j] * self.x[j]).sum::<f64>()
    }

    pub fn x_prime_norm_sq(&self) -> f64 {
        let n = self.dim();
        (0..n - 1).map(|j| self.x[j] * self.x[j]).sum()
    }

    pub fn xi_prime_norm_sq(&self) -> f64 {
        let n = self.dim();
        (0..n - 1).map(|j| self.xi[j] * self.xi[j]).sum()
    }

    pub fn xi_norm_sq(&self) -> f64 {
        self.xi.iter().map(|v| v * v).sum()
    }
}
