//! SABR parameter sets.
//!
//! A [`SabrConfig`] is everything a Monte Carlo run needs (no strike); a
//! [`SabrPoint`] pins one strike on top of it.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SabrError};

/// Correlation bound enforced on every parameter set.
pub const RHO_BOUND: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SabrConfig {
    /// Maturity in years.
    pub t: f64,
    pub f0: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SabrPoint {
    pub t: f64,
    pub f0: f64,
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub nu: f64,
}

fn check(cond: bool, what: &str, value: f64) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(SabrError::InvalidInput(format!("{what} = {value}")))
    }
}

impl SabrConfig {
    pub fn new(t: f64, f0: f64, alpha: f64, beta: f64, rho: f64, nu: f64) -> Result<Self> {
        let c = Self { t, f0, alpha, beta, rho, nu };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.t.is_finite() && self.t > 0.0, "T", self.t)?;
        check(self.f0.is_finite() && self.f0 > 0.0, "F0", self.f0)?;
        check(self.alpha.is_finite() && self.alpha > 0.0, "alpha", self.alpha)?;
        check((0.0..=1.0).contains(&self.beta), "beta", self.beta)?;
        check(self.rho.abs() <= RHO_BOUND, "rho", self.rho)?;
        check(self.nu.is_finite() && self.nu >= 0.0, "nu", self.nu)
    }

    pub fn at_strike(&self, k: f64) -> SabrPoint {
        SabrPoint {
            t: self.t,
            f0: self.f0,
            k,
            alpha: self.alpha,
            beta: self.beta,
            rho: self.rho,
            nu: self.nu,
        }
    }
}

impl SabrPoint {
    #[allow(clippy::too_many_arguments)]
    pub fn new(t: f64, f0: f64, k: f64, alpha: f64, beta: f64, rho: f64, nu: f64) -> Result<Self> {
        let p = Self { t, f0, k, alpha, beta, rho, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.config().validate()?;
        check(self.k.is_finite() && self.k > 0.0, "K", self.k)
    }

    pub fn config(&self) -> SabrConfig {
        SabrConfig {
            t: self.t,
            f0: self.f0,
            alpha: self.alpha,
            beta: self.beta,
            rho: self.rho,
            nu: self.nu,
        }
    }

    /// `(T, F0, K, α, β, ρ, ν)` in the column order used by datasets and networks.
    pub fn to_array(&self) -> [f64; 7] {
        [self.t, self.f0, self.k, self.alpha, self.beta, self.rho, self.nu]
    }

    pub fn from_array(x: [f64; 7]) -> Self {
        Self {
            t: x[0],
            f0: x[1],
            k: x[2],
            alpha: x[3],
            beta: x[4],
            rho: x[5],
            nu: x[6],
        }
    }
}
