//! Black forward-measure pricing and implied-volatility inversion.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Result, SabrError};

/// Below this total volatility the option is priced at intrinsic value.
const MIN_TOTAL_VOL: f64 = 1e-10;

pub const IV_LOWER: f64 = 1e-8;
pub const IV_UPPER: f64 = 5.0;
pub const IV_UPPER_MAX: f64 = 100.0;
pub const IV_MAX_ITER: usize = 200;
/// Price tolerance relative to the forward.
pub const IV_PRICE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlackInputs {
    pub t: f64,
    pub f0: f64,
    pub k: f64,
    pub sigma: f64,
}

impl BlackInputs {
    pub fn new(t: f64, f0: f64, k: f64, sigma: f64) -> Result<Self> {
        let inputs = Self { t, f0, k, sigma };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        validate_contract(self.t, self.f0, self.k)?;
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(SabrError::InvalidInput(format!("sigma = {}", self.sigma)));
        }
        Ok(())
    }
}

fn validate_contract(t: f64, f0: f64, k: f64) -> Result<()> {
    for (name, v) in [("T", t), ("F0", f0), ("K", k)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(SabrError::InvalidInput(format!("{name} = {v}")));
        }
    }
    Ok(())
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Undiscounted Black call price `F0 N(d1) - K N(d2)`.
pub fn black_price(inputs: &BlackInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(black_call(inputs.t, inputs.f0, inputs.k, inputs.sigma))
}

/// Unchecked Black call. Callers guarantee positive `t`, `f0`, `k`.
pub(crate) fn black_call(t: f64, f0: f64, k: f64, sigma: f64) -> f64 {
    let total = sigma * t.sqrt();
    let intrinsic = (f0 - k).max(0.0);
    if total < MIN_TOTAL_VOL {
        return intrinsic;
    }
    let d1 = ((f0 / k).ln() + 0.5 * total * total) / total;
    let d2 = d1 - total;
    // Price the out-of-the-money side and add intrinsic value: it keeps the
    // small time value free of cancellation.
    let price = if k < f0 {
        let put = k * normal_cdf(-d2) - f0 * normal_cdf(-d1);
        intrinsic + put.max(0.0)
    } else {
        f0 * normal_cdf(d1) - k * normal_cdf(d2)
    };
    price.clamp(intrinsic, f0)
}

/// Black vega `∂C/∂σ = F0 φ(d1) √T`.
pub fn black_vega(t: f64, f0: f64, k: f64, sigma: f64) -> f64 {
    let total = sigma * t.sqrt();
    if total < MIN_TOTAL_VOL {
        return 0.0;
    }
    let d1 = ((f0 / k).ln() + 0.5 * total * total) / total;
    f0 * normal_pdf(d1) * t.sqrt()
}

/// Invert the Black formula for the volatility.
///
/// Newton iterations on the analytic vega, safeguarded by a bisection
/// bracket that starts at `[1e-8, 5]` and doubles its upper end up to 100.
pub fn implied_vol(price: f64, t: f64, f0: f64, k: f64) -> Result<f64> {
    validate_contract(t, f0, k)?;
    let intrinsic = (f0 - k).max(0.0);
    if !(price.is_finite() && price > intrinsic && price < f0) {
        return Err(SabrError::PriceOutOfBounds {
            price,
            lower: intrinsic,
            upper: f0,
        });
    }
    let tol = IV_PRICE_TOL * f0;
    let objective = |s: f64| black_call(t, f0, k, s) - price;

    let mut lo = IV_LOWER;
    let mut hi = IV_UPPER;
    while objective(hi) < 0.0 {
        if hi >= IV_UPPER_MAX {
            return Err(SabrError::NoConvergence { iterations: 0 });
        }
        hi = (2.0 * hi).min(IV_UPPER_MAX);
    }
    let f_lo = objective(lo);
    if f_lo >= 0.0 {
        if f_lo <= tol {
            return Ok(lo);
        }
        return Err(SabrError::NoConvergence { iterations: 0 });
    }

    // Start from the larger of the ATM and moneyness-based guesses.
    let atm_guess = price / f0 * (2.0 * PI / t).sqrt();
    let moneyness_guess = (2.0 * (f0 / k).ln().abs() / t).sqrt();
    let mut sigma = atm_guess.max(moneyness_guess);
    if !(sigma > lo && sigma < hi) {
        sigma = 0.5 * (lo + hi);
    }

    let mut polish = 0;
    for _ in 0..IV_MAX_ITER {
        let f = objective(sigma);
        if f == 0.0 {
            return Ok(sigma);
        }
        if f > 0.0 {
            hi = sigma;
        } else {
            lo = sigma;
        }
        let vega = black_vega(t, f0, k, sigma);
        let newton = if vega > 0.0 { sigma - f / vega } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - sigma).abs();
        if f.abs() <= tol {
            // Within price tolerance: polish until the step stalls.
            if step <= 1e-14 * sigma || polish >= 8 {
                return Ok(next);
            }
            polish += 1;
        }
        if hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        sigma = next;
    }
    Err(SabrError::NoConvergence {
        iterations: IV_MAX_ITER,
    })
}
