//! Coupled SABR / lognormal control-variate Monte Carlo.
//!
//! Both forwards are stepped with Euler on the same Brownian increments `W`;
//! the volatility is driven by `Z = ρW + √(1-ρ²)W⊥`. The control variate
//! payoff is subtracted pathwise and its closed-form Black price added back.
//! Terminal values are kept so that every strike of a smile is priced from
//! the same draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SabrError};
use crate::params::{SabrConfig, SabrPoint};
use crate::pricing::{black_call, black_vega, implied_vol};

/// Paths per independent RNG stream.
pub const BLOCK_SIZE: usize = 4096;
pub const MIN_PATHS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvVolMode {
    /// `σ̄ = α`.
    #[default]
    InitialAlpha,
    /// `σ̄ = α F0^{β-1}`, the leading-order lognormal ATM vol.
    EffectiveAtm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaScheme {
    /// `σ ← σ exp(νΔZ - ν²Δt/2)`, exact for the lognormal volatility.
    #[default]
    LogExact,
    /// `σ ← σ + νσΔZ`, floored at zero.
    EulerStrict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub paths: usize,
    pub steps_per_year: f64,
    pub min_steps: usize,
    pub cv_vol_mode: CvVolMode,
    pub sigma_scheme: SigmaScheme,
    pub base_seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            paths: 100_000,
            steps_per_year: 50.0,
            min_steps: 10,
            cv_vol_mode: CvVolMode::InitialAlpha,
            sigma_scheme: SigmaScheme::LogExact,
            base_seed: 42,
        }
    }
}

impl McConfig {
    pub fn with_paths(mut self, paths: usize) -> Self {
        self.paths = paths;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths < MIN_PATHS {
            return Err(SabrError::ConfigError(format!(
                "paths = {} (minimum {MIN_PATHS})",
                self.paths
            )));
        }
        if !(self.steps_per_year.is_finite() && self.steps_per_year > 0.0) {
            return Err(SabrError::ConfigError(format!(
                "steps_per_year = {}",
                self.steps_per_year
            )));
        }
        if self.min_steps == 0 {
            return Err(SabrError::ConfigError("min_steps = 0".into()));
        }
        Ok(())
    }

    /// `N = max(min_steps, ceil(steps_per_year · T))`.
    pub fn steps(&self, t: f64) -> usize {
        let n = (self.steps_per_year * t).ceil();
        (n as usize).max(self.min_steps)
    }

    pub fn sigma_bar(&self, cfg: &SabrConfig) -> f64 {
        match self.cv_vol_mode {
            CvVolMode::InitialAlpha => cfg.alpha,
            CvVolMode::EffectiveAtm => cfg.alpha * cfg.f0.powf(cfg.beta - 1.0),
        }
    }
}

/// Terminal values of the coupled paths, in path order.
#[derive(Debug, Clone, PartialEq)]
pub struct Terminals {
    pub config: SabrConfig,
    pub sigma_bar: f64,
    pub sabr: Vec<f64>,
    pub black: Vec<f64>,
    /// Final volatility per path.
    pub vol: Vec<f64>,
}

impl Terminals {
    pub fn paths(&self) -> usize {
        self.sabr.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceEstimate {
    pub price: f64,
    pub std_error: f64,
    pub paths_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McVol {
    pub sigma: f64,
    /// `std_error / vega`, first-order propagation of the price error.
    pub vol_std_error: f64,
    pub estimate: PriceEstimate,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for one `(configuration, block)` stream.
pub fn stream_seed(base_seed: u64, config_index: u64, block: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(config_index ^ splitmix64(block.wrapping_add(1))))
}

#[inline]
fn cev_power(f: f64, beta: f64) -> f64 {
    if beta == 1.0 {
        f
    } else if beta == 0.0 {
        1.0
    } else if beta == 0.5 {
        f.sqrt()
    } else {
        f.powf(beta)
    }
}

struct Stepper {
    dt: f64,
    sqrt_dt: f64,
    steps: usize,
    beta: f64,
    rho: f64,
    rho_perp: f64,
    nu: f64,
    sigma_bar: f64,
    scheme: SigmaScheme,
    vol_drift: f64,
}

impl Stepper {
    fn run(&self, rng: &mut ChaCha8Rng, f0: f64, alpha: f64) -> (f64, f64, f64) {
        let mut f = f0;
        let mut fb = f0;
        let mut s = alpha;
        for _ in 0..self.steps {
            let w: f64 = StandardNormal.sample(rng);
            let w_perp: f64 = StandardNormal.sample(rng);
            let dw = self.sqrt_dt * w;
            let dz = self.sqrt_dt * (self.rho * w + self.rho_perp * w_perp);
            if f > 0.0 {
                f += s * cev_power(f, self.beta) * dw;
                if f <= 0.0 {
                    f = 0.0;
                }
            }
            if fb > 0.0 {
                fb += self.sigma_bar * fb * dw;
                if fb <= 0.0 {
                    fb = 0.0;
                }
            }
            s = match self.scheme {
                SigmaScheme::LogExact => s * (self.nu * dz - self.vol_drift).exp(),
                SigmaScheme::EulerStrict => (s + self.nu * s * dz).max(0.0),
            };
        }
        (f, fb, s)
    }
}

/// Simulate with stream index 0.
pub fn simulate_terminals(cfg: &SabrConfig, mc: &McConfig) -> Result<Terminals> {
    simulate_terminals_indexed(cfg, mc, 0)
}

/// Simulate `mc.paths` coupled paths. `config_index` selects an independent
/// family of RNG streams so that dataset configurations never share draws.
pub fn simulate_terminals_indexed(
    cfg: &SabrConfig,
    mc: &McConfig,
    config_index: u64,
) -> Result<Terminals> {
    cfg.validate()?;
    mc.validate()?;
    let steps = mc.steps(cfg.t);
    let dt = cfg.t / steps as f64;
    let sigma_bar = mc.sigma_bar(cfg);
    let stepper = Stepper {
        dt,
        sqrt_dt: dt.sqrt(),
        steps,
        beta: cfg.beta,
        rho: cfg.rho,
        rho_perp: (1.0 - cfg.rho * cfg.rho).sqrt(),
        nu: cfg.nu,
        sigma_bar,
        scheme: mc.sigma_scheme,
        vol_drift: 0.5 * cfg.nu * cfg.nu * dt,
    };
    debug_assert!(stepper.dt > 0.0);

    let blocks = mc.paths.div_ceil(BLOCK_SIZE);
    let per_block: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let n = BLOCK_SIZE.min(mc.paths - b * BLOCK_SIZE);
            let mut rng =
                ChaCha8Rng::seed_from_u64(stream_seed(mc.base_seed, config_index, b as u64));
            let mut sabr = Vec::with_capacity(n);
            let mut black = Vec::with_capacity(n);
            let mut vol = Vec::with_capacity(n);
            for _ in 0..n {
                let (f, fb, s) = stepper.run(&mut rng, cfg.f0, cfg.alpha);
                sabr.push(f);
                black.push(fb);
                vol.push(s);
            }
            (sabr, black, vol)
        })
        .collect();

    let mut out = Terminals {
        config: *cfg,
        sigma_bar,
        sabr: Vec::with_capacity(mc.paths),
        black: Vec::with_capacity(mc.paths),
        vol: Vec::with_capacity(mc.paths),
    };
    for (s, b, v) in per_block {
        out.sabr.extend(s);
        out.black.extend(b);
        out.vol.extend(v);
    }
    Ok(out)
}

/// Neumaier-compensated running sum of values and squares.
#[derive(Default)]
struct Moments {
    n: usize,
    sum: f64,
    comp: f64,
    sum_sq: f64,
    comp_sq: f64,
}

impl Moments {
    fn add_compensated(total: &mut f64, comp: &mut f64, x: f64) {
        let t = *total + x;
        if total.abs() >= x.abs() {
            *comp += (*total - t) + x;
        } else {
            *comp += (x - t) + *total;
        }
        *total = t;
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        Self::add_compensated(&mut self.sum, &mut self.comp, x);
        Self::add_compensated(&mut self.sum_sq, &mut self.comp_sq, x * x);
    }

    fn mean(&self) -> f64 {
        (self.sum + self.comp) / self.n as f64
    }

    /// Sample standard deviation.
    fn std(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let mean = self.mean();
        let var = ((self.sum_sq + self.comp_sq) - n * mean * mean) / (n - 1.0);
        var.max(0.0).sqrt()
    }
}

/// Control-variate price of one strike from simulated terminals.
pub fn cv_price_from(terminals: &Terminals, k: f64) -> Result<PriceEstimate> {
    let cfg = &terminals.config;
    if !(k.is_finite() && k > 0.0) {
        return Err(SabrError::InvalidInput(format!("K = {k}")));
    }
    let mut m = Moments::default();
    for (&f, &fb) in terminals.sabr.iter().zip(&terminals.black) {
        let diff = (f - k).max(0.0) - (fb - k).max(0.0);
        m.push(diff);
    }
    let analytic = black_call(cfg.t, cfg.f0, k, terminals.sigma_bar);
    let price = m.mean() + analytic;
    let std_error = m.std() / (m.n as f64).sqrt();
    if !(price.is_finite() && std_error.is_finite()) {
        return Err(SabrError::NonFinite(format!("control-variate payoff at K = {k}")));
    }
    Ok(PriceEstimate {
        price,
        std_error,
        paths_used: m.n,
    })
}

/// Plain Monte Carlo price (no control variate), for variance comparisons.
pub fn plain_price_from(terminals: &Terminals, k: f64) -> Result<PriceEstimate> {
    let mut m = Moments::default();
    for &f in &terminals.sabr {
        m.push((f - k).max(0.0));
    }
    let price = m.mean();
    let std_error = m.std() / (m.n as f64).sqrt();
    if !(price.is_finite() && std_error.is_finite()) {
        return Err(SabrError::NonFinite(format!("payoff at K = {k}")));
    }
    Ok(PriceEstimate {
        price,
        std_error,
        paths_used: m.n,
    })
}

pub fn cv_price(p: &SabrPoint, mc: &McConfig) -> Result<PriceEstimate> {
    p.validate()?;
    let terminals = simulate_terminals(&p.config(), mc)?;
    cv_price_from(&terminals, p.k)
}

/// Invert a price estimate to a Black volatility.
pub fn implied_from_estimate(
    cfg: &SabrConfig,
    k: f64,
    estimate: PriceEstimate,
) -> Result<McVol> {
    let sigma = implied_vol(estimate.price, cfg.t, cfg.f0, k)?;
    let vega = black_vega(cfg.t, cfg.f0, k, sigma);
    let vol_std_error = if vega > 0.0 {
        estimate.std_error / vega
    } else {
        f64::INFINITY
    };
    Ok(McVol {
        sigma,
        vol_std_error,
        estimate,
    })
}

pub fn mc_implied_vol(p: &SabrPoint, mc: &McConfig) -> Result<McVol> {
    let estimate = cv_price(p, mc)?;
    implied_from_estimate(&p.config(), p.k, estimate)
}

/// Price a whole smile from one simulation. Per-strike failures are
/// returned in place.
pub fn mc_smile(
    cfg: &SabrConfig,
    strikes: &[f64],
    mc: &McConfig,
    config_index: u64,
) -> Result<Vec<Result<McVol>>> {
    let terminals = simulate_terminals_indexed(cfg, mc, config_index)?;
    Ok(strikes
        .iter()
        .map(|&k| cv_price_from(&terminals, k).and_then(|e| implied_from_estimate(cfg, k, e)))
        .collect())
}
