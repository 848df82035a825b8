//! Hagan's closed-form SABR implied volatility.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SabrError};
use crate::params::{SabrPoint, RHO_BOUND};

/// `|ln(F0/K)|` below which the strict at-the-money formula is used.
pub const ATM_LOG_THRESHOLD: f64 = 1e-8;
/// `|z|` below which `z/x(z)` is replaced by its first-order series.
pub const ZX_SERIES_THRESHOLD: f64 = 1e-6;

/// Placement of the `{1 + (1-β)²/24 ln² + (1-β)⁴/1920 ln⁴}` factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HaganBracket {
    /// Multiplies the prefactor.
    #[default]
    Numerator,
    /// Divides the prefactor, as in Hagan et al. (2002).
    Denominator,
}

impl std::str::FromStr for HaganBracket {
    type Err = SabrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "numerator" => Ok(Self::Numerator),
            "denominator" => Ok(Self::Denominator),
            other => Err(SabrError::InvalidInput(format!("hagan bracket {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaganEval {
    pub z: f64,
    pub x_of_z: f64,
    /// `z / x(z)`.
    pub ratio: f64,
    pub sigma: f64,
}

/// `x(z) = ln((√(1 - 2ρz + z²) + z - ρ) / (1 - ρ))`, evaluated through
/// `log1p` so it stays accurate for small `z`.
pub fn x_of_z(z: f64, rho: f64) -> Result<f64> {
    let disc = 1.0 - 2.0 * rho * z + z * z;
    if disc < 0.0 || !disc.is_finite() {
        return Err(SabrError::DomainError(format!(
            "1 - 2ρz + z² = {disc} for z = {z}, rho = {rho}"
        )));
    }
    let root = disc.sqrt();
    // √disc - 1 without cancellation.
    let root_minus_one = (z * z - 2.0 * rho * z) / (root + 1.0);
    Ok(((root_minus_one + z) / (1.0 - rho)).ln_1p())
}

/// `z / x(z)`, equal to 1 at `z = 0`.
pub fn zx_ratio(z: f64, rho: f64) -> Result<f64> {
    if rho.abs() > RHO_BOUND || !rho.is_finite() {
        return Err(SabrError::DomainError(format!("rho = {rho}")));
    }
    if z.abs() < ZX_SERIES_THRESHOLD {
        // z/x(z) = 1 - ρz/2 + (2 - 3ρ²)z²/12 + O(z³)
        return Ok(1.0 - 0.5 * rho * z);
    }
    Ok(z / x_of_z(z, rho)?)
}

/// Hagan implied volatility with the bracket placed as printed.
pub fn hagan_vol(p: &SabrPoint) -> Result<f64> {
    hagan_vol_with(p, HaganBracket::Numerator)
}

pub fn hagan_vol_with(p: &SabrPoint, bracket: HaganBracket) -> Result<f64> {
    Ok(hagan_eval(p, bracket)?.sigma)
}

/// Full evaluation, exposing `z`, `x(z)` and their ratio.
pub fn hagan_eval(p: &SabrPoint, bracket: HaganBracket) -> Result<HaganEval> {
    p.validate()?;
    let log_fk = (p.f0 / p.k).ln();
    if log_fk.abs() < ATM_LOG_THRESHOLD {
        return Ok(HaganEval {
            z: 0.0,
            x_of_z: 0.0,
            ratio: 1.0,
            sigma: hagan_atm(p)?,
        });
    }

    let one_minus_beta = 1.0 - p.beta;
    // (F0 K)^{(1-β)/2}; exactly 1 for β = 1.
    let fk_pow = if one_minus_beta == 0.0 {
        1.0
    } else {
        (p.f0 * p.k).powf(0.5 * one_minus_beta)
    };

    let z = p.nu / p.alpha * fk_pow * log_fk;
    let ratio = zx_ratio(z, p.rho)?;
    let x = if z.abs() < ZX_SERIES_THRESHOLD {
        z / ratio
    } else {
        x_of_z(z, p.rho)?
    };

    let omb2 = one_minus_beta * one_minus_beta;
    let l2 = log_fk * log_fk;
    let moneyness_bracket = 1.0 + omb2 / 24.0 * l2 + omb2 * omb2 / 1920.0 * l2 * l2;
    let prefactor = match bracket {
        HaganBracket::Numerator => p.alpha / fk_pow * moneyness_bracket,
        HaganBracket::Denominator => p.alpha / (fk_pow * moneyness_bracket),
    };
    let time_bracket = 1.0
        + p.t
            * (omb2 * p.alpha * p.alpha / (24.0 * fk_pow * fk_pow)
                + p.rho * p.beta * p.nu * p.alpha / (4.0 * fk_pow)
                + (2.0 - 3.0 * p.rho * p.rho) * p.nu * p.nu / 24.0);

    let sigma = prefactor * ratio * time_bracket;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(SabrError::NegativeVol(sigma));
    }
    Ok(HaganEval {
        z,
        x_of_z: x,
        ratio,
        sigma,
    })
}

/// Strict at-the-money Hagan volatility; the strike is ignored.
pub fn hagan_atm(p: &SabrPoint) -> Result<f64> {
    p.config().validate()?;
    let one_minus_beta = 1.0 - p.beta;
    let f_pow = if one_minus_beta == 0.0 {
        1.0
    } else {
        p.f0.powf(one_minus_beta)
    };
    let c1 = one_minus_beta * one_minus_beta * p.alpha * p.alpha / (24.0 * f_pow * f_pow);
    let c2 = p.rho * p.beta * p.nu * p.alpha / (4.0 * f_pow);
    let c3 = (2.0 - 3.0 * p.rho * p.rho) * p.nu * p.nu / 24.0;
    let sigma = p.alpha / f_pow * (1.0 + p.t * (c1 + c2 + c3));
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(SabrError::NegativeVol(sigma));
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ref_point(k: f64) -> SabrPoint {
        SabrPoint::new(1.0, 1.0, k, 0.2, 0.5, -0.8, 1.2).unwrap()
    }

    fn random_point(rng: &mut ChaCha8Rng) -> SabrPoint {
        SabrPoint {
            t: rng.gen_range(0.02..5.0),
            f0: rng.gen_range(0.005..0.07),
            k: 0.0,
            alpha: rng.gen_range(0.005..0.06),
            beta: rng.gen_range(0.0..1.0),
            rho: rng.gen_range(-0.6..0.2),
            nu: rng.gen_range(0.05..0.6),
        }
    }

    #[test]
    fn zx_examples() {
        assert_eq!(zx_ratio(0.0, -0.3).unwrap(), 1.0);
        // 1 / asinh(1), 40-digit reference.
        assert!((zx_ratio(1.0, 0.0).unwrap() - 1.134592657106511).abs() < 1e-14);
        assert!((zx_ratio(3.4969, -0.8).unwrap() - 2.230032683258560).abs() < 1e-12);
        assert!((zx_ratio(3.4969, -0.8).unwrap() - 2.2300).abs() < 5e-4);
        assert!(zx_ratio(0.1, 0.99).is_err());
    }

    #[test]
    fn zx_series_consistency() {
        for &rho in &[-0.95, -0.5, 0.0, 0.3, 0.95] {
            for &z in &[1e-6, -1e-6] {
                let closed = z / x_of_z(z, rho).unwrap();
                let series = 1.0 - 0.5 * rho * z;
                assert!((closed - series).abs() <= 1e-10, "rho {rho} z {z}");
            }
        }
    }

    #[test]
    fn hagan_degenerate_reduces_to_alpha() {
        for &k in &[0.3, 0.9, 1.0, 1.7, 4.0] {
            let p = SabrPoint::new(2.5, 1.0, k, 0.37, 1.0, -0.4, 0.0).unwrap();
            assert_eq!(hagan_vol(&p).unwrap(), 0.37);
        }
    }

    #[test]
    fn hagan_reference_values() {
        // 40-digit transcription of the formula (mpmath).
        let v = hagan_vol(&ref_point(1.21)).unwrap();
        assert!((v - 0.1304486825486428).abs() < 1e-12, "{v}");
        let v = hagan_vol_with(&ref_point(1.21), HaganBracket::Denominator).unwrap();
        assert!((v - 0.1303499774025972).abs() < 1e-12, "{v}");
        let v = hagan_vol(&ref_point(0.5)).unwrap();
        assert!((v - 0.5207325015327655).abs() < 1e-12, "{v}");
        let p = SabrPoint::new(2.0, 0.03, 0.025, 0.03, 0.3, -0.4, 0.35).unwrap();
        assert!((hagan_vol(&p).unwrap() - 0.3917112617302775).abs() < 1e-12);
    }

    #[test]
    fn atm_examples() {
        let p = SabrPoint::new(3.0, 0.02, 0.02, 0.25, 1.0, 0.3, 0.0).unwrap();
        assert_eq!(hagan_atm(&p).unwrap(), 0.25);

        // Term by term: c1 = 0.04/96, c2 = -0.8*0.5*1.2*0.2/4, c3 = 0.08*1.44/24.
        let expected = 0.2 * (1.0 + (0.04 / 96.0 - 0.024 + 0.0048));
        assert!((hagan_atm(&ref_point(1.0)).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.196243).abs() < 5e-7);

        let p = SabrPoint::new(1.0, 0.02, 0.02, 0.01, 0.0, 0.0, 0.0).unwrap();
        let expected = 0.5 * (1.0 + 0.01 * 0.01 / (24.0 * 0.02 * 0.02));
        assert!((hagan_atm(&p).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 0.505208).abs() < 5e-7);
    }

    #[test]
    fn atm_dispatch_is_exact() {
        let p = ref_point(1.0);
        assert_eq!(hagan_vol(&p).unwrap(), hagan_atm(&p).unwrap());
    }

    #[test]
    fn negative_vol_is_raised() {
        // ρβνα/(4F^{1-β}) term drives the bracket negative.
        let p = SabrPoint::new(30.0, 1.0, 1.0, 3.0, 1.0, -0.95, 3.0).unwrap();
        assert!(matches!(hagan_atm(&p), Err(SabrError::NegativeVol(_))));
    }

    #[test]
    fn atm_continuity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let mut p = random_point(&mut rng);
            p.k = p.f0;
            let atm = hagan_atm(&p).unwrap();
            p.k = p.f0 * (1.0 + 1e-7);
            let near = hagan_vol(&p).unwrap();
            assert!((near - atm).abs() / atm <= 1e-6);
            // Across the dispatch threshold: the gap is the natural change of
            // the smile over |ln K/F0| = 1e-8, nothing more.
            let at = |l: f64| hagan_vol(&SabrPoint { k: p.f0 * l.exp(), ..p }).unwrap();
            let slope = (at(1e-5) - at(-1e-5)) / 2e-5;
            let edge = at(1.0001e-8);
            assert!((edge - atm).abs() <= 1e-8 * atm + 1.01e-8 * slope.abs());
        }
    }

    #[test]
    fn smile_is_continuous_in_strike() {
        let p = ref_point(1.0);
        let n = 10_000;
        let vols: Vec<f64> = (0..=n)
            .map(|i| {
                let k = 0.5 + 1.5 * i as f64 / n as f64;
                hagan_vol(&SabrPoint { k, ..p }).unwrap()
            })
            .collect();
        // A jump shows up as a departure from the midpoint of its neighbours;
        // smooth curvature contributes ~σ''h² ≈ 1e-8 here.
        for w in vols.windows(3) {
            assert!((w[1] - 0.5 * (w[0] + w[2])).abs() <= 1e-6);
        }
        // Tight check straddling the ATM switch.
        let lo = hagan_vol(&SabrPoint { k: 1.0 - 1e-9, ..p }).unwrap();
        let hi = hagan_vol(&SabrPoint { k: 1.0 + 1e-9, ..p }).unwrap();
        let atm = hagan_vol(&p).unwrap();
        assert!((lo - atm).abs() < 1e-6 && (hi - atm).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn degenerate_beta_one_nu_zero(alpha in 0.001f64..2.0, t in 0.01f64..10.0,
                                       f0 in 0.001f64..5.0, m in 0.2f64..5.0, rho in -0.95f64..0.95) {
            let p = SabrPoint::new(t, f0, f0 * m, alpha, 1.0, rho, 0.0).unwrap();
            prop_assert!((hagan_vol(&p).unwrap() - alpha).abs() <= 1e-14);
        }
    }
}
