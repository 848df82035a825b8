//! Hyperbolic-geometry features of the SABR diffusion.
//!
//! The forward is flattened into the CEV coordinate
//! `q = ∫_{F0}^{F} φ^{-β} dφ`; in `(q, σ)` the inverse diffusion metric is
//! proportional to `σ² [[1, ρ], [ρ, 1]]`, and the rotation
//! `u = (q - ρσ)/√(1-ρ²), v = σ` maps it onto the Poincaré half-plane with
//! `ds² = (du² + dv²)/v²`. All quantities are evaluated on the strike
//! manifold `F = K`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SabrError};
use crate::hagan::ATM_LOG_THRESHOLD;
use crate::params::SabrPoint;

/// Below this `1 - β` the log branch of the CEV integral is used.
pub const BETA_ONE_THRESHOLD: f64 = 1e-9;

/// `Λ = (q, σ_min, d_H, σ_0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeomFeatures {
    pub q: f64,
    pub sigma_min: f64,
    pub d_h: f64,
    pub sigma0: f64,
}

impl GeomFeatures {
    pub fn to_array(&self) -> [f64; 4] {
        [self.q, self.sigma_min, self.d_h, self.sigma0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlanePoint {
    pub u: f64,
    pub v: f64,
}

impl HalfPlanePoint {
    /// Poincaré half-plane distance `arccosh(1 + |Δ|² / (2 v₁ v₂))`.
    pub fn distance(&self, other: &HalfPlanePoint) -> f64 {
        let du = self.u - other.u;
        let dv = self.v - other.v;
        (1.0 + (du * du + dv * dv) / (2.0 * self.v * other.v)).acosh()
    }
}

/// CEV-flattened coordinate of the strike relative to the forward.
pub fn q_transform(f0: f64, k: f64, beta: f64) -> f64 {
    let one_minus_beta = 1.0 - beta;
    if one_minus_beta < BETA_ONE_THRESHOLD {
        (k / f0).ln()
    } else {
        (k.powf(one_minus_beta) - f0.powf(one_minus_beta)) / one_minus_beta
    }
}

/// Terminal volatility minimising the geodesic action,
/// `√(α² + 2ραq + q²)`, written as a sum of squares.
pub fn sigma_min(alpha: f64, rho: f64, q: f64) -> f64 {
    let shifted = q + rho * alpha;
    (shifted * shifted + alpha * alpha * (1.0 - rho * rho)).sqrt()
}

/// Closed-form geodesic distance `ln((σ_min + ρα + q) / ((1+ρ)α))`.
///
/// Negative for `q < 0`; its magnitude is the half-plane distance between
/// `(0, α)` and `(q, σ_min)`.
pub fn geodesic_distance(alpha: f64, rho: f64, q: f64) -> Result<f64> {
    if q == 0.0 {
        return Ok(0.0);
    }
    let s_min = sigma_min(alpha, rho, q);
    let shifted = q + rho * alpha;
    // σ_min + s cancels when s < 0; use (σ_min² - s²) / (σ_min - s) there.
    let numerator = if shifted >= 0.0 {
        s_min + shifted
    } else {
        alpha * alpha * (1.0 - rho * rho) / (s_min - shifted)
    };
    let arg = numerator / ((1.0 + rho) * alpha);
    if !(arg.is_finite() && arg > 0.0) {
        return Err(SabrError::DomainError(format!(
            "geodesic log argument {arg} (alpha {alpha}, rho {rho}, q {q})"
        )));
    }
    Ok(arg.ln())
}

/// Leading-order implied volatility `ln(K/F0) / d_H`, with the ATM limit
/// `α F0^{β-1}`.
pub fn sigma0_leading(p: &SabrPoint, d_h: f64) -> Result<f64> {
    let log_kf = (p.k / p.f0).ln();
    if log_kf.abs() < ATM_LOG_THRESHOLD {
        return Ok(p.alpha * p.f0.powf(p.beta - 1.0));
    }
    if d_h == 0.0 {
        return Err(SabrError::DomainError(format!(
            "zero geodesic distance away from the money (K = {}, F0 = {})",
            p.k, p.f0
        )));
    }
    Ok(log_kf / d_h)
}

pub fn to_halfplane(q: f64, sigma: f64, rho: f64) -> HalfPlanePoint {
    HalfPlanePoint {
        u: (q - rho * sigma) / (1.0 - rho * rho).sqrt(),
        v: sigma,
    }
}

/// The feature quadruple for one pricing point.
pub fn features(p: &SabrPoint) -> Result<GeomFeatures> {
    p.validate()?;
    let q = q_transform(p.f0, p.k, p.beta);
    let s_min = sigma_min(p.alpha, p.rho, q);
    let d_h = geodesic_distance(p.alpha, p.rho, q)?;
    let sigma0 = sigma0_leading(p, d_h)?;
    Ok(GeomFeatures {
        q,
        sigma_min: s_min,
        d_h,
        sigma0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force oracle: distance from `(0, α)` to `(q, σ)` in the
    /// half-plane, minimised over σ by golden-section search.
    fn oracle_min_distance(alpha: f64, rho: f64, q: f64) -> (f64, f64) {
        let start = to_halfplane(0.0, alpha, rho);
        let dist = |s: f64| start.distance(&to_halfplane(q, s, rho));
        let (mut a, mut b) = (1e-6, 10.0 * (alpha + q.abs()));
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..300 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if dist(c) < dist(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let s = 0.5 * (a + b);
        (s, dist(s))
    }

    #[test]
    fn q_examples() {
        assert_eq!(q_transform(1.3, 1.3, 0.4), 0.0);
        // Simpson quadrature of ∫_1^1.21 φ^{-1/2} dφ.
        let n = 1000;
        let h = 0.21 / n as f64;
        let f = |x: f64| x.powf(-0.5);
        let mut quad = f(1.0) + f(1.21);
        for i in 1..n {
            quad += if i % 2 == 1 { 4.0 } else { 2.0 } * f(1.0 + i as f64 * h);
        }
        quad *= h / 3.0;
        assert!((quad - 0.2).abs() < 1e-12);
        assert!((q_transform(1.0, 1.21, 0.5) - quad).abs() < 1e-12);
        let e = std::f64::consts::E;
        assert!((q_transform(0.7, 0.7 * e, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sigma_min_examples() {
        assert!((sigma_min(0.2, -0.3, 0.0) - 0.2).abs() < 1e-16);
        let (s, _) = oracle_min_distance(0.2, -0.8, 0.2);
        assert!((s - 0.126491106406735).abs() < 1e-7);
        assert!((sigma_min(0.2, -0.8, 0.2) - 0.126491106406735).abs() < 1e-14);
        let (s, _) = oracle_min_distance(0.3, 0.0, 0.4);
        assert!((s - 0.5).abs() < 1e-7);
        assert!((sigma_min(0.3, 0.0, 0.4) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(geodesic_distance(0.2, -0.8, 0.0).unwrap(), 0.0);
        // Oracle values from 30-digit arccosh evaluation.
        let d = geodesic_distance(0.2, -0.8, 0.2).unwrap();
        let (_, oracle) = oracle_min_distance(0.2, -0.8, 0.2);
        assert!((d - oracle).abs() < 1e-9);
        assert!((d - 1.426062438905368).abs() < 1e-12);
        let d = geodesic_distance(0.2, 0.0, 0.2).unwrap();
        assert!((d - 0.881373587019543).abs() < 1e-12);
        assert!((d - (((0.08f64).sqrt() + 0.2) / 0.2).ln()).abs() < 1e-15);
    }

    #[test]
    fn sigma0_examples() {
        let atm = SabrPoint::new(0.5, 1.0, 1.0, 0.23, 0.4, -0.2, 0.3).unwrap();
        assert!((sigma0_leading(&atm, 0.0).unwrap() - 0.23).abs() < 1e-16);

        let p = SabrPoint::new(1.0, 1.0, 1.21, 0.2, 0.5, -0.8, 1.2).unwrap();
        let g = features(&p).unwrap();
        assert!((g.sigma0 - 0.1336690136477952).abs() < 1e-12);

        let p = SabrPoint::new(1.0, 1.0, 0.1f64.exp(), 0.2, 1.0, 0.0, 0.7).unwrap();
        let g = features(&p).unwrap();
        assert!((g.q - 0.1).abs() < 1e-15);
        assert!((g.sigma_min - 0.223606797749979).abs() < 1e-12);
        assert!((g.d_h - 0.481211825059603).abs() < 1e-12);
        assert!((g.sigma0 - 0.207808692123503).abs() < 1e-12);
    }

    #[test]
    fn features_examples() {
        let p = SabrPoint::new(2.0, 0.04, 0.04, 0.03, 0.6, -0.3, 0.4).unwrap();
        let g = features(&p).unwrap();
        assert_eq!(g.q, 0.0);
        assert_eq!(g.sigma_min, 0.03);
        assert_eq!(g.d_h, 0.0);
        assert!((g.sigma0 - 0.03 * 0.04f64.powf(-0.4)).abs() < 1e-15);

        let p = SabrPoint::new(1.0, 1.0, 1.21, 0.2, 0.5, -0.8, 1.2).unwrap();
        let g = features(&p).unwrap();
        let expected = [0.2, 0.126491106406735, 1.426062438905368, 0.133669013647795];
        for (a, b) in g.to_array().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }

        let p = SabrPoint::new(1.0, 1.0, std::f64::consts::E, 0.2, 1.0, 0.0, 0.5).unwrap();
        let g = features(&p).unwrap();
        let expected = [1.0, 1.019803902718557, 2.312438341272750, 0.432443962786746];
        for (a, b) in g.to_array().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn halfplane_examples() {
        assert_eq!(to_halfplane(0.0, 0.2, 0.0), HalfPlanePoint { u: 0.0, v: 0.2 });
        let h = to_halfplane(0.0, 0.2, -0.8);
        assert!((h.u - 0.16 / 0.6).abs() < 1e-15 && h.v == 0.2);
        let h = to_halfplane(0.2, 0.126491106406735, -0.8);
        assert!((h.u - 0.501988141875647).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_arccosh_on_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let alpha = rng.gen_range(0.005..0.12);
            let rho = rng.gen_range(-0.95..0.95);
            let q = rng.gen_range(-0.5..0.5);
            let s_min = sigma_min(alpha, rho, q);
            assert!(s_min >= alpha * (1.0 - rho * rho).sqrt() * (1.0 - 1e-15));
            let d = geodesic_distance(alpha, rho, q).unwrap();
            let arc = to_halfplane(0.0, alpha, rho).distance(&to_halfplane(q, s_min, rho));
            assert!((d.abs() - arc).abs() <= 1e-9, "alpha {alpha} rho {rho} q {q}");
            assert_eq!(d.signum(), q.signum());
        }
    }

    #[test]
    fn sigma_min_is_the_grid_minimiser() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let alpha = rng.gen_range(0.005..0.3);
            let rho = rng.gen_range(-0.95..0.95);
            let q = rng.gen_range(-0.5..0.5);
            let s_min = sigma_min(alpha, rho, q);
            let start = to_halfplane(0.0, alpha, rho);
            let (lo, hi, n) = (0.2 * s_min, 5.0 * s_min, 4000);
            let step = (hi - lo) / n as f64;
            let best = (0..=n)
                .map(|i| lo + i as f64 * step)
                .min_by(|a, b| {
                    let da = start.distance(&to_halfplane(q, *a, rho));
                    let db = start.distance(&to_halfplane(q, *b, rho));
                    da.total_cmp(&db)
                })
                .unwrap();
            assert!((best - s_min).abs() <= step, "alpha {alpha} rho {rho} q {q}");
        }
    }

    #[test]
    fn features_are_deterministic() {
        let p = SabrPoint::new(0.25, 0.02, 0.018, 0.015, 0.2, -0.1, 0.2).unwrap();
        assert_eq!(features(&p).unwrap(), features(&p).unwrap());
    }
}
