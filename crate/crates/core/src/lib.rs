//! Hybrid analytical and learned SABR implied volatility.
//!
//! The crate is organised bottom-up:
//!
//! * [`pricing`]: Black forward pricing, the normal CDF and implied-vol inversion.
//! * [`hagan`]: the Hagan closed-form approximation.
//! * [`geometry`]: hyperbolic features `(q, σ_min, d_H, σ_0)`.
//! * [`mc`]: coupled SABR / lognormal control-variate Monte Carlo.
//! * [`datagen`]: parameter sampling, dataset assembly, filtering, splits and persistence.
//! * [`nn`]: a small dense network with batch norm, Adam and a plateau scheduler.
//! * [`evaluation`]: R², regional metrics, stress scenarios, maturity sweeps and latency.

pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod hagan;
pub mod mc;
pub mod nn;
pub mod params;
pub mod pricing;

pub use error::{Result, SabrError};
pub use geometry::{features, GeomFeatures, HalfPlanePoint};
pub use hagan::{hagan_atm, hagan_vol, hagan_vol_with, HaganBracket};
pub use params::{SabrConfig, SabrPoint};
pub use pricing::{black_price, implied_vol, normal_cdf, BlackInputs};
