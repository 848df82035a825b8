//! Residual neural corrector: a from-scratch MLP with batch norm, trained
//! with Adam, in four input/target variants.

mod network;
mod optim;
mod train;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use network::{flatten_grads, mse, BatchNorm, ForwardCache, Gradients, Layer, LayerGrads, Mlp, BN_EPS, BN_MOMENTUM};
pub use optim::{adam_step, AdamState, Plateau};
pub use train::{train, EpochRecord, History, TrainConfig};

use crate::datagen::Sample;
use crate::error::{Result, SabrError};
use crate::geometry::{features, GeomFeatures};
use crate::hagan::hagan_vol;
use crate::params::SabrPoint;

pub const DEFAULT_HIDDEN: [usize; 3] = [64, 64, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Ndn,
    GeoNn,
    ResNn,
    GeoResNn,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Ndn, Arch::GeoNn, Arch::ResNn, Arch::GeoResNn];

    pub fn uses_geometry(self) -> bool {
        matches!(self, Arch::GeoNn | Arch::GeoResNn)
    }

    pub fn input_dim(self) -> usize {
        if self.uses_geometry() {
            11
        } else {
            7
        }
    }

    pub fn target_mode(self) -> TargetMode {
        match self {
            Arch::Ndn | Arch::GeoNn => TargetMode::Direct,
            Arch::ResNn | Arch::GeoResNn => TargetMode::ResidualRatio,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Arch::Ndn => "ndn",
            Arch::GeoNn => "geonn",
            Arch::ResNn => "resnn",
            Arch::GeoResNn => "georesnn",
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Arch {
    type Err = SabrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ndn" => Ok(Arch::Ndn),
            "geonn" => Ok(Arch::GeoNn),
            "resnn" => Ok(Arch::ResNn),
            "georesnn" => Ok(Arch::GeoResNn),
            other => Err(SabrError::Parse(format!("architecture {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// The network outputs the implied volatility itself.
    Direct,
    /// The network outputs `Δ` with `σ = σ_Hagan (1 + Δ)`.
    ResidualRatio,
}

impl TargetMode {
    pub fn target(self, s: &Sample) -> f64 {
        match self {
            TargetMode::Direct => s.sigma_mc,
            TargetMode::ResidualRatio => s.residual_ratio(),
        }
    }
}

/// Per-feature z-score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Fit on a row-major `rows × dim` matrix. Constant columns keep unit
    /// scale so the transform stays finite.
    pub fn fit(x: &[f64], dim: usize) -> Self {
        let rows = x.len() / dim;
        let mut mean = vec![0.0; dim];
        for row in x.chunks(dim) {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= rows as f64);
        let mut var = vec![0.0; dim];
        for row in x.chunks(dim) {
            for j in 0..dim {
                var[j] += (row[j] - mean[j]).powi(2);
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / rows as f64).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &mut [f64]) {
        let dim = self.mean.len();
        for row in x.chunks_mut(dim) {
            for j in 0..dim {
                row[j] = (row[j] - self.mean[j]) / self.std[j];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub config: TrainConfig,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub epochs_run: usize,
    pub train_rows: usize,
    pub val_rows: usize,
    #[serde(default)]
    pub dataset_sha256: Option<String>,
}

/// A network together with everything needed to turn a SABR point into a
/// volatility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub arch: Arch,
    pub target_mode: TargetMode,
    pub layer_dims: Vec<usize>,
    pub network: Mlp,
    pub standardizer: Standardizer,
    pub init_seed: u64,
    #[serde(default)]
    pub training: Option<TrainingManifest>,
}

/// Raw network inputs: `(T, F0, K, α, β, ρ, ν)` and, for geometric variants,
/// `(q, σ_min, d_H, σ0)`.
pub fn raw_inputs(arch: Arch, x: &SabrPoint, geom: Option<&GeomFeatures>, out: &mut Vec<f64>) -> Result<()> {
    out.extend_from_slice(&x.to_array());
    if arch.uses_geometry() {
        let g = match geom {
            Some(g) => *g,
            None => features(x)?,
        };
        out.extend_from_slice(&g.to_array());
    }
    Ok(())
}

impl ModelBundle {
    pub fn new(arch: Arch, hidden: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let network = Mlp::new(arch.input_dim(), hidden, &mut rng);
        Self {
            arch,
            target_mode: arch.target_mode(),
            layer_dims: network.dims(),
            standardizer: Standardizer::identity(arch.input_dim()),
            network,
            init_seed: seed,
            training: None,
        }
    }

    /// Zero weights and biases: residual variants then reproduce Hagan.
    pub fn zeroed(mut self) -> Self {
        self.network.zero();
        self
    }

    /// Standardised design matrix of dataset rows, using stored features.
    pub fn design_matrix(&self, samples: &[Sample]) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(samples.len() * self.arch.input_dim());
        for s in samples {
            raw_inputs(self.arch, &s.x, Some(&s.features), &mut x)?;
        }
        self.standardizer.apply(&mut x);
        Ok(x)
    }

    /// Network outputs (Δ or σ) for dataset rows.
    pub fn raw_outputs(&self, samples: &[Sample]) -> Result<Vec<f64>> {
        if samples.is_empty() {
            return Ok(Vec::new());
        }
        self.network.predict(&self.design_matrix(samples)?)
    }

    /// Volatility predictions for dataset rows, using their stored Hagan vols.
    pub fn predict_samples(&self, samples: &[Sample]) -> Result<Vec<f64>> {
        let out = self.raw_outputs(samples)?;
        Ok(match self.target_mode {
            TargetMode::Direct => out,
            TargetMode::ResidualRatio => samples
                .iter()
                .zip(out)
                .map(|(s, d)| s.sigma_hagan * (1.0 + d))
                .collect(),
        })
    }

    /// Raw network output at one point.
    pub fn raw_output(&self, p: &SabrPoint) -> Result<f64> {
        let mut x = Vec::with_capacity(self.arch.input_dim());
        raw_inputs(self.arch, p, None, &mut x)?;
        self.standardizer.apply(&mut x);
        Ok(self.network.predict(&x)?[0])
    }

    /// Corrected implied volatility; Hagan vol and features are computed
    /// internally.
    pub fn predict_vol(&self, p: &SabrPoint) -> Result<f64> {
        p.validate()?;
        let out = self.raw_output(p)?;
        match self.target_mode {
            TargetMode::Direct => Ok(out),
            TargetMode::ResidualRatio => Ok(hagan_vol(p)? * (1.0 + out)),
        }
    }

    pub fn predict_vols(&self, points: &[SabrPoint]) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(points.len() * self.arch.input_dim());
        for p in points {
            p.validate()?;
            raw_inputs(self.arch, p, None, &mut x)?;
        }
        if points.is_empty() {
            return Ok(Vec::new());
        }
        self.standardizer.apply(&mut x);
        let out = self.network.predict(&x)?;
        match self.target_mode {
            TargetMode::Direct => Ok(out),
            TargetMode::ResidualRatio => points
                .iter()
                .zip(out)
                .map(|(p, d)| Ok(hagan_vol(p)? * (1.0 + d)))
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let bundle: Self = serde_json::from_str(s)?;
        bundle.check()?;
        Ok(bundle)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Structural consistency of a deserialised bundle.
    pub fn check(&self) -> Result<()> {
        let dims = self.network.dims();
        if dims != self.layer_dims || dims[0] != self.arch.input_dim() || *dims.last().unwrap() != 1 {
            return Err(SabrError::ShapeMismatch {
                expected: self.arch.input_dim(),
                got: dims[0],
            });
        }
        if self.target_mode != self.arch.target_mode() {
            return Err(SabrError::ConfigError("target mode does not match arch".into()));
        }
        for l in &self.network.layers {
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(SabrError::ShapeMismatch {
                    expected: l.in_dim * l.out_dim,
                    got: l.weights.len(),
                });
            }
            if let Some(bn) = &l.batch_norm {
                if bn.running_var.iter().any(|v| *v <= 0.0) {
                    return Err(SabrError::ConfigError("non-positive running variance".into()));
                }
            }
        }
        if self.standardizer.mean.len() != dims[0]
            || self.standardizer.std.len() != dims[0]
            || self.standardizer.std.iter().any(|s| *s <= 0.0)
        {
            return Err(SabrError::ConfigError("bad standardizer".into()));
        }
        Ok(())
    }
}

/// Mean squared error of predictions against the target implied by `mode`.
pub fn loss(pred: &[f64], samples: &[Sample], mode: TargetMode) -> Result<f64> {
    if mode == TargetMode::ResidualRatio {
        if let Some(s) = samples.iter().find(|s| !(s.sigma_hagan > 0.0)) {
            return Err(SabrError::InvalidInput(format!("sigma_hagan = {}", s.sigma_hagan)));
        }
    }
    let target: Vec<f64> = samples.iter().map(|s| mode.target(s)).collect();
    Ok(mse(pred, &target)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Split;

    fn sample(x: SabrPoint, sigma_hagan: f64, sigma_mc: f64) -> Sample {
        Sample {
            x,
            sigma_hagan,
            sigma_mc,
            features: features(&x).unwrap(),
            n: 0.0,
            split: Split::Train,
            valid: true,
            config_index: 0,
        }
    }

    fn randomized(arch: Arch, seed: u64) -> ModelBundle {
        let mut b = ModelBundle::new(arch, &DEFAULT_HIDDEN, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        network::tests::randomize_output(&mut b.network, &mut rng);
        b
    }

    fn point() -> SabrPoint {
        SabrPoint::new(1.0, 0.03, 0.032, 0.03, 0.5, -0.3, 0.4).unwrap()
    }

    #[test]
    fn arch_widths_and_modes() {
        assert_eq!(Arch::Ndn.input_dim(), 7);
        assert_eq!(Arch::ResNn.input_dim(), 7);
        assert_eq!(Arch::GeoNn.input_dim(), 11);
        assert_eq!(Arch::GeoResNn.input_dim(), 11);
        assert_eq!(Arch::GeoNn.target_mode(), TargetMode::Direct);
        assert_eq!(Arch::ResNn.target_mode(), TargetMode::ResidualRatio);
        for a in Arch::ALL {
            assert_eq!(a.name().parse::<Arch>().unwrap(), a);
            let b = ModelBundle::new(a, &DEFAULT_HIDDEN, 1);
            assert_eq!(b.layer_dims, vec![a.input_dim(), 64, 64, 32, 1]);
        }
        assert!("mlp".parse::<Arch>().is_err());
    }

    #[test]
    fn loss_examples() {
        let p = point();
        let rows = [sample(p, 0.2, 0.22), sample(p, 0.2, 0.18)];
        assert!((loss(&[0.0, 0.0], &rows, TargetMode::ResidualRatio).unwrap() - 0.01).abs() < 1e-15);
        let exact: Vec<f64> = rows.iter().map(|s| s.residual_ratio()).collect();
        assert_eq!(loss(&exact, &rows, TargetMode::ResidualRatio).unwrap(), 0.0);
        let scaled = [sample(p, 0.6, 0.66), sample(p, 0.6, 0.54)];
        let a = loss(&[0.03, -0.02], &rows, TargetMode::ResidualRatio).unwrap();
        let b = loss(&[0.03, -0.02], &scaled, TargetMode::ResidualRatio).unwrap();
        assert!((a - b).abs() < 1e-15);
        let bad = [sample(p, 0.0, 0.2)];
        assert!(loss(&[0.0], &bad, TargetMode::ResidualRatio).is_err());
        assert!((loss(&[0.2, 0.2], &rows, TargetMode::Direct).unwrap() - 0.0004).abs() < 1e-15);
    }

    #[test]
    fn zero_residual_model_is_hagan() {
        let p = point();
        for arch in [Arch::ResNn, Arch::GeoResNn] {
            let b = ModelBundle::new(arch, &DEFAULT_HIDDEN, 3).zeroed();
            assert_eq!(b.predict_vol(&p).unwrap(), hagan_vol(&p).unwrap());
        }
    }

    #[test]
    fn forced_constant_correction() {
        let p = point();
        let mut b = ModelBundle::new(Arch::GeoResNn, &DEFAULT_HIDDEN, 3).zeroed();
        b.network.layers.last_mut().unwrap().bias[0] = 0.05;
        let v = b.predict_vol(&p).unwrap();
        assert_eq!(v, hagan_vol(&p).unwrap() * 1.05);
    }

    #[test]
    fn residual_contract() {
        let p = point();
        let b = randomized(Arch::GeoResNn, 9);
        assert_ne!(b.raw_output(&p).unwrap(), 0.0);
        let raw = b.raw_output(&p).unwrap();
        let h = hagan_vol(&p).unwrap();
        let v = b.predict_vol(&p).unwrap();
        assert_eq!(v, h * (1.0 + raw));
        assert!((v / h - 1.0 - raw).abs() <= 4.0 * f64::EPSILON * (1.0 + raw.abs()));
    }

    #[test]
    fn batch_matches_single_prediction() {
        let b = randomized(Arch::GeoNn, 4);
        let pts: Vec<SabrPoint> = (0..10)
            .map(|i| SabrPoint::new(1.0, 0.03, 0.025 + 0.001 * i as f64, 0.03, 0.5, -0.3, 0.4).unwrap())
            .collect();
        let batch = b.predict_vols(&pts).unwrap();
        for (p, v) in pts.iter().zip(batch) {
            assert!((b.predict_vol(p).unwrap() - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut b = randomized(Arch::GeoResNn, 5);
        b.standardizer.mean[2] = 0.1 / 3.0;
        let s = b.to_json().unwrap();
        let back = ModelBundle::from_json(&s).unwrap();
        assert_eq!(back, b);
        let p = point();
        assert_eq!(back.predict_vol(&p).unwrap().to_bits(), b.predict_vol(&p).unwrap().to_bits());
        assert_eq!(back.to_json().unwrap(), s);
    }

    #[test]
    fn malformed_model_rejected() {
        let mut b = ModelBundle::new(Arch::Ndn, &DEFAULT_HIDDEN, 5);
        b.network.layers[1].weights.pop();
        assert!(ModelBundle::from_json(&b.to_json().unwrap()).is_err());
        let mut b = ModelBundle::new(Arch::Ndn, &DEFAULT_HIDDEN, 5);
        b.arch = Arch::GeoNn;
        assert!(ModelBundle::from_json(&b.to_json().unwrap()).is_err());
    }
}
