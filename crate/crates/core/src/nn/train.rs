//! Mini-batch training loop with plateau scheduling and best-validation
//! snapshotting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{flatten_grads, mse};
use super::optim::{adam_step, AdamState, Plateau};
use super::{ModelBundle, Standardizer, TrainingManifest, DEFAULT_HIDDEN};
use crate::datagen::Sample;
use crate::error::{Result, SabrError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub plateau_factor: f64,
    pub patience: usize,
    pub plateau_threshold: f64,
    pub hidden: Vec<usize>,
    pub init_seed: u64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 4e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            batch_size: 128,
            epochs: 100,
            plateau_factor: 0.5,
            patience: 5,
            plateau_threshold: 1e-6,
            hidden: DEFAULT_HIDDEN.to_vec(),
            init_seed: 42,
            shuffle_seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr0", self.lr0),
            ("eps", self.eps),
            ("plateau_factor", self.plateau_factor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SabrError::ConfigError(format!("{name} = {v}")));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(SabrError::ConfigError(format!("{name} = {v}")));
            }
        }
        if !(self.weight_decay >= 0.0 && self.plateau_threshold >= 0.0) {
            return Err(SabrError::ConfigError("negative decay or threshold".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.patience == 0 {
            return Err(SabrError::ConfigError(
                "batch_size, epochs and patience must be positive".into(),
            ));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(SabrError::ConfigError("zero-width hidden layer".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
    /// Lowest validation loss so far.
    pub best_val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl History {
    pub fn best_val_loss(&self) -> f64 {
        self.records
            .get(self.best_epoch.saturating_sub(1))
            .map_or(f64::NAN, |r| r.val_loss)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,lr,best_val_loss\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e}\n",
                r.epoch, r.train_loss, r.val_loss, r.lr, r.best_val_loss
            ));
        }
        s
    }
}

/// Train `bundle` on `train_set`, monitoring `val_set`.
///
/// Inputs are standardised with statistics of the training rows. The
/// returned bundle holds the weights of the epoch with the lowest
/// validation loss.
pub fn train(
    mut bundle: ModelBundle,
    train_set: &[Sample],
    val_set: &[Sample],
    cfg: &TrainConfig,
) -> Result<(ModelBundle, History)> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(SabrError::ConfigError("empty train or validation split".into()));
    }
    let mode = bundle.target_mode;
    let dim = bundle.arch.input_dim();

    bundle.standardizer = Standardizer::identity(dim);
    let raw_train = bundle.design_matrix(train_set)?;
    bundle.standardizer = Standardizer::fit(&raw_train, dim);
    let x_train = bundle.design_matrix(train_set)?;
    let y_train: Vec<f64> = train_set.iter().map(|s| mode.target(s)).collect();
    let x_val = bundle.design_matrix(val_set)?;
    let y_val: Vec<f64> = val_set.iter().map(|s| mode.target(s)).collect();
    if y_train.iter().chain(&y_val).any(|y| !y.is_finite()) {
        return Err(SabrError::NonFinite("training target".into()));
    }

    let shapes: Vec<usize> = bundle.network.params().iter().map(|p| p.len()).collect();
    let mut adam = AdamState::new(&shapes, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay);
    let mut plateau = Plateau::new(cfg.lr0, cfg.plateau_factor, cfg.patience, cfg.plateau_threshold);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = History::default();
    let mut best: Option<(f64, super::Mlp)> = None;
    let mut xb = Vec::with_capacity(cfg.batch_size * dim);
    let mut yb = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.epochs {
        let lr = plateau.lr;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            xb.clear();
            yb.clear();
            for &i in batch {
                xb.extend_from_slice(&x_train[i * dim..(i + 1) * dim]);
                yb.push(y_train[i]);
            }
            let (pred, cache) = bundle.network.forward_train(&xb)?;
            let (batch_loss, d_out) =
                mse(&pred, &yb).map_err(|_| SabrError::Diverged { epoch })?;
            loss_sum += batch_loss * batch.len() as f64;
            let grads = bundle.network.backward(&cache, &d_out);
            let flat = flatten_grads(&grads);
            adam_step(&mut adam, &mut bundle.network.params_mut(), &flat, lr)
                .map_err(|_| SabrError::Diverged { epoch })?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let val_pred = bundle.network.predict(&x_val)?;
        let val_loss = match mse(&val_pred, &y_val) {
            Ok((l, _)) if l.is_finite() && train_loss.is_finite() => l,
            _ => return Err(SabrError::Diverged { epoch }),
        };
        if best.as_ref().map_or(true, |(b, _)| val_loss < *b) {
            best = Some((val_loss, bundle.network.clone()));
            history.best_epoch = epoch;
        }
        history.records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
            best_val_loss: best.as_ref().map_or(val_loss, |(b, _)| *b),
        });
        plateau.step(val_loss);
    }

    let (_, net) = best.expect("at least one epoch ran");
    bundle.network = net;
    bundle.training = Some(TrainingManifest {
        config: cfg.clone(),
        best_epoch: history.best_epoch,
        best_val_loss: history.best_val_loss(),
        epochs_run: history.records.len(),
        train_rows: train_set.len(),
        val_rows: val_set.len(),
        dataset_sha256: None,
    });
    Ok((bundle, history))
}
