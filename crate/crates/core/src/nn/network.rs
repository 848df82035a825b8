//! Dense layers with optional batch normalisation and ReLU, forward and
//! backward passes over row-major batches.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SabrError};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        }
    }
}

/// `y = W x + b`, then optionally batch norm, then optionally ReLU.
/// `weights` is row-major `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub batch_norm: Option<BatchNorm>,
    pub relu: bool,
}

impl Layer {
    /// Hidden layers: He-style uniform weights. The output layer starts at
    /// zero, so an untrained residual model reproduces its baseline.
    pub fn new<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        hidden: bool,
        rng: &mut R,
    ) -> Self {
        let bound = (6.0 / in_dim as f64).sqrt();
        let weights = if hidden {
            (0..in_dim * out_dim)
                .map(|_| rng.gen_range(-bound..bound))
                .collect()
        } else {
            vec![0.0; in_dim * out_dim]
        };
        Self {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
            batch_norm: hidden.then(|| BatchNorm::new(out_dim)),
            relu: hidden,
        }
    }

    fn affine(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let (n_in, n_out) = (self.in_dim, self.out_dim);
        let mut z = vec![0.0; rows * n_out];
        for i in 0..rows {
            let xi = &x[i * n_in..(i + 1) * n_in];
            let zi = &mut z[i * n_out..(i + 1) * n_out];
            for (o, zo) in zi.iter_mut().enumerate() {
                let w = &self.weights[o * n_in..(o + 1) * n_in];
                *zo = self.bias[o] + w.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        z
    }
}

/// Activations kept from a training-mode forward pass.
#[derive(Debug, Clone)]
struct LayerCache {
    input: Vec<f64>,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    pre_relu: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    rows: usize,
    layers: Vec<LayerCache>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

pub type Gradients = Vec<LayerGrads>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// `input → hidden[0] → … → 1`; hidden layers carry batch norm and ReLU.
    /// An empty `hidden` gives a single linear layer.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input;
        for &h in hidden {
            layers.push(Layer::new(prev, h, true, rng));
            prev = h;
        }
        layers.push(Layer::new(prev, 1, false, rng));
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(|l| l.out_dim));
        d
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.weights.len()
                    + l.bias.len()
                    + l.batch_norm.as_ref().map_or(0, |b| 2 * b.gamma.len())
            })
            .sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<usize> {
        let d = self.input_dim();
        if x.is_empty() || x.len() % d != 0 {
            return Err(SabrError::ShapeMismatch {
                expected: d,
                got: x.len(),
            });
        }
        Ok(x.len() / d)
    }

    /// Inference-mode pass: batch norm uses running statistics.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let rows = self.check_input(x)?;
        let mut a = x.to_vec();
        for layer in &self.layers {
            let mut z = layer.affine(&a, rows);
            let n = layer.out_dim;
            if let Some(bn) = &layer.batch_norm {
                for i in 0..rows {
                    for o in 0..n {
                        let v = &mut z[i * n + o];
                        let xhat = (*v - bn.running_mean[o]) / (bn.running_var[o] + bn.eps).sqrt();
                        *v = bn.gamma[o] * xhat + bn.beta[o];
                    }
                }
            }
            if layer.relu {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            a = z;
        }
        Ok(a)
    }

    /// Training-mode pass: batch statistics normalise and update the running
    /// statistics.
    pub fn forward_train(&mut self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let rows = self.check_input(x)?;
        let mut a = x.to_vec();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            let mut z = layer.affine(&a, rows);
            let n = layer.out_dim;
            let mut xhat = Vec::new();
            let mut inv_std = Vec::new();
            if let Some(bn) = &mut layer.batch_norm {
                let (mean, var) = column_moments(&z, rows, n);
                inv_std = var.iter().map(|v| 1.0 / (v + bn.eps).sqrt()).collect();
                xhat = vec![0.0; rows * n];
                for i in 0..rows {
                    for o in 0..n {
                        let k = i * n + o;
                        xhat[k] = (z[k] - mean[o]) * inv_std[o];
                        z[k] = bn.gamma[o] * xhat[k] + bn.beta[o];
                    }
                }
                let unbias = if rows > 1 {
                    rows as f64 / (rows as f64 - 1.0)
                } else {
                    1.0
                };
                let m = bn.momentum;
                for o in 0..n {
                    bn.running_mean[o] = (1.0 - m) * bn.running_mean[o] + m * mean[o];
                    bn.running_var[o] = (1.0 - m) * bn.running_var[o] + m * var[o] * unbias;
                }
            }
            let pre_relu = if layer.relu { z.clone() } else { Vec::new() };
            if layer.relu {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            caches.push(LayerCache {
                input: std::mem::replace(&mut a, z),
                xhat,
                inv_std,
                pre_relu,
            });
        }
        Ok((a, ForwardCache { rows, layers: caches }))
    }

    /// Backpropagate `d_out = ∂L/∂output` (one value per row).
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64]) -> Gradients {
        let rows = cache.rows;
        let mut grads: Vec<LayerGrads> = Vec::with_capacity(self.layers.len());
        let mut delta = d_out.to_vec();
        for (layer, c) in self.layers.iter().zip(&cache.layers).rev() {
            let (n_in, n) = (layer.in_dim, layer.out_dim);
            if layer.relu {
                for (d, z) in delta.iter_mut().zip(&c.pre_relu) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let mut d_gamma = Vec::new();
            let mut d_beta = Vec::new();
            if let Some(bn) = &layer.batch_norm {
                d_gamma = vec![0.0; n];
                d_beta = vec![0.0; n];
                let mut sum_dxhat = vec![0.0; n];
                let mut sum_dxhat_xhat = vec![0.0; n];
                for i in 0..rows {
                    for o in 0..n {
                        let k = i * n + o;
                        d_gamma[o] += delta[k] * c.xhat[k];
                        d_beta[o] += delta[k];
                        let dxhat = delta[k] * bn.gamma[o];
                        sum_dxhat[o] += dxhat;
                        sum_dxhat_xhat[o] += dxhat * c.xhat[k];
                    }
                }
                let b = rows as f64;
                for i in 0..rows {
                    for o in 0..n {
                        let k = i * n + o;
                        let dxhat = delta[k] * bn.gamma[o];
                        delta[k] = c.inv_std[o] / b
                            * (b * dxhat - sum_dxhat[o] - c.xhat[k] * sum_dxhat_xhat[o]);
                    }
                }
            }
            let mut d_w = vec![0.0; n * n_in];
            let mut d_b = vec![0.0; n];
            let mut d_x = vec![0.0; rows * n_in];
            for i in 0..rows {
                let xi = &c.input[i * n_in..(i + 1) * n_in];
                let dxi = &mut d_x[i * n_in..(i + 1) * n_in];
                for o in 0..n {
                    let d = delta[i * n + o];
                    if d == 0.0 {
                        continue;
                    }
                    d_b[o] += d;
                    let w = &layer.weights[o * n_in..(o + 1) * n_in];
                    let dw = &mut d_w[o * n_in..(o + 1) * n_in];
                    for j in 0..n_in {
                        dw[j] += d * xi[j];
                        dxi[j] += d * w[j];
                    }
                }
            }
            grads.push(LayerGrads {
                weights: d_w,
                bias: d_b,
                gamma: d_gamma,
                beta: d_beta,
            });
            delta = d_x;
        }
        grads.reverse();
        grads
    }

    /// Trainable parameters in a fixed order: per layer weights, bias, γ, b.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
            if let Some(bn) = &mut l.batch_norm {
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
        }
        out
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.push(&l.weights);
            out.push(&l.bias);
            if let Some(bn) = &l.batch_norm {
                out.push(&bn.gamma);
                out.push(&bn.beta);
            }
        }
        out
    }

    /// Zero every weight and bias, γ = 1, b = 0.
    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.bias.iter_mut().for_each(|b| *b = 0.0);
            if let Some(bn) = &mut l.batch_norm {
                bn.gamma.iter_mut().for_each(|g| *g = 1.0);
                bn.beta.iter_mut().for_each(|b| *b = 0.0);
            }
        }
    }
}

/// Flatten gradients in [`Mlp::params_mut`] order.
pub fn flatten_grads(grads: &Gradients) -> Vec<&[f64]> {
    let mut out: Vec<&[f64]> = Vec::new();
    for g in grads {
        out.push(&g.weights);
        out.push(&g.bias);
        if !g.gamma.is_empty() {
            out.push(&g.gamma);
            out.push(&g.beta);
        }
    }
    out
}

/// Per-column mean and biased variance of a `rows × cols` matrix.
fn column_moments(z: &[f64], rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; cols];
    for i in 0..rows {
        for o in 0..cols {
            mean[o] += z[i * cols + o];
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);
    let mut var = vec![0.0; cols];
    for i in 0..rows {
        for o in 0..cols {
            let d = z[i * cols + o] - mean[o];
            var[o] += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= rows as f64);
    (mean, var)
}

/// Mean squared error and its gradient with respect to the predictions.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(SabrError::ShapeMismatch {
            expected: target.len(),
            got: pred.len(),
        });
    }
    let n = pred.len() as f64;
    let loss = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n;
    if !loss.is_finite() {
        return Err(SabrError::NonFinite("loss".into()));
    }
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}
