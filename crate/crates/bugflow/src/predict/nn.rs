//! Five-layer feed-forward network: a fixed normalisation layer from training
//! statistics, three rectified hidden layers (64, 32, 16), and a single
//! output unit — a squashing unit under cross-entropy for the binary model, a
//! linear unit under squared error on log1p-hours for the regression model.
//!
//! Parameters live in one flat vector so the optimiser and the
//! finite-difference gradient check can treat the network generically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{Features, Normalizer, FEATURE_DIM};
use super::{PredictError, Speed};

const H1: usize = 64;
const H2: usize = 32;
const H3: usize = 16;

const W1: usize = 0;
const B1: usize = W1 + H1 * FEATURE_DIM;
const W2: usize = B1 + H1;
const B2: usize = W2 + H2 * H1;
const W3: usize = B2 + H2;
const B3: usize = W3 + H3 * H2;
const W4: usize = B3 + H3;
const B4: usize = W4 + H3;

/// Total number of trainable parameters.
pub const PARAM_COUNT: usize = B4 + 1;

/// Floor applied to inverse-transformed regression outputs so predicted hours
/// stay strictly positive.
pub const MIN_PREDICTED_HOURS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NnMode {
    Binary,
    Regression,
}

/// Optimiser and schedule knobs. The defaults are the published training
/// recipe; the seed fixes initialisation and batch order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnModel {
    pub mode: NnMode,
    pub normalizer: Normalizer,
    pub params: Vec<f64>,
    /// Mean training loss per epoch.
    pub loss_curve: Vec<f64>,
    pub config: TrainConfig,
}

#[inline]
fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct Trace {
    x: Features,
    z1: [f64; H1],
    z2: [f64; H2],
    z3: [f64; H3],
    out: f64,
}

fn forward_trace(params: &[f64], x: &Features) -> Trace {
    let mut z1 = [0.0; H1];
    for i in 0..H1 {
        let row = &params[W1 + i * FEATURE_DIM..W1 + (i + 1) * FEATURE_DIM];
        let mut acc = params[B1 + i];
        for (w, v) in row.iter().zip(x) {
            acc += w * v;
        }
        z1[i] = acc;
    }
    let mut z2 = [0.0; H2];
    for i in 0..H2 {
        let row = &params[W2 + i * H1..W2 + (i + 1) * H1];
        let mut acc = params[B2 + i];
        for (w, z) in row.iter().zip(&z1) {
            acc += w * relu(*z);
        }
        z2[i] = acc;
    }
    let mut z3 = [0.0; H3];
    for i in 0..H3 {
        let row = &params[W3 + i * H2..W3 + (i + 1) * H2];
        let mut acc = params[B3 + i];
        for (w, z) in row.iter().zip(&z2) {
            acc += w * relu(*z);
        }
        z3[i] = acc;
    }
    let mut out = params[B4];
    for (w, z) in params[W4..W4 + H3].iter().zip(&z3) {
        out += w * relu(*z);
    }
    Trace {
        x: *x,
        z1,
        z2,
        z3,
        out,
    }
}

/// Raw output unit value (a logit in binary mode, log1p-hours in regression
/// mode) for an already normalised input.
pub fn forward(params: &[f64], x_normalized: &Features) -> f64 {
    forward_trace(params, x_normalized).out
}

fn example_loss_and_output_grad(out: f64, y: f64, mode: NnMode) -> (f64, f64) {
    match mode {
        NnMode::Binary => {
            // Numerically stable cross-entropy on the logit.
            let loss = out.max(0.0) - out * y + (1.0 + (-out.abs()).exp()).ln();
            (loss, sigmoid(out) - y)
        }
        NnMode::Regression => {
            let d = out - y;
            (d * d, 2.0 * d)
        }
    }
}

/// Mean loss and gradient over a batch of normalised examples. Exposed so the
/// training loop and the independent finite-difference check share one code
/// path.
pub fn loss_and_grad(
    params: &[f64],
    xs_normalized: &[Features],
    ys: &[f64],
    mode: NnMode,
) -> (f64, Vec<f64>) {
    assert_eq!(xs_normalized.len(), ys.len());
    let batch = xs_normalized.len() as f64;
    let mut grad = vec![0.0; PARAM_COUNT];
    let mut total_loss = 0.0;
    for (x, &y) in xs_normalized.iter().zip(ys) {
        let trace = forward_trace(params, x);
        let (loss, dl_dout) = example_loss_and_output_grad(trace.out, y, mode);
        total_loss += loss;

        let delta4 = dl_dout;
        grad[B4] += delta4;
        let mut delta3 = [0.0; H3];
        for i in 0..H3 {
            let a3 = relu(trace.z3[i]);
            grad[W4 + i] += delta4 * a3;
            if trace.z3[i] > 0.0 {
                delta3[i] = delta4 * params[W4 + i];
            }
        }
        let mut delta2 = [0.0; H2];
        for i in 0..H3 {
            if delta3[i] == 0.0 {
                continue;
            }
            grad[B3 + i] += delta3[i];
            let row = W3 + i * H2;
            for j in 0..H2 {
                let a2 = relu(trace.z2[j]);
                grad[row + j] += delta3[i] * a2;
                if trace.z2[j] > 0.0 {
                    delta2[j] += delta3[i] * params[row + j];
                }
            }
        }
        let mut delta1 = [0.0; H1];
        for i in 0..H2 {
            if delta2[i] == 0.0 {
                continue;
            }
            grad[B2 + i] += delta2[i];
            let row = W2 + i * H1;
            for j in 0..H1 {
                let a1 = relu(trace.z1[j]);
                grad[row + j] += delta2[i] * a1;
                if trace.z1[j] > 0.0 {
                    delta1[j] += delta2[i] * params[row + j];
                }
            }
        }
        for i in 0..H1 {
            if delta1[i] == 0.0 {
                continue;
            }
            grad[B1 + i] += delta1[i];
            let row = W1 + i * FEATURE_DIM;
            for j in 0..FEATURE_DIM {
                grad[row + j] += delta1[i] * trace.x[j];
            }
        }
    }
    for g in &mut grad {
        *g /= batch;
    }
    (total_loss / batch, grad)
}

/// Uniform fan-in initialisation from the seeded generator; biases start at
/// zero.
pub fn init_params(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = vec![0.0; PARAM_COUNT];
    let layers = [
        (W1, H1, FEATURE_DIM),
        (W2, H2, H1),
        (W3, H3, H2),
        (W4, 1, H3),
    ];
    for (offset, rows, cols) in layers {
        let limit = (6.0 / cols as f64).sqrt();
        for w in &mut params[offset..offset + rows * cols] {
            *w = rng.gen_range(-limit..limit);
        }
    }
    params
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(lr: f64) -> Adam {
        Adam {
            m: vec![0.0; PARAM_COUNT],
            v: vec![0.0; PARAM_COUNT],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bias1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let bias2 = 1.0 - Self::BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

/// Trains a network. `ys` are 0/1 class indicators in binary mode and
/// log1p-hours targets in regression mode; `xs` are raw (unnormalised)
/// features.
pub fn train_nn(
    xs: &[Features],
    ys: &[f64],
    mode: NnMode,
    config: &TrainConfig,
) -> Result<NnModel, PredictError> {
    let n = xs.len();
    if n < 2 * config.batch_size {
        return Err(PredictError::TooSmallForNn {
            n,
            need: 2 * config.batch_size,
        });
    }
    let normalizer = Normalizer::fit(xs);
    let normalized: Vec<Features> = xs.iter().map(|x| normalizer.apply(x)).collect();
    let mut params = init_params(config.seed);
    let mut adam = Adam::new(config.learning_rate);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut batch_x: Vec<Features> = Vec::with_capacity(config.batch_size);
    let mut batch_y: Vec<f64> = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_index, chunk) in order.chunks(config.batch_size).enumerate() {
            batch_x.clear();
            batch_y.clear();
            for &i in chunk {
                batch_x.push(normalized[i]);
                batch_y.push(ys[i]);
            }
            let (loss, grad) = loss_and_grad(&params, &batch_x, &batch_y, mode);
            if !loss.is_finite() {
                return Err(PredictError::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                });
            }
            epoch_loss += loss * chunk.len() as f64;
            adam.step(&mut params, &grad);
        }
        loss_curve.push(epoch_loss / n as f64);
    }
    Ok(NnModel {
        mode,
        normalizer,
        params,
        loss_curve,
        config: config.clone(),
    })
}

impl NnModel {
    /// Class prediction for the binary network: fast only when the squashed
    /// output strictly exceeds one half.
    pub fn predict_class(&self, x: &Features) -> Speed {
        let out = forward(&self.params, &self.normalizer.apply(x));
        match self.mode {
            NnMode::Binary => {
                if sigmoid(out) > 0.5 {
                    Speed::Fast
                } else {
                    Speed::Slow
                }
            }
            NnMode::Regression => unreachable!("classification of a regression output needs the training median"),
        }
    }

    /// Predicted hours for the regression network (inverse of the log1p
    /// target transform, floored to stay positive).
    pub fn predict_hours(&self, x: &Features) -> f64 {
        debug_assert_eq!(self.mode, NnMode::Regression);
        let out = forward(&self.params, &self.normalizer.apply(x));
        out.exp_m1().max(MIN_PREDICTED_HOURS)
    }
}
