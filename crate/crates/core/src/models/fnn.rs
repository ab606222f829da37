use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_xy, logistic, sigmoid, softplus, ModelError, ModelType, TrainConfig, TrainingMeta, WinProbModel};
use crate::domain::GameState;
use crate::features::{featurize, StandardizationStats, N_FEATURES};

/// Layer widths, input to output.
pub const LAYERS: [usize; 4] = [N_FEATURES, 6, 3, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(a),
            Activation::Tanh => a.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    fn slope(self, h: f64) -> f64 {
        match self {
            Activation::Sigmoid => h * (1.0 - h),
            Activation::Tanh => 1.0 - h * h,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out x in`, row-major.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            weights: vec![vec![0.0; inputs]; outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .iter()
                .zip(&self.bias)
                .map(|(row, b)| b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()),
        );
    }
}

/// Two-hidden-layer network with a logistic output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnnModel {
    pub layers: Vec<Layer>,
    pub hidden: Activation,
    pub stats: StandardizationStats,
    pub meta: TrainingMeta,
    /// Mean training cross-entropy at the end of each epoch.
    pub loss_trace: Vec<f64>,
}

struct Tape {
    /// Activations per layer, `acts[0]` is the input.
    acts: Vec<Vec<f64>>,
    /// Output logit.
    logit: f64,
}

impl FnnModel {
    /// Fresh network with weights uniform in `[-scale, scale]` (all zero for `scale = 0`).
    pub fn init(stats: StandardizationStats, hidden: Activation, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        for w in LAYERS.windows(2) {
            let mut l = Layer::zeros(w[0], w[1]);
            if scale > 0.0 {
                for row in &mut l.weights {
                    for v in row.iter_mut() {
                        *v = rng.random_range(-scale..=scale);
                    }
                }
                for b in &mut l.bias {
                    *b = rng.random_range(-scale..=scale);
                }
            }
            layers.push(l);
        }
        FnnModel {
            layers,
            hidden,
            stats,
            meta: TrainingMeta::default(),
            loss_trace: Vec::new(),
        }
    }

    /// Widths of every layer, input first.
    pub fn architecture(&self) -> Vec<usize> {
        let mut a = vec![self.layers[0].weights[0].len()];
        a.extend(self.layers.iter().map(|l| l.bias.len()));
        a
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.bias.len() * (l.weights[0].len() + 1)).sum()
    }

    /// Flattened parameters: per layer, weights row-major then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            for row in &l.weights {
                p.extend_from_slice(row);
            }
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params());
        let mut k = 0;
        for l in &mut self.layers {
            for row in &mut l.weights {
                for v in row.iter_mut() {
                    *v = p[k];
                    k += 1;
                }
            }
            for b in &mut l.bias {
                *b = p[k];
                k += 1;
            }
        }
    }

    fn forward(&self, z: &[f64]) -> Tape {
        let mut acts = vec![z.to_vec()];
        let last = self.layers.len() - 1;
        let mut logit = 0.0;
        for (i, l) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(l.bias.len());
            l.forward(&acts[i], &mut out);
            if i == last {
                logit = out[0];
                acts.push(vec![sigmoid(logit)]);
            } else {
                out.iter_mut().for_each(|a| *a = self.hidden.apply(*a));
                acts.push(out);
            }
        }
        Tape { acts, logit }
    }

    pub fn predict_standardized(&self, z: &[f64; N_FEATURES]) -> f64 {
        logistic(self.forward(z).logit)
    }

    /// Mean cross-entropy over `(x, y)` and its gradient in [`params`](Self::params) order.
    pub fn loss_and_grad(&self, x: &[[f64; N_FEATURES]], y: &[u8]) -> (f64, Vec<f64>) {
        let mut grads: Vec<Layer> = self
            .layers
            .iter()
            .map(|l| Layer::zeros(l.weights[0].len(), l.bias.len()))
            .collect();
        let mut loss = 0.0;
        let n = x.len() as f64;
        for (row, &label) in x.iter().zip(y) {
            let tape = self.forward(row);
            loss += if label == 1 { softplus(-tape.logit) } else { softplus(tape.logit) };
            // dL/dlogit for the logistic output and cross-entropy
            let mut delta = vec![tape.acts.last().unwrap()[0] - f64::from(label)];
            for li in (0..self.layers.len()).rev() {
                let input = &tape.acts[li];
                let g = &mut grads[li];
                for (o, d) in delta.iter().enumerate() {
                    g.bias[o] += d;
                    for (gw, x) in g.weights[o].iter_mut().zip(input) {
                        *gw += d * x;
                    }
                }
                if li > 0 {
                    let layer = &self.layers[li];
                    delta = (0..input.len())
                        .map(|k| {
                            let back: f64 = delta.iter().enumerate().map(|(o, d)| d * layer.weights[o][k]).sum();
                            back * self.hidden.slope(input[k])
                        })
                        .collect();
                }
            }
        }
        let mut flat = Vec::with_capacity(self.n_params());
        for g in &grads {
            for row in &g.weights {
                flat.extend(row.iter().map(|v| v / n));
            }
            flat.extend(g.bias.iter().map(|v| v / n));
        }
        (loss / n, flat)
    }

    pub fn loss(&self, x: &[[f64; N_FEATURES]], y: &[u8]) -> f64 {
        let n = x.len() as f64;
        x.iter()
            .zip(y)
            .map(|(r, &l)| {
                let t = self.forward(r).logit;
                if l == 1 {
                    softplus(-t)
                } else {
                    softplus(t)
                }
            })
            .sum::<f64>()
            / n
    }
}

impl WinProbModel for FnnModel {
    fn predict(&self, state: &GameState) -> f64 {
        let z = self.stats.standardize(&featurize(state));
        self.predict_standardized(&z.0)
    }

    fn model_type(&self) -> ModelType {
        ModelType::Fnn
    }
}

/// Gradient descent with momentum on mean cross-entropy; full batch unless
/// `cfg.batch_size` is set.
pub fn train_fnn(
    x: &[[f64; N_FEATURES]],
    y: &[u8],
    stats: StandardizationStats,
    cfg: &TrainConfig,
) -> Result<FnnModel, ModelError> {
    check_xy(x, y)?;
    let mut model = FnnModel::init(stats, cfg.hidden, cfg.init_scale, cfg.seed);
    let mut params = model.params();
    let mut velocity = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let batch = cfg.batch_size.unwrap_or(x.len()).clamp(1, x.len());
    let mut bx = Vec::with_capacity(batch);
    let mut by = Vec::with_capacity(batch);

    for epoch in 0..cfg.epochs {
        if batch < x.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let grad = if batch == x.len() {
                model.loss_and_grad(x, y).1
            } else {
                bx.clear();
                by.clear();
                bx.extend(chunk.iter().map(|&i| x[i]));
                by.extend(chunk.iter().map(|&i| y[i]));
                model.loss_and_grad(&bx, &by).1
            };
            for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = cfg.momentum * *v - cfg.learning_rate * g;
                *p += *v;
            }
            model.set_params(&params);
        }
        let loss = model.loss(x, y);
        if !loss.is_finite() {
            return Err(ModelError::NanLoss { epoch });
        }
        model.loss_trace.push(loss);
    }
    model.meta = TrainingMeta {
        seed: cfg.seed,
        iterations: cfg.epochs,
        objective: model.loss_trace.last().copied().unwrap_or_else(|| model.loss(x, y)),
        rows: x.len(),
    };
    Ok(model)
}
