use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{check_xy, ModelError, ModelType, TrainConfig, TrainingMeta, WinProbModel, P_MIN};
use crate::domain::GameState;
use crate::features::{featurize, StandardizationStats, N_FEATURES};

pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Gaussian naive Bayes over the standardized columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    /// `P(home win)`, `P(home loss)`.
    pub prior_win: f64,
    pub prior_loss: f64,
    /// Per-class column means and variances; index 0 is the loss class.
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
    pub stats: StandardizationStats,
    pub meta: TrainingMeta,
}

impl NaiveBayesModel {
    fn log_joint(&self, class: usize, z: &[f64; N_FEATURES]) -> f64 {
        let prior = if class == 1 { self.prior_win } else { self.prior_loss };
        let mut lp = prior.ln();
        for (j, &x) in z.iter().enumerate() {
            let v = self.var[class][j];
            let d = x - self.mean[class][j];
            lp -= 0.5 * ((2.0 * PI * v).ln() + d * d / v);
        }
        lp
    }

    /// Posterior `(P(loss | z), P(win | z))`, normalized in log space.
    pub fn posterior(&self, z: &[f64; N_FEATURES]) -> (f64, f64) {
        let l0 = self.log_joint(0, z);
        let l1 = self.log_joint(1, z);
        let m = l0.max(l1);
        let e0 = (l0 - m).exp();
        let e1 = (l1 - m).exp();
        let s = e0 + e1;
        (e0 / s, e1 / s)
    }

    pub fn predict_standardized(&self, z: &[f64; N_FEATURES]) -> f64 {
        self.posterior(z).1.clamp(P_MIN, 1.0 - P_MIN)
    }
}

impl WinProbModel for NaiveBayesModel {
    fn predict(&self, state: &GameState) -> f64 {
        let z = self.stats.standardize(&featurize(state));
        self.predict_standardized(&z.0)
    }

    fn model_type(&self) -> ModelType {
        ModelType::Nb
    }
}

/// Fits class priors and per-class Gaussian (maximum-likelihood) column parameters.
pub fn train_nb(
    x: &[[f64; N_FEATURES]],
    y: &[u8],
    stats: StandardizationStats,
    cfg: &TrainConfig,
) -> Result<NaiveBayesModel, ModelError> {
    let (pos, neg) = check_xy(x, y)?;
    if pos == 0 || neg == 0 {
        return Err(ModelError::SingleClass { positives: pos, negatives: neg });
    }
    let counts = [neg as f64, pos as f64];
    let mut mean = [vec![0.0; N_FEATURES], vec![0.0; N_FEATURES]];
    for (r, &l) in x.iter().zip(y) {
        for (m, v) in mean[l as usize].iter_mut().zip(r) {
            *m += v;
        }
    }
    for c in 0..2 {
        mean[c].iter_mut().for_each(|m| *m /= counts[c]);
    }
    let mut var = [vec![0.0; N_FEATURES], vec![0.0; N_FEATURES]];
    for (r, &l) in x.iter().zip(y) {
        let c = l as usize;
        for j in 0..N_FEATURES {
            var[c][j] += (r[j] - mean[c][j]).powi(2);
        }
    }
    for c in 0..2 {
        var[c].iter_mut().for_each(|v| *v = (*v / counts[c]).max(VARIANCE_FLOOR));
    }
    let n = x.len() as f64;
    let mut model = NaiveBayesModel {
        prior_win: pos as f64 / n,
        prior_loss: neg as f64 / n,
        mean,
        var,
        stats,
        meta: TrainingMeta {
            seed: cfg.seed,
            iterations: 1,
            objective: 0.0,
            rows: x.len(),
        },
    };
    let ll: f64 = x
        .iter()
        .zip(y)
        .map(|(r, &l)| {
            let (p0, p1) = model.posterior(r);
            if l == 1 { p1 } else { p0 }.max(P_MIN).ln()
        })
        .sum();
    model.meta.objective = ll / n;
    Ok(model)
}
