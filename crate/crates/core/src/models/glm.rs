use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_xy, logistic, softplus, ModelError, ModelType, TrainConfig, TrainingMeta, WinProbModel};
use crate::domain::GameState;
use crate::features::{featurize, StandardizationStats, N_FEATURES};

/// Logistic regression on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmModel {
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub stats: StandardizationStats,
    pub meta: TrainingMeta,
    /// Penalized mean log-likelihood after each accepted step.
    pub trace: Vec<f64>,
}

impl GlmModel {
    /// Linear predictor for an already standardized row.
    pub fn link(&self, z: &[f64; N_FEATURES]) -> f64 {
        self.intercept + self.weights.iter().zip(z).map(|(w, x)| w * x).sum::<f64>()
    }

    pub fn predict_standardized(&self, z: &[f64; N_FEATURES]) -> f64 {
        logistic(self.link(z))
    }
}

impl WinProbModel for GlmModel {
    fn predict(&self, state: &GameState) -> f64 {
        let z = self.stats.standardize(&featurize(state));
        self.predict_standardized(&z.0)
    }

    fn model_type(&self) -> ModelType {
        ModelType::Glm
    }
}

const DIM: usize = N_FEATURES + 1;

/// Penalized mean log-likelihood at `theta = (intercept, w)`.
fn objective(x: &[[f64; N_FEATURES]], y: &[u8], theta: &[f64; DIM], ridge: f64) -> f64 {
    let mut ll = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let eta = theta[0] + row.iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>();
        // log p = -softplus(-eta), log(1-p) = -softplus(eta)
        ll -= if label == 1 { softplus(-eta) } else { softplus(eta) };
    }
    let pen: f64 = theta[1..].iter().map(|w| w * w).sum();
    ll / x.len() as f64 - 0.5 * ridge * pen
}

/// Fits the GLM by iteratively reweighted least squares with step halving.
///
/// Maximizes `mean log-likelihood - ridge/2 * |w|^2`. Each Newton step
/// solves `(X'WX/n + ridge) delta = gradient` and is halved until the
/// objective does not decrease, so the objective trace is monotone.
pub fn train_glm(
    x: &[[f64; N_FEATURES]],
    y: &[u8],
    stats: StandardizationStats,
    cfg: &TrainConfig,
) -> Result<GlmModel, ModelError> {
    check_xy(x, y)?;
    if x.len() <= DIM {
        return Err(ModelError::TooFewRows { rows: x.len(), params: DIM });
    }
    let n = x.len() as f64;
    let mut theta = [0.0; DIM];
    let mut f = objective(x, y, &theta, cfg.ridge);
    let mut trace = vec![f];
    let mut row = [0.0; DIM];
    row[0] = 1.0;

    for iter in 1..=cfg.max_iter {
        let mut grad = DVector::<f64>::zeros(DIM);
        let mut hess = DMatrix::<f64>::zeros(DIM, DIM);
        for (xr, &label) in x.iter().zip(y) {
            row[1..].copy_from_slice(xr);
            let eta: f64 = row.iter().zip(&theta).map(|(a, b)| a * b).sum();
            let p = super::sigmoid(eta);
            let r = f64::from(label) - p;
            let w = p * (1.0 - p);
            for i in 0..DIM {
                grad[i] += r * row[i];
                let wi = w * row[i];
                for j in 0..=i {
                    hess[(i, j)] += wi * row[j];
                }
            }
        }
        for i in 0..DIM {
            grad[i] /= n;
            for j in 0..=i {
                hess[(i, j)] /= n;
                hess[(j, i)] = hess[(i, j)];
            }
        }
        for i in 1..DIM {
            grad[i] -= cfg.ridge * theta[i];
            hess[(i, i)] += cfg.ridge;
        }

        if grad.amax() < cfg.grad_tol {
            return Ok(finish(theta, stats, cfg, iter - 1, f, x.len(), trace));
        }
        let step = hess.cholesky().ok_or(ModelError::Singular(iter))?.solve(&grad);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let mut cand = theta;
            for i in 0..DIM {
                cand[i] += t * step[i];
            }
            let fc = objective(x, y, &cand, cfg.ridge);
            if fc >= f {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            // no ascent left at floating-point resolution
            return Ok(finish(theta, stats, cfg, iter - 1, f, x.len(), trace));
        };
        let gain = fc - f;
        theta = cand;
        f = fc;
        trace.push(f);

        let wmax = theta[1..].iter().fold(0.0f64, |m, w| m.max(w.abs()));
        if !wmax.is_finite() || wmax > cfg.max_weight {
            return Err(ModelError::QuasiSeparation { norm: wmax });
        }
        if gain < cfg.tol {
            return Ok(finish(theta, stats, cfg, iter, f, x.len(), trace));
        }
    }
    Err(ModelError::NoConvergence { iterations: cfg.max_iter, trace })
}

fn finish(
    theta: [f64; DIM],
    stats: StandardizationStats,
    cfg: &TrainConfig,
    iterations: usize,
    objective: f64,
    rows: usize,
    trace: Vec<f64>,
) -> GlmModel {
    GlmModel {
        intercept: theta[0],
        weights: theta[1..].to_vec(),
        stats,
        meta: TrainingMeta {
            seed: cfg.seed,
            iterations,
            objective,
            rows,
        },
        trace,
    }
}
