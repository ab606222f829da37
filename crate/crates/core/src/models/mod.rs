//! Trainable home-win predictors and the Platt calibrator.
//!
//! Every predictor consumes the standardized 21-column design row and
//! carries the standardization it was trained with, so prediction from a
//! [`GameState`] is self-contained.

mod fnn;
mod glm;
mod nb;
mod persist;
mod platt;

pub use fnn::{train_fnn, Activation, FnnModel, Layer, LAYERS};
pub use glm::{train_glm, GlmModel};
pub use nb::{train_nb, NaiveBayesModel, VARIANCE_FLOOR};
pub use persist::{load_model, model_from_json, model_to_json, save_model, Model};
pub use platt::{apply_platt, fit_platt, PlattParams};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::GameState;
use crate::features::{featurize, fit_standardizer, FeatureError, StandardizationStats, N_FEATURES};
use crate::ingest::Dataset;

/// Smallest probability a predictor emits; outputs stay inside `(0, 1)`.
pub const P_MIN: f64 = 1e-15;

/// Numerically stable logistic function, unclamped.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logistic function clamped to `[P_MIN, 1 - P_MIN]`.
pub fn logistic(x: f64) -> f64 {
    sigmoid(x).clamp(P_MIN, 1.0 - P_MIN)
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelType {
    Glm,
    Nb,
    Fnn,
}

impl ModelType {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelType::Glm => "glm",
            ModelType::Nb => "nb",
            ModelType::Fnn => "fnn",
        }
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "glm" => Ok(ModelType::Glm),
            "nb" => Ok(ModelType::Nb),
            "fnn" => Ok(ModelType::Fnn),
            other => Err(format!("unknown model type {other:?} (expected glm, nb or fnn)")),
        }
    }
}

/// Anything that maps a game state to a home-win probability.
pub trait WinProbModel: Send + Sync {
    fn predict(&self, state: &GameState) -> f64;

    fn model_type(&self) -> ModelType;

    fn predict_all<'a>(&self, states: impl IntoIterator<Item = &'a GameState>) -> Vec<f64>
    where
        Self: Sized,
    {
        states.into_iter().map(|s| self.predict(s)).collect()
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("training data is empty")]
    Empty,
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("need more rows ({rows}) than parameters ({params})")]
    TooFewRows { rows: usize, params: usize },
    #[error("labels must be 0 or 1, found {0}")]
    BadLabel(u8),
    #[error("both classes must be present (positives: {positives}, negatives: {negatives})")]
    SingleClass { positives: usize, negatives: usize },
    #[error("no convergence after {iterations} iterations; objective trace: {trace:?}")]
    NoConvergence { iterations: usize, trace: Vec<f64> },
    #[error("weights diverging (max |w| = {norm:.3e}); data look (quasi-)separable, increase the ridge")]
    QuasiSeparation { norm: f64 },
    #[error("singular Newton system at iteration {0}")]
    Singular(usize),
    #[error("loss became NaN at epoch {epoch}")]
    NanLoss { epoch: usize },
    #[error("non-finite score at index {0}")]
    NonFiniteScore(usize),
    #[error("schema_version {found} does not match expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("model file holds a {found} model, expected {expected}")]
    WrongModelType { expected: ModelType, found: ModelType },
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub max_iter: usize,
    /// Stop when the penalized mean log-likelihood improves by less than this.
    pub tol: f64,
    /// Stop when the gradient's max-norm falls below this.
    pub grad_tol: f64,
    /// L2 penalty on GLM weights (not the intercept), per observation.
    pub ridge: f64,
    /// GLM weights beyond this max-norm are treated as separation.
    pub max_weight: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Minibatch size; `None` trains full batch.
    pub batch_size: Option<usize>,
    pub epochs: usize,
    /// FNN init draws from `[-init_scale, init_scale]`; 0 gives all-zero weights.
    pub init_scale: f64,
    pub hidden: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iter: 100,
            tol: 1e-10,
            grad_tol: 1e-8,
            ridge: 1e-6,
            max_weight: 1e3,
            learning_rate: 0.5,
            momentum: 0.9,
            batch_size: None,
            epochs: 500,
            init_scale: 0.5,
            hidden: Activation::Sigmoid,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub iterations: usize,
    /// Final mean log-likelihood (GLM, NB) or final mean cross-entropy (FNN).
    pub objective: f64,
    pub rows: usize,
}

/// Standardized design matrix and labels ready for training.
#[derive(Debug, Clone)]
pub struct Design {
    pub stats: StandardizationStats,
    pub x: Vec<[f64; N_FEATURES]>,
    pub y: Vec<u8>,
}

impl Design {
    /// Featurizes `ds` and fits standardization on it.
    pub fn fit(ds: &Dataset) -> Result<Self, ModelError> {
        let raw: Vec<_> = ds.states().map(featurize).collect();
        let stats = fit_standardizer(&raw)?;
        let x = raw.iter().map(|v| stats.standardize(v).0).collect();
        Ok(Design { stats, x, y: ds.labels() })
    }

    /// Featurizes `ds` with previously fitted standardization.
    pub fn with_stats(ds: &Dataset, stats: &StandardizationStats) -> Self {
        let x = ds.states().map(|s| stats.standardize(&featurize(s)).0).collect();
        Design { stats: stats.clone(), x, y: ds.labels() }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

pub(crate) fn check_xy(x: &[[f64; N_FEATURES]], y: &[u8]) -> Result<(usize, usize), ModelError> {
    if x.is_empty() {
        return Err(ModelError::Empty);
    }
    if x.len() != y.len() {
        return Err(ModelError::LengthMismatch { rows: x.len(), labels: y.len() });
    }
    let mut pos = 0;
    for &l in y {
        match l {
            0 => {}
            1 => pos += 1,
            other => return Err(ModelError::BadLabel(other)),
        }
    }
    Ok((pos, y.len() - pos))
}

/// Trains the requested model type on a dataset, fitting standardization first.
pub fn train(kind: ModelType, ds: &Dataset, cfg: &TrainConfig) -> Result<Model, ModelError> {
    let d = Design::fit(ds)?;
    Ok(match kind {
        ModelType::Glm => Model::Glm(train_glm(&d.x, &d.y, d.stats, cfg)?),
        ModelType::Nb => Model::Nb(train_nb(&d.x, &d.y, d.stats, cfg)?),
        ModelType::Fnn => Model::Fnn(train_fnn(&d.x, &d.y, d.stats, cfg)?),
    })
}
