use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fnn::{Activation, Layer};
use super::{FnnModel, GlmModel, ModelError, ModelType, NaiveBayesModel, TrainingMeta, WinProbModel};
use crate::domain::{GameState, SCHEMA_VERSION};
use crate::features::StandardizationStats;

/// Any trained predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Glm(GlmModel),
    Nb(NaiveBayesModel),
    Fnn(FnnModel),
}

impl Model {
    pub fn stats(&self) -> &StandardizationStats {
        match self {
            Model::Glm(m) => &m.stats,
            Model::Nb(m) => &m.stats,
            Model::Fnn(m) => &m.stats,
        }
    }

    pub fn meta(&self) -> &TrainingMeta {
        match self {
            Model::Glm(m) => &m.meta,
            Model::Nb(m) => &m.meta,
            Model::Fnn(m) => &m.meta,
        }
    }

    /// Fails with a typed error unless this is a model of kind `expected`.
    pub fn expect_type(self, expected: ModelType) -> Result<Self, ModelError> {
        let found = self.model_type();
        if found == expected {
            Ok(self)
        } else {
            Err(ModelError::WrongModelType { expected, found })
        }
    }
}

impl WinProbModel for Model {
    fn predict(&self, state: &GameState) -> f64 {
        match self {
            Model::Glm(m) => m.predict(state),
            Model::Nb(m) => m.predict(state),
            Model::Fnn(m) => m.predict(state),
        }
    }

    fn model_type(&self) -> ModelType {
        match self {
            Model::Glm(_) => ModelType::Glm,
            Model::Nb(_) => ModelType::Nb,
            Model::Fnn(_) => ModelType::Fnn,
        }
    }
}

#[derive(Deserialize)]
struct Header {
    schema_version: u32,
    model_type: ModelType,
}

#[derive(Serialize, Deserialize)]
struct File<P, M> {
    schema_version: u32,
    model_type: ModelType,
    stats: StandardizationStats,
    params: P,
    training_meta: M,
}

#[derive(Serialize, Deserialize)]
struct GlmParams {
    intercept: f64,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GlmMeta {
    #[serde(flatten)]
    meta: TrainingMeta,
    objective_trace: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NbParams {
    prior_win: f64,
    prior_loss: f64,
    mean: [Vec<f64>; 2],
    var: [Vec<f64>; 2],
}

#[derive(Serialize, Deserialize)]
struct FnnParams {
    hidden: Activation,
    layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
struct FnnMeta {
    #[serde(flatten)]
    meta: TrainingMeta,
    loss_trace: Vec<f64>,
}

fn file<P, M>(kind: ModelType, stats: &StandardizationStats, params: P, training_meta: M) -> File<P, M> {
    File {
        schema_version: SCHEMA_VERSION,
        model_type: kind,
        stats: stats.clone(),
        params,
        training_meta,
    }
}

/// Versioned JSON text for a model. Output is deterministic.
pub fn model_to_json(model: &Model) -> Result<String, ModelError> {
    let mut s = match model {
        Model::Glm(m) => serde_json::to_string_pretty(&file(
            ModelType::Glm,
            &m.stats,
            GlmParams { intercept: m.intercept, weights: m.weights.clone() },
            GlmMeta { meta: m.meta.clone(), objective_trace: m.trace.clone() },
        ))?,
        Model::Nb(m) => serde_json::to_string_pretty(&file(
            ModelType::Nb,
            &m.stats,
            NbParams {
                prior_win: m.prior_win,
                prior_loss: m.prior_loss,
                mean: m.mean.clone(),
                var: m.var.clone(),
            },
            m.meta.clone(),
        ))?,
        Model::Fnn(m) => serde_json::to_string_pretty(&file(
            ModelType::Fnn,
            &m.stats,
            FnnParams { hidden: m.hidden, layers: m.layers.clone() },
            FnnMeta { meta: m.meta.clone(), loss_trace: m.loss_trace.clone() },
        ))?,
    };
    s.push('\n');
    Ok(s)
}

pub fn model_from_json(text: &str) -> Result<Model, ModelError> {
    let header: Header = serde_json::from_str(text)?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(ModelError::SchemaVersion {
            found: header.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(match header.model_type {
        ModelType::Glm => {
            let f: File<GlmParams, GlmMeta> = serde_json::from_str(text)?;
            Model::Glm(GlmModel {
                intercept: f.params.intercept,
                weights: f.params.weights,
                stats: f.stats,
                meta: f.training_meta.meta,
                trace: f.training_meta.objective_trace,
            })
        }
        ModelType::Nb => {
            let f: File<NbParams, TrainingMeta> = serde_json::from_str(text)?;
            Model::Nb(NaiveBayesModel {
                prior_win: f.params.prior_win,
                prior_loss: f.params.prior_loss,
                mean: f.params.mean,
                var: f.params.var,
                stats: f.stats,
                meta: f.training_meta,
            })
        }
        ModelType::Fnn => {
            let f: File<FnnParams, FnnMeta> = serde_json::from_str(text)?;
            Model::Fnn(FnnModel {
                layers: f.params.layers,
                hidden: f.params.hidden,
                stats: f.stats,
                meta: f.training_meta.meta,
                loss_trace: f.training_meta.loss_trace,
            })
        }
    })
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(model)?).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    model_from_json(&text)
}
