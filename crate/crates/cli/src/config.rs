use std::path::{Path, PathBuf};

use serde::Deserialize;

use winprob::models::ModelType;

use crate::error::CliError;

pub const DEFAULT_SPLIT: f64 = 0.7;
pub const DEFAULT_PORT: u16 = 8080;

/// Settings loadable from a TOML file; command-line flags take precedence.
///
/// Relative paths in the file are resolved against the file's directory.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    pub data: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    /// Model file used by eval, timeline, predict and serve.
    pub model: Option<PathBuf>,
    /// Model kind trained by `train`.
    pub model_type: Option<ModelType>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub split: Option<f64>,
    pub buckets: Option<u32>,
    pub port: Option<u16>,
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(e.to_string()).at(path))?;
        let mut cfg: AppConfig =
            toml::from_str(&text).map_err(|e| CliError::usage(format!("config: {e}")).at(path))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data, &mut cfg.ratings, &mut cfg.model, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Takes the flag when given, else the config value, else fails naming the flag.
pub fn pick<T: Clone>(flag: Option<T>, cfg: &Option<T>, name: &str) -> Result<T, CliError> {
    flag.or_else(|| cfg.clone())
        .ok_or_else(|| CliError::usage(format!("--{name} is required (flag or config file)")))
}

pub fn check_split(split: f64) -> Result<f64, CliError> {
    if split > 0.0 && split < 1.0 {
        Ok(split)
    } else {
        Err(CliError::usage(format!("--split must lie in (0, 1), got {split}")))
    }
}
