//! The 21-column design row and its z-score standardization.
//!
//! Interaction columns are products of raw-scale factors; standardization is
//! applied afterwards to every column, interactions included.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{GameState, Possession};

pub const N_FEATURES: usize = 21;

/// Column names, in layout order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "poss_home",
    "score_diff",
    "home_timeouts",
    "away_timeouts",
    "home_possession_time",
    "time_elapsed",
    "rating_diff",
    "down_1",
    "down_2",
    "down_3",
    "down_4",
    "field_position",
    "yards_to_go",
    "poss_home_x_down_1",
    "poss_home_x_down_2",
    "poss_home_x_down_3",
    "poss_home_x_down_4",
    "poss_home_x_field_position",
    "poss_home_x_yards_to_go",
    "time_elapsed_x_rating_diff",
    "time_elapsed_x_score_diff",
];

// zero-based column indices
pub const POSS_HOME: usize = 0;
pub const SCORE_DIFF: usize = 1;
pub const HOME_TIMEOUTS: usize = 2;
pub const AWAY_TIMEOUTS: usize = 3;
pub const HOME_POSS_TIME: usize = 4;
pub const TIME_ELAPSED: usize = 5;
pub const RATING_DIFF: usize = 6;
pub const DOWN_1: usize = 7;
pub const FIELD_POSITION: usize = 11;
pub const YARDS_TO_GO: usize = 12;
pub const POSS_X_DOWN_1: usize = 13;
pub const POSS_X_FIELD: usize = 17;
pub const POSS_X_YTG: usize = 18;
pub const TIME_X_RATING: usize = 19;
pub const TIME_X_SCORE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    pub fn values(&self) -> &[f64; N_FEATURES] {
        &self.0
    }
}

/// Maps a state to its raw-scale design row.
pub fn featurize(state: &GameState) -> FeatureVector {
    let mut v = [0.0; N_FEATURES];
    let poss = if state.possession == Possession::Home { 1.0 } else { 0.0 };
    let time = f64::from(state.time_elapsed_s);
    let score = f64::from(state.score_diff);
    let field = f64::from(state.field_position);
    let ytg = f64::from(state.yards_to_go);

    v[POSS_HOME] = poss;
    v[SCORE_DIFF] = score;
    v[HOME_TIMEOUTS] = f64::from(state.home_timeouts);
    v[AWAY_TIMEOUTS] = f64::from(state.away_timeouts);
    v[HOME_POSS_TIME] = f64::from(state.home_possession_time_s);
    v[TIME_ELAPSED] = time;
    v[RATING_DIFF] = state.rating_diff;
    if (1..=4).contains(&state.down) {
        let k = (state.down - 1) as usize;
        v[DOWN_1 + k] = 1.0;
        v[POSS_X_DOWN_1 + k] = poss;
    }
    v[FIELD_POSITION] = field;
    v[YARDS_TO_GO] = ytg;
    v[POSS_X_FIELD] = poss * field;
    v[POSS_X_YTG] = poss * ytg;
    v[TIME_X_RATING] = time * state.rating_diff;
    v[TIME_X_SCORE] = time * score;
    FeatureVector(v)
}

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("need at least 2 rows to fit standardization, got {0}")]
    TooFewRows(usize),
    #[error("column {name} is constant on the training data")]
    ConstantColumn { name: &'static str },
    #[error("column {name} has a non-finite value")]
    NonFinite { name: &'static str },
}

/// Per-column mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl StandardizationStats {
    pub fn standardize(&self, v: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; N_FEATURES];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (v.0[j] - self.mean[j]) / self.sd[j];
        }
        FeatureVector(out)
    }

    pub fn unstandardize(&self, z: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; N_FEATURES];
        for (j, o) in out.iter_mut().enumerate() {
            *o = z.0[j] * self.sd[j] + self.mean[j];
        }
        FeatureVector(out)
    }

    pub fn is_valid(&self) -> bool {
        self.mean.len() == N_FEATURES
            && self.sd.len() == N_FEATURES
            && self.mean.iter().all(|m| m.is_finite())
            && self.sd.iter().all(|s| s.is_finite() && *s > 0.0)
    }
}

/// Fits per-column mean and standard deviation (N-1 divisor).
pub fn fit_standardizer(rows: &[FeatureVector]) -> Result<StandardizationStats, FeatureError> {
    let n = rows.len();
    if n < 2 {
        return Err(FeatureError::TooFewRows(n));
    }
    let mut mean = vec![0.0; N_FEATURES];
    let mut sd = vec![0.0; N_FEATURES];
    for j in 0..N_FEATURES {
        let mut sum = 0.0;
        for r in rows {
            let x = r.0[j];
            if !x.is_finite() {
                return Err(FeatureError::NonFinite { name: FEATURE_NAMES[j] });
            }
            sum += x;
        }
        let m = sum / n as f64;
        // two-pass for accuracy
        let ss: f64 = rows.iter().map(|r| (r.0[j] - m).powi(2)).sum();
        let s = (ss / (n - 1) as f64).sqrt();
        if s <= 0.0 {
            return Err(FeatureError::ConstantColumn { name: FEATURE_NAMES[j] });
        }
        mean[j] = m;
        sd[j] = s;
    }
    Ok(StandardizationStats { mean, sd })
}

pub fn standardize(v: &FeatureVector, stats: &StandardizationStats) -> FeatureVector {
    stats.standardize(v)
}
