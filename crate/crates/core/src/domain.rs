//! Value types shared across the crate: raw play rows, normalized game
//! states, team ratings, and the canonical JSON envelope.

use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version stamped into every canonical JSON document.
pub const SCHEMA_VERSION: u32 = 1;

/// Seconds in one quarter.
pub const QUARTER_S: u32 = 900;

/// Seconds in regulation.
pub const REGULATION_S: u32 = 3600;

/// Which side has the ball. Serialized as `H`, `A`, `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Possession {
    #[serde(rename = "H")]
    Home,
    #[serde(rename = "A")]
    Away,
    #[serde(rename = "N")]
    None,
}

impl Possession {
    pub fn code(self) -> &'static str {
        match self {
            Possession::Home => "H",
            Possession::Away => "A",
            Possession::None => "N",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s {
            "H" => Some(Possession::Home),
            "A" => Some(Possession::Away),
            "N" => Some(Possession::None),
            _ => None,
        }
    }
}

/// A range or consistency violation on a single field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn check_range(errs: &mut Vec<FieldError>, field: &str, v: i64, lo: i64, hi: i64) {
    if v < lo || v > hi {
        errs.push(FieldError::new(
            field,
            format!("{field} out of range {lo}..{hi} (got {v})"),
        ));
    }
}

/// One snap of a play-by-play log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayRecord {
    pub game_id: String,
    pub season: i32,
    pub week: u32,
    pub quarter: u32,
    pub clock_remaining_s: u32,
    pub possession: Possession,
    pub down: u32,
    pub yards_to_go: u32,
    pub field_position: u32,
    pub home_score: u32,
    pub away_score: u32,
    pub home_timeouts: u32,
    pub away_timeouts: u32,
    pub home_possession_time_s: u32,
    pub home_won: u8,
}

impl PlayRecord {
    /// Checks every per-row invariant, collecting all violations.
    pub fn validate(&self) -> Result<(), Vec<FieldError>> {
        let mut errs = Vec::new();
        check_range(&mut errs, "week", self.week.into(), 1, 17);
        check_range(&mut errs, "quarter", self.quarter.into(), 1, 5);
        check_range(&mut errs, "clock_remaining_s", self.clock_remaining_s.into(), 0, 900);
        check_range(&mut errs, "down", self.down.into(), 0, 4);
        check_range(&mut errs, "yards_to_go", self.yards_to_go.into(), 0, 99);
        check_range(&mut errs, "field_position", self.field_position.into(), 0, 100);
        check_range(&mut errs, "home_timeouts", self.home_timeouts.into(), 0, 3);
        check_range(&mut errs, "away_timeouts", self.away_timeouts.into(), 0, 3);
        check_range(&mut errs, "home_won", self.home_won.into(), 0, 1);
        if (self.down == 0) != (self.yards_to_go == 0) {
            errs.push(FieldError::new(
                "yards_to_go",
                "down = 0 requires yards_to_go = 0 and vice versa",
            ));
        }
        if self.game_id.is_empty() {
            errs.push(FieldError::new("game_id", "game_id is empty"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// Seconds since kickoff. Overtime continues linearly past 3600 on the
    /// same 900 s quarter frame.
    pub fn time_elapsed_s(&self) -> u32 {
        QUARTER_S * (self.quarter.saturating_sub(1)) + (QUARTER_S - self.clock_remaining_s.min(QUARTER_S))
    }

    pub fn score_diff(&self) -> i32 {
        self.home_score as i32 - self.away_score as i32
    }
}

/// The normalized in-game snapshot a model consumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub time_elapsed_s: u32,
    pub score_diff: i32,
    pub possession: Possession,
    pub down: u32,
    pub yards_to_go: u32,
    pub field_position: u32,
    pub home_timeouts: u32,
    pub away_timeouts: u32,
    pub home_possession_time_s: u32,
    /// Points-scale strength gap `h + R_home - R_away`.
    pub rating_diff: f64,
}

impl GameState {
    pub fn validate(&self) -> Result<(), Vec<FieldError>> {
        let mut errs = Vec::new();
        check_range(&mut errs, "down", self.down.into(), 0, 4);
        check_range(&mut errs, "yards_to_go", self.yards_to_go.into(), 0, 99);
        check_range(&mut errs, "field_position", self.field_position.into(), 0, 100);
        check_range(&mut errs, "home_timeouts", self.home_timeouts.into(), 0, 3);
        check_range(&mut errs, "away_timeouts", self.away_timeouts.into(), 0, 3);
        if (self.down == 0) != (self.yards_to_go == 0) {
            errs.push(FieldError::new(
                "yards_to_go",
                "down = 0 requires yards_to_go = 0 and vice versa",
            ));
        }
        if !self.rating_diff.is_finite() {
            errs.push(FieldError::new("rating_diff", "rating_diff must be finite"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// True past the end of regulation. Model output there is less reliable.
    pub fn is_overtime(&self) -> bool {
        self.time_elapsed_s > REGULATION_S
    }
}

/// Strength values for one team as of a given week, all on the points scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamRating {
    pub team: String,
    pub rho: f64,
    pub season_r: f64,
    pub blended_r: f64,
    pub week: u32,
}

#[derive(Debug, Error)]
pub enum LookupError {
    #[error("no rating for team {team} at week {week}")]
    MissingTeam { team: String, week: u32 },
    #[error("no home edge at week {week}")]
    MissingHomeEdge { week: u32 },
    #[error("game id {0:?} does not name its teams (expected SEASON_WEEK_AWAY_HOME)")]
    UnknownTeams(String),
}

/// Anything that can produce the rating differential for a snap.
pub trait RatingLookup {
    fn rating_diff(&self, play: &PlayRecord) -> Result<f64, LookupError>;
}

/// Builds the normalized state for one play.
pub fn state_from_play(
    play: &PlayRecord,
    ratings: &impl RatingLookup,
) -> Result<GameState, LookupError> {
    let rating_diff = ratings.rating_diff(play)?;
    Ok(GameState {
        time_elapsed_s: play.time_elapsed_s(),
        score_diff: play.score_diff(),
        possession: play.possession,
        down: play.down,
        yards_to_go: play.yards_to_go,
        field_position: play.field_position,
        home_timeouts: play.home_timeouts,
        away_timeouts: play.away_timeouts,
        home_possession_time_s: play.home_possession_time_s,
        rating_diff,
    })
}

/// A fixed differential for every play; handy for tests and what-if work.
#[derive(Debug, Clone, Copy)]
pub struct ConstantRating(pub f64);

impl RatingLookup for ConstantRating {
    fn rating_diff(&self, _play: &PlayRecord) -> Result<f64, LookupError> {
        Ok(self.0)
    }
}

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("schema_version {found} does not match expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error(transparent)]
    Parse(#[from] serde_json::Error),
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    schema_version: u32,
    #[serde(flatten)]
    body: T,
}

/// Canonical JSON: the value's fields plus a top-level `schema_version`.
pub fn to_canonical_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    serde_json::to_string(&Envelope {
        schema_version: SCHEMA_VERSION,
        body: value,
    })
}

pub fn from_canonical_json<T: DeserializeOwned>(s: &str) -> Result<T, JsonError> {
    let env: Envelope<T> = serde_json::from_str(s)?;
    if env.schema_version != SCHEMA_VERSION {
        return Err(JsonError::Version {
            found: env.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(env.body)
}
