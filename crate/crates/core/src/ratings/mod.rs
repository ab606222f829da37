//! Team strength ratings on the points scale.
//!
//! Season ratings come from a sum-to-zero least-squares fit of home margins,
//! preseason ratings from win-total lines pushed through the normal-margin
//! link, and the two are mixed with a weight that fades out by week 11.
//! A PageRank score over the loser-to-winner league graph is provided as an
//! alternative strength signal.

mod network;
mod normal;
mod preseason;
mod season;
mod table;

pub use network::{build_league_network, pagerank_ratings, LeagueNetwork};
pub use normal::{
    std_normal_cdf, std_normal_pdf, win_prob_from_ratings, win_prob_with_sigma, MARGIN_SD,
};
pub use preseason::{expected_wins, fit_preseason_ratings, PreseasonConfig, PreseasonRatings};
pub use season::{fit_season_ratings, fit_season_ratings_with_teams, SeasonFitConfig, SeasonRatings};
pub use table::{
    blended_table, read_fixtures, read_matchups, read_ratings_csv, read_win_totals, teams_from_game_id,
    write_matchups, write_ratings_csv, write_win_totals, RatingsTable, HOME_EDGE_TEAM,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One completed game from the home side's point of view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matchup {
    pub season: i32,
    pub week: u32,
    pub home: String,
    pub away: String,
    /// Home points minus away points.
    pub home_margin: f64,
}

/// A scheduled game, result unknown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub home: String,
    pub away: String,
}

impl From<&Matchup> for Fixture {
    fn from(m: &Matchup) -> Self {
        Fixture {
            home: m.home.clone(),
            away: m.away.clone(),
        }
    }
}

/// Market expectation of a team's season win total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinTotalLine {
    pub team: String,
    pub lambda: f64,
}

#[derive(Debug, Error)]
pub enum RatingsError {
    #[error("no matchups to fit")]
    EmptySchedule,
    #[error("matchup has the same team on both sides: {0}")]
    SelfMatchup(String),
    #[error("non-finite margin in matchup {home} vs {away}")]
    NonFiniteMargin { home: String, away: String },
    #[error("rating system is singular (disconnected or unidentified schedule); use a ridge > 0")]
    Singular,
    #[error("team {0} has no win-total line")]
    MissingLine(String),
    #[error("team {0} has no scheduled games")]
    MissingSchedule(String),
    #[error("win total {lambda} for {team} outside 0..{games}")]
    LineOutOfRange { team: String, lambda: f64, games: usize },
    #[error("preseason fit did not converge: best objective {objective:e}, gradient norm {grad_norm:e}")]
    NoConvergence { objective: f64, grad_norm: f64 },
    #[error("pagerank damping must lie in (0, 1), got {0}")]
    BadDamping(f64),
    #[error("personalization vector has length {got}, expected {expected}")]
    BadPersonalization { got: usize, expected: usize },
    #[error("ratings csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("ratings csv line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Preseason weight for week `w`: 1 at week 1, falling by 0.1 a week, 0 from week 11 on.
pub fn blend_weight(week: u32) -> f64 {
    let w = f64::from(week.max(1));
    (1.0 - (w - 1.0) / 10.0).clamp(0.0, 1.0)
}

/// Mixes a preseason and an in-season rating for week `w`.
pub fn blend_ratings(preseason: f64, season: f64, week: u32) -> f64 {
    let g = blend_weight(week);
    g * preseason + (1.0 - g) * season
}
