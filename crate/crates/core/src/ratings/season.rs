use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{Matchup, RatingsError};

#[derive(Debug, Clone, Copy)]
pub struct SeasonFitConfig {
    /// Ridge on the team ratings, applied only when the plain system is
    /// rank deficient. Zero turns rank deficiency into an error.
    pub ridge: f64,
}

impl Default for SeasonFitConfig {
    fn default() -> Self {
        Self { ridge: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonRatings {
    pub home_edge: f64,
    pub ratings: BTreeMap<String, f64>,
    /// Residual sum of squares of the margin fit.
    pub rss: f64,
    pub ridge_applied: bool,
}

impl SeasonRatings {
    pub fn rating(&self, team: &str) -> Option<f64> {
        self.ratings.get(team).copied()
    }
}

/// Fits home edge and sum-to-zero ratings to home margins.
pub fn fit_season_ratings(
    matchups: &[Matchup],
    cfg: &SeasonFitConfig,
) -> Result<SeasonRatings, RatingsError> {
    fit_season_ratings_with_teams(&[], matchups, cfg)
}

/// As [`fit_season_ratings`], also rating `teams` that have not played yet.
///
/// The constraint is eliminated by substitution: the last team's rating is
/// minus the sum of the others, leaving an unconstrained problem in
/// `(h, R_1 .. R_{n-1})` solved through its normal equations.
pub fn fit_season_ratings_with_teams(
    teams: &[String],
    matchups: &[Matchup],
    cfg: &SeasonFitConfig,
) -> Result<SeasonRatings, RatingsError> {
    if matchups.is_empty() {
        return Err(RatingsError::EmptySchedule);
    }
    let mut names: BTreeSet<&str> = teams.iter().map(String::as_str).collect();
    for m in matchups {
        if m.home == m.away {
            return Err(RatingsError::SelfMatchup(m.home.clone()));
        }
        if !m.home_margin.is_finite() {
            return Err(RatingsError::NonFiniteMargin {
                home: m.home.clone(),
                away: m.away.clone(),
            });
        }
        names.insert(&m.home);
        names.insert(&m.away);
    }
    let names: Vec<&str> = names.into_iter().collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let n = names.len();
    // unknowns: h, then n-1 free ratings
    let dim = n;
    let last = n - 1;

    let mut ata = DMatrix::<f64>::zeros(dim, dim);
    let mut atb = DVector::<f64>::zeros(dim);
    let mut row = vec![0.0; dim];
    for m in matchups {
        design_row(&mut row, index[m.home.as_str()], index[m.away.as_str()], last);
        for i in 0..dim {
            if row[i] == 0.0 {
                continue;
            }
            atb[i] += row[i] * m.home_margin;
            for j in 0..dim {
                ata[(i, j)] += row[i] * row[j];
            }
        }
    }

    let eig = SymmetricEigen::new(ata.clone());
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let min_ev = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let deficient = min_ev <= 1e-10 * max_ev.max(1.0);

    let mut system = ata.clone();
    if deficient {
        if cfg.ridge <= 0.0 {
            return Err(RatingsError::Singular);
        }
        // ||R||^2 = sum z_i^2 + (sum z_i)^2 in the reduced coordinates
        for i in 1..dim {
            for j in 1..dim {
                system[(i, j)] += cfg.ridge * if i == j { 2.0 } else { 1.0 };
            }
        }
    }
    let chol = system.clone().cholesky().ok_or(RatingsError::Singular)?;
    let mut theta = chol.solve(&atb);
    // one round of iterative refinement
    let resid = &atb - &system * &theta;
    theta += chol.solve(&resid);

    let home_edge = theta[0];
    let mut ratings = BTreeMap::new();
    let mut sum = 0.0;
    for (i, name) in names.iter().enumerate().take(last) {
        ratings.insert(name.to_string(), theta[1 + i]);
        sum += theta[1 + i];
    }
    ratings.insert(names[last].to_string(), -sum);

    let rss = matchups
        .iter()
        .map(|m| {
            let pred = home_edge + ratings[&m.home] - ratings[&m.away];
            (m.home_margin - pred).powi(2)
        })
        .sum();

    Ok(SeasonRatings {
        home_edge,
        ratings,
        rss,
        ridge_applied: deficient,
    })
}

fn design_row(row: &mut [f64], home: usize, away: usize, last: usize) {
    row.iter_mut().for_each(|x| *x = 0.0);
    row[0] = 1.0;
    for (team, sign) in [(home, 1.0), (away, -1.0)] {
        if team == last {
            for x in row.iter_mut().skip(1) {
                *x -= sign;
            }
        } else {
            row[1 + team] += sign;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn game(week: u32, home: &str, away: &str, margin: f64) -> Matchup {
        Matchup {
            season: 2015,
            week,
            home: home.into(),
            away: away.into(),
            home_margin: margin,
        }
    }

    #[test]
    fn home_and_home_closed_form() {
        let fit = fit_season_ratings(
            &[game(1, "A", "B", 10.0), game(2, "B", "A", -4.0)],
            &SeasonFitConfig::default(),
        )
        .unwrap();
        assert!((fit.home_edge - 3.0).abs() < 1e-9);
        assert!((fit.ratings["A"] - 3.5).abs() < 1e-9);
        assert!((fit.ratings["B"] + 3.5).abs() < 1e-9);
        assert!(!fit.ridge_applied);
        assert!(fit.rss < 1e-18);
    }

    #[test]
    fn zero_margins_give_zero_ratings() {
        let games = [
            game(1, "A", "B", 0.0),
            game(1, "C", "A", 0.0),
            game(2, "B", "C", 0.0),
            game(2, "B", "A", 0.0),
        ];
        let fit = fit_season_ratings(&games, &SeasonFitConfig::default()).unwrap();
        assert!(fit.home_edge.abs() < 1e-12);
        assert!(fit.ratings.values().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn disconnected_schedule_needs_ridge() {
        let games = [game(1, "A", "B", 3.0), game(1, "C", "D", 7.0), game(1, "B", "A", 1.0)];
        let err = fit_season_ratings(&games, &SeasonFitConfig { ridge: 0.0 }).unwrap_err();
        assert!(matches!(err, RatingsError::Singular));

        let fit = fit_season_ratings(&games, &SeasonFitConfig::default()).unwrap();
        assert!(fit.ridge_applied);
        let sum: f64 = fit.ratings.values().sum();
        assert!(sum.abs() < 1e-9);
    }

    #[test]
    fn unplayed_teams_are_rated() {
        let teams = vec!["Z".to_string()];
        let fit = fit_season_ratings_with_teams(
            &teams,
            &[game(1, "A", "B", 10.0), game(2, "B", "A", -4.0)],
            &SeasonFitConfig::default(),
        )
        .unwrap();
        assert_eq!(fit.ratings.len(), 3);
        let sum: f64 = fit.ratings.values().sum();
        assert!(sum.abs() < 1e-9);
    }

    #[test]
    fn rejects_self_matchup_and_empty() {
        assert!(matches!(
            fit_season_ratings(&[], &SeasonFitConfig::default()),
            Err(RatingsError::EmptySchedule)
        ));
        assert!(matches!(
            fit_season_ratings(&[game(1, "A", "A", 1.0)], &SeasonFitConfig::default()),
            Err(RatingsError::SelfMatchup(_))
        ));
    }
}
