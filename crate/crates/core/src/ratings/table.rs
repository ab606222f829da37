use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::preseason::PreseasonRatings;
use super::season::{fit_season_ratings_with_teams, SeasonFitConfig};
use super::{blend_ratings, Fixture, Matchup, RatingsError, WinTotalLine};
use crate::domain::{LookupError, PlayRecord, RatingLookup, TeamRating};

/// Pseudo-team row carrying the home edge in `ratings.csv`.
pub const HOME_EDGE_TEAM: &str = "_home_edge";

const RATINGS_HEADER: [&str; 5] = ["team", "rho", "season_r", "blended_r", "week"];

/// Week-indexed team ratings, with the home edge stored under
/// [`HOME_EDGE_TEAM`].
///
/// Play lookups read the teams from a `SEASON_WEEK_AWAY_HOME` game id
/// (e.g. `2016_21_ATL_NE`) and return `h + R~_home - R~_away` for the play's week.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RatingsTable {
    entries: BTreeMap<(String, u32), TeamRating>,
}

impl RatingsTable {
    pub fn new(rows: impl IntoIterator<Item = TeamRating>) -> Self {
        let entries = rows.into_iter().map(|r| ((r.team.clone(), r.week), r)).collect();
        Self { entries }
    }

    pub fn get(&self, team: &str, week: u32) -> Option<&TeamRating> {
        self.entries.get(&(team.to_string(), week))
    }

    pub fn rows(&self) -> impl Iterator<Item = &TeamRating> {
        self.entries.values()
    }

    pub fn weeks(&self) -> BTreeSet<u32> {
        self.entries.keys().map(|(_, w)| *w).collect()
    }

    pub fn diff(&self, home: &str, away: &str, week: u32) -> Result<f64, LookupError> {
        let h = self
            .get(HOME_EDGE_TEAM, week)
            .ok_or(LookupError::MissingHomeEdge { week })?
            .blended_r;
        let r = |team: &str| {
            self.get(team, week)
                .map(|r| r.blended_r)
                .ok_or_else(|| LookupError::MissingTeam { team: team.to_string(), week })
        };
        Ok(h + r(home)? - r(away)?)
    }
}

/// Splits a `SEASON_WEEK_AWAY_HOME` game id into `(away, home)`.
pub fn teams_from_game_id(game_id: &str) -> Option<(&str, &str)> {
    let mut parts = game_id.split('_');
    let season = parts.next()?;
    let week = parts.next()?;
    let away = parts.next()?;
    let home = parts.next()?;
    if parts.next().is_some()
        || season.parse::<i32>().is_err()
        || week.parse::<u32>().is_err()
        || away.is_empty()
        || home.is_empty()
    {
        return None;
    }
    Some((away, home))
}

impl RatingLookup for RatingsTable {
    fn rating_diff(&self, play: &PlayRecord) -> Result<f64, LookupError> {
        let (away, home) =
            teams_from_game_id(&play.game_id).ok_or_else(|| LookupError::UnknownTeams(play.game_id.clone()))?;
        self.diff(home, away, play.week)
    }
}

/// Builds the week-by-week table: for each week `w` in `1..=last_week`,
/// season ratings are fitted on games before `w` and blended with the
/// preseason ratings. Weeks with no prior games use zero season ratings.
pub fn blended_table(
    preseason: Option<&PreseasonRatings>,
    matchups: &[Matchup],
    last_week: u32,
    cfg: &SeasonFitConfig,
) -> Result<RatingsTable, RatingsError> {
    let mut teams: BTreeSet<String> = matchups.iter().flat_map(|m| [m.home.clone(), m.away.clone()]).collect();
    if let Some(p) = preseason {
        teams.extend(p.ratings.keys().cloned());
    }
    let teams: Vec<String> = teams.into_iter().collect();
    let mut rows = Vec::new();
    for week in 1..=last_week {
        let before: Vec<Matchup> = matchups.iter().filter(|m| m.week < week).cloned().collect();
        let season = if before.is_empty() {
            None
        } else {
            Some(fit_season_ratings_with_teams(&teams, &before, cfg)?)
        };
        let mut push = |team: &str, rho: f64, season_r: f64| {
            rows.push(TeamRating {
                team: team.to_string(),
                rho,
                season_r,
                blended_r: blend_ratings(rho, season_r, week),
                week,
            });
        };
        let h_pre = preseason.map_or(0.0, |p| p.home_edge);
        let h_season = season.as_ref().map_or(0.0, |s| s.home_edge);
        push(HOME_EDGE_TEAM, h_pre, h_season);
        for t in &teams {
            let rho = preseason.and_then(|p| p.ratings.get(t).copied()).unwrap_or(0.0);
            let r = season.as_ref().and_then(|s| s.rating(t)).unwrap_or(0.0);
            push(t, rho, r);
        }
    }
    Ok(RatingsTable::new(rows))
}

pub fn write_ratings_csv<W: Write>(out: W, rows: impl IntoIterator<Item = TeamRating>) -> Result<(), RatingsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATINGS_HEADER)?;
    for r in rows {
        w.write_record([
            r.team.clone(),
            r.rho.to_string(),
            r.season_r.to_string(),
            r.blended_r.to_string(),
            r.week.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R, header: &[&str]) -> Result<Vec<T>, RatingsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(RatingsError::Row {
            line: 1,
            message: format!("expected header {:?}, found {:?}", header.join(","), got.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize::<T>() {
        match rec {
            Ok(v) => out.push(v),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(RatingsError::Row { line, message: e.to_string() });
            }
        }
    }
    Ok(out)
}

pub fn read_ratings_csv<R: Read>(input: R) -> Result<RatingsTable, RatingsError> {
    let rows: Vec<TeamRating> = read_rows(input, &RATINGS_HEADER)?;
    Ok(RatingsTable::new(rows))
}

#[derive(Deserialize, Serialize)]
struct MatchupRow {
    season: i32,
    week: u32,
    home: String,
    away: String,
    home_margin: f64,
}

/// Reads `season,week,home,away,home_margin`.
pub fn read_matchups<R: Read>(input: R) -> Result<Vec<Matchup>, RatingsError> {
    let rows: Vec<MatchupRow> = read_rows(input, &["season", "week", "home", "away", "home_margin"])?;
    Ok(rows
        .into_iter()
        .map(|r| Matchup {
            season: r.season,
            week: r.week,
            home: r.home,
            away: r.away,
            home_margin: r.home_margin,
        })
        .collect())
}

/// Reads `team,lambda`.
pub fn read_win_totals<R: Read>(input: R) -> Result<Vec<WinTotalLine>, RatingsError> {
    read_rows(input, &["team", "lambda"])
}

/// Reads a schedule from any CSV with `home` and `away` columns; other
/// columns (such as a results file's margins) are ignored.
pub fn read_fixtures<R: Read>(input: R) -> Result<Vec<Fixture>, RatingsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| RatingsError::Row {
            line: 1,
            message: format!("schedule needs a {name:?} column, found {:?}", headers.iter().collect::<Vec<_>>().join(",")),
        })
    };
    let (hi, ai) = (col("home")?, col("away")?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        match (rec.get(hi), rec.get(ai)) {
            (Some(h), Some(a)) if !h.is_empty() && !a.is_empty() => out.push(Fixture { home: h.to_string(), away: a.to_string() }),
            _ => return Err(RatingsError::Row { line, message: "empty home or away".into() }),
        }
    }
    Ok(out)
}

pub fn write_matchups<W: Write>(out: W, matchups: &[Matchup]) -> Result<(), RatingsError> {
    let mut w = csv::Writer::from_writer(out);
    for m in matchups {
        w.serialize(MatchupRow {
            season: m.season,
            week: m.week,
            home: m.home.clone(),
            away: m.away.clone(),
            home_margin: m.home_margin,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_win_totals<W: Write>(out: W, lines: &[WinTotalLine]) -> Result<(), RatingsError> {
    let mut w = csv::Writer::from_writer(out);
    for l in lines {
        w.serialize(l)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Possession;

    fn rating(team: &str, week: u32, blended: f64) -> TeamRating {
        TeamRating {
            team: team.into(),
            rho: 0.0,
            season_r: blended,
            blended_r: blended,
            week,
        }
    }

    fn play(game_id: &str, week: u32) -> PlayRecord {
        PlayRecord {
            game_id: game_id.into(),
            season: 2016,
            week,
            quarter: 1,
            clock_remaining_s: 900,
            possession: Possession::None,
            down: 0,
            yards_to_go: 0,
            field_position: 35,
            home_score: 0,
            away_score: 0,
            home_timeouts: 3,
            away_timeouts: 3,
            home_possession_time_s: 0,
            home_won: 1,
        }
    }

    #[test]
    fn lookup_by_game_id() {
        let t = RatingsTable::new([rating(HOME_EDGE_TEAM, 3, 2.0), rating("NE", 3, 5.0), rating("ATL", 3, 1.5)]);
        let d = t.rating_diff(&play("2016_03_ATL_NE", 3)).unwrap();
        assert_eq!(d, 2.0 + 5.0 - 1.5);
        let err = t.rating_diff(&play("2016_04_ATL_NE", 4)).unwrap_err();
        assert!(matches!(err, LookupError::MissingHomeEdge { week: 4 }));
        let err = t.rating_diff(&play("garbage", 3)).unwrap_err();
        assert!(matches!(err, LookupError::UnknownTeams(_)));
    }

    #[test]
    fn missing_team_names_team_and_week() {
        let t = RatingsTable::new([rating(HOME_EDGE_TEAM, 3, 2.0), rating("NE", 3, 5.0)]);
        let err = t.rating_diff(&play("2016_03_ATL_NE", 3)).unwrap_err();
        assert_eq!(err.to_string(), "no rating for team ATL at week 3");
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![rating(HOME_EDGE_TEAM, 1, 2.25), rating("A", 1, 3.5), rating("B", 1, -3.5)];
        let mut buf = Vec::new();
        write_ratings_csv(&mut buf, rows.clone()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("team,rho,season_r,blended_r,week\n"));
        let back = read_ratings_csv(&buf[..]).unwrap();
        assert_eq!(back, RatingsTable::new(rows));
    }

    #[test]
    fn matchup_csv() {
        let text = "season,week,home,away,home_margin\n2015,1,A,B,10\n2015,2,B,A,-4\n";
        let m = read_matchups(text.as_bytes()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[1].home_margin, -4.0);
        let bad = "season,week,home,away\n2015,1,A,B\n";
        assert!(read_matchups(bad.as_bytes()).is_err());
        let bad_row = "season,week,home,away,home_margin\n2015,x,A,B,1\n";
        assert!(matches!(read_matchups(bad_row.as_bytes()), Err(RatingsError::Row { line: 2, .. })));
        let mut buf = Vec::new();
        write_matchups(&mut buf, &m).unwrap();
        assert_eq!(read_matchups(&buf[..]).unwrap(), m);
    }

    #[test]
    fn fixtures_from_either_layout() {
        let f = read_fixtures("home,away\nA,B\n".as_bytes()).unwrap();
        assert_eq!(f, vec![Fixture { home: "A".into(), away: "B".into() }]);
        let g = read_fixtures("season,week,home,away,home_margin\n2015,1,A,B,3\n".as_bytes()).unwrap();
        assert_eq!(g, f);
        assert!(read_fixtures("team,lambda\nA,3\n".as_bytes()).is_err());
    }

    #[test]
    fn win_total_csv() {
        let lines = vec![WinTotalLine { team: "A".into(), lambda: 10.5 }, WinTotalLine { team: "B".into(), lambda: 5.5 }];
        let mut buf = Vec::new();
        write_win_totals(&mut buf, &lines).unwrap();
        assert!(buf.starts_with(b"team,lambda\n"));
        assert_eq!(read_win_totals(&buf[..]).unwrap(), lines);
    }

    #[test]
    fn week_one_blend_is_preseason() {
        let pre = PreseasonRatings {
            home_edge: 2.0,
            ratings: [("A".to_string(), 1.0), ("B".to_string(), -1.0)].into_iter().collect(),
            objective: 0.0,
            grad_norm: 0.0,
            iterations: 0,
            trace: vec![],
        };
        let games = vec![Matchup { season: 2015, week: 1, home: "A".into(), away: "B".into(), home_margin: 10.0 }];
        let t = blended_table(Some(&pre), &games, 2, &SeasonFitConfig::default()).unwrap();
        for r in t.rows().filter(|r| r.week == 1) {
            assert_eq!(r.blended_r, r.rho);
        }
        assert_eq!(t.weeks().into_iter().collect::<Vec<_>>(), vec![1, 2]);
    }
}
