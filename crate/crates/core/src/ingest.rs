//! Play-by-play CSV parsing, labeled dataset assembly, and the by-game
//! train/test split.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{state_from_play, GameState, Possession, PlayRecord, RatingLookup};

pub const PLAY_HEADER: [&str; 15] = [
    "game_id",
    "season",
    "week",
    "quarter",
    "clock_remaining_s",
    "possession",
    "down",
    "yards_to_go",
    "field_position",
    "home_score",
    "away_score",
    "home_timeouts",
    "away_timeouts",
    "home_possession_time_s",
    "home_won",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing or malformed header: expected {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{bad} of {total} rows rejected, above the {limit:.2}% limit; first: {first}")]
    TooManyBadRows { bad: usize, total: usize, limit: f64, first: String },
    #[error("game {game_id}: {message}")]
    InconsistentGame { game_id: String, message: String },
    #[error("missing ratings: {}", .0.join("; "))]
    MissingRatings(Vec<String>),
    #[error("need at least 2 games to split, found {0}")]
    TooFewGames(usize),
    #[error("train fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
}

/// A rejected input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct ParsedLog {
    pub plays: Vec<PlayRecord>,
    pub errors: Vec<RowError>,
}

impl ParsedLog {
    /// Fails when rejected rows exceed `max_fraction` of all data rows.
    pub fn check_error_budget(&self, max_fraction: f64) -> Result<(), IngestError> {
        let total = self.plays.len() + self.errors.len();
        if self.errors.is_empty() || (self.errors.len() as f64) <= max_fraction * total as f64 {
            return Ok(());
        }
        let first = &self.errors[0];
        Err(IngestError::TooManyBadRows {
            bad: self.errors.len(),
            total,
            limit: max_fraction * 100.0,
            first: format!("line {}: {}", first.line, first.message),
        })
    }
}

/// Default tolerated share of malformed rows.
pub const DEFAULT_ERROR_BUDGET: f64 = 0.01;

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, errs: &mut Vec<String>) -> Option<T> {
    let raw = rec.get(i).unwrap_or("");
    match raw.parse::<T>() {
        Ok(v) => Some(v),
        Err(_) => {
            errs.push(format!("{}: cannot parse {raw:?}", PLAY_HEADER[i]));
            None
        }
    }
}

fn parse_row(rec: &csv::StringRecord) -> Result<PlayRecord, String> {
    if rec.len() != PLAY_HEADER.len() {
        return Err(format!("expected {} fields, found {}", PLAY_HEADER.len(), rec.len()));
    }
    let mut errs = Vec::new();
    let game_id = rec[0].to_string();
    let season = field::<i32>(rec, 1, &mut errs);
    let week = field::<u32>(rec, 2, &mut errs);
    let quarter = field::<u32>(rec, 3, &mut errs);
    // sub-second clocks are truncated to whole seconds
    let clock = match rec[4].parse::<f64>() {
        Ok(c) if c.is_finite() && c >= 0.0 => Some(c.trunc() as u32),
        _ => {
            errs.push(format!("clock_remaining_s: cannot parse {:?}", &rec[4]));
            None
        }
    };
    let possession = Possession::from_code(&rec[5]);
    if possession.is_none() {
        errs.push(format!("possession: expected H, A or N, found {:?}", &rec[5]));
    }
    let down = field::<u32>(rec, 6, &mut errs);
    let ytg = field::<u32>(rec, 7, &mut errs);
    let field_pos = field::<u32>(rec, 8, &mut errs);
    let home_score = field::<u32>(rec, 9, &mut errs);
    let away_score = field::<u32>(rec, 10, &mut errs);
    let home_to = field::<u32>(rec, 11, &mut errs);
    let away_to = field::<u32>(rec, 12, &mut errs);
    let poss_time = field::<u32>(rec, 13, &mut errs);
    let home_won = field::<u8>(rec, 14, &mut errs);
    if !errs.is_empty() {
        return Err(errs.join("; "));
    }
    let play = PlayRecord {
        game_id,
        season: season.unwrap(),
        week: week.unwrap(),
        quarter: quarter.unwrap(),
        clock_remaining_s: clock.unwrap(),
        possession: possession.unwrap(),
        down: down.unwrap(),
        yards_to_go: ytg.unwrap(),
        field_position: field_pos.unwrap(),
        home_score: home_score.unwrap(),
        away_score: away_score.unwrap(),
        home_timeouts: home_to.unwrap(),
        away_timeouts: away_to.unwrap(),
        home_possession_time_s: poss_time.unwrap(),
        home_won: home_won.unwrap(),
    };
    play.validate().map_err(|es| {
        es.iter().map(|e| e.message.clone()).collect::<Vec<_>>().join("; ")
    })?;
    Ok(play)
}

/// Parses a play log. The header must match [`PLAY_HEADER`] exactly; bad
/// rows are collected with their line numbers.
pub fn parse_play_log<R: Read>(input: R) -> Result<ParsedLog, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(PLAY_HEADER.iter().copied()) {
        return Err(IngestError::Header {
            expected: PLAY_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = ParsedLog::default();
    let mut rec = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {
                let line = rec.position().map_or(line, |p| p.line());
                match parse_row(&rec) {
                    Ok(p) => out.plays.push(p),
                    Err(message) => out.errors.push(RowError { line, message }),
                }
            }
            Err(e) if matches!(e.kind(), csv::ErrorKind::Utf8 { .. }) => {
                let line = e.position().map_or(line, |p| p.line());
                out.errors.push(RowError { line, message: e.to_string() });
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

pub fn write_play_log<W: Write>(out: W, plays: &[PlayRecord]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PLAY_HEADER)?;
    for p in plays {
        w.write_record([
            p.game_id.clone(),
            p.season.to_string(),
            p.week.to_string(),
            p.quarter.to_string(),
            p.clock_remaining_s.to_string(),
            p.possession.code().to_string(),
            p.down.to_string(),
            p.yards_to_go.to_string(),
            p.field_position.to_string(),
            p.home_score.to_string(),
            p.away_score.to_string(),
            p.home_timeouts.to_string(),
            p.away_timeouts.to_string(),
            p.home_possession_time_s.to_string(),
            p.home_won.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub game_id: String,
    pub state: GameState,
    pub label: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub games: usize,
    pub plays: usize,
    pub excluded_tied_games: Vec<String>,
}

/// Labeled states in input order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn from_samples(source: &str, samples: Vec<Sample>) -> Self {
        let games = samples.iter().map(|s| s.game_id.as_str()).collect::<BTreeSet<_>>().len();
        let plays = samples.len();
        Dataset {
            samples,
            provenance: Provenance {
                source: source.to_string(),
                games,
                plays,
                excluded_tied_games: Vec::new(),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &GameState> {
        self.samples.iter().map(|s| &s.state)
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn game_ids(&self) -> BTreeSet<&str> {
        self.samples.iter().map(|s| s.game_id.as_str()).collect()
    }

    /// Number of samples per game id.
    pub fn game_sizes(&self) -> BTreeMap<&str, usize> {
        let mut m = BTreeMap::new();
        for s in &self.samples {
            *m.entry(s.game_id.as_str()).or_insert(0) += 1;
        }
        m
    }
}

/// True when the game's last row is an end-of-game marker (no possession,
/// clock at zero, fourth quarter or later) with level scores.
fn is_tied(plays: &[&PlayRecord]) -> bool {
    let Some(last) = plays.iter().max_by_key(|p| p.time_elapsed_s()) else {
        return false;
    };
    last.quarter >= 4
        && last.clock_remaining_s == 0
        && last.possession == Possession::None
        && last.home_score == last.away_score
}

/// One labeled state per play; tied games are dropped and listed in the
/// provenance.
pub fn build_dataset(
    source: &str,
    plays: &[PlayRecord],
    ratings: &impl RatingLookup,
) -> Result<Dataset, IngestError> {
    let mut by_game: BTreeMap<&str, Vec<&PlayRecord>> = BTreeMap::new();
    for p in plays {
        by_game.entry(&p.game_id).or_default().push(p);
    }
    let mut tied = BTreeSet::new();
    for (id, rows) in &by_game {
        let first = rows[0];
        if let Some(bad) = rows
            .iter()
            .find(|r| r.home_won != first.home_won || r.season != first.season || r.week != first.week)
        {
            return Err(IngestError::InconsistentGame {
                game_id: id.to_string(),
                message: format!(
                    "rows disagree on label/season/week ({}/{}/{} vs {}/{}/{})",
                    first.home_won, first.season, first.week, bad.home_won, bad.season, bad.week
                ),
            });
        }
        if is_tied(rows) {
            tied.insert(id.to_string());
        }
    }

    let mut samples = Vec::with_capacity(plays.len());
    let mut missing = BTreeSet::new();
    for p in plays {
        if tied.contains(&p.game_id) {
            continue;
        }
        match state_from_play(p, ratings) {
            Ok(state) => samples.push(Sample {
                game_id: p.game_id.clone(),
                state,
                label: p.home_won,
            }),
            Err(e) => {
                missing.insert(e.to_string());
            }
        }
    }
    if !missing.is_empty() {
        return Err(IngestError::MissingRatings(missing.into_iter().collect()));
    }
    let mut ds = Dataset::from_samples(source, samples);
    ds.provenance.excluded_tied_games = tied.into_iter().collect();
    Ok(ds)
}

/// Splits by whole game using a seeded shuffle of the sorted game ids.
pub fn split_dataset(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), IngestError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(IngestError::BadFraction(train_fraction));
    }
    let mut ids: Vec<&str> = ds.game_ids().into_iter().collect();
    if ids.len() < 2 {
        return Err(IngestError::TooFewGames(ids.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_train = ((train_fraction * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1);
    let train_ids: BTreeSet<&str> = ids[..n_train].iter().copied().collect();

    let (train, test): (Vec<Sample>, Vec<Sample>) = ds
        .samples
        .iter()
        .cloned()
        .partition(|s| train_ids.contains(s.game_id.as_str()));
    let src = &ds.provenance.source;
    Ok((
        Dataset::from_samples(&format!("{src}#train"), train),
        Dataset::from_samples(&format!("{src}#test"), test),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ConstantRating;
    use proptest::prelude::*;

    const HEADER: &str = "game_id,season,week,quarter,clock_remaining_s,possession,down,yards_to_go,field_position,home_score,away_score,home_timeouts,away_timeouts,home_possession_time_s,home_won\n";

    fn play(game: &str, i: u32, home_won: u8) -> PlayRecord {
        PlayRecord {
            game_id: game.into(),
            season: 2015,
            week: 3,
            quarter: 1 + (i * 24 / 900).min(3),
            clock_remaining_s: 900 - (i * 24) % 900,
            possession: if i.is_multiple_of(2) { Possession::Home } else { Possession::Away },
            down: 1 + i % 4,
            yards_to_go: 1 + i % 10,
            field_position: (i * 7) % 100,
            home_score: i / 10,
            away_score: i / 15,
            home_timeouts: 3,
            away_timeouts: 3,
            home_possession_time_s: i * 12,
            home_won,
        }
    }

    #[test]
    fn header_only() {
        let out = parse_play_log(HEADER.as_bytes()).unwrap();
        assert!(out.plays.is_empty());
        assert!(out.errors.is_empty());
    }

    #[test]
    fn missing_header_is_fatal() {
        let err = parse_play_log("a,b\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::Header { .. }));
        assert!(parse_play_log("".as_bytes()).is_err());
    }

    #[test]
    fn one_row() {
        let text = format!("{HEADER}2015_01_PIT_NE,2015,1,2,431.7,A,3,8,42,10,7,2,3,640,1\n");
        let out = parse_play_log(text.as_bytes()).unwrap();
        assert!(out.errors.is_empty());
        let p = &out.plays[0];
        assert_eq!(p.game_id, "2015_01_PIT_NE");
        assert_eq!(p.quarter, 2);
        assert_eq!(p.clock_remaining_s, 431);
        assert_eq!(p.possession, Possession::Away);
        assert_eq!((p.down, p.yards_to_go, p.field_position), (3, 8, 42));
        assert_eq!((p.home_score, p.away_score), (10, 7));
        assert_eq!(p.home_possession_time_s, 640);
        assert_eq!(p.home_won, 1);
    }

    #[test]
    fn bad_rows_are_reported_with_lines() {
        let text = format!(
            "{HEADER}g,2015,1,1,900,H,1,10,25,0,0,3,3,0,1\ng,2015,1,1,880,H,6,10,25,0,0,3,3,0,1\ng,2015,1,1,870,X,1,10,25,0,0,3,3,0,1\n"
        );
        let out = parse_play_log(text.as_bytes()).unwrap();
        assert_eq!(out.plays.len(), 1);
        assert_eq!(out.errors.len(), 2);
        assert_eq!(out.errors[0].line, 3);
        assert!(out.errors[0].message.contains("down out of range 0..4"));
        assert_eq!(out.errors[1].line, 4);
        assert!(out.errors[1].message.contains("possession"));
        assert!(out.check_error_budget(0.01).is_err());
        assert!(out.check_error_budget(0.7).is_ok());
    }

    #[test]
    fn single_game_constant_label() {
        let plays: Vec<_> = (0..150).map(|i| play("2015_03_A_B", i, 1)).collect();
        let ds = build_dataset("t", &plays, &ConstantRating(1.0)).unwrap();
        assert_eq!(ds.len(), 150);
        assert!(ds.samples.iter().all(|s| s.label == 1));
        assert_eq!(ds.provenance.games, 1);
        assert_eq!(ds.provenance.plays, 150);
    }

    #[test]
    fn tied_game_is_excluded() {
        let mut plays: Vec<_> = (0..20).map(|i| play("won", i, 1)).collect();
        let mut tie: Vec<_> = (0..20).map(|i| play("tie", i, 0)).collect();
        let mut end = play("tie", 0, 0);
        end.quarter = 5;
        end.clock_remaining_s = 0;
        end.possession = Possession::None;
        end.down = 0;
        end.yards_to_go = 0;
        end.home_score = 20;
        end.away_score = 20;
        tie.push(end);
        plays.extend(tie);
        let ds = build_dataset("t", &plays, &ConstantRating(0.0)).unwrap();
        assert_eq!(ds.len(), 20);
        assert_eq!(ds.provenance.excluded_tied_games, vec!["tie".to_string()]);
    }

    #[test]
    fn per_game_counts_match_rows() {
        let mut plays = Vec::new();
        for (g, n) in [("g1", 120), ("g2", 95), ("g3", 143)] {
            plays.extend((0..n).map(|i| play(g, i, (n % 2) as u8)));
        }
        let ds = build_dataset("t", &plays, &ConstantRating(0.0)).unwrap();
        let sizes = ds.game_sizes();
        assert_eq!(sizes["g1"], 120);
        assert_eq!(sizes["g2"], 95);
        assert_eq!(sizes["g3"], 143);
    }

    #[test]
    fn inconsistent_label_rejected() {
        let plays = vec![play("g", 0, 1), play("g", 1, 0)];
        assert!(matches!(
            build_dataset("t", &plays, &ConstantRating(0.0)),
            Err(IngestError::InconsistentGame { .. })
        ));
    }

    fn games(n: usize) -> Dataset {
        let mut plays = Vec::new();
        for g in 0..n {
            plays.extend((0..5).map(|i| play(&format!("game{g:03}"), i, (g % 2) as u8)));
        }
        build_dataset("t", &plays, &ConstantRating(0.0)).unwrap()
    }

    #[test]
    fn split_seventy_thirty() {
        let ds = games(10);
        let (train, test) = split_dataset(&ds, 0.7, 42).unwrap();
        assert_eq!(train.game_ids().len(), 7);
        assert_eq!(test.game_ids().len(), 3);
        let again = split_dataset(&ds, 0.7, 42).unwrap();
        assert_eq!(again.0, train);
        assert_eq!(again.1, test);
    }

    #[test]
    fn split_errors() {
        assert!(matches!(split_dataset(&games(1), 0.7, 1), Err(IngestError::TooFewGames(1))));
        assert!(matches!(split_dataset(&games(5), 1.0, 1), Err(IngestError::BadFraction(_))));
    }

    proptest! {
        #[test]
        fn split_is_partition(seed in any::<u64>(), frac in 0.05f64..0.95) {
            let ds = games(100);
            let (train, test) = split_dataset(&ds, frac, seed).unwrap();
            let a = train.game_ids();
            let b = test.game_ids();
            prop_assert!(a.is_disjoint(&b));
            prop_assert_eq!(a.len() + b.len(), 100);
            prop_assert_eq!(train.len() + test.len(), ds.len());
            let target = frac * 100.0;
            prop_assert!((a.len() as f64 - target).abs() <= 1.0);
        }

        #[test]
        fn write_then_parse_is_identity(n in 1u32..40, won in 0u8..=1) {
            let plays: Vec<_> = (0..n).map(|i| play("2015_03_A_B", i, won)).collect();
            let mut buf = Vec::new();
            write_play_log(&mut buf, &plays).unwrap();
            let back = parse_play_log(&buf[..]).unwrap();
            prop_assert!(back.errors.is_empty());
            prop_assert_eq!(back.plays, plays);
        }
    }
}
