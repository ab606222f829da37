//! One function per subcommand. Each returns the text destined for stdout
//! so the binary and the tests share a single code path.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use winprob::domain::{state_from_play, to_canonical_json, ConstantRating, PlayRecord, RatingLookup, TeamRating};
use winprob::eval::{evaluate, time_bucketed_eval, BucketReport, EvalReport};
use winprob::ingest::{build_dataset, parse_play_log, split_dataset, write_play_log, Dataset, DEFAULT_ERROR_BUDGET};
use winprob::models::{load_model, save_model, train as train_model, Model, ModelType, TrainConfig, WinProbModel};
use winprob::ratings::{
    blended_table, build_league_network, expected_wins, fit_preseason_ratings, fit_season_ratings, pagerank_ratings,
    read_fixtures, read_matchups, read_ratings_csv, read_win_totals, write_matchups, write_ratings_csv,
    write_win_totals, Fixture, Matchup, PreseasonConfig, PreseasonRatings, RatingsTable, SeasonFitConfig, WinTotalLine,
    HOME_EDGE_TEAM,
};
use winprob::selftest::run_selftest;
use winprob::synth::{gen_league, LeagueConfig};

use crate::cli::{EvalArgs, Format, PredictArgs, RatingsCommand, SynthArgs, TimelineArgs, TrainArgs};
use crate::config::{check_split, pick, AppConfig, DEFAULT_SPLIT};
use crate::error::CliError;
use crate::server::{parse_state, win_prob};

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::input(format!("cannot open: {e}")).at(path))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create directory: {e}")).at(dir))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::input(format!("cannot create: {e}")).at(path))
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    to_canonical_json(value).map_err(|e| CliError::internal(e.to_string()))
}

/// Renders CSV into a file when `out` is set (returning a short JSON note),
/// otherwise into the returned string.
fn emit(
    out: Option<&Path>,
    what: &str,
    write: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<String, CliError> {
    match out {
        Some(path) => {
            let mut f = create(path)?;
            write(&mut f)?;
            f.flush().map_err(|e| CliError::input(e.to_string()).at(path))?;
            json(&serde_json::json!({ "wrote": what, "path": path.display().to_string() }))
        }
        None => {
            let mut buf = Vec::new();
            write(&mut buf)?;
            String::from_utf8(buf).map_err(|e| CliError::internal(e.to_string()))
        }
    }
}

fn read_plays(path: &Path) -> Result<(Vec<PlayRecord>, usize), CliError> {
    let log = parse_play_log(open(path)?).map_err(|e| CliError::from(e).at(path))?;
    log.check_error_budget(DEFAULT_ERROR_BUDGET).map_err(|e| CliError::from(e).at(path))?;
    Ok((log.plays, log.errors.len()))
}

fn read_table(path: &Path) -> Result<RatingsTable, CliError> {
    read_ratings_csv(open(path)?).map_err(|e| CliError::from(e).at(path))
}

/// Either a ratings table or, when no ratings file is configured, a zero
/// differential for every play.
enum Lookup {
    Table(RatingsTable),
    Zero(ConstantRating),
}

impl Lookup {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => Ok(Lookup::Table(read_table(p)?)),
            None => Ok(Lookup::Zero(ConstantRating(0.0))),
        }
    }
}

impl RatingLookup for Lookup {
    fn rating_diff(&self, play: &PlayRecord) -> Result<f64, winprob::domain::LookupError> {
        match self {
            Lookup::Table(t) => t.rating_diff(play),
            Lookup::Zero(c) => c.rating_diff(play),
        }
    }
}

/// Parses the play log, applies the row-error budget and labels every play.
pub fn load_dataset(data: &Path, ratings: Option<&Path>) -> Result<(Dataset, usize), CliError> {
    let (plays, rejected) = read_plays(data)?;
    let lookup = Lookup::load(ratings)?;
    let ds = build_dataset(&data.display().to_string(), &plays, &lookup).map_err(|e| CliError::from(e).at(data))?;
    Ok((ds, rejected))
}

fn load_model_at(path: &Path) -> Result<Model, CliError> {
    load_model(path).map_err(|e| {
        let mut err = CliError::from(e);
        err.path.get_or_insert_with(|| path.display().to_string());
        err
    })
}

#[derive(Serialize)]
struct SplitSummary {
    games: usize,
    rows: usize,
}

#[derive(Serialize)]
struct TrainSummary {
    model_type: ModelType,
    model_path: String,
    seed: u64,
    split: f64,
    train: SplitSummary,
    test: SplitSummary,
    rejected_rows: usize,
    excluded_tied_games: usize,
    iterations: usize,
    objective: f64,
}

pub fn train(args: TrainArgs, cfg: &AppConfig) -> Result<String, CliError> {
    let data = pick(args.data, &cfg.data, "data")?;
    let ratings = args.ratings.or_else(|| cfg.ratings.clone());
    let kind = pick(args.model, &cfg.model_type, "model")?;
    let seed = pick(args.seed, &cfg.seed, "seed")?;
    let split = check_split(args.split.or(cfg.split).unwrap_or(DEFAULT_SPLIT))?;
    let out = pick(args.out, &cfg.out, "out")?;

    let (ds, rejected) = load_dataset(&data, ratings.as_deref())?;
    let (tr, te) = split_dataset(&ds, split, seed).map_err(|e| CliError::from(e).at(&data))?;
    let mut tcfg = TrainConfig { seed, ..TrainConfig::default() };
    if let Some(e) = args.epochs {
        tcfg.epochs = e;
    }
    let model = train_model(kind, &tr, &tcfg)?;
    save_model(&model, &out)?;
    let meta = model.meta();
    json(&TrainSummary {
        model_type: kind,
        model_path: out.display().to_string(),
        seed,
        split,
        train: SplitSummary { games: tr.provenance.games, rows: tr.len() },
        test: SplitSummary { games: te.provenance.games, rows: te.len() },
        rejected_rows: rejected,
        excluded_tied_games: ds.provenance.excluded_tied_games.len(),
        iterations: meta.iterations,
        objective: meta.objective,
    })
}

#[derive(Serialize)]
struct EvalOutput {
    source: String,
    model_type: ModelType,
    scope: &'static str,
    rows: usize,
    games: usize,
    report: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    buckets: Option<Vec<BucketReport>>,
}

pub fn eval(args: EvalArgs, cfg: &AppConfig) -> Result<String, CliError> {
    let data = pick(args.data, &cfg.data, "data")?;
    let ratings = args.ratings.or_else(|| cfg.ratings.clone());
    let model_path = pick(args.model, &cfg.model, "model")?;
    if args.buckets.is_some() && args.format == Format::Csv {
        return Err(CliError::usage("--buckets is only available with --format json"));
    }
    let seed = if args.all { None } else { args.seed.or(cfg.seed) };

    let model = load_model_at(&model_path)?;
    let (ds, _) = load_dataset(&data, ratings.as_deref())?;
    let (ds, scope) = match seed {
        Some(seed) => {
            let split = check_split(args.split.or(cfg.split).unwrap_or(DEFAULT_SPLIT))?;
            (split_dataset(&ds, split, seed).map_err(|e| CliError::from(e).at(&data))?.1, "held_out")
        }
        None => (ds, "all"),
    };
    let report = evaluate(&model, &ds)?;
    match args.format {
        Format::Csv => {
            let mut buf = Vec::new();
            report.curve.write_csv(&mut buf).map_err(|e| CliError::internal(e.to_string()))?;
            String::from_utf8(buf).map_err(|e| CliError::internal(e.to_string()))
        }
        Format::Json => {
            let buckets = args.buckets.or(cfg.buckets).map(|b| time_bucketed_eval(&model, &ds, b)).transpose()?;
            json(&EvalOutput {
                source: data.display().to_string(),
                model_type: model.model_type(),
                scope,
                rows: ds.len(),
                games: ds.provenance.games,
                report,
                buckets,
            })
        }
    }
}

fn season_rows(h: f64, ratings: &BTreeMap<String, f64>, week: u32) -> Vec<TeamRating> {
    std::iter::once((HOME_EDGE_TEAM.to_string(), h))
        .chain(ratings.iter().map(|(t, r)| (t.clone(), *r)))
        .map(|(team, r)| TeamRating { team, rho: 0.0, season_r: r, blended_r: r, week })
        .collect()
}

fn preseason_rows(p: &PreseasonRatings) -> Vec<TeamRating> {
    std::iter::once((HOME_EDGE_TEAM.to_string(), p.home_edge))
        .chain(p.ratings.iter().map(|(t, r)| (t.clone(), *r)))
        .map(|(team, r)| TeamRating { team, rho: r, season_r: 0.0, blended_r: r, week: 1 })
        .collect()
}

/// Recovers preseason ratings from the rho column of the earliest week.
fn preseason_from_table(table: &RatingsTable, path: &Path) -> Result<PreseasonRatings, CliError> {
    let week = *table
        .weeks()
        .iter()
        .next()
        .ok_or_else(|| CliError::input("ratings file has no rows").at(path))?;
    let mut home_edge = None;
    let mut ratings = BTreeMap::new();
    for r in table.rows().filter(|r| r.week == week) {
        if r.team == HOME_EDGE_TEAM {
            home_edge = Some(r.rho);
        } else {
            ratings.insert(r.team.clone(), r.rho);
        }
    }
    let home_edge =
        home_edge.ok_or_else(|| CliError::input(format!("no {HOME_EDGE_TEAM} row in week {week}")).at(path))?;
    Ok(PreseasonRatings { home_edge, ratings, objective: 0.0, grad_norm: 0.0, iterations: 0, trace: vec![] })
}

/// Restricts results to one season, which must be named when the file
/// holds more than one.
fn one_season(games: Vec<Matchup>, season: Option<i32>, path: &Path) -> Result<Vec<Matchup>, CliError> {
    let seasons: BTreeSet<i32> = games.iter().map(|m| m.season).collect();
    let season = match (season, seasons.len()) {
        (Some(s), _) => s,
        (None, 0 | 1) => return Ok(games),
        (None, _) => {
            return Err(CliError::usage(format!("results span seasons {seasons:?}; choose one with --season")).at(path))
        }
    };
    let games: Vec<Matchup> = games.into_iter().filter(|m| m.season == season).collect();
    if games.is_empty() {
        return Err(CliError::input(format!("no games in season {season}")).at(path));
    }
    Ok(games)
}

fn load_matchups(path: &Path, season: Option<i32>) -> Result<Vec<Matchup>, CliError> {
    let games = read_matchups(open(path)?).map_err(|e| CliError::from(e).at(path))?;
    one_season(games, season, path)
}

fn ratings_csv(rows: Vec<TeamRating>) -> impl FnOnce(&mut dyn Write) -> Result<(), CliError> {
    move |w| write_ratings_csv(w, rows).map_err(CliError::from)
}

pub fn ratings(cmd: RatingsCommand) -> Result<String, CliError> {
    match cmd {
        RatingsCommand::FitSeason { matchups, season, week, out } => {
            let games = load_matchups(&matchups, season)?;
            let fit = fit_season_ratings(&games, &SeasonFitConfig::default())?;
            let week = week.unwrap_or_else(|| games.iter().map(|m| m.week).max().unwrap_or(0) + 1);
            emit(out.as_deref(), "ratings", ratings_csv(season_rows(fit.home_edge, &fit.ratings, week)))
        }
        RatingsCommand::FitPreseason { lines, schedule, seed, out } => {
            let totals = read_win_totals(open(&lines)?).map_err(|e| CliError::from(e).at(&lines))?;
            let fixtures = read_fixtures(open(&schedule)?).map_err(|e| CliError::from(e).at(&schedule))?;
            let cfg = PreseasonConfig { seed: seed.unwrap_or(0), ..PreseasonConfig::default() };
            let fit = fit_preseason_ratings(&totals, &fixtures, &cfg)?;
            emit(out.as_deref(), "ratings", ratings_csv(preseason_rows(&fit)))
        }
        RatingsCommand::Blend { preseason, matchups, season, last_week, out } => {
            if !(1..=17).contains(&last_week) {
                return Err(CliError::usage(format!("--last-week must lie in 1..=17, got {last_week}")));
            }
            let pre = preseason_from_table(&read_table(&preseason)?, &preseason)?;
            let games = load_matchups(&matchups, season)?;
            let table = blended_table(Some(&pre), &games, last_week, &SeasonFitConfig::default())?;
            emit(out.as_deref(), "ratings", ratings_csv(table.rows().cloned().collect()))
        }
        RatingsCommand::Pagerank { matchups, season, alpha, out } => {
            let games = load_matchups(&matchups, season)?;
            let net = build_league_network(&games);
            let pi = pagerank_ratings(&net, alpha, None)?;
            let mut ranked: Vec<(&String, f64)> = net.teams.iter().zip(pi).collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            emit(out.as_deref(), "pagerank", move |w| {
                let io = |e: std::io::Error| CliError::internal(e.to_string());
                writeln!(w, "team,pagerank").map_err(io)?;
                for (t, p) in ranked {
                    writeln!(w, "{t},{p}").map_err(io)?;
                }
                Ok(())
            })
        }
    }
}

#[derive(Serialize)]
struct TimelineRow {
    time_elapsed_s: u32,
    quarter: u32,
    clock_remaining_s: u32,
    home_score: u32,
    away_score: u32,
    p_home: f64,
}

#[derive(Serialize)]
struct Timeline {
    game_id: String,
    model_type: ModelType,
    home_won: u8,
    plays: usize,
    min_p_home: f64,
    min_time_s: u32,
    final_p_home: f64,
    rows: Vec<TimelineRow>,
}

pub fn timeline(args: TimelineArgs, cfg: &AppConfig) -> Result<String, CliError> {
    let data = pick(args.data, &cfg.data, "data")?;
    let ratings = args.ratings.or_else(|| cfg.ratings.clone());
    let model = load_model_at(&pick(args.model, &cfg.model, "model")?)?;
    let (plays, _) = read_plays(&data)?;
    let mut game: Vec<PlayRecord> = plays.into_iter().filter(|p| p.game_id == args.game).collect();
    if game.is_empty() {
        return Err(CliError::input(format!("no plays for game {:?}", args.game)).at(&data));
    }
    game.sort_by_key(PlayRecord::time_elapsed_s);
    let lookup = Lookup::load(ratings.as_deref())?;
    let mut rows = Vec::with_capacity(game.len());
    for p in &game {
        let state = state_from_play(p, &lookup).map_err(|e| CliError::input(e.to_string()))?;
        rows.push(TimelineRow {
            time_elapsed_s: state.time_elapsed_s,
            quarter: p.quarter,
            clock_remaining_s: p.clock_remaining_s,
            home_score: p.home_score,
            away_score: p.away_score,
            p_home: model.predict(&state),
        });
    }
    if args.format == Format::Csv {
        let mut out = String::from("time_elapsed_s,p_home\n");
        for r in &rows {
            out.push_str(&format!("{},{}\n", r.time_elapsed_s, r.p_home));
        }
        return Ok(out);
    }
    let min = rows.iter().min_by(|a, b| a.p_home.total_cmp(&b.p_home)).expect("non-empty");
    json(&Timeline {
        game_id: args.game,
        model_type: model.model_type(),
        home_won: game[0].home_won,
        plays: rows.len(),
        min_p_home: min.p_home,
        min_time_s: min.time_elapsed_s,
        final_p_home: rows.last().expect("non-empty").p_home,
        rows,
    })
}

pub fn predict(args: PredictArgs, cfg: &AppConfig, stdin: impl Read) -> Result<String, CliError> {
    let model = load_model_at(&pick(args.model, &cfg.model, "model")?)?;
    let body = match args.state {
        Some(s) => s.into_bytes(),
        None => {
            let mut buf = Vec::new();
            let mut stdin = stdin;
            stdin.read_to_end(&mut buf).map_err(|e| CliError::input(format!("stdin: {e}")))?;
            buf
        }
    };
    let state = parse_state(&body).map_err(|e| match e.fields.as_slice() {
        [] => CliError::input(e.message),
        [only] if e.message.ends_with(&only.message) => CliError::input(e.message),
        fields => {
            let detail: Vec<String> = fields.iter().map(|f| format!("{}: {}", f.field, f.message)).collect();
            CliError::input(format!("{} ({})", e.message, detail.join("; ")))
        }
    })?;
    json(&win_prob(&model, &state))
}

/// Returns the report JSON and whether every check passed.
pub fn selftest(seed: u64) -> Result<(String, bool), CliError> {
    let report = run_selftest(seed);
    Ok((json(&report)?, report.passed))
}

pub fn synth(args: SynthArgs) -> Result<String, CliError> {
    if args.rounds == 0 {
        return Err(CliError::usage("--rounds must be at least 1"));
    }
    let league = gen_league(&LeagueConfig { seed: args.seed, rounds: args.rounds, ..LeagueConfig::default() });
    let dir = &args.out_dir;
    let path = |name: &str| -> PathBuf { dir.join(name) };

    let p = path("plays.csv");
    write_play_log(create(&p)?, &league.plays).map_err(|e| CliError::from(e).at(&p))?;
    let p = path("ratings.csv");
    write_ratings_csv(create(&p)?, league.table.rows().cloned()).map_err(|e| CliError::from(e).at(&p))?;
    let p = path("matchups.csv");
    write_matchups(create(&p)?, &league.matchups).map_err(|e| CliError::from(e).at(&p))?;

    let fixtures: Vec<Fixture> = league.matchups.iter().map(Fixture::from).collect();
    let totals: Vec<WinTotalLine> = league
        .ratings
        .keys()
        .map(|t| WinTotalLine { team: t.clone(), lambda: expected_wins(t, &fixtures, league.home_edge, &league.ratings) })
        .collect();
    let p = path("win_totals.csv");
    write_win_totals(create(&p)?, &totals).map_err(|e| CliError::from(e).at(&p))?;

    json(&serde_json::json!({
        "out_dir": dir.display().to_string(),
        "seed": args.seed,
        "games": league.matchups.len(),
        "plays": league.plays.len(),
        "home_edge": league.home_edge,
        "ratings": league.ratings,
    }))
}
