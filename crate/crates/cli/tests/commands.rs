use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

use winprob_cli::cli::{EvalArgs, Format, RatingsCommand, SynthArgs, TimelineArgs, TrainArgs};
use winprob_cli::commands;
use winprob_cli::config::AppConfig;

const HEADER: &str = "game_id,season,week,quarter,clock_remaining_s,possession,down,yards_to_go,field_position,\
home_score,away_score,home_timeouts,away_timeouts,home_possession_time_s,home_won";

fn synth(dir: &Path) -> PathBuf {
    let out = dir.join("league");
    commands::synth(SynthArgs { out_dir: out.clone(), seed: 21, rounds: 2 }).unwrap();
    out
}

fn train_args(league: &Path, out: PathBuf) -> TrainArgs {
    TrainArgs {
        data: Some(league.join("plays.csv")),
        ratings: Some(league.join("ratings.csv")),
        model: Some(winprob::models::ModelType::Glm),
        seed: Some(4),
        split: None,
        out: Some(out),
        epochs: None,
    }
}

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn train_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let league = synth(dir.path());
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let sa = parse(&commands::train(train_args(&league, a.clone()), &AppConfig::default()).unwrap());
    commands::train(train_args(&league, b.clone()), &AppConfig::default()).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(sa["model_type"], "glm");
    assert!(sa["train"]["games"].as_u64().unwrap() > sa["test"]["games"].as_u64().unwrap());
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let league = synth(dir.path());
    let cfg_path = dir.path().join("wp.toml");
    std::fs::write(
        &cfg_path,
        "data = \"league/plays.csv\"\nratings = \"league/ratings.csv\"\nmodel_type = \"nb\"\nseed = 2\nout = \"nb.json\"\n",
    )
    .unwrap();
    let cfg = AppConfig::load(&cfg_path).unwrap();
    let args = TrainArgs { data: None, ratings: None, model: None, seed: None, split: None, out: None, epochs: None };
    let s = parse(&commands::train(args, &cfg).unwrap());
    assert_eq!(s["model_type"], "nb");
    assert_eq!(s["seed"], 2);
    assert!(dir.path().join("nb.json").exists());
    drop(league);
}

#[test]
fn eval_buckets_cover_regulation() {
    let dir = tempfile::tempdir().unwrap();
    let league = synth(dir.path());
    let model = dir.path().join("m.json");
    commands::train(train_args(&league, model.clone()), &AppConfig::default()).unwrap();
    let args = EvalArgs {
        data: Some(league.join("plays.csv")),
        ratings: Some(league.join("ratings.csv")),
        model: Some(model),
        seed: Some(4),
        split: None,
        all: false,
        format: Format::Json,
        buckets: Some(300),
    };
    let out = parse(&commands::eval(args, &AppConfig::default()).unwrap());
    assert_eq!(out["scope"], "held_out");
    let buckets = out["buckets"].as_array().unwrap();
    let regulation: Vec<u64> = buckets
        .iter()
        .filter(|b| b["end_s"].as_u64().unwrap() <= 3600)
        .map(|b| b["bucket"].as_u64().unwrap())
        .collect();
    assert_eq!(regulation, (0..12).collect::<Vec<_>>());
    let report = &out["report"];
    assert!(report["brier"].as_f64().unwrap() < report["brier_base"].as_f64().unwrap());
}

#[test]
fn eval_csv_rejects_buckets() {
    let args = EvalArgs {
        data: Some("x.csv".into()),
        ratings: None,
        model: Some("m.json".into()),
        seed: None,
        split: None,
        all: true,
        format: Format::Csv,
        buckets: Some(300),
    };
    assert_eq!(commands::eval(args, &AppConfig::default()).unwrap_err().exit_code(), 2);
}

#[test]
fn fit_season_home_and_home() {
    // [DERIVED] margins 10 (A home) and -4 (B home): h + d = 10, h - d = -4
    // with d = R_A - R_B, so h = 3, d = 7 and sum-to-zero gives R_A = 3.5
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    std::fs::write(&m, "season,week,home,away,home_margin\n2015,1,A,B,10\n2015,2,B,A,-4\n").unwrap();
    let csv = commands::ratings(RatingsCommand::FitSeason { matchups: m, season: None, week: None, out: None }).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let get = |team: &str| rows.iter().find(|r| r[0] == team).unwrap()[2].parse::<f64>().unwrap();
    assert!((get("_home_edge") - 3.0).abs() < 1e-9);
    assert!((get("A") - 3.5).abs() < 1e-9);
    assert!((get("B") + 3.5).abs() < 1e-9);
    assert!(rows.iter().all(|r| r[4] == "3"));
}

#[test]
fn multi_season_results_need_a_season() {
    let dir = tempfile::tempdir().unwrap();
    let league = synth(dir.path());
    let cmd = || RatingsCommand::FitSeason { matchups: league.join("matchups.csv"), season: None, week: None, out: None };
    let err = commands::ratings(cmd()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.message.contains("--season"));
    let ok = RatingsCommand::FitSeason {
        matchups: league.join("matchups.csv"),
        season: Some(2016),
        week: None,
        out: None,
    };
    assert!(commands::ratings(ok).is_ok());
}

#[test]
fn week_one_blend_is_preseason() {
    let dir = tempfile::tempdir().unwrap();
    let league = synth(dir.path());
    let pre = dir.path().join("pre.csv");
    commands::ratings(RatingsCommand::FitPreseason {
        lines: league.join("win_totals.csv"),
        schedule: league.join("matchups.csv"),
        seed: Some(1),
        out: Some(pre.clone()),
    })
    .unwrap();
    let out = commands::ratings(RatingsCommand::Blend {
        preseason: pre.clone(),
        matchups: league.join("matchups.csv"),
        season: Some(2015),
        last_week: 4,
        out: None,
    })
    .unwrap();
    let pre_rows = winprob::ratings::read_ratings_csv(std::fs::File::open(&pre).unwrap()).unwrap();
    let table = winprob::ratings::read_ratings_csv(out.as_bytes()).unwrap();
    assert_eq!(table.weeks().into_iter().collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    for r in pre_rows.rows() {
        let b = table.get(&r.team, 1).unwrap();
        assert_eq!(b.blended_r, r.rho, "{}", r.team);
    }
}

#[test]
fn pagerank_ranks_unbeaten_team_first() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    std::fs::write(
        &m,
        "season,week,home,away,home_margin\n2015,1,W,X,7\n2015,2,Y,W,-3\n2015,3,X,Y,10\n",
    )
    .unwrap();
    let out = dir.path().join("pr.csv");
    commands::ratings(RatingsCommand::Pagerank { matchups: m, season: None, alpha: 0.85, out: Some(out.clone()) })
        .unwrap();
    let text = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "team,pagerank");
    assert!(lines[1].starts_with("W,"), "{text}");
}

#[test]
fn timeline_has_one_row_per_play() {
    let dir = tempfile::tempdir().unwrap();
    let league = synth(dir.path());
    let model = dir.path().join("m.json");
    commands::train(train_args(&league, model.clone()), &AppConfig::default()).unwrap();
    let plays = std::fs::read_to_string(league.join("plays.csv")).unwrap();
    let game = plays.lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    let n = plays.lines().filter(|l| l.starts_with(&format!("{game},"))).count();
    let args = |game: &str, format| TimelineArgs {
        data: Some(league.join("plays.csv")),
        ratings: Some(league.join("ratings.csv")),
        model: Some(model.clone()),
        game: game.to_string(),
        format,
    };
    let t = parse(&commands::timeline(args(&game, Format::Json), &AppConfig::default()).unwrap());
    assert_eq!(t["plays"].as_u64().unwrap() as usize, n);
    assert_eq!(t["rows"].as_array().unwrap().len(), n);
    let csv = commands::timeline(args(&game, Format::Csv), &AppConfig::default()).unwrap();
    assert_eq!(csv.lines().count(), n + 1);
    let err = commands::timeline(args("1999_01_AAA_BBB", Format::Json), &AppConfig::default()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn blowout_ends_near_certain() {
    let dir = tempfile::tempdir().unwrap();
    let league = synth(dir.path());
    let model = dir.path().join("m.json");
    commands::train(train_args(&league, model.clone()), &AppConfig::default()).unwrap();
    let game = "2015_03_BOS_ATL";
    let rows = [
        "1,900,A,0,0,35,0,0,3,3,0",
        "2,420,H,1,10,40,14,0,3,3,700",
        "3,300,A,2,4,70,28,7,2,3,1300",
        "4,120,H,1,10,55,35,7,1,0,1900",
        "4,30,H,2,8,62,35,7,1,0,1950",
    ];
    let mut text = format!("{HEADER}\n");
    for r in rows {
        text.push_str(&format!("{game},2015,3,{r},1\n"));
    }
    let plays = dir.path().join("blowout.csv");
    std::fs::write(&plays, text).unwrap();
    let t = parse(
        &commands::timeline(
            TimelineArgs {
                data: Some(plays),
                ratings: Some(league.join("ratings.csv")),
                model: Some(model),
                game: game.into(),
                format: Format::Json,
            },
            &AppConfig::default(),
        )
        .unwrap(),
    );
    assert!(t["final_p_home"].as_f64().unwrap() > 0.99, "{}", t["final_p_home"]);
}

fn winprob(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_winprob")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn missing_input_exits_2_naming_path() {
    let (code, _, err) = winprob(&["train", "--data", "/no/such/plays.csv", "--model", "glm", "--seed", "1", "--out", "m.json"]);
    assert_eq!(code, 2);
    let e: Value = parse(err.trim());
    assert_eq!(e["error"]["path"], "/no/such/plays.csv");
    assert_eq!(e["error"]["kind"], "input");
}

#[test]
fn bad_flags_exit_2_as_json() {
    let (code, _, err) = winprob(&["train", "--model", "svm"]);
    assert_eq!(code, 2);
    assert_eq!(parse(err.trim())["error"]["kind"], "usage");
}

#[test]
fn serve_refuses_without_model() {
    let (code, _, err) = winprob(&["serve", "--model", "/no/such/model.json", "--port", "0"]);
    assert_eq!(code, 2);
    assert!(err.contains("/no/such/model.json"));
}

#[test]
fn predict_via_binary() {
    let dir = tempfile::tempdir().unwrap();
    let league = synth(dir.path());
    let model = dir.path().join("m.json");
    commands::train(train_args(&league, model.clone()), &AppConfig::default()).unwrap();
    let state = r#"{"time_elapsed_s":60,"score_diff":0,"possession":"A","down":1,"yards_to_go":10,"field_position":25,"home_timeouts":3,"away_timeouts":3,"home_possession_time_s":0,"rating_diff":0.0}"#;
    let (code, out, _) = winprob(&["predict", "--model", model.to_str().unwrap(), "--state", state]);
    assert_eq!(code, 0);
    let p = parse(out.trim())["p_home"].as_f64().unwrap();
    assert!(p > 0.0 && p < 1.0);
    let bad = state.replace("\"down\":1", "\"down\":6");
    let (code, _, err) = winprob(&["predict", "--model", model.to_str().unwrap(), "--state", &bad]);
    assert_eq!(code, 2);
    assert!(err.contains("down"));
}
