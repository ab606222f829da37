use winprob::eval::evaluate;
use winprob::ingest::{build_dataset, parse_play_log, split_dataset, write_play_log};
use winprob::models::{load_model, save_model, train, ModelType, TrainConfig, WinProbModel};
use winprob::ratings::{read_ratings_csv, write_ratings_csv};
use winprob::synth::{gen_league, LeagueConfig};

#[test]
fn league_round_trips_through_csv_and_trains() {
    let league = gen_league(&LeagueConfig { seed: 17, rounds: 2, ..LeagueConfig::default() });

    let mut plays_csv = Vec::new();
    write_play_log(&mut plays_csv, &league.plays).unwrap();
    let log = parse_play_log(plays_csv.as_slice()).unwrap();
    assert!(log.errors.is_empty(), "{:?}", &log.errors[..log.errors.len().min(3)]);
    assert_eq!(log.plays, league.plays);

    let mut ratings_csv = Vec::new();
    write_ratings_csv(&mut ratings_csv, league.table.rows().cloned()).unwrap();
    let table = read_ratings_csv(ratings_csv.as_slice()).unwrap();
    assert_eq!(table, league.table);

    let ds = build_dataset("league", &log.plays, &table).unwrap();
    let (tr, te) = split_dataset(&ds, 0.7, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig { seed: 3, epochs: 150, ..TrainConfig::default() };
    for kind in [ModelType::Glm, ModelType::Nb, ModelType::Fnn] {
        let m = train(kind, &tr, &cfg).unwrap();
        let path = dir.path().join(format!("{kind}.json"));
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        let s = &te.samples[0].state;
        assert_eq!(m.predict(s).to_bits(), back.predict(s).to_bits(), "{kind}");
        let r = evaluate(&back, &te).unwrap();
        assert!(r.brier < r.brier_base, "{kind}: {} vs climatology {}", r.brier, r.brier_base);
    }
}

#[test]
fn corrupt_rows_are_counted_not_fatal() {
    let league = gen_league(&LeagueConfig { seed: 2, ..LeagueConfig::default() });
    let mut buf = Vec::new();
    write_play_log(&mut buf, &league.plays).unwrap();
    let mut text = String::from_utf8(buf).unwrap();
    text.push_str("2015_01_BOS_ATL,2015,1,9,900,H,1,10,25,0,0,3,3,0,1\n");
    text.push_str("2015_01_BOS_ATL,2015,1,1,900,Q,1,10,25,0,0,3,3,0,1\n");
    let log = parse_play_log(text.as_bytes()).unwrap();
    assert_eq!(log.errors.len(), 2);
    assert_eq!(log.plays.len(), league.plays.len());
    assert!(log.check_error_budget(0.01).is_ok());
    assert!(log.check_error_budget(0.0).is_err());
}
