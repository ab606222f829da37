//! End-to-end oracle checks that need no external data.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::eval::{brier, fit_reliability_line, reliability_curve, time_bucketed_eval};
use crate::features::{StandardizationStats, N_FEATURES};
use crate::ingest::split_dataset;
use crate::models::{model_to_json, train, train_glm, Activation, Design, FnnModel, ModelType, TrainConfig};
use crate::ratings::{
    blend_weight, build_league_network, fit_season_ratings, pagerank_ratings, std_normal_cdf, Matchup,
    SeasonFitConfig,
};
use crate::synth::{center_ratings, gen_calibrated_preds, gen_glm_dataset, gen_schedule, GlmTruth};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

type CheckResult = Result<String, String>;
type NamedCheck = (&'static str, Box<dyn Fn() -> CheckResult>);

fn verdict(ok: bool, detail: String) -> CheckResult {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn glm_recovery(seed: u64) -> CheckResult {
    let truth = GlmTruth::default();
    let (ds, _) = gen_glm_dataset(&truth, 200_000, seed).map_err(|e| e.to_string())?;
    let d = Design::fit(&ds).map_err(|e| e.to_string())?;
    let m = train_glm(&d.x, &d.y, d.stats, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let err = m
        .weights
        .iter()
        .zip(&truth.weights)
        .map(|(a, b)| (a - b).abs())
        .fold((m.intercept - truth.intercept).abs(), f64::max);
    verdict(err < 0.05, format!("max coefficient error {err:.4} (limit 0.05)"))
}

fn calibration(seed: u64) -> CheckResult {
    let (p, y) = gen_calibrated_preds(100_000, seed);
    let curve = reliability_curve(&p, &y, 0.05).map_err(|e| e.to_string())?;
    let l = fit_reliability_line(&curve).map_err(|e| e.to_string())?;
    verdict(
        (0.97..=1.03).contains(&l.slope) && l.intercept.abs() <= 0.02 && l.r2 >= 0.99,
        format!("slope {:.4}, intercept {:.4}, R2 {:.4}", l.slope, l.intercept, l.r2),
    )
}

fn brier_identities() -> CheckResult {
    let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 57)).collect();
    let b = brier(&[0.57; 100], &labels).map_err(|e| e.to_string())?;
    let perfect = brier(&[1.0, 0.0], &[1, 0]).map_err(|e| e.to_string())?;
    verdict((b - 0.2451).abs() < 1e-12 && perfect == 0.0, format!("q=0.57 -> {b:.6}, perfect -> {perfect}"))
}

fn ratings(seed: u64) -> CheckResult {
    let truth: BTreeMap<String, f64> = (0..6).map(|i| (format!("T{i}"), f64::from(i) * 1.7)).collect();
    let truth = center_ratings(&truth);
    let fit = fit_season_ratings(&gen_schedule(2.5, &truth, 0.0, 1, seed), &SeasonFitConfig::default())
        .map_err(|e| e.to_string())?;
    let err = truth
        .iter()
        .map(|(t, r)| (fit.ratings[t] - r).abs())
        .fold((fit.home_edge - 2.5).abs(), f64::max);
    let sum = fit.ratings.values().sum::<f64>().abs();
    verdict(err < 1e-6 && sum < 1e-9, format!("max error {err:.1e}, |sum R| {sum:.1e}"))
}

fn links() -> CheckResult {
    let p = std_normal_cdf(0.5);
    let g = [blend_weight(1), blend_weight(6), blend_weight(11)];
    verdict(
        std_normal_cdf(0.0) == 0.5 && (p - 0.691462).abs() < 1e-4 && g == [1.0, 0.5, 0.0],
        format!("Phi(0.5) = {p:.6}, gamma(1, 6, 11) = {g:?}"),
    )
}

fn fnn_gradient(seed: u64) -> CheckResult {
    let stats = StandardizationStats { mean: vec![0.0; N_FEATURES], sd: vec![1.0; N_FEATURES] };
    let mut net = FnnModel::init(stats, Activation::Sigmoid, 0.5, seed);
    let x: Vec<[f64; N_FEATURES]> = (0..16)
        .map(|i| std::array::from_fn(|j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0))
        .collect();
    let y: Vec<u8> = (0..16).map(|i| (i % 3 == 0) as u8).collect();
    let (_, g) = net.loss_and_grad(&x, &y);
    let theta = net.params();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..theta.len() {
        let mut p = theta.clone();
        p[i] += 1e-5;
        net.set_params(&p);
        let up = net.loss(&x, &y);
        p[i] -= 2e-5;
        net.set_params(&p);
        let fd = (up - net.loss(&x, &y)) / 2e-5;
        num += (g[i] - fd).powi(2);
        den += (g[i].abs() + fd.abs()).powi(2);
    }
    let rel = num.sqrt() / den.sqrt().max(1e-12);
    verdict(
        rel < 1e-5 && net.architecture() == [21, 6, 3, 1],
        format!("relative error {rel:.2e}, layers {:?}", net.architecture()),
    )
}

fn pagerank() -> CheckResult {
    let net = build_league_network(&[Matchup {
        season: 2015,
        week: 1,
        home: "W".into(),
        away: "L".into(),
        home_margin: 7.0,
    }]);
    let pi = pagerank_ratings(&net, 0.85, None).map_err(|e| e.to_string())?;
    let (w, l) = (net.index_of("W").unwrap(), net.index_of("L").unwrap());
    verdict(pi[w] > pi[l], format!("winner {:.4}, loser {:.4}", pi[w], pi[l]))
}

fn buckets(seed: u64) -> CheckResult {
    let (ds, _) = gen_glm_dataset(&GlmTruth::default(), 100_000, seed).map_err(|e| e.to_string())?;
    let (tr, te) = split_dataset(&ds, 0.7, seed).map_err(|e| e.to_string())?;
    let m = train(ModelType::Glm, &tr, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let b = time_bucketed_eval(&m, &te, 300).map_err(|e| e.to_string())?;
    if b.len() != 12 {
        return Err(format!("{} buckets", b.len()));
    }
    let early = (b[0].report.brier + b[1].report.brier) / 2.0;
    let late = (b[10].report.brier + b[11].report.brier) / 2.0;
    verdict(late < early, format!("Brier first two buckets {early:.4}, last two {late:.4}"))
}

fn determinism(seed: u64) -> CheckResult {
    let once = || -> Result<String, String> {
        let (ds, _) = gen_glm_dataset(&GlmTruth::default(), 5_000, seed).map_err(|e| e.to_string())?;
        let cfg = TrainConfig { seed, epochs: 50, ..TrainConfig::default() };
        let m = train(ModelType::Fnn, &ds, &cfg).map_err(|e| e.to_string())?;
        model_to_json(&m).map_err(|e| e.to_string())
    };
    let (a, b) = (once()?, once()?);
    verdict(a == b, format!("two FNN runs, {} bytes, identical: {}", a.len(), a == b))
}

/// Runs every check with the given seed.
pub fn run_selftest(seed: u64) -> SelftestReport {
    let checks: Vec<NamedCheck> = vec![
        ("glm_recovery", Box::new(move || glm_recovery(seed))),
        ("calibration_line", Box::new(move || calibration(seed))),
        ("brier_identities", Box::new(brier_identities)),
        ("ratings_recovery", Box::new(move || ratings(seed))),
        ("normal_link_and_blend", Box::new(links)),
        ("fnn_gradient", Box::new(move || fnn_gradient(seed))),
        ("pagerank_two_node", Box::new(pagerank)),
        ("time_bucket_trend", Box::new(move || buckets(seed))),
        ("determinism", Box::new(move || determinism(seed))),
    ];
    let checks: Vec<Check> = checks
        .into_iter()
        .map(|(name, f)| {
            let start = Instant::now();
            let r = f();
            let seconds = start.elapsed().as_secs_f64();
            let passed = r.is_ok();
            Check { name, passed, detail: r.unwrap_or_else(|e| e), seconds }
        })
        .collect();
    SelftestReport { passed: checks.iter().all(|c| c.passed), checks }
}
