//! Accuracy, Brier score and calibration diagnostics.
//!
//! Everything here is a pure function of predictions and labels. The
//! reliability line is a count-weighted least-squares fit of empirical win
//! frequency on mean predicted probability over non-empty bins, with
//! normal-theory 95% intervals from the Student t distribution.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::models::WinProbModel;

pub const DEFAULT_BIN_WIDTH: f64 = 0.05;
pub const DEFAULT_BUCKET_S: u32 = 300;
/// Buckets with fewer states than this are reported but flagged.
pub const LOW_SAMPLE_STATES: usize = 30;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no predictions to evaluate")]
    Empty,
    #[error("{preds} predictions but {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("prediction {index} is {value}, outside [0, 1]")]
    PredOutOfRange { index: usize, value: f64 },
    #[error("label {index} is {value}, expected 0 or 1")]
    BadLabel { index: usize, value: u8 },
    #[error("bin width {0} does not divide 1")]
    BadBinWidth(f64),
    #[error("reliability line needs at least 3 non-empty bins, got {0}")]
    TooFewBins(usize),
    #[error("bucket size must be positive")]
    BadBucket,
    #[error("{group} group has {n} drives, need at least 3")]
    TooFewDrives { group: &'static str, n: usize },
    #[error("{0} has zero variance")]
    DegenerateVariance(&'static str),
}

fn check(preds: &[f64], labels: &[u8]) -> Result<(), EvalError> {
    if preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch { preds: preds.len(), labels: labels.len() });
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some((index, &value)) = preds.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
        return Err(EvalError::PredOutOfRange { index, value });
    }
    if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &l)| l > 1) {
        return Err(EvalError::BadLabel { index, value });
    }
    Ok(())
}

pub fn brier(preds: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    check(preds, labels)?;
    let s: f64 = preds.iter().zip(labels).map(|(p, &y)| (p - f64::from(y)).powi(2)).sum();
    Ok(s / preds.len() as f64)
}

pub fn base_rate(labels: &[u8]) -> Result<f64, EvalError> {
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    Ok(pos as f64 / labels.len() as f64)
}

/// Brier score of the constant base-rate predictor, `q (1 - q)`.
pub fn climatology_brier(labels: &[u8]) -> Result<f64, EvalError> {
    let q = base_rate(labels)?;
    Ok(q * (1.0 - q))
}

/// Fraction of correct calls, where `pred >= threshold` calls a home win.
pub fn accuracy(preds: &[f64], labels: &[u8], threshold: f64) -> Result<f64, EvalError> {
    check(preds, labels)?;
    let hits = preds
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| u8::from(p >= threshold) == y)
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub mean_pred: f64,
    pub emp_freq: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityCurve {
    pub bin_width: f64,
    /// Non-empty bins in increasing order.
    pub bins: Vec<ReliabilityBin>,
}

impl ReliabilityCurve {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for b in &self.bins {
            w.serialize(b)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn edge(k: usize, n_bins: usize) -> f64 {
    k as f64 / n_bins as f64
}

fn bin_index(p: f64, n_bins: usize) -> usize {
    let mut k = ((p * n_bins as f64).floor() as usize).min(n_bins - 1);
    // the product can land a hair either side of an integer; settle against
    // the same edges the bins report
    if k + 1 < n_bins && p >= edge(k + 1, n_bins) {
        k += 1;
    }
    if k > 0 && p < edge(k, n_bins) {
        k -= 1;
    }
    k
}

/// Bins `[k w, (k + 1) w)`, the last closed at 1; empty bins are omitted.
pub fn reliability_curve(preds: &[f64], labels: &[u8], bin_width: f64) -> Result<ReliabilityCurve, EvalError> {
    check(preds, labels)?;
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(EvalError::BadBinWidth(bin_width));
    }
    let n_bins = (1.0 / bin_width).round() as usize;
    if (n_bins as f64 * bin_width - 1.0).abs() > 1e-12 {
        return Err(EvalError::BadBinWidth(bin_width));
    }
    let mut sum_p = vec![0.0; n_bins];
    let mut sum_y = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for (&p, &y) in preds.iter().zip(labels) {
        let k = bin_index(p, n_bins);
        sum_p[k] += p;
        sum_y[k] += f64::from(y);
        count[k] += 1;
    }
    let bins = (0..n_bins)
        .filter(|&k| count[k] > 0)
        .map(|k| ReliabilityBin {
            bin_lo: edge(k, n_bins),
            bin_hi: edge(k + 1, n_bins),
            mean_pred: sum_p[k] / count[k] as f64,
            emp_freq: sum_y[k] / count[k] as f64,
            count: count[k],
        })
        .collect();
    Ok(ReliabilityCurve { bin_width, bins })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityLine {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_ci95: (f64, f64),
    pub intercept_ci95: (f64, f64),
    pub bins: usize,
}

pub fn fit_reliability_line(curve: &ReliabilityCurve) -> Result<ReliabilityLine, EvalError> {
    let k = curve.bins.len();
    if k < 3 {
        return Err(EvalError::TooFewBins(k));
    }
    let w: Vec<f64> = curve.bins.iter().map(|b| b.count as f64).collect();
    let x: Vec<f64> = curve.bins.iter().map(|b| b.mean_pred).collect();
    let y: Vec<f64> = curve.bins.iter().map(|b| b.emp_freq).collect();
    let sw: f64 = w.iter().sum();
    let xbar = w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ybar = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..k {
        let (dx, dy) = (x[i] - xbar, y[i] - ybar);
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    if sxx <= 0.0 {
        return Err(EvalError::DegenerateVariance("mean predicted probability"));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = (0..k).map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    let df = (k - 2) as f64;
    let sigma2 = rss / df;
    let t = StudentsT::new(0.0, 1.0, df)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    let se_slope = (sigma2 / sxx).sqrt();
    let se_int = (sigma2 * (1.0 / sw + xbar * xbar / sxx)).sqrt();
    Ok(ReliabilityLine {
        slope,
        intercept,
        r2,
        slope_ci95: (slope - t * se_slope, slope + t * se_slope),
        intercept_ci95: (intercept - t * se_int, intercept + t * se_int),
        bins: k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub brier: f64,
    /// Climatology Brier, `q (1 - q)`.
    pub brier_base: f64,
    pub base_rate: f64,
    /// Absent when fewer than 3 bins are populated.
    pub reliability_line: Option<ReliabilityLine>,
    pub curve: ReliabilityCurve,
}

pub fn evaluate_predictions(preds: &[f64], labels: &[u8], bin_width: f64) -> Result<EvalReport, EvalError> {
    let curve = reliability_curve(preds, labels, bin_width)?;
    let reliability_line = match fit_reliability_line(&curve) {
        Ok(l) => Some(l),
        Err(EvalError::TooFewBins(_) | EvalError::DegenerateVariance(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        n: preds.len(),
        accuracy: accuracy(preds, labels, 0.5)?,
        brier: brier(preds, labels)?,
        brier_base: climatology_brier(labels)?,
        base_rate: base_rate(labels)?,
        reliability_line,
        curve,
    })
}

pub fn evaluate<M: WinProbModel + ?Sized>(model: &M, test: &Dataset) -> Result<EvalReport, EvalError> {
    let preds: Vec<f64> = test.states().map(|s| model.predict(s)).collect();
    evaluate_predictions(&preds, &test.labels(), DEFAULT_BIN_WIDTH)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub bucket: u32,
    pub start_s: u32,
    pub end_s: u32,
    pub low_sample: bool,
    pub report: EvalReport,
}

/// One report per populated `floor(time_elapsed_s / bucket_s)` bucket, in bucket order.
pub fn time_bucketed_eval<M: WinProbModel + ?Sized>(
    model: &M,
    test: &Dataset,
    bucket_s: u32,
) -> Result<Vec<BucketReport>, EvalError> {
    if bucket_s == 0 {
        return Err(EvalError::BadBucket);
    }
    if test.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut groups: BTreeMap<u32, (Vec<f64>, Vec<u8>)> = BTreeMap::new();
    for s in &test.samples {
        let g = groups.entry(s.state.time_elapsed_s / bucket_s).or_default();
        g.0.push(model.predict(&s.state));
        g.1.push(s.label);
    }
    groups
        .into_iter()
        .map(|(bucket, (p, y))| {
            Ok(BucketReport {
                bucket,
                start_s: bucket * bucket_s,
                end_s: (bucket + 1) * bucket_s,
                low_sample: p.len() < LOW_SAMPLE_STATES,
                report: evaluate_predictions(&p, &y, DEFAULT_BIN_WIDTH)?,
            })
        })
        .collect()
}

fn ols_r2(points: &[(f64, f64)]) -> Result<f64, EvalError> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 {
        return Err(EvalError::DegenerateVariance("drive time length"));
    }
    if syy <= 0.0 {
        return Err(EvalError::DegenerateVariance("drive yard length"));
    }
    Ok(sxy * sxy / (sxx * syy))
}

/// OLS R² of yard length on time length for drives flagged as starting near
/// the end of a half (`inside`) and for the rest.
pub fn drive_linearity_r2(drives: &[(f64, f64)], inside: &[bool]) -> Result<(f64, f64), EvalError> {
    if drives.len() != inside.len() {
        return Err(EvalError::LengthMismatch { preds: drives.len(), labels: inside.len() });
    }
    let (ins, outs): (Vec<_>, Vec<_>) = drives.iter().zip(inside).partition(|(_, &f)| f);
    let ins: Vec<(f64, f64)> = ins.into_iter().map(|(d, _)| *d).collect();
    let outs: Vec<(f64, f64)> = outs.into_iter().map(|(d, _)| *d).collect();
    if ins.len() < 3 {
        return Err(EvalError::TooFewDrives { group: "inside", n: ins.len() });
    }
    if outs.len() < 3 {
        return Err(EvalError::TooFewDrives { group: "outside", n: outs.len() });
    }
    Ok((ols_r2(&ins)?, ols_r2(&outs)?))
}
