use serde::{Deserialize, Serialize};

use super::{sigmoid, softplus, ModelError};

/// Parameters of `p = 1 / (1 + exp(A * score + B))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
}

pub fn apply_platt(p: &PlattParams, score: f64) -> f64 {
    sigmoid(-(p.a * score + p.b))
}

/// Mean negative log-likelihood against smoothed targets.
fn objective(scores: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    let n = scores.len() as f64;
    scores
        .iter()
        .zip(targets)
        .map(|(f, t)| {
            let u = a * f + b;
            t * softplus(u) + (1.0 - t) * softplus(-u)
        })
        .sum::<f64>()
        / n
}

/// Fits `(A, B)` by Newton's method with backtracking.
///
/// Targets are smoothed to `(N+ + 1) / (N+ + 2)` for positives and
/// `1 / (N- + 2)` for negatives, which keeps the optimum finite on
/// separable scores. Converges when the gradient of the mean objective has
/// norm below 1e-10.
pub fn fit_platt(scores: &[f64], labels: &[u8]) -> Result<PlattParams, ModelError> {
    if scores.len() != labels.len() {
        return Err(ModelError::LengthMismatch { rows: scores.len(), labels: labels.len() });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(ModelError::NonFiniteScore(i));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(ModelError::BadLabel(bad));
    }
    if pos == 0 || neg == 0 {
        return Err(ModelError::SingleClass { positives: pos, negatives: neg });
    }
    let hi = (pos as f64 + 1.0) / (pos as f64 + 2.0);
    let lo = 1.0 / (neg as f64 + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&l| if l == 1 { hi } else { lo }).collect();
    let n = scores.len() as f64;

    let mut a = 0.0;
    let mut b = ((neg as f64 + 1.0) / (pos as f64 + 1.0)).ln();
    let mut f = objective(scores, &targets, a, b);
    let max_iter = 100;
    let mut trace = vec![f];
    for _ in 0..max_iter {
        let (mut g1, mut g2, mut h11, mut h22, mut h21) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (s, t) in scores.iter().zip(&targets) {
            let p = sigmoid(-(a * s + b));
            let d1 = t - p;
            let d2 = p * (1.0 - p);
            g1 += s * d1;
            g2 += d1;
            h11 += s * s * d2;
            h22 += d2;
            h21 += s * d2;
        }
        let (g1, g2) = (g1 / n, g2 / n);
        if (g1 * g1 + g2 * g2).sqrt() < 1e-10 {
            return Ok(PlattParams { a, b });
        }
        let (h11, h22, h21) = (h11 / n + 1e-12, h22 / n + 1e-12, h21 / n);
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let slope = g1 * da + g2 * db;

        let mut step = 1.0;
        let mut moved = false;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(scores, &targets, na, nb);
            if nf <= f + 1e-4 * step * slope {
                a = na;
                b = nb;
                f = nf;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        trace.push(f);
        if !moved {
            break;
        }
    }
    Err(ModelError::NoConvergence { iterations: max_iter, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_score_is_even() {
        assert_eq!(apply_platt(&PlattParams { a: -1.0, b: 0.0 }, 0.0), 0.5);
    }

    #[test]
    fn midpoint_and_limits() {
        let p = PlattParams { a: -2.0, b: 0.7 };
        assert!((apply_platt(&p, -p.b / p.a) - 0.5).abs() < 1e-15);
        assert_eq!(apply_platt(&p, 1e6), 1.0);
        assert_eq!(apply_platt(&p, -1e6), 0.0);
        let q = PlattParams { a: 2.0, b: 0.7 };
        assert_eq!(apply_platt(&q, 1e6), 0.0);
        assert_eq!(apply_platt(&q, -1e6), 1.0);
    }

    #[test]
    fn monotone_in_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut grid: Vec<f64> = (0..500).map(|_| rng.random_range(-20.0..20.0)).collect();
        grid.sort_by(f64::total_cmp);
        let inc = PlattParams { a: -0.8, b: 0.1 };
        let dec = PlattParams { a: 0.8, b: 0.1 };
        for w in grid.windows(2) {
            if w[1] > w[0] {
                assert!(apply_platt(&inc, w[1]) >= apply_platt(&inc, w[0]));
                assert!(apply_platt(&dec, w[1]) <= apply_platt(&dec, w[0]));
            }
        }
    }

    #[test]
    fn antisymmetric_separable_scores() {
        let scores: Vec<f64> = (1..=500).flat_map(|i| [i as f64 / 100.0, -(i as f64) / 100.0]).collect();
        let labels: Vec<u8> = scores.iter().map(|&s| u8::from(s > 0.0)).collect();
        let p = fit_platt(&scores, &labels).unwrap();
        assert!(p.a < 0.0);
        assert!(p.b.abs() < 1e-8);
    }

    #[test]
    fn recovers_generating_parameters() {
        // intercept standard error is >= 2/sqrt(n), so n = 1e6 keeps 1e-2 at ~5 se
        let (a, b) = (-1.7, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let scores: Vec<f64> = (0..1_000_000).map(|_| rng.random_range(-3.0..3.0)).collect();
        let labels: Vec<u8> = scores
            .iter()
            .map(|&s| u8::from(rng.random::<f64>() < apply_platt(&PlattParams { a, b }, s)))
            .collect();
        let p = fit_platt(&scores, &labels).unwrap();
        assert!((p.a - a).abs() < 1e-2, "{p:?}");
        assert!((p.b - b).abs() < 1e-2, "{p:?}");
    }

    #[test]
    fn input_errors() {
        assert!(fit_platt(&[1.0, 2.0], &[1, 1]).is_err());
        assert!(fit_platt(&[1.0, f64::NAN], &[1, 0]).is_err());
        assert!(fit_platt(&[1.0], &[1, 0]).is_err());
    }
}
