use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;

/// Standard deviation of the final point margin around its expectation.
pub const MARGIN_SD: f64 = 14.0;

/// Standard normal CDF.
///
/// Computed as `erfc(-x / sqrt 2) / 2` with statrs' erfc (Boost rational
/// approximations, relative error near machine epsilon), so the absolute
/// error is far below 1e-7 everywhere. Using erfc keeps the lower tail
/// accurate instead of cancelling in `1 + erf`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Probability that the home side wins given home edge `h` and ratings.
pub fn win_prob_from_ratings(h: f64, r_home: f64, r_away: f64) -> f64 {
    win_prob_with_sigma(h + r_home - r_away, MARGIN_SD)
}

/// Win probability of a `margin`-point favorite under a normal margin with sd `sigma`.
pub fn win_prob_with_sigma(margin: f64, sigma: f64) -> f64 {
    std_normal_cdf(margin / sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // composite Simpson on the density from 0 to x, plus 1/2
    fn cdf_by_quadrature(x: f64) -> f64 {
        let n = 20_000;
        let h = x / n as f64;
        let mut s = std_normal_pdf(0.0) + std_normal_pdf(x);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * std_normal_pdf(i as f64 * h);
        }
        0.5 + s * h / 3.0
    }

    #[test]
    fn cdf_at_zero_is_half() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_eq!(win_prob_from_ratings(0.0, 3.0, 3.0), 0.5);
    }

    #[test]
    fn cdf_matches_quadrature() {
        let q = cdf_by_quadrature(0.5);
        assert!((q - 0.691462).abs() < 1e-6);
        assert!((std_normal_cdf(0.5) - q).abs() < 1e-12);
        for &x in &[-3.0, -1.2, 0.1, 1.7, 4.0] {
            assert!((std_normal_cdf(x) - cdf_by_quadrature(x)).abs() < 1e-7, "x = {x}");
        }
    }

    #[test]
    fn seven_point_favorite() {
        assert!((win_prob_from_ratings(7.0, 0.0, 0.0) - 0.691462).abs() < 1e-6);
    }

    #[test]
    fn symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-8.0..8.0);
            assert!((std_normal_cdf(x) + std_normal_cdf(-x) - 1.0).abs() < 1e-15);
            let p = win_prob_with_sigma(x * 10.0, MARGIN_SD);
            let q = win_prob_with_sigma(-x * 10.0, MARGIN_SD);
            assert!((p + q - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn strictly_monotone_in_ratings() {
        let base = win_prob_from_ratings(2.0, 1.0, -1.0);
        assert!(win_prob_from_ratings(2.0, 1.5, -1.0) > base);
        assert!(win_prob_from_ratings(2.0, 1.0, -0.5) < base);
    }
}
