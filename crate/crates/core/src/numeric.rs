//! Small numerical helpers shared across modules.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

const PAIRWISE_BLOCK: usize = 16;

/// Sum with a fixed pairwise reduction tree.
///
/// The tree depends only on the slice length, so results are identical no
/// matter how the per-unit terms were produced (serially or in parallel).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance (denominator `len - 1`). Zero for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 || xs.iter().all(|&x| x == xs[0]) {
        return 0.0;
    }
    let mu = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - mu) * (x - mu)).collect();
    pairwise_sum(&sq) / (xs.len() - 1) as f64
}

/// Monte Carlo standard error of the unbiased sample variance of `xs`.
pub fn variance_standard_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 4 {
        return f64::NAN;
    }
    let mu = mean(xs);
    let m2 = pairwise_sum(&xs.iter().map(|x| (x - mu).powi(2)).collect::<Vec<_>>()) / n;
    let m4 = pairwise_sum(&xs.iter().map(|x| (x - mu).powi(4)).collect::<Vec<_>>()) / n;
    ((m4 - (n - 3.0) / (n - 1.0) * m2 * m2) / n).max(0.0).sqrt()
}

pub fn std_normal_cdf(z: f64) -> f64 {
    standard_normal().cdf(z)
}

pub fn std_normal_quantile(p: f64) -> f64 {
    let n = standard_normal();
    let z = n.inverse_cdf(p);
    if !z.is_finite() {
        return z;
    }
    // one Newton step polishes the last few digits
    let dens = n.pdf(z);
    if dens > 0.0 {
        z - (n.cdf(z) - p) / dens
    } else {
        z
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Empirical quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Volume of the unit Euclidean ball in `R^m`.
pub fn unit_ball_volume(m: usize) -> f64 {
    let half = m as f64 / 2.0;
    std::f64::consts::PI.powf(half) / statrs::function::gamma::gamma(half + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_ints() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
        assert!((quantile_sorted(&xs, 0.5) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-12);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn normal_quantile_roundtrip() {
        let z = std_normal_quantile(0.975);
        assert!((z - 1.959963984540054).abs() < 1e-9);
        assert!((std_normal_cdf(z) - 0.975).abs() < 1e-12);
    }
}
