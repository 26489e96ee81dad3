//! Small statistics kit for the experiments: moments, Kolmogorov–Smirnov,
//! chi-square goodness of fit against a Poisson law, and OLS slopes.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

pub fn mean_and_se(values: &[f64]) -> MeanEstimate {
    let n = values.len();
    if n == 0 {
        return MeanEstimate {
            mean: f64::NAN,
            std_error: f64::NAN,
            count: 0,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    MeanEstimate {
        mean,
        std_error: (var / n as f64).sqrt(),
        count: n,
    }
}

/// Mean and standard error of `|x|^k`.
pub fn abs_moment(values: &[f64], k: i32) -> MeanEstimate {
    let powered: Vec<f64> = values.iter().map(|v| v.abs().powi(k)).collect();
    mean_and_se(&powered)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Two-sample statistic `sup |F̂₁ − F̂₂|`, exact over the pooled sample.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> f64 {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// One-sample statistic against Uniform(0, 1).
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a one-sample statistic `d` from `n` points, with
/// Stephens' small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    kolmogorov_tail(lambda)
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Pearson chi-square test of counts against Poisson(`mean`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Bins are single values, merged from both tails until each expects at
/// least 5 observations; the outer bins absorb the tails.
pub fn chi_square_poisson(counts: &[usize], mean: f64) -> ChiSquareTest {
    let total = counts.len() as f64;
    let dist = Poisson::new(mean).expect("positive Poisson mean");
    let max_seen = counts.iter().copied().max().unwrap_or(0) as u64;
    let top = max_seen.max((mean + 10.0 * mean.sqrt() + 10.0) as u64);
    // (upper edge, expected) with the lower edge implied by the previous bin
    let mut bins: Vec<(u64, f64)> = Vec::new();
    let mut acc = 0.0;
    for k in 0..=top {
        acc += total * dist.pmf(k);
        if acc >= 5.0 {
            bins.push((k, acc));
            acc = 0.0;
        }
    }
    let upper_tail = total * (1.0 - dist.cdf(top)) + acc;
    match bins.last_mut() {
        Some(last) => {
            last.0 = u64::MAX;
            last.1 += upper_tail;
        }
        None => bins.push((u64::MAX, total)),
    }
    let mut observed = vec![0.0; bins.len()];
    for &c in counts {
        let idx = bins.partition_point(|b| b.0 < c as u64);
        observed[idx] += 1.0;
    }
    let statistic: f64 = observed.iter().zip(&bins).map(|(o, b)| (o - b.1).powi(2) / b.1).sum();
    let dof = bins.len().saturating_sub(1).max(1);
    let p_value = 1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(statistic);
    ChiSquareTest {
        statistic,
        degrees_of_freedom: dof,
        p_value,
    }
}

/// Least-squares line `y = intercept + slope·x` with the usual
/// homoscedastic standard error of the slope:
/// `se = sqrt(Σr²/(k − 2) / Σ(x − x̄)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
}

pub fn ols(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_std_error = if x.len() > 2 {
        (rss / (k - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LinearFit {
        slope,
        intercept,
        slope_std_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_two_sample_small_cases() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]) - 0.5).abs() < 1e-15);
        // ties across samples are stepped over together
        assert!((ks_two_sample(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ks_uniform_of_perfect_grid() {
        let v: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        assert!((ks_uniform(&v) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_tail_reference_points() {
        // classical critical values: P(K > 1.358) ≈ 0.05, P(K > 1.628) ≈ 0.01
        assert!((kolmogorov_tail(1.358) - 0.05).abs() < 5e-4);
        assert!((kolmogorov_tail(1.628) - 0.01).abs() < 2e-4);
    }

    #[test]
    fn ols_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let fit = ols(&x, &y);
        assert!((fit.slope + 0.5).abs() < 1e-14);
        assert!((fit.intercept - 2.0).abs() < 1e-14);
        assert!(fit.slope_std_error < 1e-12);
    }

    #[test]
    fn chi_square_of_expected_counts_is_small() {
        let mean = 3.0;
        let dist = Poisson::new(mean).unwrap();
        let mut counts = Vec::new();
        for k in 0..20u64 {
            let reps = (10_000.0 * dist.pmf(k)).round() as usize;
            counts.extend(std::iter::repeat(k as usize).take(reps));
        }
        let test = chi_square_poisson(&counts, mean);
        assert!(test.p_value > 0.99, "{test:?}");
    }

    #[test]
    fn mean_and_median() {
        let m = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.std_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
