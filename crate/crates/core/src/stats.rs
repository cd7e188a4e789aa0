//! Distribution helpers shared by the test statistics.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal parameters are valid")
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Upper-tail normal quantile: `z` with `P(Z > z) = p`.
pub fn normal_quantile_upper(p: f64) -> f64 {
    std_normal().inverse_cdf(1.0 - p)
}

/// Two-sided standard-normal p-value `2 * P(Z > |z|)`.
pub fn two_sided_normal_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Upper tail of the chi-square distribution, via the regularized upper
/// incomplete gamma function.
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    assert!(df > 0, "chi-square needs positive degrees of freedom");
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(df as f64 / 2.0, x / 2.0)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Population variance (divides by `n`).
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

/// Sample autocorrelation at `lag`.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let m = mean(x);
    let den: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    let num: f64 = (lag..x.len()).map(|t| (x[t] - m) * (x[t - lag] - m)).sum();
    num / den
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Kolmogorov-Smirnov distance between the empirical distribution of `x`
/// and the uniform distribution on [0, 1].
pub fn ks_uniform_distance(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &u)| {
            let u = u.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - u).max(u - i as f64 / n)
        })
        .fold(0.0, f64::max)
}
