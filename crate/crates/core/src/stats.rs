//! Moment and quantile helpers used throughout the crate.
//!
//! Conventions: standard deviation uses the unbiased (n−1) denominator;
//! skewness and excess kurtosis are the plain standardized central moments
//! (biased estimators), so reported values are exactly reproducible.

use crate::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the n−1 denominator.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Population central moment of order `k`.
fn central_moment(xs: &[f64], m: f64, k: u32) -> f64 {
    xs.iter().map(|&x| (x - m).powi(k as i32)).sum::<f64>() / xs.len() as f64
}

/// Standardized third central moment.
pub fn skewness(xs: &[f64]) -> Result<f64> {
    let m = mean(xs);
    let m2 = central_moment(xs, m, 2);
    if m2 <= 0.0 {
        return Err(Error::numeric("skewness undefined for zero-variance data"));
    }
    Ok(central_moment(xs, m, 3) / m2.powf(1.5))
}

/// Standardized fourth central moment minus 3.
pub fn excess_kurtosis(xs: &[f64]) -> Result<f64> {
    let m = mean(xs);
    let m2 = central_moment(xs, m, 2);
    if m2 <= 0.0 {
        return Err(Error::numeric("kurtosis undefined for zero-variance data"));
    }
    Ok(central_moment(xs, m, 4) / (m2 * m2) - 3.0)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Quantile of a sorted slice by linear interpolation between order
/// statistics (the `x[(n−1)p]` rule).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Quantile of an unsorted slice; sorts a copy.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Indices that sort `xs` ascending; ties keep original order.
pub fn argsort(xs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    idx
}

/// Sample autocorrelations at lags 1..=`max_lag` with the overall mean and
/// the lag-0 denominator (the conventional biased estimator).
pub fn autocorrelations(xs: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag >= xs.len() {
        return Err(Error::invalid(format!(
            "max_lag {} must be below series length {}",
            max_lag,
            xs.len()
        )));
    }
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|&x| (x - m) * (x - m)).sum();
    if denom <= 0.0 {
        return Err(Error::numeric(
            "autocorrelation undefined for zero-variance data",
        ));
    }
    let mut out = Vec::with_capacity(max_lag);
    for tau in 1..=max_lag {
        let num: f64 = xs[..xs.len() - tau]
            .iter()
            .zip(&xs[tau..])
            .map(|(&a, &b)| (a - m) * (b - m))
            .sum();
        out.push(num / denom);
    }
    Ok(out)
}
