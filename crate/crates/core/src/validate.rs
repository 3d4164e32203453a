//! Distributional and temporal validation of synthetic ensembles.
//!
//! Five metrics: two-sample Kolmogorov-Smirnov and Anderson-Darling pass
//! rates (fraction of paths whose null of distributional equivalence is not
//! rejected at level α), Wasserstein-1 and Hellinger distances averaged over
//! paths, and the ACF mean absolute error of `|G_t|` against the
//! ensemble-mean simulated ACF. Quantile coverage checks how many of the 99
//! observed percentiles fall inside the [5th, 95th] envelope of per-path
//! synthetic percentiles.
//!
//! Standard errors follow the reporting conventions: binomial for pass
//! rates, `std/√n` for per-path means, and a path-resampling bootstrap
//! (B = 500) for ACF-MAE and coverage.

use serde::{Deserialize, Serialize};

use crate::data::{GrowthSeries, TestResult};
use crate::simulate::PathEnsemble;
use crate::special::kolmogorov_sf;
use crate::{parallel, rng, stats, Error, Result};

/// Two-sample Kolmogorov-Smirnov test. The p-value comes from the
/// asymptotic Kolmogorov distribution at `√(nm/(n+m))·D`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("KS requires nonempty samples"));
    }
    let statistic = ks_statistic(a, b);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let effective = (n * m / (n + m)).sqrt();
    Ok(TestResult {
        statistic,
        p_value: kolmogorov_sf(effective * statistic),
    })
}

/// Supremum distance between the two empirical CDFs over the pooled sample.
/// Computed in integer arithmetic (`max |i·m − j·n| / (n·m)`) so rational
/// values come out exact.
fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_unstable_by(f64::total_cmp);
    y.sort_unstable_by(f64::total_cmp);
    let (n, m) = (x.len() as u64, y.len() as u64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut worst: u64 = 0;
    while i < x.len() && j < y.len() {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] == v {
            i += 1;
        }
        while j < y.len() && y[j] == v {
            j += 1;
        }
        worst = worst.max((i as u64 * m).abs_diff(j as u64 * n));
    }
    worst as f64 / (n * m) as f64
}

// Standardized critical points of the k-sample Anderson-Darling statistic
// (Scholz & Stephens), as `b0 + b1/√m + b2/m` with m = k−1.
const AD_LEVELS: [f64; 7] = [0.25, 0.10, 0.05, 0.025, 0.01, 0.005, 0.001];
const AD_B0: [f64; 7] = [0.675, 1.281, 1.645, 1.960, 2.326, 2.573, 3.085];
const AD_B1: [f64; 7] = [-0.245, 0.250, 0.678, 1.149, 1.822, 2.364, 3.615];
const AD_B2: [f64; 7] = [-0.105, -0.305, -0.528, -0.864, -1.669, -2.30, -4.0];

fn ad_critical_points(k: usize) -> [f64; 7] {
    let m = (k - 1) as f64;
    let mut out = [0.0; 7];
    for i in 0..7 {
        out[i] = AD_B0[i] + AD_B1[i] / m.sqrt() + AD_B2[i] / m;
    }
    out
}

/// Two-sample Anderson-Darling test: rank-based k-sample statistic (k = 2,
/// midrank tie handling), standardized by its exact null mean and variance.
/// The p-value interpolates `ln α` linearly between the published critical
/// points and is clamped to [0.001, 0.25] outside them.
pub fn ad_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("AD requires at least 2 points per sample"));
    }
    let statistic = ad_standardized(&[a, b])?;
    let crits = ad_critical_points(2);
    let p_value = if statistic <= crits[0] {
        0.25
    } else if statistic >= crits[6] {
        0.001
    } else {
        // Linear in (tm, ln α) between neighboring published points.
        let mut p = 0.001;
        for w in 0..6 {
            if statistic < crits[w + 1] {
                let frac = (statistic - crits[w]) / (crits[w + 1] - crits[w]);
                let ln_p = AD_LEVELS[w].ln() + frac * (AD_LEVELS[w + 1].ln() - AD_LEVELS[w].ln());
                p = ln_p.exp();
                break;
            }
        }
        p
    };
    Ok(TestResult { statistic, p_value })
}

/// The standardized A²ₐₖₙ statistic for k samples with midrank ties.
fn ad_standardized(samples: &[&[f64]]) -> Result<f64> {
    let k = samples.len();
    let n: Vec<usize> = samples.iter().map(|s| s.len()).collect();
    let total: usize = n.iter().sum();
    if total < 5 {
        return Err(Error::invalid("AD requires a pooled sample of at least 5"));
    }
    let mut pooled: Vec<f64> = samples.iter().flat_map(|s| s.iter().copied()).collect();
    pooled.sort_unstable_by(f64::total_cmp);
    let mut unique = pooled.clone();
    unique.dedup();
    if unique.len() < 2 {
        return Err(Error::numeric("AD undefined when all values are equal"));
    }
    let nn = total as f64;

    let mut sorted: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            let mut v = s.to_vec();
            v.sort_unstable_by(f64::total_cmp);
            v
        })
        .collect();

    let mut a2 = 0.0;
    for (sample, &ni) in sorted.iter_mut().zip(&n) {
        let ni_f = ni as f64;
        let mut inner = 0.0;
        for z in &unique {
            let left = pooled.partition_point(|&v| v < *z) as f64;
            let right = pooled.partition_point(|&v| v <= *z) as f64;
            let lj = right - left;
            let bj = left + lj / 2.0;
            let s_right = sample.partition_point(|&v| v <= *z) as f64;
            let s_left = sample.partition_point(|&v| v < *z) as f64;
            let mij = s_right - (s_right - s_left) / 2.0;
            let denom = bj * (nn - bj) - nn * lj / 4.0;
            if denom > 0.0 {
                inner += lj / nn * (nn * mij - bj * ni_f).powi(2) / denom;
            }
        }
        a2 += inner / ni_f;
    }
    a2 *= (nn - 1.0) / nn;

    // Exact null mean (k−1) and variance of A²ₐₖₙ.
    let h: f64 = (1..total).map(|i| 1.0 / i as f64).sum();
    let cap_h: f64 = n.iter().map(|&ni| 1.0 / ni as f64).sum();
    let mut g = 0.0;
    let mut partial = 0.0;
    // partial sums of 1/(N-1), 1/(N-2), ..., 1/2 divided by 2, 3, ..., N-1
    for t in 0..total - 2 {
        partial += 1.0 / (total - 1 - t) as f64;
        g += partial / (t + 2) as f64;
    }
    let kf = k as f64;
    let a = (4.0 * g - 6.0) * (kf - 1.0) + (10.0 - 6.0 * g) * cap_h;
    let b = (2.0 * g - 4.0) * kf * kf + 8.0 * h * kf + (2.0 * g - 14.0 * h - 4.0) * cap_h
        - 8.0 * h
        + 4.0 * g
        - 6.0;
    let c = (6.0 * h + 2.0 * g - 2.0) * kf * kf + (4.0 * h - 4.0 * g + 6.0) * kf
        + (2.0 * h - 6.0) * cap_h
        + 4.0 * h;
    let d = (2.0 * h + 6.0) * kf * kf - 4.0 * h * kf;
    let sigma_sq = (a * nn.powi(3) + b * nn.powi(2) + c * nn + d)
        / ((nn - 1.0) * (nn - 2.0) * (nn - 3.0));
    if sigma_sq <= 0.0 {
        return Err(Error::numeric("AD variance is non-positive"));
    }
    Ok((a2 - (kf - 1.0)) / sigma_sq.sqrt())
}

/// Wasserstein-1 distance between empirical distributions: the integral of
/// `|F_a⁻¹(u) − F_b⁻¹(u)|` over the piecewise-constant quantile functions,
/// which reduces to the mean absolute difference of sorted order statistics
/// for equal lengths.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "samples must be nonempty");
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_unstable_by(f64::total_cmp);
    y.sort_unstable_by(f64::total_cmp);
    if x.len() == y.len() {
        return x
            .iter()
            .zip(&y)
            .map(|(u, v)| (u - v).abs())
            .sum::<f64>()
            / x.len() as f64;
    }
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0;
    let mut total = 0.0;
    while i < x.len() && j < y.len() {
        let next_x = (i + 1) as f64 / n;
        let next_y = (j + 1) as f64 / m;
        let next = next_x.min(next_y);
        total += (x[i] - y[j]).abs() * (next - u);
        u = next;
        if next_x <= next {
            i += 1;
        }
        if next_y <= next {
            j += 1;
        }
    }
    total
}

/// Hellinger distance on `bins` equal-width histograms over the common
/// support of both samples; always in [0, 1].
pub fn hellinger(a: &[f64], b: &[f64], bins: usize) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "samples must be nonempty");
    assert!(bins >= 1);
    let lo = a
        .iter()
        .chain(b)
        .fold(f64::INFINITY, |acc, &v| acc.min(v));
    let hi = a
        .iter()
        .chain(b)
        .fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));
    if hi == lo {
        // All values in both samples are the same point mass.
        return 0.0;
    }
    let hist = |xs: &[f64]| {
        let mut h = vec![0.0; bins];
        for &v in xs {
            let idx = (((v - lo) / (hi - lo)) * bins as f64) as usize;
            h[idx.min(bins - 1)] += 1.0;
        }
        let n = xs.len() as f64;
        h.iter_mut().for_each(|c| *c /= n);
        h
    };
    let p = hist(a);
    let q = hist(b);
    let sum: f64 = p
        .iter()
        .zip(&q)
        .map(|(pi, qi)| {
            let d = pi.sqrt() - qi.sqrt();
            d * d
        })
        .sum();
    ((0.5 * sum).sqrt()).clamp(0.0, 1.0)
}

/// ACF mean absolute error between the absolute-value series of a single
/// observed/simulated pair over lags 1..=max_lag.
pub fn acf_mae(observed: &[f64], simulated: &[f64], max_lag: usize) -> Result<f64> {
    if observed.len() <= max_lag || simulated.len() <= max_lag {
        return Err(Error::invalid("both series must be longer than max_lag"));
    }
    let oa: Vec<f64> = observed.iter().map(|v| v.abs()).collect();
    let sa: Vec<f64> = simulated.iter().map(|v| v.abs()).collect();
    let rho_o = stats::autocorrelations(&oa, max_lag)?;
    let rho_s = stats::autocorrelations(&sa, max_lag)?;
    Ok(rho_o
        .iter()
        .zip(&rho_s)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / max_lag as f64)
}

/// ACF-MAE of an ensemble: observed ACF versus the cross-path mean simulated
/// ACF (degenerate paths skipped), per the ensemble-averaging convention.
fn ensemble_acf_mae(obs_acf: &[f64], path_acfs: &[Option<Vec<f64>>], subset: &[usize]) -> f64 {
    let max_lag = obs_acf.len();
    let mut acc = vec![0.0; max_lag];
    let mut used = 0usize;
    for &idx in subset {
        if let Some(acf) = &path_acfs[idx] {
            for (a, v) in acc.iter_mut().zip(acf) {
                *a += v;
            }
            used += 1;
        }
    }
    if used == 0 {
        return f64::NAN;
    }
    let inv = 1.0 / used as f64;
    obs_acf
        .iter()
        .zip(&acc)
        .map(|(o, s)| (o - s * inv).abs())
        .sum::<f64>()
        / max_lag as f64
}

/// Envelope of per-path synthetic quantiles at the 99 integer percentiles.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuantileEnvelope {
    /// Percentile probes 1..=99.
    pub probes: Vec<f64>,
    pub observed: Vec<f64>,
    /// 5th percentile across paths of each synthetic quantile.
    pub lower: Vec<f64>,
    /// 95th percentile across paths of each synthetic quantile.
    pub upper: Vec<f64>,
}

/// Fraction (percent) of the 99 observed percentiles inside the [5th, 95th]
/// percentile envelope of the per-path synthetic quantiles.
pub fn quantile_coverage(
    observed: &[f64],
    ensemble: &PathEnsemble,
) -> Result<(f64, QuantileEnvelope)> {
    if ensemble.paths.is_empty() || observed.is_empty() {
        return Err(Error::invalid("coverage requires data and paths"));
    }
    let mut obs_sorted = observed.to_vec();
    obs_sorted.sort_unstable_by(f64::total_cmp);
    let probes: Vec<f64> = (1..=99).map(|p| p as f64).collect();
    let obs_q: Vec<f64> = probes
        .iter()
        .map(|&p| stats::quantile_sorted(&obs_sorted, p / 100.0))
        .collect();
    let path_q = per_path_quantiles(ensemble, &probes);
    let (mut lower, mut upper) = (Vec::with_capacity(99), Vec::with_capacity(99));
    for probe_idx in 0..probes.len() {
        let mut across: Vec<f64> = path_q.iter().map(|q| q[probe_idx]).collect();
        across.sort_unstable_by(f64::total_cmp);
        lower.push(stats::quantile_sorted(&across, 0.05));
        upper.push(stats::quantile_sorted(&across, 0.95));
    }
    let inside = obs_q
        .iter()
        .enumerate()
        .filter(|(i, q)| lower[*i] <= **q && **q <= upper[*i])
        .count();
    let pct = 100.0 * inside as f64 / probes.len() as f64;
    Ok((
        pct,
        QuantileEnvelope {
            probes,
            observed: obs_q,
            lower,
            upper,
        },
    ))
}

fn per_path_quantiles(ensemble: &PathEnsemble, probes: &[f64]) -> Vec<Vec<f64>> {
    parallel::map_slice(&ensemble.paths, |path| {
        let mut sorted = path.growth.clone();
        sorted.sort_unstable_by(f64::total_cmp);
        probes
            .iter()
            .map(|&p| stats::quantile_sorted(&sorted, p / 100.0))
            .collect()
    })
}

/// A reported value with its standard error (None when undefined, e.g. a
/// single-path ensemble).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ValueWithSe {
    pub value: f64,
    pub se: Option<f64>,
}

/// Ensemble-level validation report in the layout of the comparison table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricReport {
    pub n_paths: usize,
    pub alpha: f64,
    /// Percent of paths passing the KS test, with binomial SE.
    pub ks_pass_rate: ValueWithSe,
    /// Percent of paths passing the AD test, with binomial SE.
    pub ad_pass_rate: ValueWithSe,
    pub mean_kurtosis: ValueWithSe,
    pub mean_w1: ValueWithSe,
    pub mean_hellinger: ValueWithSe,
    /// Observed-vs-ensemble-mean ACF MAE, with bootstrap SE.
    pub acf_mae: ValueWithSe,
    /// Quantile coverage percent, with bootstrap SE.
    pub coverage_pct: ValueWithSe,
    /// Same metrics restricted to jump-containing paths, when present.
    pub jump_subset: Option<Box<MetricReport>>,
}

/// Per-path metric rows for downstream plotting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathMetrics {
    pub path_id: usize,
    pub ks: TestResult,
    pub ad: TestResult,
    pub w1: f64,
    pub hellinger: f64,
    pub kurtosis: f64,
    pub contains_jump: bool,
}

/// Writes per-path metric values as CSV.
pub fn write_path_metrics_csv<W: std::io::Write>(rows: &[PathMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "path_id",
        "ks_stat",
        "ks_p",
        "ad_stat",
        "ad_p",
        "w1",
        "hellinger",
        "kurtosis",
        "contains_jump",
    ])?;
    for r in rows {
        w.write_record(&[
            r.path_id.to_string(),
            format!("{}", r.ks.statistic),
            format!("{}", r.ks.p_value),
            format!("{}", r.ad.statistic),
            format!("{}", r.ad.p_value),
            format!("{}", r.w1),
            format!("{}", r.hellinger),
            format!("{}", r.kurtosis),
            r.contains_jump.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Number of bootstrap replicates used for ACF-MAE and coverage SEs.
pub const DEFAULT_BOOTSTRAP_B: usize = 500;

/// Evaluates an ensemble against the observed series. Simulated paths longer
/// than the observed window are trimmed to its length first (the
/// out-of-sample convention). Bootstrap SEs resample whole paths, preserving
/// within-path dependence, with RNG streams derived from the ensemble seed.
pub fn evaluate_ensemble(
    observed: &GrowthSeries,
    ensemble: &PathEnsemble,
    alpha: f64,
    bootstrap_b: usize,
) -> Result<(MetricReport, Vec<PathMetrics>)> {
    if ensemble.paths.is_empty() {
        return Err(Error::invalid("ensemble is empty"));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::invalid("alpha must be in (0,1)"));
    }
    let obs = &observed.values;
    let m_obs = obs.len();
    let trimmed: Vec<&[f64]> = ensemble
        .paths
        .iter()
        .map(|p| &p.growth[..p.growth.len().min(m_obs)])
        .collect();

    let max_lag = 252.min(m_obs - 1).min(trimmed.iter().map(|t| t.len()).min().unwrap() - 1);
    let obs_abs: Vec<f64> = obs.iter().map(|v| v.abs()).collect();
    let obs_acf = stats::autocorrelations(&obs_abs, max_lag)?;

    let rows: Vec<PathMetrics> = parallel::map_indexed(trimmed.len(), |i| {
        let sim = trimmed[i];
        PathMetrics {
            path_id: i,
            ks: ks_two_sample(obs, sim).expect("nonempty samples"),
            ad: ad_two_sample(obs, sim).expect("validated samples"),
            w1: wasserstein1(obs, sim),
            hellinger: hellinger(obs, sim, 50),
            kurtosis: stats::excess_kurtosis(sim).unwrap_or(f64::NAN),
            contains_jump: ensemble.paths[i].contains_jump(),
        }
    });
    let path_acfs: Vec<Option<Vec<f64>>> = parallel::map_indexed(trimmed.len(), |i| {
        let abs: Vec<f64> = trimmed[i].iter().map(|v| v.abs()).collect();
        stats::autocorrelations(&abs, max_lag).ok()
    });

    let all: Vec<usize> = (0..rows.len()).collect();
    let report = subset_report(
        observed,
        ensemble,
        &rows,
        &path_acfs,
        &obs_acf,
        &all,
        alpha,
        bootstrap_b,
    )?;
    let jump_paths: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].contains_jump).collect();
    let report = if jump_paths.is_empty() {
        report
    } else {
        let sub = subset_report(
            observed,
            ensemble,
            &rows,
            &path_acfs,
            &obs_acf,
            &jump_paths,
            alpha,
            bootstrap_b,
        )?;
        MetricReport {
            jump_subset: Some(Box::new(sub)),
            ..report
        }
    };
    Ok((report, rows))
}

#[allow(clippy::too_many_arguments)]
fn subset_report(
    observed: &GrowthSeries,
    ensemble: &PathEnsemble,
    rows: &[PathMetrics],
    path_acfs: &[Option<Vec<f64>>],
    obs_acf: &[f64],
    subset: &[usize],
    alpha: f64,
    bootstrap_b: usize,
) -> Result<MetricReport> {
    let n = subset.len();
    let nf = n as f64;
    let pass_rate = |pass: &dyn Fn(&PathMetrics) -> bool| {
        let hits = subset.iter().filter(|&&i| pass(&rows[i])).count() as f64;
        let p = hits / nf;
        ValueWithSe {
            value: 100.0 * p,
            se: Some(100.0 * (p * (1.0 - p) / nf).sqrt()),
        }
    };
    let mean_se = |get: &dyn Fn(&PathMetrics) -> f64| {
        let vals: Vec<f64> = subset.iter().map(|&i| get(&rows[i])).collect();
        let mean = stats::mean(&vals);
        let se = if n > 1 {
            Some(stats::std_dev(&vals) / nf.sqrt())
        } else {
            None
        };
        ValueWithSe { value: mean, se }
    };

    let ks_pass_rate = pass_rate(&|r| !r.ks.reject_at(alpha));
    let ad_pass_rate = pass_rate(&|r| !r.ad.reject_at(alpha));
    let mean_kurtosis = mean_se(&|r| r.kurtosis);
    let mean_w1 = mean_se(&|r| r.w1);
    let mean_hellinger = mean_se(&|r| r.hellinger);

    let acf_point = ensemble_acf_mae(obs_acf, path_acfs, subset);

    let sub_ensemble = PathEnsemble {
        paths: subset.iter().map(|&i| ensemble.paths[i].clone()).collect(),
        horizon: ensemble.horizon,
        seed: ensemble.seed,
        model_id: ensemble.model_id.clone(),
    };
    let (coverage_point, _) = quantile_coverage(&observed.values, &sub_ensemble)?;

    // Path-resampling bootstrap for ACF-MAE and coverage.
    let probes: Vec<f64> = (1..=99).map(|p| p as f64).collect();
    let path_q = per_path_quantiles(&sub_ensemble, &probes);
    let mut obs_sorted = observed.values.clone();
    obs_sorted.sort_unstable_by(f64::total_cmp);
    let obs_q: Vec<f64> = probes
        .iter()
        .map(|&p| stats::quantile_sorted(&obs_sorted, p / 100.0))
        .collect();

    let replicates = parallel::map_indexed(bootstrap_b, |rep| {
        let mut brng = rng::stream(ensemble.seed, &[0xB007, rep as u64]);
        let local: Vec<usize> = (0..n)
            .map(|_| rand::Rng::gen_range(&mut brng, 0..n))
            .collect();
        let global: Vec<usize> = local.iter().map(|&l| subset[l]).collect();
        let acf = ensemble_acf_mae(obs_acf, path_acfs, &global);
        // Coverage on the resampled paths.
        let mut inside = 0usize;
        for (pi, oq) in obs_q.iter().enumerate() {
            let mut across: Vec<f64> = local.iter().map(|&l| path_q[l][pi]).collect();
            across.sort_unstable_by(f64::total_cmp);
            let lo = stats::quantile_sorted(&across, 0.05);
            let hi = stats::quantile_sorted(&across, 0.95);
            if lo <= *oq && *oq <= hi {
                inside += 1;
            }
        }
        (acf, 100.0 * inside as f64 / probes.len() as f64)
    });
    let boot_acf: Vec<f64> = replicates.iter().map(|r| r.0).filter(|v| v.is_finite()).collect();
    let boot_cov: Vec<f64> = replicates.iter().map(|r| r.1).collect();
    let boot_se = |vals: &[f64]| {
        if vals.len() > 1 {
            Some(stats::std_dev(vals))
        } else {
            None
        }
    };

    Ok(MetricReport {
        n_paths: n,
        alpha,
        ks_pass_rate,
        ad_pass_rate,
        mean_kurtosis,
        mean_w1,
        mean_hellinger,
        acf_mae: ValueWithSe {
            value: acf_point,
            se: boot_se(&boot_acf),
        },
        coverage_pct: ValueWithSe {
            value: coverage_point,
            se: boot_se(&boot_cov),
        },
        jump_subset: None,
    })
}
