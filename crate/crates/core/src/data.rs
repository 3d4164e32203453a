//! Price ingestion, excess growth rates, and descriptive statistics.
//!
//! The excess growth rate between consecutive closes is
//! `G_t = (1/Δt)·ln(P_t/P_{t−1}) − r_f` with `Δt` in years (1/252 for daily
//! bars) and `r_f` a constant continuously compounded risk-free rate, so `G`
//! carries year⁻¹ units and is time-additive.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::special::chi2_sf;
use crate::stats;
use crate::{Error, Result};

/// Daily close prices for one ticker, sorted by date.
#[derive(Debug, Clone)]
pub struct PriceSeries {
    pub ticker: String,
    pub dates: Vec<NaiveDate>,
    pub close: Vec<f64>,
}

impl PriceSeries {
    /// Validates ordering, positivity, and minimum length.
    pub fn new(ticker: impl Into<String>, dates: Vec<NaiveDate>, close: Vec<f64>) -> Result<Self> {
        if dates.len() != close.len() {
            return Err(Error::invalid("dates and closes must have equal length"));
        }
        if close.len() < 2 {
            return Err(Error::invalid("price series needs at least 2 rows"));
        }
        for w in dates.windows(2) {
            if w[1] == w[0] {
                return Err(Error::invalid(format!("duplicate date {}", w[0])));
            }
            if w[1] < w[0] {
                return Err(Error::invalid("dates must be strictly increasing"));
            }
        }
        if let Some(p) = close.iter().find(|p| !(**p > 0.0)) {
            return Err(Error::invalid(format!("non-positive close price {p}")));
        }
        Ok(Self {
            ticker: ticker.into(),
            dates,
            close,
        })
    }

    pub fn len(&self) -> usize {
        self.close.len()
    }

    pub fn is_empty(&self) -> bool {
        self.close.is_empty()
    }
}

/// Time series of excess growth rates in year⁻¹ units.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GrowthSeries {
    pub ticker: String,
    pub values: Vec<f64>,
    /// Step size in years (1/252 for daily data).
    pub delta_t: f64,
    /// Constant continuously compounded risk-free rate (year⁻¹).
    pub risk_free: f64,
}

impl GrowthSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Test statistic with its upper-tail p-value.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

impl TestResult {
    /// True when the null is rejected at level `alpha`.
    pub fn reject_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Descriptive statistics in the layout of the summary table: annualized
/// percent moments, shape statistics, and the three stylized-facts tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsSummary {
    pub mean_pct: f64,
    pub std_pct: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Jarque-Bera normality test.
    pub jb: TestResult,
    /// Ljung-Box on raw growth rates at lag 20.
    pub lb_raw: TestResult,
    /// Ljung-Box on absolute growth rates at lag 20.
    pub lb_abs: TestResult,
}

/// Loads `date,close` rows from a CSV file. Extra columns are ignored; rows
/// are sorted by date and duplicate dates rejected.
pub fn load_price_series(path: &std::path::Path, ticker: &str) -> Result<PriceSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::invalid(format!("missing required column `{name}`")))
    };
    let date_col = col("date")?;
    let close_col = col("close")?;

    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after the header row
        let record = record?;
        let raw_date = record.get(date_col).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|e| Error::Parse {
            line,
            msg: format!("bad date `{raw_date}`: {e}"),
        })?;
        let raw_close = record.get(close_col).unwrap_or("");
        let close: f64 = raw_close.parse().map_err(|e| Error::Parse {
            line,
            msg: format!("bad close `{raw_close}`: {e}"),
        })?;
        if !(close > 0.0) {
            return Err(Error::invalid(format!(
                "non-positive close {close} at line {line}"
            )));
        }
        rows.push((date, close));
    }
    rows.sort_by_key(|r| r.0);
    let (dates, close) = rows.into_iter().unzip();
    PriceSeries::new(ticker, dates, close)
}

/// Converts prices to excess growth rates: one value per consecutive pair.
pub fn compute_growth_rates(prices: &PriceSeries, r_f: f64, delta_t: f64) -> Result<GrowthSeries> {
    if prices.len() < 2 {
        return Err(Error::invalid("need at least 2 prices"));
    }
    if !(delta_t > 0.0) {
        return Err(Error::invalid("delta_t must be positive"));
    }
    let values: Vec<f64> = prices
        .close
        .windows(2)
        .map(|w| (w[1] / w[0]).ln() / delta_t - r_f)
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite growth rate"));
    }
    Ok(GrowthSeries {
        ticker: prices.ticker.clone(),
        values,
        delta_t,
        risk_free: r_f,
    })
}

/// Summary statistics plus the Jarque-Bera and lag-20 Ljung-Box tests.
pub fn descriptive_stats(g: &GrowthSeries) -> Result<StatsSummary> {
    if g.len() < 4 {
        return Err(Error::invalid("need at least 4 observations"));
    }
    let abs: Vec<f64> = g.values.iter().map(|v| v.abs()).collect();
    Ok(StatsSummary {
        mean_pct: 100.0 * stats::mean(&g.values),
        std_pct: 100.0 * stats::std_dev(&g.values),
        skewness: stats::skewness(&g.values)?,
        excess_kurtosis: stats::excess_kurtosis(&g.values)?,
        jb: jarque_bera(g)?,
        lb_raw: ljung_box(&g.values, 20)?,
        lb_abs: ljung_box(&abs, 20)?,
    })
}

/// Jarque-Bera normality test: `n/6·(S² + K²/4)` against chi-square(2).
pub fn jarque_bera(g: &GrowthSeries) -> Result<TestResult> {
    if g.len() < 8 {
        return Err(Error::invalid("need at least 8 observations"));
    }
    let s = stats::skewness(&g.values)?;
    let k = stats::excess_kurtosis(&g.values)?;
    let n = g.len() as f64;
    let statistic = n / 6.0 * (s * s + k * k / 4.0);
    Ok(TestResult {
        statistic,
        p_value: chi2_sf(statistic, 2.0),
    })
}

/// Ljung-Box portmanteau test: `Q = n(n+2)·Σ_{k≤lag} ρ̂_k²/(n−k)` against
/// chi-square(lag).
pub fn ljung_box(series: &[f64], lag: usize) -> Result<TestResult> {
    if lag == 0 || 2 * lag >= series.len() {
        return Err(Error::invalid("lag must satisfy 0 < lag < length/2"));
    }
    let n = series.len() as f64;
    let rho = stats::autocorrelations(series, lag)?;
    let statistic = n
        * (n + 2.0)
        * rho
            .iter()
            .enumerate()
            .map(|(i, r)| r * r / (n - (i + 1) as f64))
            .sum::<f64>();
    Ok(TestResult {
        statistic,
        p_value: chi2_sf(statistic, lag as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn series(values: Vec<f64>) -> GrowthSeries {
        GrowthSeries {
            ticker: "TEST".into(),
            values,
            delta_t: 1.0 / 252.0,
            risk_free: 0.0,
        }
    }

    fn prices(close: &[f64]) -> PriceSeries {
        let dates: Vec<NaiveDate> = (0..close.len())
            .map(|i| NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(i as u64))
            .collect();
        PriceSeries::new("TEST", dates, close.to_vec()).unwrap()
    }

    #[test]
    fn load_basic_csv() {
        let dir = std::env::temp_dir().join("growthsim-data-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ok.csv");
        std::fs::write(&path, "date,close,volume\n2020-01-02,100,5\n2020-01-03,101,6\n2020-01-06,102,7\n").unwrap();
        let ps = load_price_series(&path, "ABC").unwrap();
        assert_eq!(ps.len(), 3);
        assert_eq!(ps.ticker, "ABC");
        assert_eq!(ps.close, vec![100.0, 101.0, 102.0]);
    }

    #[test]
    fn load_rejects_duplicate_dates() {
        let dir = std::env::temp_dir().join("growthsim-data-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("dup.csv");
        std::fs::write(&path, "date,close\n2020-01-02,100\n2020-01-02,101\n").unwrap();
        let err = load_price_series(&path, "ABC").unwrap_err();
        assert!(err.to_string().contains("duplicate date"), "{err}");
    }

    #[test]
    fn load_rejects_negative_close() {
        let dir = std::env::temp_dir().join("growthsim-data-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("neg.csv");
        std::fs::write(&path, "date,close\n2020-01-02,100\n2020-01-03,-5\n").unwrap();
        assert!(load_price_series(&path, "ABC").is_err());
    }

    #[test]
    fn load_reports_line_numbers() {
        let dir = std::env::temp_dir().join("growthsim-data-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.csv");
        std::fs::write(&path, "date,close\n2020-01-02,100\nnot-a-date,101\n").unwrap();
        let err = load_price_series(&path, "ABC").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn growth_rate_hand_value() {
        // 252·ln(1.01) − 0.05
        let g = compute_growth_rates(&prices(&[100.0, 101.0]), 0.05, 1.0 / 252.0).unwrap();
        assert_relative_eq!(g.values[0], 2.4574833749983593, epsilon = 1e-12);
    }

    #[test]
    fn flat_price_yields_minus_risk_free() {
        let g = compute_growth_rates(&prices(&[100.0, 100.0]), 0.03, 1.0 / 252.0).unwrap();
        assert_relative_eq!(g.values[0], -0.03, epsilon = 1e-12);
    }

    #[test]
    fn return_at_risk_free_rate_gives_zero() {
        let p1 = 100.0 * (0.05f64 / 252.0).exp();
        let g = compute_growth_rates(&prices(&[100.0, p1]), 0.05, 1.0 / 252.0).unwrap();
        assert!(g.values[0].abs() < 1e-12);
    }

    #[test]
    fn growth_rates_invert_to_price_ratios() {
        let close = [100.0, 103.3, 99.8, 101.44, 150.0, 149.1];
        let g = compute_growth_rates(&prices(&close), 0.04, 1.0 / 252.0).unwrap();
        for (i, v) in g.values.iter().enumerate() {
            let ratio = ((v + 0.04) * (1.0 / 252.0)).exp();
            let want = close[i + 1] / close[i];
            assert_relative_eq!(ratio, want, max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn growth_rates_invert_for_arbitrary_prices(
            close in proptest::collection::vec(0.01f64..1e4, 2..40),
            r_f in -0.1f64..0.1,
        ) {
            let g = compute_growth_rates(&prices(&close), r_f, 1.0 / 252.0).unwrap();
            for (i, v) in g.values.iter().enumerate() {
                let ratio = ((v + r_f) / 252.0).exp();
                let want = close[i + 1] / close[i];
                prop_assert!(((ratio - want) / want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn descriptive_stats_rejects_constant_series() {
        assert!(descriptive_stats(&series(vec![1.0; 16])).is_err());
    }

    #[test]
    fn symmetric_series_has_zero_skew() {
        // Symmetric four-point pattern; |G| is non-constant so the
        // Ljung-Box attachments stay well defined.
        let v: Vec<f64> = (0..64)
            .map(|i| [-2.0, -1.0, 1.0, 2.0][i % 4])
            .collect();
        let s = descriptive_stats(&series(v)).unwrap();
        assert_relative_eq!(s.skewness, 0.0);
    }

    #[test]
    fn skewness_negates_under_sign_flip() {
        let base = [0.1, -0.4, 2.0, 0.3, -0.2, 5.0, 0.7, -1.0];
        let v: Vec<f64> = (0..64).map(|i| base[i % 8] * (1.0 + i as f64 / 100.0)).collect();
        let flipped: Vec<f64> = v.iter().map(|x| -x).collect();
        let a = descriptive_stats(&series(v)).unwrap();
        let b = descriptive_stats(&series(flipped)).unwrap();
        assert_relative_eq!(a.skewness, -b.skewness, epsilon = 1e-12);
    }

    #[test]
    fn jarque_bera_zero_for_zero_shape() {
        // Constructed sample with S=0 and K=0 is hard to hit exactly; check
        // the statistic formula directly on a symmetric two-point series,
        // which has S=0 and K=-2, so JB = n/6·(K²/4) = n/6.
        let v: Vec<f64> = (0..60).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let jb = jarque_bera(&series(v)).unwrap();
        assert_relative_eq!(jb.statistic, 60.0 / 6.0, epsilon = 1e-10);
    }

    #[test]
    fn jarque_bera_affine_invariant() {
        let v = vec![0.1, -0.4, 2.0, 0.3, -0.2, 5.0, 0.0, -1.0, 0.7, 1.3];
        let shifted: Vec<f64> = v.iter().map(|x| 3.0 * x - 7.0).collect();
        let a = jarque_bera(&series(v)).unwrap();
        let b = jarque_bera(&series(shifted)).unwrap();
        assert_relative_eq!(a.statistic, b.statistic, epsilon = 1e-9);
    }

    #[test]
    fn jarque_bera_null_simulation() {
        let mut accepted = 0;
        for trial in 0..100u64 {
            let mut rng = crate::rng::stream(2024, &[trial]);
            let v: Vec<f64> = (0..2000).map(|_| rng.sample(StandardNormal)).collect();
            if !jarque_bera(&series(v)).unwrap().reject_at(0.05) {
                accepted += 1;
            }
        }
        assert!(accepted >= 90, "accepted only {accepted}/100 under the null");
    }

    #[test]
    fn ljung_box_null_simulation() {
        let mut rejects = 0;
        for trial in 0..200u64 {
            let mut rng = crate::rng::stream(77, &[trial]);
            let v: Vec<f64> = (0..5000).map(|_| rng.sample(StandardNormal)).collect();
            if ljung_box(&v, 20).unwrap().reject_at(0.05) {
                rejects += 1;
            }
        }
        // Expected rejection rate 5%; allow wide Monte Carlo slack.
        assert!((2..=25).contains(&rejects), "rejects={rejects}/200");
    }

    #[test]
    fn ljung_box_detects_alternation() {
        let v: Vec<f64> = (0..500).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let lb = ljung_box(&v, 20).unwrap();
        assert!(lb.statistic > 1000.0);
        assert!(lb.p_value < 1e-12);
    }

    #[test]
    fn ljung_box_lag_bounds() {
        assert!(ljung_box(&[1.0, 2.0, 3.0, 4.0], 2).is_err());
    }

    #[test]
    fn stats_summary_serializes_with_exact_field_names() {
        let v = vec![0.1, -0.4, 2.0, 0.3, -0.2, 5.0, 0.0, -1.0, 0.7, 1.3];
        let mut vv = v.clone();
        vv.extend_from_slice(&v);
        vv.extend_from_slice(&v);
        vv.extend_from_slice(&v);
        vv.extend_from_slice(&v);
        let s = descriptive_stats(&series(vv)).unwrap();
        let json = serde_json::to_value(&s).unwrap();
        for key in [
            "mean_pct",
            "std_pct",
            "skewness",
            "excess_kurtosis",
            "jb",
            "lb_raw",
            "lb_abs",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert!(json["jb"].get("statistic").is_some());
        assert!(json["jb"].get("p_value").is_some());
    }
}
