//! Deterministic synthetic market data for the integration and acceptance
//! suites: a heavy-tailed daily series with volatility clustering shaped
//! like a large-cap index (excess kurtosis near 7.7, negative skew, slowly
//! decaying |G| autocorrelation), plus a correlated four-asset panel built
//! on a shared volatility factor.

use growthsim::data::GrowthSeries;
use growthsim::rng;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

pub const MARKET_LEN: usize = 2766;

#[allow(dead_code)]
pub const VOL_OF_VOL: f64 = 0.015;
pub const CRASH_START: usize = 1480;
pub const CRASH_LEN: usize = 105;
#[allow(dead_code)]
pub const CRASH_MULT: f64 = 2.52;

/// Stochastic-volatility market series with one long crash episode.
/// All parameters are frozen; the output is a pure function of the seed.
pub fn market_growth(seed: u64) -> MarketData {
    let n = MARKET_LEN;
    let mut rng = rng::stream(seed, &[0xA55E7]);
    let t_innov = StudentT::new(7.0).unwrap();

    // Mildly persistent log-vol AR(1) around sigma0.
    let sigma0: f64 = 1.42;
    let persist = 0.985;
    let vol_of_vol = VOL_OF_VOL;
    let mut log_m = 0.0; // log vol multiplier
    let mut vol = vec![0.0; n];
    for v in vol.iter_mut() {
        let eta: f64 = rng.sample(StandardNormal);
        log_m = persist * log_m + vol_of_vol * eta;
        *v = sigma0 * log_m.exp();
    }
    // One long crash regime: elevated volatility with a negative drift,
    // tapering off over its length. It carries the heavy tails, the skew,
    // and the slowly decaying |G| autocorrelation.
    let crash_start = CRASH_START;
    let crash_len = CRASH_LEN;
    for t in crash_start..crash_start + crash_len {
        let ramp = 1.0 - ((t - crash_start) as f64 / crash_len as f64) * 0.45;
        vol[t] *= CRASH_MULT * ramp;
    }
    let mut values = vec![0.0; n];
    for t in 0..n {
        // Clip the innovation at 6 standard units: keeps the tails heavy
        // without letting a single once-per-series draw dominate the
        // fourth moment.
        let raw: f64 = t_innov.sample(&mut rng);
        let z = raw.clamp(-6.0, 6.0);
        let drift = if (crash_start..crash_start + crash_len).contains(&t) {
            -0.55 * vol[t]
        } else {
            0.25
        };
        values[t] = drift + vol[t] * z;
    }
    MarketData {
        growth: GrowthSeries {
            ticker: "MKT".into(),
            values,
            delta_t: 1.0 / 252.0,
            risk_free: 0.02,
        },
        vol,
    }
}

pub struct MarketData {
    pub growth: GrowthSeries,
    /// The latent vol multiplier path, shared with the asset panel.
    pub vol: Vec<f64>,
}

/// Variant with volatility clustering at the strength of a real index:
/// stronger stochastic-vol persistence signal, so the |G| autocorrelation
/// sits near the full jump-episode level rather than the diluted ensemble
/// mean. Used where jump-conditioned temporal behavior is under test.
pub fn market_growth_clustered(seed: u64) -> MarketData {
    clustered_impl(seed)
}

fn clustered_impl(seed: u64) -> MarketData {
    let n = MARKET_LEN;
    let mut rng = rng::stream(seed, &[0xC1A5]);
    let t_innov = StudentT::new(7.0).unwrap();
    let sigma0: f64 = 1.42;
    let persist = 0.985;
    let vol_of_vol = 0.075;
    let mut log_m = 0.0;
    let mut vol = vec![0.0; n];
    for v in vol.iter_mut() {
        let eta: f64 = rng.sample(StandardNormal);
        log_m = persist * log_m + vol_of_vol * eta;
        *v = sigma0 * log_m.exp();
    }
    let crash_len = 115;
    for t in CRASH_START..CRASH_START + crash_len {
        let ramp = 1.0 - ((t - CRASH_START) as f64 / crash_len as f64) * 0.45;
        vol[t] *= 2.5 * ramp;
    }
    let mut values = vec![0.0; n];
    for t in 0..n {
        let raw: f64 = t_innov.sample(&mut rng);
        let z = raw.clamp(-6.0, 6.0);
        let drift = if (CRASH_START..CRASH_START + crash_len).contains(&t) {
            -0.55 * vol[t]
        } else {
            0.25
        };
        values[t] = drift + vol[t] * z;
    }
    MarketData {
        growth: GrowthSeries {
            ticker: "MKTC".into(),
            values,
            delta_t: 1.0 / 252.0,
            risk_free: 0.02,
        },
        vol,
    }
}

/// Four-asset panel: the market plus three assets with distinct factor
/// structure. The third asset ("FINL") carries a regime-dependent loading,
/// much higher during the crash window, which a constant-beta factor model
/// with i.i.d. residual resampling cannot reproduce; this is the documented
/// failure mode of the linear single-index construction.
pub fn four_asset_panel(seed: u64) -> (Vec<String>, Vec<GrowthSeries>) {
    let market = market_growth(seed);
    let n = market.growth.len();
    let mut rng = rng::stream(seed, &[0xF0C4]);
    let t5 = StudentT::new(5.0).unwrap();

    let mut make = |beta: &dyn Fn(usize) -> f64, idio: f64, label: &str| {
        let values: Vec<f64> = (0..n)
            .map(|t| {
                let raw: f64 = t5.sample(&mut rng);
                let z = raw.clamp(-6.0, 6.0);
                0.1 + beta(t) * market.growth.values[t] + idio * z
            })
            .collect();
        GrowthSeries {
            ticker: label.into(),
            values,
            delta_t: 1.0 / 252.0,
            risk_free: 0.02,
        }
    };

    let in_crash = |t: usize| (CRASH_START..CRASH_START + CRASH_LEN).contains(&t);
    let a1 = make(&|_| 1.55, 2.4, "TECH"); // high constant loading
    let a2 = make(&|_| 0.5, 1.1, "HLTH"); // defensive constant loading
    let a3 = make(
        &|t| if in_crash(t) { 1.9 } else { 0.76 },
        1.38,
        "FINL",
    ); // crash-amplified loading
    (
        vec![
            "MKT".to_string(),
            "TECH".to_string(),
            "HLTH".to_string(),
            "FINL".to_string(),
        ],
        vec![market.growth, a1, a2, a3],
    )
}

/// Heavy-tailed i.i.d. mixture (half Laplace, half Student-t) used where a
/// generic non-Gaussian training series is enough.
pub fn laplace_t_mixture(n: usize, seed: u64) -> GrowthSeries {
    let mut rng = rng::stream(seed, &[0x313A7]);
    let t5 = StudentT::new(5.0).unwrap();
    let values = (0..n)
        .map(|_| {
            if rng.gen::<bool>() {
                let u: f64 = rng.gen_range(1e-15..1.0);
                if u <= 0.5 {
                    (2.0 * u).ln()
                } else {
                    -(2.0 * (1.0 - u)).ln()
                }
            } else {
                1.2 * t5.sample(&mut rng)
            }
        })
        .collect();
    GrowthSeries {
        ticker: "MIX".into(),
        values,
        delta_t: 1.0 / 252.0,
        risk_free: 0.0,
    }
}
