//! Multi-asset dependence: the Single-Index factor model and the copula
//! stack (Gaussian, Student-t, C-vine) with rank-reordering path coupling.
//!
//! Copula coupling preserves each asset's simulated marginal exactly: every
//! path's values are permuted in time so their ranks match a copula draw,
//! injecting cross-asset dependence without touching the value multiset.

pub mod copula;
pub mod elliptical;
pub mod rank;
pub mod vine;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::GrowthSeries;
use crate::simulate::{PathEnsemble, SimPath};
use crate::{parallel, rng, stats, Error, Result};

pub use copula::{
    bivariate_log_density, fit_bivariate_by_aic, h_function, h_inverse, param_to_tau,
    t_tail_dependence, tau_to_param, BivariateCopula, CopulaFamily,
};
pub use elliptical::{fit_gaussian_copula, fit_t_copula, EllipticalCopula, EllipticalKind};
pub use rank::{kendall_tau, pit_transform, rank_reorder};
pub use vine::{fit_cvine, sample_cvine, CVine, VineEdge};

/// Single-Index Model fit for one asset against the market factor.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimFit {
    pub alpha: f64,
    pub beta: f64,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
}

/// OLS fit of `asset = α + β·market + η`, keeping the residuals for
/// bootstrap simulation.
pub fn fit_sim(asset: &GrowthSeries, market: &GrowthSeries) -> Result<SimFit> {
    if asset.len() != market.len() {
        return Err(Error::invalid("asset and market series must align"));
    }
    if asset.len() < 3 {
        return Err(Error::invalid("need at least 3 observations"));
    }
    let x = &market.values;
    let y = &asset.values;
    let mx = stats::mean(x);
    let my = stats::mean(y);
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::numeric("market series has zero variance"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    let residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| b - alpha - beta * a)
        .collect();
    let syy: f64 = y.iter().map(|&v| (v - my) * (v - my)).sum();
    let sse: f64 = residuals.iter().map(|&e| e * e).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 0.0 };
    Ok(SimFit {
        alpha,
        beta,
        residuals,
        r_squared,
    })
}

/// Propagates market paths through the factor model, resampling empirical
/// residuals i.i.d. with replacement per step. Asset paths inherit the
/// market path's states and jump metadata.
pub fn simulate_sim(fit: &SimFit, market_paths: &PathEnsemble, seed: u64) -> Result<PathEnsemble> {
    if fit.residuals.is_empty() {
        return Err(Error::invalid("fit has no residuals"));
    }
    let paths = parallel::map_indexed(market_paths.paths.len(), |i| {
        let mut path_rng = rng::stream(seed, &[i as u64]);
        let market = &market_paths.paths[i];
        let growth: Vec<f64> = market
            .growth
            .iter()
            .map(|&m| {
                let eta =
                    fit.residuals[rand::Rng::gen_range(&mut path_rng, 0..fit.residuals.len())];
                fit.alpha + fit.beta * m + eta
            })
            .collect();
        SimPath {
            states: market.states.clone(),
            growth,
            jump_episodes: market.jump_episodes.clone(),
        }
    });
    Ok(PathEnsemble {
        paths,
        horizon: market_paths.horizon,
        seed,
        model_id: format!("{}/sim", market_paths.model_id),
    })
}

/// A fitted dependence specification.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DependenceModel {
    /// Per-asset factor fits against a market column.
    SingleIndex {
        market: String,
        tickers: Vec<String>,
        fits: Vec<SimFit>,
    },
    Gaussian { copula: EllipticalCopula },
    StudentT { copula: EllipticalCopula },
    Vine { vine: CVine },
}

impl DependenceModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            DependenceModel::SingleIndex { .. } => "sim",
            DependenceModel::Gaussian { .. } => "gaussian",
            DependenceModel::StudentT { .. } => "student_t",
            DependenceModel::Vine { .. } => "vine",
        }
    }
}

/// Draws `t` rows of copula uniforms (column-major). Errors for the
/// Single-Index variant, which is not a copula.
pub fn sample_copula(
    model: &DependenceModel,
    t: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    match model {
        DependenceModel::SingleIndex { .. } => Err(Error::invalid(
            "the single-index model is sampled through simulate_sim, not a copula",
        )),
        DependenceModel::Gaussian { copula } | DependenceModel::StudentT { copula } => {
            elliptical::sample_elliptical(copula, t, rng)
        }
        DependenceModel::Vine { vine } => Ok(sample_cvine(vine, t, rng)),
    }
}

/// Couples independently simulated per-asset ensembles through the fitted
/// copula: path `p` of every asset is reordered against one copula draw of
/// `horizon` rows from stream `(seed, p)`.
pub fn couple_ensembles(
    ensembles: &[PathEnsemble],
    model: &DependenceModel,
    seed: u64,
) -> Result<Vec<PathEnsemble>> {
    let d = ensembles.len();
    if d < 2 {
        return Err(Error::invalid("need at least 2 ensembles to couple"));
    }
    let dim = match model {
        DependenceModel::SingleIndex { .. } => {
            return Err(Error::invalid(
                "coupling requires a copula dependence model",
            ))
        }
        DependenceModel::Gaussian { copula } | DependenceModel::StudentT { copula } => copula.dim(),
        DependenceModel::Vine { vine } => vine.dim(),
    };
    if dim != d {
        return Err(Error::invalid(format!(
            "copula dimension {dim} does not match {d} ensembles"
        )));
    }
    let n_paths = ensembles[0].n_paths();
    let horizon = ensembles[0].horizon;
    if ensembles
        .iter()
        .any(|e| e.n_paths() != n_paths || e.horizon != horizon)
    {
        return Err(Error::invalid(
            "ensembles must share path count and horizon",
        ));
    }

    // Build per-path reordered growth/state vectors, then reassemble.
    let coupled: Vec<Vec<(Vec<f64>, Vec<usize>)>> = parallel::map_indexed(n_paths, |p| {
        let mut path_rng = rng::stream(seed, &[p as u64]);
        let u = sample_copula(model, horizon, &mut path_rng).expect("copula model validated");
        ensembles
            .iter()
            .zip(&u)
            .map(|(ens, col)| {
                let path = &ens.paths[p];
                let mut growth = path.growth.clone();
                let mut states = path.states.clone();
                rank::reorder_path(&mut growth, &mut states, col);
                (growth, states)
            })
            .collect()
    });

    Ok(ensembles
        .iter()
        .enumerate()
        .map(|(a, ens)| {
            let paths = ens
                .paths
                .iter()
                .enumerate()
                .map(|(p, path)| SimPath {
                    growth: coupled[p][a].0.clone(),
                    states: coupled[p][a].1.clone(),
                    jump_episodes: path.jump_episodes.clone(),
                })
                .collect();
            PathEnsemble {
                paths,
                horizon,
                seed,
                model_id: format!("{}/{}", ens.model_id, model.kind_name()),
            }
        })
        .collect())
}

/// Correlation-reproduction quality of coupled ensembles against observed
/// data, plus per-asset marginal KS pass rates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DependenceReport {
    /// Root-sum-squared error over upper-triangle correlation entries
    /// (observed vs. mean simulated).
    pub frobenius_error: f64,
    /// Mean absolute error over pairs (observed vs. mean simulated).
    pub pairwise_corr_mae: f64,
    /// Per-asset percent of paths passing the KS test at α = 0.05.
    pub per_asset_ks_pass: BTreeMap<String, f64>,
}

/// Compares pairwise Pearson correlations of observed columns against the
/// per-path correlations of the simulated ensembles.
pub fn correlation_metrics(
    tickers: &[String],
    observed: &[Vec<f64>],
    simulated: &[PathEnsemble],
) -> Result<DependenceReport> {
    let d = observed.len();
    if d < 2 || simulated.len() != d || tickers.len() != d {
        return Err(Error::invalid(
            "need matching tickers, observed columns, and ensembles for at least 2 assets",
        ));
    }
    let n_paths = simulated[0].n_paths();
    if simulated.iter().any(|e| e.n_paths() != n_paths) {
        return Err(Error::invalid("ensembles must share the path count"));
    }

    let mut frob = 0.0;
    let mut mae = 0.0;
    let mut pairs = 0usize;
    for i in 0..d {
        for j in i + 1..d {
            let obs_rho = stats::pearson(&observed[i], &observed[j]);
            let sim_rhos = parallel::map_indexed(n_paths, |p| {
                stats::pearson(&simulated[i].paths[p].growth, &simulated[j].paths[p].growth)
            });
            let mean_rho = stats::mean(&sim_rhos);
            frob += (obs_rho - mean_rho) * (obs_rho - mean_rho);
            mae += (obs_rho - mean_rho).abs();
            pairs += 1;
        }
    }

    let mut per_asset_ks_pass = BTreeMap::new();
    for ((ticker, obs), ens) in tickers.iter().zip(observed).zip(simulated) {
        let passes = parallel::map_indexed(ens.n_paths(), |p| {
            let sim = &ens.paths[p].growth;
            let trimmed = &sim[..sim.len().min(obs.len())];
            let r = crate::validate::ks_two_sample(obs, trimmed).expect("nonempty");
            usize::from(!r.reject_at(0.05))
        });
        let rate = 100.0 * passes.iter().sum::<usize>() as f64 / ens.n_paths() as f64;
        per_asset_ks_pass.insert(ticker.clone(), rate);
    }

    Ok(DependenceReport {
        frobenius_error: frob.sqrt(),
        pairwise_corr_mae: mae / pairs as f64,
        per_asset_ks_pass,
    })
}
