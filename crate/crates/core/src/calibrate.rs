//! Jump-hyperparameter calibration.
//!
//! The objective for a candidate `(ε, λ)` is
//! `J = Σ_τ (ACF_obs(τ) − ACF̄_sim(τ))² + w_K·(K_obs − K̄_sim)²`,
//! where the simulated ACF of `|Ĝ|` and the excess kurtosis are averaged
//! over the ensemble before squaring. The grid search evaluates every cell
//! independently with streams keyed by `(seed, ε index, λ index, path)`,
//! so the surface is reproducible and scheduling-independent.

use serde::{Deserialize, Serialize};

use crate::data::GrowthSeries;
use crate::hmm::HmmModel;
use crate::simulate::{JumpConfig, PathEnsemble, SimPath};
use crate::{parallel, rng, stats, Error, Result};

/// Sample autocorrelation function over lags 1..=max_lag.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AcfVector {
    pub max_lag: usize,
    /// `values[τ-1]` is the autocorrelation at lag τ.
    pub values: Vec<f64>,
}

/// Conventional biased sample ACF (overall mean, lag-0 denominator).
pub fn sample_acf(series: &[f64], max_lag: usize) -> Result<AcfVector> {
    let values = stats::autocorrelations(series, max_lag)?;
    Ok(AcfVector { max_lag, values })
}

/// Grid-search configuration. Defaults mirror the calibrated search:
/// ε over eight points in [1e-4, 2.5e-2], λ over nine points in [10, 160],
/// 200 paths per grid point, lag window 252, kurtosis weight 0.20.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub epsilons: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub paths_per_point: usize,
    /// Steps per simulated path; defaults to the training length when 0.
    pub horizon: usize,
    pub w_k: f64,
    pub max_lag: usize,
    /// Tail-set size used for every candidate.
    pub n_tail: usize,
    /// Negative-tail bias used for every candidate.
    pub p_neg: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            epsilons: vec![1e-4, 2.5e-4, 5e-4, 1e-3, 2.5e-3, 5e-3, 1e-2, 2.5e-2],
            lambdas: vec![10.0, 25.0, 40.0, 55.0, 70.0, 85.0, 100.0, 130.0, 160.0],
            paths_per_point: 200,
            horizon: 0,
            w_k: 0.20,
            max_lag: 252,
            n_tail: 5,
            p_neg: 0.52,
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.lambdas.is_empty() {
            return Err(Error::invalid("grid axes must be nonempty"));
        }
        if self.epsilons.windows(2).any(|w| w[0] >= w[1])
            || self.lambdas.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::invalid("grid axes must be sorted and distinct"));
        }
        if self.epsilons.iter().any(|&e| !(0.0..=1.0).contains(&e))
            || self.lambdas.iter().any(|&l| !(l > 0.0))
        {
            return Err(Error::invalid("grid values out of range"));
        }
        if self.paths_per_point == 0 {
            return Err(Error::invalid("paths_per_point must be at least 1"));
        }
        Ok(())
    }
}

/// Calibration objective against an already-simulated ensemble. Paths with
/// zero variance are skipped (logged); returns +∞ if none survive.
pub fn objective(
    obs_acf: &AcfVector,
    obs_kurtosis: f64,
    ensemble: &PathEnsemble,
    w_k: f64,
) -> Result<f64> {
    if ensemble.paths.is_empty() {
        return Err(Error::invalid("ensemble is empty"));
    }
    if ensemble.horizon <= obs_acf.max_lag {
        return Err(Error::invalid(format!(
            "horizon {} must exceed max lag {}",
            ensemble.horizon, obs_acf.max_lag
        )));
    }
    let terms = parallel::map_slice(&ensemble.paths, |path| path_terms(path, obs_acf.max_lag));
    let mut acc_acf = vec![0.0; obs_acf.max_lag];
    let mut acc_kurt = 0.0;
    let mut used = 0usize;
    for t in terms.into_iter().flatten() {
        for (a, v) in acc_acf.iter_mut().zip(&t.0) {
            *a += v;
        }
        acc_kurt += t.1;
        used += 1;
    }
    let skipped = ensemble.paths.len() - used;
    if skipped > 0 {
        log::warn!("objective: skipped {skipped} degenerate path(s)");
    }
    if used == 0 {
        return Ok(f64::INFINITY);
    }
    let inv = 1.0 / used as f64;
    let acf_term: f64 = obs_acf
        .values
        .iter()
        .zip(&acc_acf)
        .map(|(o, s)| {
            let d = o - s * inv;
            d * d
        })
        .sum();
    let kurt_gap = obs_kurtosis - acc_kurt * inv;
    Ok(acf_term + w_k * kurt_gap * kurt_gap)
}

/// Per-path |G| autocorrelations and excess kurtosis; None when degenerate.
fn path_terms(path: &SimPath, max_lag: usize) -> Option<(Vec<f64>, f64)> {
    let abs: Vec<f64> = path.growth.iter().map(|g| g.abs()).collect();
    let acf = stats::autocorrelations(&abs, max_lag).ok()?;
    let kurt = stats::excess_kurtosis(&path.growth).ok()?;
    Some((acf, kurt))
}

/// Which edges of the grid the optimum landed on.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct BoundaryFlags {
    pub epsilon_lower: bool,
    pub epsilon_upper: bool,
    pub lambda_lower: bool,
    pub lambda_upper: bool,
}

/// The argmin cell of the objective surface.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct BestPoint {
    pub epsilon: f64,
    pub lambda: f64,
    pub objective: f64,
    pub epsilon_index: usize,
    pub lambda_index: usize,
}

/// Full objective surface with its argmin and boundary diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridResult {
    pub epsilons: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// `surface[i][j]` is J at `(epsilons[i], lambdas[j])`.
    pub surface: Vec<Vec<f64>>,
    pub best: BestPoint,
    pub boundary_flags: BoundaryFlags,
}

impl GridResult {
    /// CSV rows `epsilon,lambda,J` for heatmap plotting.
    pub fn write_surface_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epsilon", "lambda", "objective"])?;
        for (i, &e) in self.epsilons.iter().enumerate() {
            for (j, &l) in self.lambdas.iter().enumerate() {
                w.write_record(&[format!("{e}"), format!("{l}"), format!("{}", self.surface[i][j])])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates an arbitrary cell objective over the grid and returns the
/// surface with its argmin. Ties break toward the smallest ε, then the
/// smallest λ. This is the machinery under [`grid_search`]; tests inject
/// closed-form objectives here.
pub fn grid_search_surface<F>(epsilons: &[f64], lambdas: &[f64], eval: F) -> Result<GridResult>
where
    F: Fn(usize, usize, f64, f64) -> f64 + Sync + Send,
{
    if epsilons.is_empty() || lambdas.is_empty() {
        return Err(Error::invalid("grid axes must be nonempty"));
    }
    let nl = lambdas.len();
    let cells = parallel::map_indexed(epsilons.len() * nl, |idx| {
        let (i, j) = (idx / nl, idx % nl);
        eval(i, j, epsilons[i], lambdas[j])
    });
    let surface: Vec<Vec<f64>> = cells.chunks(nl).map(|c| c.to_vec()).collect();
    let mut best = (0usize, 0usize);
    for i in 0..epsilons.len() {
        for j in 0..nl {
            if surface[i][j].is_nan() {
                return Err(Error::numeric(format!(
                    "objective is NaN at cell ({i},{j})"
                )));
            }
            // Strict improvement keeps the earliest (smallest-ε, smallest-λ)
            // cell on ties.
            if surface[i][j] < surface[best.0][best.1] {
                best = (i, j);
            }
        }
    }
    let (bi, bj) = best;
    Ok(GridResult {
        epsilons: epsilons.to_vec(),
        lambdas: lambdas.to_vec(),
        best: BestPoint {
            epsilon: epsilons[bi],
            lambda: lambdas[bj],
            objective: surface[bi][bj],
            epsilon_index: bi,
            lambda_index: bj,
        },
        boundary_flags: BoundaryFlags {
            epsilon_lower: bi == 0,
            epsilon_upper: bi == epsilons.len() - 1,
            lambda_lower: bj == 0,
            lambda_upper: bj == nl - 1,
        },
        surface,
    })
}

/// Multi-objective grid search for `(ε, λ)`: simulates `paths_per_point`
/// paths per cell and minimizes [`objective`] against the observed series.
pub fn grid_search(
    model: &HmmModel,
    observed: &GrowthSeries,
    spec: &GridSpec,
    seed: u64,
) -> Result<GridResult> {
    spec.validate()?;
    let horizon = if spec.horizon == 0 {
        observed.len()
    } else {
        spec.horizon
    };
    if horizon <= spec.max_lag {
        return Err(Error::invalid(format!(
            "horizon {horizon} must exceed max_lag {}",
            spec.max_lag
        )));
    }
    let abs: Vec<f64> = observed.values.iter().map(|v| v.abs()).collect();
    let obs_acf = sample_acf(&abs, spec.max_lag)?;
    let obs_kurt = stats::excess_kurtosis(&observed.values)?;
    // Validate the extreme jump configs once up front.
    for &epsilon in &spec.epsilons {
        JumpConfig {
            epsilon,
            lambda: spec.lambdas[0],
            n_tail: spec.n_tail,
            p_neg: spec.p_neg,
            enabled: true,
        }
        .validate(model.n_states())?;
    }

    grid_search_surface(&spec.epsilons, &spec.lambdas, |i, j, epsilon, lambda| {
        let jump = JumpConfig {
            epsilon,
            lambda,
            n_tail: spec.n_tail,
            p_neg: spec.p_neg,
            enabled: true,
        };
        let paths: Vec<SimPath> = (0..spec.paths_per_point)
            .map(|p| {
                let mut cell_rng = rng::stream(seed, &[i as u64, j as u64, p as u64]);
                let (states, jump_episodes) =
                    crate::simulate::simulate_states(model, &jump, horizon, &mut cell_rng)
                        .expect("validated config");
                let growth =
                    crate::simulate::decode_growth(&states, &model.emissions, &mut cell_rng)
                        .expect("states in range");
                SimPath {
                    states,
                    growth,
                    jump_episodes,
                }
            })
            .collect();
        let ensemble = PathEnsemble {
            paths,
            horizon,
            seed,
            model_id: model.ticker.clone(),
        };
        objective(&obs_acf, obs_kurt, &ensemble, spec.w_k).expect("horizon validated")
    })
}
