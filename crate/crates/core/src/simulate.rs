//! Path generation: jump-augmented state simulation, state decoding, seeded
//! ensembles, and the three i.i.d. baseline generators.
//!
//! The jump mechanism overrides Markov transitions: on each non-forced step
//! the chain jumps with probability ε, drawing a duration `K ~ Poisson(λ)`
//! and forcing the next `K` steps (truncated at the horizon) uniformly into
//! the bottom tail set with probability `p_neg`, else the top tail set.
//! A `K = 0` draw logs a zero-length episode and falls through to a normal
//! Markov step, consuming no horizon.
//!
//! Each path owns an independent RNG stream derived from `(seed, path index)`,
//! so ensembles are reproducible and identical across worker counts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::data::GrowthSeries;
use crate::hmm::{fit_laplace_mle, EmissionTable, HmmModel, State};
use crate::parallel;
use crate::{rng, Error, Result};

/// Jump-mechanism hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct JumpConfig {
    /// Per-step probability of entering a jump episode.
    pub epsilon: f64,
    /// Mean episode duration in steps.
    pub lambda: f64,
    /// Number of states in each tail set.
    pub n_tail: usize,
    /// Probability that a forced step targets the bottom (negative) tail.
    pub p_neg: f64,
    /// Disables the mechanism entirely when false.
    pub enabled: bool,
}

impl Default for JumpConfig {
    /// The calibrated operating point: ε = 1e-4, λ = 100, 5-state tails,
    /// 0.52 negative bias.
    fn default() -> Self {
        JumpConfig {
            epsilon: 1e-4,
            lambda: 100.0,
            n_tail: 5,
            p_neg: 0.52,
            enabled: true,
        }
    }
}

impl JumpConfig {
    /// A configuration with jumps switched off (the no-jump model).
    pub fn disabled() -> Self {
        JumpConfig {
            enabled: false,
            ..Default::default()
        }
    }

    /// Checks ranges and tail-set size against the model's state count.
    pub fn validate(&self, n_states: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon must be in [0,1]"));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::invalid("lambda must be positive"));
        }
        if !(0.0..=1.0).contains(&self.p_neg) {
            return Err(Error::invalid("p_neg must be in [0,1]"));
        }
        if self.n_tail == 0 {
            return Err(Error::invalid("n_tail must be at least 1"));
        }
        if 2 * self.n_tail >= n_states {
            return Err(Error::invalid(format!(
                "tail sets overlap: 2·n_tail = {} must stay below N = {n_states}",
                2 * self.n_tail
            )));
        }
        Ok(())
    }
}

/// A forced excursion into the tail states: start index and the number of
/// steps actually forced (zero when the Poisson duration came up empty).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct JumpEpisode {
    pub start: usize,
    pub len: usize,
}

/// One simulated path: states, decoded growth rates, jump bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimPath {
    pub states: Vec<State>,
    pub growth: Vec<f64>,
    pub jump_episodes: Vec<JumpEpisode>,
}

impl SimPath {
    pub fn contains_jump(&self) -> bool {
        !self.jump_episodes.is_empty()
    }
}

/// A seeded collection of equal-length paths.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PathEnsemble {
    pub paths: Vec<SimPath>,
    pub horizon: usize,
    pub seed: u64,
    pub model_id: String,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    /// Fraction of paths containing at least one jump episode.
    pub fn jump_path_fraction(&self) -> f64 {
        if self.paths.is_empty() {
            return 0.0;
        }
        self.paths.iter().filter(|p| p.contains_jump()).count() as f64 / self.paths.len() as f64
    }

    /// Fraction of all steps that were forced by a jump episode.
    pub fn forced_step_fraction(&self) -> f64 {
        let total: usize = self.paths.iter().map(|p| p.growth.len()).sum();
        if total == 0 {
            return 0.0;
        }
        let forced: usize = self
            .paths
            .iter()
            .flat_map(|p| &p.jump_episodes)
            .map(|e| e.len)
            .sum();
        forced as f64 / total as f64
    }

    /// Writes the columnar layout `path_id,t,state,growth`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["path_id", "t", "state", "growth"])?;
        for (id, path) in self.paths.iter().enumerate() {
            for (t, (&s, &g)) in path.states.iter().zip(&path.growth).enumerate() {
                w.write_record(&[
                    id.to_string(),
                    t.to_string(),
                    s.to_string(),
                    format!("{g}"),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the columnar layout written by [`PathEnsemble::write_csv`].
    /// Jump metadata is not part of the CSV and comes back empty.
    pub fn read_csv<R: std::io::Read>(input: R, seed: u64, model_id: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let mut paths: Vec<SimPath> = Vec::new();
        for record in reader.records() {
            let record = record?;
            let field = |i: usize| -> Result<&str> {
                record
                    .get(i)
                    .ok_or_else(|| Error::invalid("short ensemble CSV row"))
            };
            let path_id: usize = field(0)?
                .parse()
                .map_err(|e| Error::invalid(format!("bad path_id: {e}")))?;
            let state: usize = field(2)?
                .parse()
                .map_err(|e| Error::invalid(format!("bad state: {e}")))?;
            let growth: f64 = field(3)?
                .parse()
                .map_err(|e| Error::invalid(format!("bad growth: {e}")))?;
            if path_id == paths.len() {
                paths.push(SimPath {
                    states: Vec::new(),
                    growth: Vec::new(),
                    jump_episodes: Vec::new(),
                });
            }
            let path = paths
                .get_mut(path_id)
                .ok_or_else(|| Error::invalid("path_id out of order in ensemble CSV"))?;
            path.states.push(state);
            path.growth.push(growth);
        }
        if paths.is_empty() {
            return Err(Error::invalid("ensemble CSV has no rows"));
        }
        let horizon = paths[0].growth.len();
        if paths.iter().any(|p| p.growth.len() != horizon) {
            return Err(Error::invalid("ensemble CSV has ragged path lengths"));
        }
        Ok(PathEnsemble {
            paths,
            horizon,
            seed,
            model_id: model_id.to_string(),
        })
    }

    /// The manifest published next to the CSV export.
    pub fn manifest(&self, generator: &str, jump: Option<&JumpConfig>) -> EnsembleManifest {
        EnsembleManifest {
            model_id: self.model_id.clone(),
            generator: generator.to_string(),
            seed: self.seed,
            paths: self.n_paths(),
            horizon: self.horizon,
            jump: jump.copied(),
            jump_path_fraction: self.jump_path_fraction(),
            forced_step_fraction: self.forced_step_fraction(),
            jump_paths: self
                .paths
                .iter()
                .enumerate()
                .filter(|(_, p)| p.contains_jump())
                .map(|(i, _)| i)
                .collect(),
        }
    }
}

/// Summary of how an ensemble was generated: seed, configuration, and jump
/// fractions.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnsembleManifest {
    pub model_id: String,
    pub generator: String,
    pub seed: u64,
    pub paths: usize,
    pub horizon: usize,
    pub jump: Option<JumpConfig>,
    pub jump_path_fraction: f64,
    pub forced_step_fraction: f64,
    /// Indices of paths containing at least one jump episode.
    pub jump_paths: Vec<usize>,
}

/// Cumulative distribution rows for O(log N) categorical draws.
struct CumSampler {
    init: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl CumSampler {
    fn new(model: &HmmModel) -> Self {
        let cum = |p: &[f64]| {
            let mut acc = 0.0;
            p.iter()
                .map(|&x| {
                    acc += x;
                    acc
                })
                .collect::<Vec<f64>>()
        };
        CumSampler {
            init: cum(&model.stationary),
            rows: model.transitions.rows.iter().map(|r| cum(r)).collect(),
        }
    }

    fn draw(cum: &[f64], rng: &mut ChaCha8Rng) -> State {
        let u: f64 = rng.gen();
        cum.partition_point(|&c| c <= u).min(cum.len() - 1)
    }
}

/// Simulates a state sequence of length `m` from the model under the jump
/// configuration, returning the sequence and the episode log.
pub fn simulate_states(
    model: &HmmModel,
    jump: &JumpConfig,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<State>, Vec<JumpEpisode>)> {
    if m == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    jump.validate(model.n_states())?;
    let sampler = CumSampler::new(model);
    Ok(simulate_states_inner(model, &sampler, jump, m, rng))
}

fn simulate_states_inner(
    model: &HmmModel,
    sampler: &CumSampler,
    jump: &JumpConfig,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<State>, Vec<JumpEpisode>) {
    let n = model.n_states();
    let poisson = Poisson::new(jump.lambda).expect("validated lambda");
    let mut states = vec![0usize; m];
    let mut episodes = Vec::new();
    states[0] = CumSampler::draw(&sampler.init, rng);
    let mut t = 1;
    while t < m {
        let trigger = jump.enabled && jump.epsilon > 0.0 && rng.gen::<f64>() < jump.epsilon;
        if trigger {
            let k = poisson.sample(rng) as usize;
            let forced = k.min(m - t);
            episodes.push(JumpEpisode {
                start: t,
                len: forced,
            });
            for _ in 0..forced {
                // Uniform draw within the chosen tail set.
                states[t] = if rng.gen::<f64>() < jump.p_neg {
                    rng.gen_range(0..jump.n_tail)
                } else {
                    n - jump.n_tail + rng.gen_range(0..jump.n_tail)
                };
                t += 1;
            }
            if k > 0 {
                continue;
            }
            // K = 0: no steps forced; fall through to a normal step.
        }
        states[t] = CumSampler::draw(&sampler.rows[states[t - 1]], rng);
        t += 1;
    }
    (states, episodes)
}

/// Decodes states to continuous growth rates, `Ĝ_t = μ_k + σ_k·Z` with
/// `Z ~ t_ν` (standard normal when ν is infinite).
pub fn decode_growth(
    states: &[State],
    emissions: &EmissionTable,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let n = emissions.mu.len();
    if let Some(&s) = states.iter().find(|&&s| s >= n) {
        return Err(Error::invalid(format!("state {s} out of range 0..{n}")));
    }
    let nu = emissions.nu;
    let student = if nu.is_gaussian() {
        None
    } else {
        Some(StudentT::new(nu.value()).map_err(|e| Error::numeric(e.to_string()))?)
    };
    Ok(states
        .iter()
        .map(|&s| {
            let z: f64 = match &student {
                Some(t) => t.sample(rng),
                None => rng.sample(StandardNormal),
            };
            emissions.mu[s] + emissions.sigma[s] * z
        })
        .collect())
}

/// Generates `p` independent paths of `m` steps. Path `i` uses the RNG
/// stream `(seed, i)`: output is a pure function of
/// `(model, jump, p, m, seed)` and does not depend on scheduling.
pub fn simulate_ensemble(
    model: &HmmModel,
    jump: &JumpConfig,
    p: usize,
    m: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    if p == 0 || m == 0 {
        return Err(Error::invalid("need at least 1 path and 1 step"));
    }
    jump.validate(model.n_states())?;
    let sampler = CumSampler::new(model);
    let paths = parallel::map_indexed(p, |i| {
        let mut rng = rng::stream(seed, &[i as u64]);
        let (states, jump_episodes) = simulate_states_inner(model, &sampler, jump, m, &mut rng);
        let growth = decode_growth(&states, &model.emissions, &mut rng)
            .expect("states are in range by construction");
        SimPath {
            states,
            growth,
            jump_episodes,
        }
    });
    Ok(PathEnsemble {
        paths,
        horizon: m,
        seed,
        model_id: model.ticker.clone(),
    })
}

/// The i.i.d. reference generators used as comparison anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    /// Resample the training data with replacement.
    Bootstrap,
    /// Draws from the MLE-fitted normal distribution.
    Gaussian,
    /// Draws from the MLE-fitted Laplace distribution.
    Laplace,
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bootstrap" => Ok(BaselineKind::Bootstrap),
            "gaussian" => Ok(BaselineKind::Gaussian),
            "laplace" => Ok(BaselineKind::Laplace),
            other => Err(Error::invalid(format!("unknown baseline kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        f.write_str(match self {
            BaselineKind::Bootstrap => "bootstrap",
            BaselineKind::Gaussian => "gaussian",
            BaselineKind::Laplace => "laplace",
        })
    }
}

/// Generates an i.i.d. baseline ensemble from the training series. Paths
/// carry a single implicit state 0 and no jump metadata.
pub fn baseline_generate(
    kind: BaselineKind,
    training: &GrowthSeries,
    p: usize,
    m: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    if training.len() < 2 {
        return Err(Error::invalid("training series needs at least 2 points"));
    }
    if p == 0 || m == 0 {
        return Err(Error::invalid("need at least 1 path and 1 step"));
    }
    enum Sampler {
        Bootstrap(Vec<f64>),
        Gaussian { mean: f64, std: f64 },
        Laplace { mu: f64, b: f64 },
    }
    let sampler = match kind {
        BaselineKind::Bootstrap => Sampler::Bootstrap(training.values.clone()),
        BaselineKind::Gaussian => {
            // MLE: population (n-denominator) variance.
            let mean = crate::stats::mean(&training.values);
            let var = training
                .values
                .iter()
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / training.len() as f64;
            Sampler::Gaussian {
                mean,
                std: var.sqrt(),
            }
        }
        BaselineKind::Laplace => {
            let fit = fit_laplace_mle(training)?;
            Sampler::Laplace {
                mu: fit.mu,
                b: fit.b,
            }
        }
    };
    let paths = parallel::map_indexed(p, |i| {
        let mut rng = rng::stream(seed, &[i as u64]);
        let growth: Vec<f64> = (0..m)
            .map(|_| match &sampler {
                Sampler::Bootstrap(values) => values[rng.gen_range(0..values.len())],
                Sampler::Gaussian { mean, std } => {
                    mean + std * rng.sample::<f64, _>(StandardNormal)
                }
                Sampler::Laplace { mu, b } => {
                    // Inverse-CDF draw from the closed-form Laplace quantile.
                    let u: f64 = rng.gen();
                    let u = u.clamp(1e-300, 1.0 - 1e-16);
                    if u <= 0.5 {
                        mu + b * (2.0 * u).ln()
                    } else {
                        mu - b * (2.0 * (1.0 - u)).ln()
                    }
                }
            })
            .collect();
        SimPath {
            states: vec![0; m],
            growth,
            jump_episodes: Vec::new(),
        }
    });
    Ok(PathEnsemble {
        paths,
        horizon: m,
        seed,
        model_id: format!("{}/{kind}", training.ticker),
    })
}
