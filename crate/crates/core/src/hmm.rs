//! Empirical hidden Markov model construction.
//!
//! States are equal-probability quantile bins of a Laplace fit to the growth
//! series: interior boundaries sit at the k/N quantiles and the outer bounds
//! at the 0.001/0.999 quantiles, with out-of-range observations clamped into
//! the extreme states. Transitions come from direct frequentist counting of
//! consecutive state pairs, emissions are per-state location-scale
//! Student-t parameters, and the stationary distribution is obtained by
//! propagating a uniform vector through fifty transition steps.

use serde::{Deserialize, Serialize};

use crate::data::GrowthSeries;
use crate::stats;
use crate::{Error, Result};

/// Discrete market regime, 0-based. State 0 is the lowest-quantile bin.
pub type State = usize;

/// Degrees of freedom for Student-t emissions. Infinite selects Gaussian
/// emissions; serialized as the string `"inf"` in that case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dof(f64);

impl Dof {
    /// Requires `nu > 2` so emission variances exist.
    pub fn new(nu: f64) -> Result<Self> {
        if nu.is_nan() || nu <= 2.0 {
            return Err(Error::invalid(format!(
                "degrees of freedom must exceed 2, got {nu}"
            )));
        }
        Ok(Dof(nu))
    }

    pub fn gaussian() -> Self {
        Dof(f64::INFINITY)
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn is_gaussian(&self) -> bool {
        self.0.is_infinite()
    }
}

impl Default for Dof {
    fn default() -> Self {
        Dof(5.0)
    }
}

impl Serialize for Dof {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Dof {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Dof;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number > 2 or the string \"inf\"")
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> std::result::Result<Dof, E> {
                Dof::new(v).map_err(E::custom)
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<Dof, E> {
                Dof::new(v as f64).map_err(E::custom)
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<Dof, E> {
                Dof::new(v as f64).map_err(E::custom)
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<Dof, E> {
                match v {
                    "inf" | "Inf" | "infinity" | "Infinity" => Ok(Dof::gaussian()),
                    other => other
                        .parse::<f64>()
                        .map_err(E::custom)
                        .and_then(|x| Dof::new(x).map_err(E::custom)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Maximum-likelihood Laplace fit: location and scale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct LaplaceFit {
    pub mu: f64,
    pub b: f64,
}

impl LaplaceFit {
    /// Closed-form Laplace quantile function.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::invalid(format!("quantile level {q} not in (0,1)")));
        }
        Ok(if q <= 0.5 {
            self.mu + self.b * (2.0 * q).ln()
        } else {
            self.mu - self.b * (2.0 * (1.0 - q)).ln()
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.b;
        if z <= 0.0 {
            0.5 * z.exp()
        } else {
            1.0 - 0.5 * (-z).exp()
        }
    }
}

/// Laplace MLE: location is the sample median, scale the mean absolute
/// deviation from it.
pub fn fit_laplace_mle(g: &GrowthSeries) -> Result<LaplaceFit> {
    if g.len() < 2 {
        return Err(Error::invalid("need at least 2 observations"));
    }
    let mu = stats::median(&g.values);
    let b = g.values.iter().map(|v| (v - mu).abs()).sum::<f64>() / g.len() as f64;
    if !(b > 0.0) {
        return Err(Error::numeric(
            "all observations identical; Laplace scale is zero",
        ));
    }
    Ok(LaplaceFit { mu, b })
}

/// Convenience wrapper matching the operation-style API.
pub fn laplace_quantile(fit: &LaplaceFit, q: f64) -> Result<f64> {
    fit.quantile(q)
}

/// Equal-probability state boundaries under the Laplace fit.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuantilePartition {
    pub n_states: usize,
    /// `n_states + 1` strictly increasing boundaries.
    pub boundaries: Vec<f64>,
}

/// Builds the partition: interior boundaries at the k/N quantiles, outer
/// bounds at the 0.001/0.999 quantiles. For N ≥ 1000 the outer levels are
/// tightened to 0.5/N so boundaries stay strictly increasing.
pub fn build_partition(fit: &LaplaceFit, n_states: usize) -> Result<QuantilePartition> {
    if n_states < 2 {
        return Err(Error::invalid("need at least 2 states"));
    }
    let n = n_states as f64;
    let outer = (0.001f64).min(0.5 / n);
    let mut boundaries = Vec::with_capacity(n_states + 1);
    boundaries.push(fit.quantile(outer)?);
    for k in 1..n_states {
        boundaries.push(fit.quantile(k as f64 / n)?);
    }
    boundaries.push(fit.quantile(1.0 - outer)?);
    debug_assert!(boundaries.windows(2).all(|w| w[0] < w[1]));
    Ok(QuantilePartition {
        n_states,
        boundaries,
    })
}

/// Assigns each growth rate to a state: state `s` covers
/// `boundaries[s] < G ≤ boundaries[s+1]`, with out-of-range values clamped
/// into the extreme states.
pub fn encode_states(g: &GrowthSeries, p: &QuantilePartition) -> Vec<State> {
    g.values
        .iter()
        .map(|&v| {
            let upper = &p.boundaries[1..];
            let idx = upper.partition_point(|&q| q < v);
            idx.min(p.n_states - 1)
        })
        .collect()
}

/// Row-stochastic transition matrix with its raw count matrix.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TransitionMatrix {
    pub n_states: usize,
    /// Transition counts `C[i][j]`.
    pub counts: Vec<Vec<u64>>,
    /// Row-normalized probabilities.
    pub rows: Vec<Vec<f64>>,
    /// States whose rows had zero counts and were replaced by the uniform
    /// distribution.
    pub uniform_rows: Vec<State>,
}

/// Counts consecutive state pairs and row-normalizes. Unvisited rows become
/// uniform and are recorded in `uniform_rows`.
pub fn estimate_transitions(states: &[State], n_states: usize) -> Result<TransitionMatrix> {
    if states.len() < 2 {
        return Err(Error::invalid("need at least 2 states in sequence"));
    }
    if let Some(&s) = states.iter().find(|&&s| s >= n_states) {
        return Err(Error::invalid(format!("state {s} out of range 0..{n_states}")));
    }
    let mut counts = vec![vec![0u64; n_states]; n_states];
    for w in states.windows(2) {
        counts[w[0]][w[1]] += 1;
    }
    let mut rows = vec![vec![0.0; n_states]; n_states];
    let mut uniform_rows = Vec::new();
    for (i, row) in counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        if total == 0 {
            log::warn!("state {i} never left in training data; using uniform row");
            uniform_rows.push(i);
            rows[i].fill(1.0 / n_states as f64);
        } else {
            for (j, &c) in row.iter().enumerate() {
                rows[i][j] = c as f64 / total as f64;
            }
        }
    }
    Ok(TransitionMatrix {
        n_states,
        counts,
        rows,
        uniform_rows,
    })
}

/// Per-state emission parameters for the location-scale Student-t model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmissionTable {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub nu: Dof,
    /// Number of training observations per state.
    pub support_count: Vec<u64>,
    /// States with fewer than 2 observations, where the fallback
    /// (bin midpoint, pooled sigma) was applied.
    pub fallback_states: Vec<State>,
}

/// Per-state sample mean and standard deviation. States with fewer than two
/// observations fall back to the midpoint of their quantile bin and the
/// pooled standard deviation across supported states.
pub fn estimate_emissions(
    g: &GrowthSeries,
    states: &[State],
    partition: &QuantilePartition,
    nu: Dof,
) -> Result<EmissionTable> {
    if g.len() != states.len() {
        return Err(Error::invalid("states not aligned with growth series"));
    }
    let n_states = partition.n_states;
    let mut grouped: Vec<Vec<f64>> = vec![Vec::new(); n_states];
    for (&s, &v) in states.iter().zip(&g.values) {
        grouped[s].push(v);
    }

    // Pooled variance over states with at least 2 observations, weighted by
    // degrees of freedom; whole-series std if no state qualifies.
    let mut pooled_num = 0.0;
    let mut pooled_den = 0.0;
    for obs in &grouped {
        if obs.len() >= 2 {
            pooled_num += (obs.len() as f64 - 1.0) * stats::variance(obs);
            pooled_den += obs.len() as f64 - 1.0;
        }
    }
    let pooled_sigma = if pooled_den > 0.0 {
        (pooled_num / pooled_den).sqrt()
    } else {
        stats::std_dev(&g.values)
    };

    let mut mu = Vec::with_capacity(n_states);
    let mut sigma = Vec::with_capacity(n_states);
    let mut support_count = Vec::with_capacity(n_states);
    let mut fallback_states = Vec::new();
    for (k, obs) in grouped.iter().enumerate() {
        support_count.push(obs.len() as u64);
        if obs.len() >= 2 {
            mu.push(stats::mean(obs));
            sigma.push(stats::std_dev(obs));
        } else {
            log::warn!("state {k} has {} observation(s); using fallback emission", obs.len());
            fallback_states.push(k);
            mu.push(0.5 * (partition.boundaries[k] + partition.boundaries[k + 1]));
            sigma.push(pooled_sigma);
        }
    }
    Ok(EmissionTable {
        mu,
        sigma,
        nu,
        support_count,
        fallback_states,
    })
}

/// Propagates the uniform vector through 50 transition steps and
/// renormalizes. Returns the distribution and the residual `‖πT − π‖∞`.
pub fn stationary_distribution(t: &TransitionMatrix) -> Result<(Vec<f64>, f64)> {
    let n = t.n_states;
    for (i, row) in t.rows.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::invalid(format!("row {i} is not a probability row")));
        }
    }
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..50 {
        vec_mat(&pi, &t.rows, &mut next);
        std::mem::swap(&mut pi, &mut next);
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    vec_mat(&pi, &t.rows, &mut next);
    let residual = pi
        .iter()
        .zip(&next)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((pi, residual))
}

fn vec_mat(v: &[f64], rows: &[Vec<f64>], out: &mut [f64]) {
    out.fill(0.0);
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        for (j, &tij) in rows[i].iter().enumerate() {
            out[j] += vi * tij;
        }
    }
}

/// Fitted model: Laplace fit, quantile partition, transition matrix,
/// emission table, and stationary distribution. Immutable after
/// construction.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HmmModel {
    pub ticker: String,
    pub laplace: LaplaceFit,
    pub partition: QuantilePartition,
    pub transitions: TransitionMatrix,
    pub emissions: EmissionTable,
    pub stationary: Vec<f64>,
    pub stationary_residual: f64,
}

impl HmmModel {
    pub fn n_states(&self) -> usize {
        self.partition.n_states
    }

    /// Serializes to a versioned JSON document.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDocument {
            schema_version: SCHEMA_VERSION,
            model: self.clone(),
        })?)
    }

    /// Parses a versioned JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model schema version {}",
                doc.schema_version
            )));
        }
        Ok(doc.model)
    }
}

const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    schema_version: u32,
    #[serde(flatten)]
    model: HmmModel,
}

/// Runs the full construction pipeline on a growth series.
pub fn fit_model(g: &GrowthSeries, n_states: usize, nu: Dof) -> Result<HmmModel> {
    if g.len() < n_states {
        return Err(Error::invalid(format!(
            "series length {} below state count {n_states}",
            g.len()
        )));
    }
    let laplace = fit_laplace_mle(g)?;
    let partition = build_partition(&laplace, n_states)?;
    let states = encode_states(g, &partition);
    let transitions = estimate_transitions(&states, n_states)?;
    let emissions = estimate_emissions(g, &states, &partition, nu)?;
    let (stationary, stationary_residual) = stationary_distribution(&transitions)?;
    Ok(HmmModel {
        ticker: g.ticker.clone(),
        laplace,
        partition,
        transitions,
        emissions,
        stationary,
        stationary_residual,
    })
}
