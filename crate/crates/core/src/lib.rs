//! Synthetic equity growth-rate generation and validation.
//!
//! The pipeline, end to end:
//!
//! 1. [`data`] — ingest price CSVs, compute annualized excess growth rates
//!    `G_t = (1/Δt)·ln(P_t/P_{t-1}) − r_f`, and report descriptive statistics
//!    (Jarque-Bera, Ljung-Box).
//! 2. [`hmm`] — build an empirical hidden Markov model: Laplace MLE fit,
//!    equal-probability quantile partition into N states, frequentist
//!    transition counting, per-state Student-t emission parameters, and the
//!    stationary distribution.
//! 3. [`simulate`] — generate seeded path ensembles from the model, with an
//!    optional Poisson jump-duration mechanism that forces the chain into
//!    tail states for `K ~ Poisson(λ)` consecutive steps, plus three i.i.d.
//!    baseline generators (bootstrap / Gaussian / Laplace).
//! 4. [`calibrate`] — grid search over the jump hyperparameters `(ε, λ)`
//!    against a composite objective: squared ACF error of `|G_t|` over lags
//!    1..252 plus a weighted kurtosis penalty.
//! 5. [`validate`] — two-sample KS and Anderson-Darling pass rates,
//!    Wasserstein-1, Hellinger, ACF mean absolute error, and quantile
//!    coverage, with the standard-error conventions used in reporting.
//! 6. [`dependence`] — multi-asset coupling: a Single-Index factor model and
//!    Gaussian / Student-t / C-vine copulas applied to independently
//!    simulated marginals via rank reordering.
//!
//! Every random quantity flows from an explicit 64-bit seed through
//! per-work-item ChaCha streams ([`rng`]), so results are reproducible and
//! independent of worker count. Data-parallel loops use rayon when the
//! default `parallel` feature is enabled and fall back to sequential
//! iteration otherwise; both paths produce identical output.

pub mod calibrate;
pub mod data;
pub mod dependence;
mod error;
pub mod hmm;
pub(crate) mod parallel;
pub mod rng;
pub mod simulate;
pub mod special;
pub mod stats;
pub mod validate;

pub use error::{Error, Result};
