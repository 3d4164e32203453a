//! Bivariate copula families: densities, Kendall-τ parameter maps,
//! h-functions and their inverses, and AIC-based family selection.
//!
//! Five candidates: Gaussian and Student-t (elliptical, parameterized by ρ
//! with ρ = sin(πτ/2)), Clayton (θ = 2τ/(1−τ), lower tail dependence),
//! Gumbel (θ = 1/(1−τ), upper tail dependence), and Frank (θ from the Debye
//! relationship τ(θ) = 1 − (4/θ)(1 − D₁(θ)), no tail dependence).
//!
//! h-function inverses use closed forms for Gaussian and Clayton and
//! bracketed bisection to 1e-10 elsewhere.

use serde::{Deserialize, Serialize};

use crate::special::{debye1, norm_cdf, norm_quantile, t_cdf, t_quantile};
use crate::{Error, Result};

/// Degrees-of-freedom grid for Student-t profile likelihood.
pub const T_NU_GRID: [f64; 10] = [2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 15.0, 20.0, 30.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaFamily {
    Gaussian,
    StudentT,
    Clayton,
    Gumbel,
    Frank,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 5] = [
        CopulaFamily::Gaussian,
        CopulaFamily::StudentT,
        CopulaFamily::Clayton,
        CopulaFamily::Gumbel,
        CopulaFamily::Frank,
    ];

    /// Number of fitted parameters (AIC complexity term).
    pub fn n_params(&self) -> usize {
        match self {
            CopulaFamily::StudentT => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        f.write_str(match self {
            CopulaFamily::Gaussian => "gaussian",
            CopulaFamily::StudentT => "student_t",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Gumbel => "gumbel",
            CopulaFamily::Frank => "frank",
        })
    }
}

/// A fitted bivariate copula: family, parameter (ρ for elliptical families),
/// optional degrees of freedom, and fit quality.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BivariateCopula {
    pub family: CopulaFamily,
    pub theta: f64,
    pub nu: Option<f64>,
    pub log_lik: f64,
    pub aic: f64,
}

impl BivariateCopula {
    /// Validates the family-specific parameter domain.
    pub fn new(family: CopulaFamily, theta: f64, nu: Option<f64>) -> Result<Self> {
        match family {
            CopulaFamily::Gaussian => {
                if !(-1.0 < theta && theta < 1.0) {
                    return Err(Error::invalid("gaussian rho must be in (-1,1)"));
                }
            }
            CopulaFamily::StudentT => {
                if !(-1.0 < theta && theta < 1.0) {
                    return Err(Error::invalid("student_t rho must be in (-1,1)"));
                }
                let nu = nu.ok_or_else(|| Error::invalid("student_t requires nu"))?;
                if !(nu > 2.0) {
                    return Err(Error::invalid("student_t nu must exceed 2"));
                }
            }
            CopulaFamily::Clayton => {
                if !(theta > 0.0) {
                    return Err(Error::invalid("clayton theta must be positive"));
                }
            }
            CopulaFamily::Gumbel => {
                if !(theta >= 1.0) {
                    return Err(Error::invalid("gumbel theta must be at least 1"));
                }
            }
            CopulaFamily::Frank => {
                if theta == 0.0 || !theta.is_finite() {
                    return Err(Error::invalid("frank theta must be finite and nonzero"));
                }
            }
        }
        Ok(BivariateCopula {
            family,
            theta,
            nu: if family == CopulaFamily::StudentT {
                nu
            } else {
                None
            },
            log_lik: f64::NAN,
            aic: f64::NAN,
        })
    }
}

/// Converts Kendall's τ to the family parameter. Errors name the family
/// when τ is outside its domain; a Frank τ within 1e-6 of zero flags the
/// independence limit (θ → 0).
pub fn tau_to_param(family: CopulaFamily, tau: f64) -> Result<f64> {
    if !(-1.0 < tau && tau < 1.0) {
        return Err(Error::invalid(format!("tau {tau} outside (-1,1)")));
    }
    match family {
        CopulaFamily::Gaussian | CopulaFamily::StudentT => {
            Ok((std::f64::consts::PI * tau / 2.0).sin())
        }
        CopulaFamily::Clayton => {
            if tau <= 0.0 {
                Err(Error::invalid(format!(
                    "clayton requires tau > 0, got {tau}"
                )))
            } else {
                Ok(2.0 * tau / (1.0 - tau))
            }
        }
        CopulaFamily::Gumbel => {
            if tau < 0.0 {
                Err(Error::invalid(format!(
                    "gumbel requires tau >= 0, got {tau}"
                )))
            } else {
                Ok(1.0 / (1.0 - tau))
            }
        }
        CopulaFamily::Frank => frank_theta_from_tau(tau),
    }
}

/// Analytic forward map τ(parameter) for each family (Frank goes through the
/// Debye function numerically).
pub fn param_to_tau(family: CopulaFamily, theta: f64) -> f64 {
    match family {
        CopulaFamily::Gaussian | CopulaFamily::StudentT => {
            2.0 * theta.asin() / std::f64::consts::PI
        }
        CopulaFamily::Clayton => theta / (theta + 2.0),
        CopulaFamily::Gumbel => 1.0 - 1.0 / theta,
        CopulaFamily::Frank => frank_tau(theta),
    }
}

/// Frank forward relationship `τ(θ) = 1 − (4/θ)(1 − D₁(θ))`.
pub fn frank_tau(theta: f64) -> f64 {
    1.0 + 4.0 * (debye1(theta) - 1.0) / theta
}

/// Inverts the Frank relationship by bisection over `θ ∈ [-35, 35]`,
/// excluding `|θ| < 1e-6`.
fn frank_theta_from_tau(tau: f64) -> Result<f64> {
    if tau.abs() < 1e-6 {
        return Err(Error::numeric(
            "frank tau within 1e-6 of independence (theta -> 0)",
        ));
    }
    let (mut lo, mut hi) = if tau > 0.0 { (1e-6, 35.0) } else { (-35.0, -1e-6) };
    if tau > frank_tau(35.0) || tau < frank_tau(-35.0) {
        return Err(Error::numeric(format!(
            "frank tau {tau} outside the invertible bracket [-35, 35]"
        )));
    }
    // frank_tau is increasing in theta.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frank_tau(mid) < tau {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_interior(u: f64, v: f64) -> Result<()> {
    if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
        return Err(Error::invalid(format!(
            "copula arguments must be interior to (0,1), got ({u}, {v})"
        )));
    }
    Ok(())
}

/// Log-density `ln c(u, v; θ)` of the fitted family.
pub fn bivariate_log_density(c: &BivariateCopula, u: f64, v: f64) -> Result<f64> {
    check_interior(u, v)?;
    Ok(match c.family {
        CopulaFamily::Gaussian => {
            let rho = c.theta;
            let x = norm_quantile(u);
            let y = norm_quantile(v);
            let om = 1.0 - rho * rho;
            -0.5 * om.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * om)
        }
        CopulaFamily::StudentT => {
            let rho = c.theta;
            let nu = c.nu.expect("validated at construction");
            let x = t_quantile(u, nu);
            let y = t_quantile(v, nu);
            t_log_density_at(rho, nu, x, y)
        }
        CopulaFamily::Clayton => {
            let th = c.theta;
            let (lu, lv) = (u.ln(), v.ln());
            (1.0 + th).ln() - (th + 1.0) * (lu + lv) - (2.0 + 1.0 / th) * log_clayton_s(th, lu, lv)
        }
        CopulaFamily::Gumbel => {
            let th = c.theta;
            let (xt, yt) = (-u.ln(), -v.ln());
            let log_s = logsumexp2(th * xt.ln(), th * yt.ln());
            let a = (log_s / th).exp();
            -a + (th - 1.0) * (xt.ln() + yt.ln()) + (1.0 - 2.0 * th) * log_s / th
                + (a + th - 1.0).ln()
                - u.ln()
                - v.ln()
        }
        CopulaFamily::Frank => {
            let th = c.theta;
            let d = frank_denom(th, u, v);
            (-th * (-th).exp_m1()).ln() - th * (u + v) - 2.0 * d.abs().ln()
        }
    })
}

/// Student-t bivariate copula log-density at already-transformed
/// coordinates `x = t_ν⁻¹(u)`, `y = t_ν⁻¹(v)`.
pub(crate) fn t_log_density_at(rho: f64, nu: f64, x: f64, y: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let om = 1.0 - rho * rho;
    let t3 = -(nu + 2.0) / 2.0 * ((x * x + y * y - 2.0 * rho * x * y) / (nu * om)).ln_1p();
    let t4 = (nu + 1.0) / 2.0 * ((x * x / nu).ln_1p() + (y * y / nu).ln_1p());
    ln_gamma((nu + 2.0) / 2.0) + ln_gamma(nu / 2.0) - 2.0 * ln_gamma((nu + 1.0) / 2.0)
        - 0.5 * om.ln()
        + t3
        + t4
}

/// `ln(u^{-θ} + v^{-θ} - 1)` computed stably in log space.
fn log_clayton_s(theta: f64, ln_u: f64, ln_v: f64) -> f64 {
    let a = -theta * ln_u;
    let b = -theta * ln_v;
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
}

/// `ln(e^a + e^b)`.
fn logsumexp2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Frank shared denominator `(e^{-θ}-1) + (e^{-θu}-1)(e^{-θv}-1)`.
fn frank_denom(theta: f64, u: f64, v: f64) -> f64 {
    (-theta).exp_m1() + (-theta * u).exp_m1() * (-theta * v).exp_m1()
}

/// The h-function with its `v`-dependent terms precomputed, so bisection can
/// re-evaluate it cheaply.
enum PreparedH {
    Gaussian { rho_y: f64, denom: f64 },
    StudentT { rho_y: f64, nu: f64, scale: f64 },
    Clayton { theta: f64, ln_v: f64 },
    Gumbel { theta: f64, th_ln_yt: f64, ln_yt: f64, ln_v: f64 },
    Frank { theta: f64, exp_mv: f64, em1: f64, emv1: f64 },
}

impl PreparedH {
    fn new(c: &BivariateCopula, v: f64) -> Self {
        match c.family {
            CopulaFamily::Gaussian => PreparedH::Gaussian {
                rho_y: c.theta * norm_quantile(v),
                denom: (1.0 - c.theta * c.theta).sqrt(),
            },
            CopulaFamily::StudentT => {
                let nu = c.nu.expect("validated at construction");
                let y = t_quantile(v, nu);
                PreparedH::StudentT {
                    rho_y: c.theta * y,
                    nu,
                    scale: ((nu + y * y) * (1.0 - c.theta * c.theta) / (nu + 1.0)).sqrt(),
                }
            }
            CopulaFamily::Clayton => PreparedH::Clayton {
                theta: c.theta,
                ln_v: v.ln(),
            },
            CopulaFamily::Gumbel => {
                let yt = -v.ln();
                PreparedH::Gumbel {
                    theta: c.theta,
                    th_ln_yt: c.theta * yt.ln(),
                    ln_yt: yt.ln(),
                    ln_v: v.ln(),
                }
            }
            CopulaFamily::Frank => PreparedH::Frank {
                theta: c.theta,
                exp_mv: (-c.theta * v).exp(),
                em1: (-c.theta).exp_m1(),
                emv1: (-c.theta * v).exp_m1(),
            },
        }
    }

    fn eval(&self, u: f64) -> f64 {
        let h = match self {
            PreparedH::Gaussian { rho_y, denom } => {
                norm_cdf((norm_quantile(u) - rho_y) / denom)
            }
            PreparedH::StudentT { rho_y, nu, scale } => {
                t_cdf((t_quantile(u, *nu) - rho_y) / scale, nu + 1.0)
            }
            PreparedH::Clayton { theta, ln_v } => {
                let log_s = log_clayton_s(*theta, u.ln(), *ln_v);
                ((-theta - 1.0) * ln_v + (-1.0 / theta - 1.0) * log_s).exp()
            }
            PreparedH::Gumbel {
                theta,
                th_ln_yt,
                ln_yt,
                ln_v,
            } => {
                let xt = -u.ln();
                let log_s = logsumexp2(theta * xt.ln(), *th_ln_yt);
                let a = (log_s / theta).exp();
                (-a + (1.0 - theta) * log_s / theta + (theta - 1.0) * ln_yt - ln_v).exp()
            }
            PreparedH::Frank {
                theta,
                exp_mv,
                em1,
                emv1,
            } => {
                let num = exp_mv * (-theta * u).exp_m1();
                num / (em1 + (-theta * u).exp_m1() * emv1)
            }
        };
        h.clamp(1e-300, 1.0 - 1e-16)
    }
}

/// Conditional CDF `h(u|v) = ∂C(u,v)/∂v`, clamped into (0,1).
pub fn h_function(c: &BivariateCopula, u: f64, v: f64) -> Result<f64> {
    check_interior(u, v)?;
    Ok(PreparedH::new(c, v).eval(u))
}

/// Inverse of the h-function in its first argument: closed form for
/// Gaussian and Clayton, bracketed bisection elsewhere.
pub fn h_inverse(c: &BivariateCopula, w: f64, v: f64) -> Result<f64> {
    check_interior(w, v)?;
    match c.family {
        CopulaFamily::Gaussian => {
            let rho = c.theta;
            let x = norm_quantile(w) * (1.0 - rho * rho).sqrt() + rho * norm_quantile(v);
            Ok(norm_cdf(x).clamp(1e-300, 1.0 - 1e-16))
        }
        CopulaFamily::Clayton => {
            let th = c.theta;
            // S = (w·v^{θ+1})^{-θ/(1+θ)}, u = (S - v^{-θ} + 1)^{-1/θ}.
            let log_s = -th / (1.0 + th) * (w.ln() + (th + 1.0) * v.ln());
            let b = -th * v.ln();
            let m = log_s.max(b).max(0.0);
            let log_inner = m + ((log_s - m).exp() - (b - m).exp() + (-m).exp()).ln();
            Ok((-log_inner / th).exp().clamp(1e-300, 1.0 - 1e-16))
        }
        _ => {
            let prepared = PreparedH::new(c, v);
            let (mut lo, mut hi) = (1e-15, 1.0 - 1e-15);
            if w <= prepared.eval(lo) {
                return Ok(lo);
            }
            if w >= prepared.eval(hi) {
                return Ok(hi);
            }
            let mut iterations = 0;
            while hi - lo > 1e-14 {
                let mid = 0.5 * (lo + hi);
                if prepared.eval(mid) < w {
                    lo = mid;
                } else {
                    hi = mid;
                }
                iterations += 1;
                if iterations > 200 {
                    return Err(Error::numeric(format!(
                        "h_inverse bisection failed to converge: family {}, w {w}, v {v}, bracket [{lo}, {hi}]",
                        c.family
                    )));
                }
            }
            Ok(0.5 * (lo + hi))
        }
    }
}

/// Symmetric tail-dependence coefficient of the Student-t copula,
/// `λ = 2·t_{ν+1}(−√((ν+1)(1−ρ)/(1+ρ)))`.
pub fn t_tail_dependence(rho: f64, nu: f64) -> f64 {
    assert!((-1.0..1.0).contains(&rho) || rho == 1.0);
    if rho == 1.0 {
        return 1.0;
    }
    if nu.is_infinite() {
        return 0.0;
    }
    let arg = -((nu + 1.0) * (1.0 - rho) / (1.0 + rho)).sqrt();
    2.0 * t_cdf(arg, nu + 1.0)
}

/// Sum of log-densities over paired pseudo-observations, with inputs
/// clamped away from the boundary.
fn log_likelihood(c: &BivariateCopula, u: &[f64], v: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (&a, &b) in u.iter().zip(v) {
        let a = a.clamp(1e-10, 1.0 - 1e-10);
        let b = b.clamp(1e-10, 1.0 - 1e-10);
        let ll = bivariate_log_density(c, a, b)?;
        if !ll.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite log-density for {} at ({a}, {b})",
                c.family
            )));
        }
        total += ll;
    }
    Ok(total)
}

/// Fits all five candidate families by τ-inversion (profile likelihood over
/// the ν grid for Student-t) and returns the one with the lowest AIC.
/// Families whose τ domain excludes the data are skipped.
pub fn fit_bivariate_by_aic(u: &[f64], v: &[f64]) -> Result<BivariateCopula> {
    if u.len() != v.len() {
        return Err(Error::invalid("paired samples must have equal length"));
    }
    if u.len() < 30 {
        return Err(Error::invalid(
            "need at least 30 observations to select a copula family",
        ));
    }
    let tau = super::rank::kendall_tau(u, v)?;
    let mut best: Option<BivariateCopula> = None;
    for family in CopulaFamily::ALL {
        let candidate = fit_family(family, tau, u, v);
        match candidate {
            Ok(c) => {
                if best.as_ref().is_none_or(|b| c.aic < b.aic) {
                    best = Some(c);
                }
            }
            Err(e) => log::debug!("family {family} skipped: {e}"),
        }
    }
    best.ok_or_else(|| Error::numeric("no copula family could be fitted"))
}

fn fit_family(family: CopulaFamily, tau: f64, u: &[f64], v: &[f64]) -> Result<BivariateCopula> {
    match family {
        CopulaFamily::StudentT => {
            let rho = tau_to_param(family, tau)?;
            let xcache = TCache::build(u);
            let ycache = TCache::build(v);
            let mut best: Option<(f64, f64)> = None; // (nu, log_lik)
            for (i, &nu) in T_NU_GRID.iter().enumerate() {
                let ll = t_profile_log_lik(rho, nu, &xcache.per_nu[i], &ycache.per_nu[i]);
                if best.is_none_or(|(_, b)| ll > b) {
                    best = Some((nu, ll));
                }
            }
            let (nu, log_lik) = best.expect("grid is nonempty");
            let mut c = BivariateCopula::new(family, rho, Some(nu))?;
            c.log_lik = log_lik;
            c.aic = 2.0 * family.n_params() as f64 - 2.0 * log_lik;
            Ok(c)
        }
        _ => {
            let theta = tau_to_param(family, tau)?;
            let mut c = BivariateCopula::new(family, theta, None)?;
            c.log_lik = log_likelihood(&c, u, v)?;
            c.aic = 2.0 * family.n_params() as f64 - 2.0 * c.log_lik;
            Ok(c)
        }
    }
}

/// Per-ν cached t-quantiles of a pseudo-uniform sample.
struct TCache {
    per_nu: Vec<Vec<f64>>,
}

impl TCache {
    fn build(u: &[f64]) -> Self {
        let per_nu = T_NU_GRID
            .iter()
            .map(|&nu| {
                u.iter()
                    .map(|&x| t_quantile(x.clamp(1e-10, 1.0 - 1e-10), nu))
                    .collect()
            })
            .collect();
        TCache { per_nu }
    }
}

fn t_profile_log_lik(rho: f64, nu: f64, x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| t_log_density_at(rho, nu, a, b))
        .sum()
}
