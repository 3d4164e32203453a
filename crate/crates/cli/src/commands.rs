//! The fit / calibrate / simulate / validate / portfolio pipelines.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use growthsim::data::{
    compute_growth_rates, descriptive_stats, load_price_series, GrowthSeries, PriceSeries,
};
use growthsim::dependence::{
    correlation_metrics, couple_ensembles, fit_cvine, fit_gaussian_copula, fit_sim, fit_t_copula,
    pit_transform, simulate_sim, DependenceModel, DependenceReport,
};
use growthsim::hmm::{fit_model, HmmModel};
use growthsim::simulate::{
    baseline_generate, simulate_ensemble, BaselineKind, JumpConfig, PathEnsemble,
};
use growthsim::validate::{evaluate_ensemble, write_path_metrics_csv, MetricReport};
use serde::Serialize;

use crate::artifacts::ArtifactWriter;
use crate::config::{DependenceKind, RunConfig};
use crate::CliError;

/// Loads prices and computes the excess growth series for one ticker.
pub(crate) fn load_growth(config: &RunConfig, ticker: &str) -> Result<GrowthSeries, CliError> {
    let path = config.data_path(ticker);
    let prices = load_price_series(&path, ticker)?;
    Ok(compute_growth_rates(&prices, config.r_f, config.delta_t)?)
}

/// Uses a previously fitted model JSON when present, fitting fresh from the
/// data otherwise.
fn load_or_fit_model(
    config: &RunConfig,
    out: &ArtifactWriter,
    ticker: &str,
) -> Result<HmmModel, CliError> {
    let model_path = out.path(&format!("{ticker}.model.json"));
    if model_path.exists() {
        let text = std::fs::read_to_string(&model_path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", model_path.display())))?;
        log::info!("loading fitted model from {}", model_path.display());
        return Ok(HmmModel::from_json(&text)?);
    }
    let growth = load_growth(config, ticker)?;
    Ok(fit_model(&growth, config.n_states, config.nu)?)
}

fn effective_horizon(config: &RunConfig, training_len: usize) -> usize {
    if config.horizon == 0 {
        training_len
    } else {
        config.horizon
    }
}

/// `fit`: model JSON plus descriptive statistics per ticker.
pub fn fit(config: &RunConfig, out: &mut ArtifactWriter, only: Option<&str>) -> Result<(), CliError> {
    for ticker in config.selected_tickers(only)? {
        let growth = load_growth(config, &ticker)?;
        let stats = descriptive_stats(&growth)?;
        let model = fit_model(&growth, config.n_states, config.nu)?;
        out.write_text(&format!("{ticker}.model.json"), &(model.to_json()? + "\n"))?;
        out.write_json(&format!("{ticker}.stats.json"), &stats)?;
    }
    Ok(())
}

/// `calibrate`: grid-search surface CSV and best-point JSON per ticker.
pub fn calibrate(
    config: &RunConfig,
    out: &mut ArtifactWriter,
    only: Option<&str>,
) -> Result<(), CliError> {
    for ticker in config.selected_tickers(only)? {
        let growth = load_growth(config, &ticker)?;
        let model = load_or_fit_model(config, out, &ticker)?;
        let mut spec = config.grid.clone();
        if spec.horizon == 0 {
            spec.horizon = growth.len();
        }
        let result = growthsim::calibrate::grid_search(&model, &growth, &spec, config.seed)?;
        out.write_with(&format!("{ticker}.grid.csv"), |buf| {
            result.write_surface_csv(buf)
        })?;
        #[derive(Serialize)]
        struct BestPointDoc<'a> {
            ticker: &'a str,
            seed: u64,
            best: &'a growthsim::calibrate::BestPoint,
            boundary_flags: &'a growthsim::calibrate::BoundaryFlags,
        }
        out.write_json(
            &format!("{ticker}.best.json"),
            &BestPointDoc {
                ticker: &ticker,
                seed: config.seed,
                best: &result.best,
                boundary_flags: &result.boundary_flags,
            },
        )?;
    }
    Ok(())
}

/// Timestamped wrapper around the core manifest; the timestamp lives only
/// here, never in data artifacts.
#[derive(Serialize)]
struct ManifestDoc {
    generated_at: String,
    #[serde(flatten)]
    manifest: growthsim::simulate::EnsembleManifest,
}

fn write_ensemble(
    out: &mut ArtifactWriter,
    ticker: &str,
    label: &str,
    ensemble: &PathEnsemble,
    generator: &str,
    jump: Option<&JumpConfig>,
) -> Result<(), CliError> {
    out.write_with(&format!("{ticker}.{label}.ensemble.csv"), |buf| {
        ensemble.write_csv(buf)
    })?;
    out.write_json(
        &format!("{ticker}.{label}.manifest.json"),
        &ManifestDoc {
            generated_at: chrono::Utc::now().to_rfc3339(),
            manifest: ensemble.manifest(generator, jump),
        },
    )?;
    Ok(())
}

/// `simulate`: ensemble CSV and manifest per ticker from the jump-configured
/// model.
pub fn simulate(
    config: &RunConfig,
    out: &mut ArtifactWriter,
    only: Option<&str>,
) -> Result<(), CliError> {
    for ticker in config.selected_tickers(only)? {
        let growth = load_growth(config, &ticker)?;
        let model = load_or_fit_model(config, out, &ticker)?;
        let horizon = effective_horizon(config, growth.len());
        let ensemble = simulate_ensemble(&model, &config.jump, config.paths, horizon, config.seed)?;
        let generator = if config.jump.enabled { "hmm_wj" } else { "hmm_nj" };
        write_ensemble(out, &ticker, "hmm", &ensemble, generator, Some(&config.jump))?;
    }
    Ok(())
}

/// One validation row: a generator evaluated against the observed series.
#[derive(Serialize)]
pub struct ValidationRow {
    pub generator: String,
    pub report: MetricReport,
}

/// `validate`: evaluates the comparison generators (bootstrap, Gaussian,
/// Laplace, no-jump model, jump model) on the training window and writes the
/// metric table plus per-path metric CSVs.
pub fn validate(
    config: &RunConfig,
    out: &mut ArtifactWriter,
    only: Option<&str>,
) -> Result<(), CliError> {
    for ticker in config.selected_tickers(only)? {
        let growth = load_growth(config, &ticker)?;
        let model = load_or_fit_model(config, out, &ticker)?;
        let horizon = effective_horizon(config, growth.len());
        let mut rows: Vec<ValidationRow> = Vec::new();

        let baselines = [
            ("bootstrap", BaselineKind::Bootstrap),
            ("gaussian", BaselineKind::Gaussian),
            ("laplace", BaselineKind::Laplace),
        ];
        for (label, kind) in baselines {
            let ens = baseline_generate(kind, &growth, config.paths, horizon, config.seed)?;
            let (report, paths) = evaluate_ensemble(&growth, &ens, config.alpha, 500)?;
            out.write_with(&format!("{ticker}.{label}.path_metrics.csv"), |buf| {
                write_path_metrics_csv(&paths, buf)
            })?;
            rows.push(ValidationRow {
                generator: label.to_string(),
                report,
            });
        }

        let nj = JumpConfig {
            enabled: false,
            ..config.jump
        };
        for (label, jump) in [("hmm_nj", nj), ("hmm_wj", config.jump)] {
            let ens = simulate_ensemble(&model, &jump, config.paths, horizon, config.seed)?;
            let (report, paths) = evaluate_ensemble(&growth, &ens, config.alpha, 500)?;
            out.write_with(&format!("{ticker}.{label}.path_metrics.csv"), |buf| {
                write_path_metrics_csv(&paths, buf)
            })?;
            rows.push(ValidationRow {
                generator: label.to_string(),
                report,
            });
        }

        out.write_json(&format!("{ticker}.validation.json"), &rows)?;
        out.write_with(&format!("{ticker}.validation.csv"), |buf| {
            write_validation_csv(&rows, buf)
        })?;
    }
    Ok(())
}

fn write_validation_csv(rows: &[ValidationRow], out: &mut Vec<u8>) -> Result<(), growthsim::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "generator",
        "n_paths",
        "ks_pass_pct",
        "ks_pass_se",
        "ad_pass_pct",
        "ad_pass_se",
        "kurtosis",
        "kurtosis_se",
        "w1",
        "w1_se",
        "hellinger",
        "hellinger_se",
        "acf_mae",
        "acf_mae_se",
        "coverage_pct",
        "coverage_se",
    ])?;
    let fmt = |v: f64| format!("{v}");
    let fmt_se = |se: Option<f64>| se.map(|v| format!("{v}")).unwrap_or_default();
    for row in rows {
        let r = &row.report;
        w.write_record(&[
            row.generator.clone(),
            r.n_paths.to_string(),
            fmt(r.ks_pass_rate.value),
            fmt_se(r.ks_pass_rate.se),
            fmt(r.ad_pass_rate.value),
            fmt_se(r.ad_pass_rate.se),
            fmt(r.mean_kurtosis.value),
            fmt_se(r.mean_kurtosis.se),
            fmt(r.mean_w1.value),
            fmt_se(r.mean_w1.se),
            fmt(r.mean_hellinger.value),
            fmt_se(r.mean_hellinger.se),
            fmt(r.acf_mae.value),
            fmt_se(r.acf_mae.se),
            fmt(r.coverage_pct.value),
            fmt_se(r.coverage_pct.se),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Multi-asset ingestion: intersects calendar dates across tickers so the
/// growth columns align.
fn load_aligned(config: &RunConfig, tickers: &[String]) -> Result<Vec<GrowthSeries>, CliError> {
    let series: Vec<PriceSeries> = tickers
        .iter()
        .map(|t| load_price_series(&config.data_path(t), t).map_err(CliError::from))
        .collect::<Result<_, _>>()?;
    let mut common: Vec<NaiveDate> = series[0].dates.clone();
    for s in &series[1..] {
        let set: std::collections::BTreeSet<NaiveDate> = s.dates.iter().copied().collect();
        common.retain(|d| set.contains(d));
    }
    if common.len() < 3 {
        return Err(CliError::Data(format!(
            "only {} common dates across tickers",
            common.len()
        )));
    }
    series
        .iter()
        .map(|s| {
            let lookup: BTreeMap<NaiveDate, f64> =
                s.dates.iter().copied().zip(s.close.iter().copied()).collect();
            let close: Vec<f64> = common.iter().map(|d| lookup[d]).collect();
            let aligned = PriceSeries::new(s.ticker.clone(), common.clone(), close)?;
            Ok(compute_growth_rates(&aligned, config.r_f, config.delta_t)?)
        })
        .collect()
}

#[derive(Serialize)]
struct PortfolioSummary<'a> {
    dependence: &'a str,
    tickers: &'a [String],
    report: &'a DependenceReport,
}

/// `portfolio`: fits the configured dependence model over the aligned
/// multi-asset growth matrix, generates coupled ensembles, and writes the
/// dependence model, per-asset ensembles, and the correlation report.
pub fn portfolio(
    config: &RunConfig,
    out: &mut ArtifactWriter,
    only: Option<&str>,
) -> Result<(), CliError> {
    if only.is_some() {
        return Err(CliError::Config(
            "--ticker cannot subset the portfolio command".into(),
        ));
    }
    if config.tickers.len() < 2 {
        return Err(CliError::Config(
            "portfolio needs at least 2 tickers".into(),
        ));
    }
    let tickers = config.tickers.clone();
    let growth = load_aligned(config, &tickers)?;
    let horizon = effective_horizon(config, growth[0].len());

    // Independent per-asset marginal ensembles, seeded per asset index.
    let marginals: Vec<PathEnsemble> = growth
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let model = fit_model(g, config.n_states, config.nu)?;
            simulate_ensemble(
                &model,
                &config.jump,
                config.paths,
                horizon,
                config.seed.wrapping_add(i as u64),
            )
        })
        .collect::<Result<_, growthsim::Error>>()?;

    let columns: Vec<Vec<f64>> = growth.iter().map(|g| g.values.clone()).collect();
    let (model, coupled): (Option<DependenceModel>, Vec<PathEnsemble>) = match config.dependence {
        DependenceKind::None => (None, marginals.clone()),
        DependenceKind::Sim => {
            let market = &growth[0];
            let mut fits = Vec::new();
            let mut coupled = vec![marginals[0].clone()];
            for (i, asset) in growth.iter().enumerate().skip(1) {
                let fit = fit_sim(asset, market)?;
                coupled.push(simulate_sim(
                    &fit,
                    &marginals[0],
                    config.seed.wrapping_add(1000 + i as u64),
                )?);
                fits.push(fit);
            }
            (
                Some(DependenceModel::SingleIndex {
                    market: tickers[0].clone(),
                    tickers: tickers[1..].to_vec(),
                    fits,
                }),
                coupled,
            )
        }
        other => {
            let u = pit_transform(&columns)?;
            let model = match other {
                DependenceKind::Gaussian => DependenceModel::Gaussian {
                    copula: fit_gaussian_copula(&u)?,
                },
                DependenceKind::StudentT => DependenceModel::StudentT {
                    copula: fit_t_copula(&u)?,
                },
                DependenceKind::Vine => DependenceModel::Vine {
                    vine: fit_cvine(&u)?,
                },
                _ => unreachable!(),
            };
            let coupled = couple_ensembles(&marginals, &model, config.seed)?;
            (Some(model), coupled)
        }
    };

    if let Some(model) = &model {
        out.write_json("dependence.model.json", model)?;
    }
    for (ticker, ens) in tickers.iter().zip(&coupled) {
        write_ensemble(
            out,
            ticker,
            "portfolio",
            ens,
            &format!("portfolio/{:?}", config.dependence).to_lowercase(),
            Some(&config.jump),
        )?;
    }
    let report = correlation_metrics(&tickers, &columns, &coupled)?;
    out.write_json(
        "dependence.report.json",
        &PortfolioSummary {
            dependence: match config.dependence {
                DependenceKind::Sim => "sim",
                DependenceKind::Gaussian => "gaussian",
                DependenceKind::StudentT => "student_t",
                DependenceKind::Vine => "vine",
                DependenceKind::None => "none",
            },
            tickers: &tickers,
            report: &report,
        },
    )?;
    Ok(())
}
