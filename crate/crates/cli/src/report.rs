//! The `report` command: consolidates artifacts written by the other
//! commands into a markdown summary plus plot-ready CSVs (density
//! histograms, ACF curves with the jump-path conditioning split, Q-Q probe
//! points). Sections whose inputs are missing are skipped with a notice;
//! an entirely empty artifact directory is an error.

use growthsim::data::GrowthSeries;
use growthsim::simulate::PathEnsemble;
use growthsim::stats;
use serde_json::Value;

use crate::artifacts::ArtifactWriter;
use crate::commands::load_growth;
use crate::config::RunConfig;
use crate::CliError;

pub fn report(config: &RunConfig, out: &mut ArtifactWriter, only: Option<&str>) -> Result<(), CliError> {
    let mut md = String::from("# Synthetic growth-rate report\n");
    let mut sections = 0usize;

    for ticker in config.selected_tickers(only)? {
        md.push_str(&format!("\n## {ticker}\n"));

        // Descriptive statistics from `fit`.
        let stats_path = out.path(&format!("{ticker}.stats.json"));
        if stats_path.exists() {
            let value: Value = read_json(&stats_path)?;
            md.push_str("\n### Descriptive statistics\n\n");
            md.push_str("| metric | value |\n|---|---|\n");
            for key in ["mean_pct", "std_pct", "skewness", "excess_kurtosis"] {
                if let Some(v) = value.get(key).and_then(Value::as_f64) {
                    md.push_str(&format!("| {key} | {v:.4} |\n"));
                }
            }
            for key in ["jb", "lb_raw", "lb_abs"] {
                if let Some(t) = value.get(key) {
                    let stat = t.get("statistic").and_then(Value::as_f64).unwrap_or(f64::NAN);
                    let p = t.get("p_value").and_then(Value::as_f64).unwrap_or(f64::NAN);
                    md.push_str(&format!("| {key} | stat {stat:.3}, p {p:.2e} |\n"));
                }
            }
            sections += 1;
        } else {
            md.push_str("\n_Descriptive statistics skipped: run `fit` first._\n");
        }

        // Validation table from `validate`.
        let validation_path = out.path(&format!("{ticker}.validation.json"));
        if validation_path.exists() {
            let rows: Value = read_json(&validation_path)?;
            md.push_str("\n### Generator comparison\n\n");
            md.push_str(
                "| generator | KS pass % | AD pass % | kurtosis | ACF-MAE | coverage % |\n|---|---|---|---|---|---|\n",
            );
            for row in rows.as_array().into_iter().flatten() {
                let name = row.get("generator").and_then(Value::as_str).unwrap_or("?");
                let rep = &row["report"];
                let get = |k: &str| rep.get(k).and_then(|v| v.get("value")).and_then(Value::as_f64);
                md.push_str(&format!(
                    "| {name} | {:.1} | {:.1} | {:.2} | {:.4} | {:.1} |\n",
                    get("ks_pass_rate").unwrap_or(f64::NAN),
                    get("ad_pass_rate").unwrap_or(f64::NAN),
                    get("mean_kurtosis").unwrap_or(f64::NAN),
                    get("acf_mae").unwrap_or(f64::NAN),
                    get("coverage_pct").unwrap_or(f64::NAN),
                ));
            }
            sections += 1;
        } else {
            md.push_str("\n_Generator comparison skipped: run `validate` first._\n");
        }

        // Plot-ready data from `simulate` artifacts.
        let ensemble_path = out.path(&format!("{ticker}.hmm.ensemble.csv"));
        if ensemble_path.exists() {
            let growth = load_growth(config, &ticker)?;
            let file = std::fs::File::open(&ensemble_path)
                .map_err(|e| CliError::Data(format!("cannot open {}: {e}", ensemble_path.display())))?;
            let ensemble = PathEnsemble::read_csv(file, config.seed, &ticker)?;
            let jump_paths = read_manifest_jump_paths(out, &ticker)?;
            write_density_csv(out, &ticker, &growth, &ensemble)?;
            write_acf_csv(out, &ticker, &growth, &ensemble, &jump_paths)?;
            write_qq_csv(out, &ticker, &growth, &ensemble)?;
            md.push_str(&format!(
                "\n### Plot data\n\n- `{t}.density.csv` — observed vs simulated histograms\n- `{t}.acf.csv` — |G| autocorrelation: observed, all paths, jump paths\n- `{t}.qq.csv` — quantile probes with the [5th, 95th] envelope\n",
                t = ticker
            ));
            if let Some(n) = jump_paths.as_ref().map(Vec::len) {
                md.push_str(&format!("- jump-containing paths: {n}\n"));
            }
            sections += 1;
        } else {
            md.push_str("\n_Plot data skipped: run `simulate` first._\n");
        }

        let grid_path = out.path(&format!("{ticker}.grid.csv"));
        if grid_path.exists() {
            md.push_str(&format!(
                "\n### Calibration\n\nGrid-search surface: `{ticker}.grid.csv`"
            ));
            let best_path = out.path(&format!("{ticker}.best.json"));
            if best_path.exists() {
                let best: Value = read_json(&best_path)?;
                if let Some(b) = best.get("best") {
                    md.push_str(&format!(
                        " — optimum at epsilon {}, lambda {}",
                        b.get("epsilon").and_then(Value::as_f64).unwrap_or(f64::NAN),
                        b.get("lambda").and_then(Value::as_f64).unwrap_or(f64::NAN),
                    ));
                }
            }
            md.push('\n');
            sections += 1;
        }
    }

    // Portfolio section.
    let dep_path = out.path("dependence.report.json");
    if dep_path.exists() {
        let value: Value = read_json(&dep_path)?;
        md.push_str("\n## Portfolio dependence\n\n");
        md.push_str(&format!(
            "- model: {}\n- corr Frobenius error: {}\n- pairwise corr MAE: {}\n",
            value.get("dependence").and_then(Value::as_str).unwrap_or("?"),
            value["report"]
                .get("frobenius_error")
                .and_then(Value::as_f64)
                .unwrap_or(f64::NAN),
            value["report"]
                .get("pairwise_corr_mae")
                .and_then(Value::as_f64)
                .unwrap_or(f64::NAN),
        ));
        if let Some(map) = value["report"]["per_asset_ks_pass"].as_object() {
            md.push_str("\n| asset | KS pass % |\n|---|---|\n");
            for (k, v) in map {
                md.push_str(&format!("| {k} | {:.1} |\n", v.as_f64().unwrap_or(f64::NAN)));
            }
        }
        sections += 1;
    }

    if sections == 0 {
        return Err(CliError::Data(
            "no artifacts found; run fit/simulate/validate/calibrate/portfolio first".into(),
        ));
    }
    out.write_text("report.md", &md)?;
    Ok(())
}

fn read_json(path: &std::path::Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_manifest_jump_paths(
    out: &ArtifactWriter,
    ticker: &str,
) -> Result<Option<Vec<usize>>, CliError> {
    let path = out.path(&format!("{ticker}.hmm.manifest.json"));
    if !path.exists() {
        return Ok(None);
    }
    let value: Value = read_json(&path)?;
    Ok(value.get("jump_paths").and_then(Value::as_array).map(|a| {
        a.iter()
            .filter_map(Value::as_u64)
            .map(|v| v as usize)
            .collect()
    }))
}

fn write_density_csv(
    out: &mut ArtifactWriter,
    ticker: &str,
    growth: &GrowthSeries,
    ensemble: &PathEnsemble,
) -> Result<(), CliError> {
    let sim: Vec<f64> = ensemble
        .paths
        .iter()
        .flat_map(|p| p.growth.iter().copied())
        .collect();
    let lo = growth
        .values
        .iter()
        .chain(&sim)
        .fold(f64::INFINITY, |a, &b| a.min(b));
    let hi = growth
        .values
        .iter()
        .chain(&sim)
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let bins = 50usize;
    let width = (hi - lo) / bins as f64;
    let hist = |xs: &[f64]| -> Vec<f64> {
        let mut h = vec![0.0; bins];
        for &v in xs {
            let idx = (((v - lo) / (hi - lo)) * bins as f64) as usize;
            h[idx.min(bins - 1)] += 1.0;
        }
        // densities: mass / (n · width)
        let n = xs.len() as f64;
        h.iter_mut().for_each(|c| *c /= n * width);
        h
    };
    let obs = hist(&growth.values);
    let simulated = hist(&sim);
    out.write_with(&format!("{ticker}.density.csv"), |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["bin_center", "observed_density", "simulated_density"])?;
        for i in 0..bins {
            let center = lo + (i as f64 + 0.5) * width;
            w.write_record(&[
                format!("{center}"),
                format!("{}", obs[i]),
                format!("{}", simulated[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(())
}

fn mean_acf(paths: &[&Vec<f64>], max_lag: usize) -> Vec<f64> {
    let mut acc = vec![0.0; max_lag];
    let mut used = 0usize;
    for p in paths {
        let abs: Vec<f64> = p.iter().map(|v| v.abs()).collect();
        if let Ok(acf) = stats::autocorrelations(&abs, max_lag) {
            for (a, v) in acc.iter_mut().zip(&acf) {
                *a += v;
            }
            used += 1;
        }
    }
    if used > 0 {
        acc.iter_mut().for_each(|a| *a /= used as f64);
    }
    acc
}

fn write_acf_csv(
    out: &mut ArtifactWriter,
    ticker: &str,
    growth: &GrowthSeries,
    ensemble: &PathEnsemble,
    jump_paths: &Option<Vec<usize>>,
) -> Result<(), CliError> {
    let max_lag = 252usize
        .min(growth.len().saturating_sub(1))
        .min(ensemble.horizon.saturating_sub(1));
    if max_lag == 0 {
        return Ok(());
    }
    let abs: Vec<f64> = growth.values.iter().map(|v| v.abs()).collect();
    let obs = stats::autocorrelations(&abs, max_lag)?;
    let all: Vec<&Vec<f64>> = ensemble.paths.iter().map(|p| &p.growth).collect();
    let sim_all = mean_acf(&all, max_lag);
    let sim_jump = jump_paths.as_ref().map(|idx| {
        let subset: Vec<&Vec<f64>> = idx
            .iter()
            .filter_map(|&i| ensemble.paths.get(i).map(|p| &p.growth))
            .collect();
        mean_acf(&subset, max_lag)
    });
    out.write_with(&format!("{ticker}.acf.csv"), |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["lag", "observed", "simulated_all", "simulated_jump"])?;
        for lag in 0..max_lag {
            let jump_cell = sim_jump
                .as_ref()
                .filter(|_| jump_paths.as_ref().is_some_and(|j| !j.is_empty()))
                .map(|v| format!("{}", v[lag]))
                .unwrap_or_default();
            w.write_record(&[
                (lag + 1).to_string(),
                format!("{}", obs[lag]),
                format!("{}", sim_all[lag]),
                jump_cell,
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(())
}

fn write_qq_csv(
    out: &mut ArtifactWriter,
    ticker: &str,
    growth: &GrowthSeries,
    ensemble: &PathEnsemble,
) -> Result<(), CliError> {
    let (_, envelope) = growthsim::validate::quantile_coverage(&growth.values, ensemble)?;
    // Mean simulated quantile per probe.
    let per_path: Vec<Vec<f64>> = ensemble
        .paths
        .iter()
        .map(|p| {
            let mut sorted = p.growth.clone();
            sorted.sort_unstable_by(f64::total_cmp);
            envelope
                .probes
                .iter()
                .map(|&q| stats::quantile_sorted(&sorted, q / 100.0))
                .collect()
        })
        .collect();
    out.write_with(&format!("{ticker}.qq.csv"), |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["percentile", "observed", "simulated_mean", "lower_5", "upper_95"])?;
        for (i, &probe) in envelope.probes.iter().enumerate() {
            let mean_q =
                per_path.iter().map(|q| q[i]).sum::<f64>() / per_path.len() as f64;
            w.write_record(&[
                format!("{probe}"),
                format!("{}", envelope.observed[i]),
                format!("{mean_q}"),
                format!("{}", envelope.lower[i]),
                format!("{}", envelope.upper[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(())
}
