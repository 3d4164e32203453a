//! CLI-level acceptance: command determinism (byte-identical data artifacts
//! across reruns and worker counts) plus exit-code and artifact contracts.

use std::path::{Path, PathBuf};
use std::process::Command;

use rand::Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_growthsim"))
}

/// Writes a seeded heavy-tailed price CSV and returns its path.
fn write_prices(dir: &Path, ticker: &str, n: usize, seed: u64) -> PathBuf {
    let mut rng = growthsim::rng::stream(seed, &[1]);
    let mut price = 100.0f64;
    let mut rows = String::from("date,close\n");
    let start = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    for t in 0..n {
        let u: f64 = rng.gen_range(1e-12..1.0);
        let g = if u <= 0.5 {
            (2.0 * u).ln()
        } else {
            -(2.0 * (1.0 - u)).ln()
        };
        price *= ((g * 1.4 + 0.02) / 252.0).exp();
        let date = start + chrono::Days::new(t as u64);
        rows.push_str(&format!("{date},{price}\n"));
    }
    let path = dir.join(format!("{ticker}.csv"));
    std::fs::write(&path, rows).unwrap();
    path
}

fn write_config(dir: &Path, tickers: &[&str], extra: &str) -> PathBuf {
    let list = tickers
        .iter()
        .map(|t| format!("\"{t}\""))
        .collect::<Vec<_>>()
        .join(", ");
    let text = format!(
        "tickers = [{list}]\ndata_dir = \"{}\"\nr_f = 0.02\nn_states = 24\npaths = 12\nhorizon = 150\nseed = 9\n{extra}\n[jump]\nepsilon = 0.01\nlambda = 10.0\nn_tail = 3\np_neg = 0.52\nenabled = true\n",
        dir.join("data").display()
    );
    let path = dir.join("growthsim.toml");
    std::fs::write(&path, text).unwrap();
    path
}

struct Workspace {
    root: tempfile::TempDir,
    config: PathBuf,
}

impl Workspace {
    fn new(tickers: &[&str], extra: &str) -> Self {
        let root = tempfile::tempdir().unwrap();
        let data = root.path().join("data");
        std::fs::create_dir_all(&data).unwrap();
        for (i, t) in tickers.iter().enumerate() {
            write_prices(&data, t, 400, 50 + i as u64);
        }
        let config = write_config(root.path(), tickers, extra);
        Workspace { root, config }
    }

    fn run(&self, args: &[&str], out: &str) -> std::process::Output {
        self.run_env(args, out, &[])
    }

    fn run_env(&self, args: &[&str], out: &str, env: &[(&str, &str)]) -> std::process::Output {
        let mut cmd = bin();
        cmd.arg(args[0])
            .arg("--config")
            .arg(&self.config)
            .arg("--out")
            .arg(self.root.path().join(out));
        for a in &args[1..] {
            cmd.arg(a);
        }
        for (k, v) in env {
            cmd.env(k, v);
        }
        cmd.output().unwrap()
    }

    fn artifact(&self, out: &str, name: &str) -> Vec<u8> {
        std::fs::read(self.root.path().join(out).join(name)).unwrap()
    }
}

#[test]
fn c12_rerun_and_worker_count_determinism() {
    let ws = Workspace::new(&["AAA"], "");
    for (out, env) in [
        ("run1", vec![]),
        ("run2", vec![]),
        ("run3", vec![("RAYON_NUM_THREADS", "1")]),
        ("run4", vec![("RAYON_NUM_THREADS", "8")]),
    ] {
        let status = ws.run_env(&["fit"], out, &env);
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        let status = ws.run_env(&["simulate"], out, &env);
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    }
    for name in ["AAA.model.json", "AAA.stats.json", "AAA.hmm.ensemble.csv"] {
        let base = ws.artifact("run1", name);
        for out in ["run2", "run3", "run4"] {
            assert_eq!(
                base,
                ws.artifact(out, name),
                "{name} differs between run1 and {out}"
            );
        }
    }
    println!("[PASS] C12: fit/simulate artifacts byte-identical across reruns and worker counts");
}

#[test]
fn exit_codes() {
    let ws = Workspace::new(&["AAA"], "");
    // 0: success.
    assert_eq!(ws.run(&["fit"], "ok").status.code(), Some(0));

    // 2: config error (unknown key).
    let bad = ws.root.path().join("bad.toml");
    std::fs::write(&bad, "tickers = [\"AAA\"]\nnot_a_key = 1\n").unwrap();
    let out = bin()
        .arg("fit")
        .arg("--config")
        .arg(&bad)
        .arg("--out")
        .arg(ws.root.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // 2: --ticker not in the configured list.
    let out = ws.run(&["fit", "--ticker", "ZZZ"], "x");
    assert_eq!(out.status.code(), Some(2));

    // 3: data error (single-row price file).
    let data = ws.root.path().join("data");
    std::fs::write(data.join("ONE.csv"), "date,close\n2020-01-02,100\n").unwrap();
    let cfg = write_config(ws.root.path(), &["ONE"], "");
    let out = bin()
        .arg("fit")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(ws.root.path().join("y"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn failed_command_removes_partial_artifacts() {
    let ws = Workspace::new(&["AAA", "BAD"], "");
    // Corrupt the second ticker's file so `fit` fails after writing AAA's
    // artifacts.
    std::fs::write(
        ws.root.path().join("data").join("BAD.csv"),
        "date,close\n2020-01-02,-5\n2020-01-03,3\n",
    )
    .unwrap();
    let out = ws.run(&["fit"], "partial");
    assert_eq!(out.status.code(), Some(3));
    let dir = ws.root.path().join("partial");
    let leftovers: Vec<_> = std::fs::read_dir(&dir)
        .map(|it| it.filter_map(|e| e.ok()).map(|e| e.file_name()).collect())
        .unwrap_or_default();
    assert!(
        leftovers.is_empty(),
        "partial artifacts left behind: {leftovers:?}"
    );
}

#[test]
fn validate_emits_generator_table() {
    let ws = Workspace::new(&["AAA"], "alpha = 0.05\n");
    let out = ws.run(&["validate"], "val");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(ws.artifact("val", "AAA.validation.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("generator,n_paths,ks_pass_pct"));
    let generators: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        generators,
        vec!["bootstrap", "gaussian", "laplace", "hmm_nj", "hmm_wj"]
    );
    // Bootstrap of its own training data passes KS on every path.
    let boot_line = csv.lines().nth(1).unwrap();
    let ks: f64 = boot_line.split(',').nth(2).unwrap().parse().unwrap();
    assert!(ks >= 99.0, "bootstrap KS pass rate {ks}");
    for name in ["AAA.bootstrap.path_metrics.csv", "AAA.hmm_wj.path_metrics.csv"] {
        assert!(ws.root.path().join("val").join(name).exists());
    }
}

#[test]
fn calibrate_then_report_builds_summary_and_plot_data() {
    let ws = Workspace::new(
        &["AAA"],
        "[grid]\nepsilons = [0.001, 0.01]\nlambdas = [5.0, 12.0]\npaths_per_point = 6\nmax_lag = 40\nn_tail = 3\n",
    );
    assert!(ws.run(&["fit"], "art").status.success());
    assert!(ws.run(&["simulate"], "art").status.success());
    let out = ws.run(&["calibrate"], "art");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = ws.run(&["report"], "art");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let md = String::from_utf8(ws.artifact("art", "report.md")).unwrap();
    assert!(md.contains("## AAA"));
    assert!(md.contains("Descriptive statistics"));
    assert!(md.contains("Calibration"));
    for name in ["AAA.density.csv", "AAA.acf.csv", "AAA.qq.csv", "AAA.grid.csv"] {
        assert!(ws.root.path().join("art").join(name).exists(), "{name} missing");
    }
    let acf = String::from_utf8(ws.artifact("art", "AAA.acf.csv")).unwrap();
    assert!(acf.starts_with("lag,observed,simulated_all,simulated_jump"));

    // Report on an empty artifact directory is an error.
    let out = ws.run(&["report"], "empty");
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn portfolio_couples_assets() {
    let ws = Workspace::new(&["AAA", "BBB", "CCC"], "dependence = \"student_t\"\n");
    let out = ws.run(&["portfolio"], "port");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model: serde_json::Value =
        serde_json::from_slice(&ws.artifact("port", "dependence.model.json")).unwrap();
    assert_eq!(model["kind"], "student_t");
    assert!(model["copula"]["sigma"].as_array().unwrap().len() == 3);
    let report: serde_json::Value =
        serde_json::from_slice(&ws.artifact("port", "dependence.report.json")).unwrap();
    assert!(report["report"]["pairwise_corr_mae"].as_f64().unwrap() >= 0.0);
    for t in ["AAA", "BBB", "CCC"] {
        assert!(ws
            .root
            .path()
            .join("port")
            .join(format!("{t}.portfolio.ensemble.csv"))
            .exists());
    }
}
