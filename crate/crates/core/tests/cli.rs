use std::path::{Path, PathBuf};

use catbond::cli::{backtest_file, render_report, run, Cli, Outcome};
use catbond::regressors::TrainedModel;
use catbond::Error;
use clap::Parser;

fn cli(args: &[&str]) -> catbond::Result<Outcome> {
    let parsed = Cli::try_parse_from(std::iter::once("catbond").chain(args.iter().copied())).expect("arguments parse");
    run(&parsed)
}

fn s(p: &Path) -> String {
    p.to_string_lossy().to_string()
}

const QUICK: &str = "schema_version = 1\nseed = 3\nsynth_rows = 120\nsearch_draws = 2\nsearch_folds = 3\nn_draws = 200\n\
                     [search_space]\nn_trees = [10, 20]\nn_rounds = [10, 20]\n";

struct Fixture {
    _tmp: tempfile::TempDir,
    root: PathBuf,
    config: String,
}

impl Fixture {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        let config = root.join("run.toml");
        std::fs::write(&config, QUICK).unwrap();
        let f = Self { config: s(&config), root, _tmp: tmp };
        cli(&["--config", &f.config, "--out", &f.path("data"), "synth"]).unwrap();
        f
    }

    fn path(&self, rel: &str) -> String {
        s(&self.root.join(rel))
    }

    fn with_data<'a>(&'a self, out: &'a str, tail: &[&'a str]) -> Vec<String> {
        let mut args = vec![
            "--config".to_string(),
            self.config.clone(),
            "--tranches".into(),
            self.path("data/tranches.csv"),
            "--climate-dir".into(),
            self.path("data/climate"),
            "--out".into(),
            self.path(out),
        ];
        args.extend(tail.iter().map(|t| t.to_string()));
        args
    }
}

fn call(args: &[String]) -> catbond::Result<Outcome> {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    cli(&refs)
}

#[test]
fn ingest_normalizes_synthetic_files_unchanged() {
    let f = Fixture::new();
    let out = call(&f.with_data("ingest", &["ingest"])).unwrap();
    assert_eq!(out.exit_code(), 0);
    assert_eq!(
        std::fs::read_to_string(f.path("ingest/tranches.csv")).unwrap(),
        std::fs::read_to_string(f.path("data/tranches.csv")).unwrap()
    );
    assert!(out.summary.contains("tranches = 120"));
}

#[test]
fn flat_climate_series_flags_undefined_correlations() {
    let f = Fixture::new();
    let text = std::fs::read_to_string(f.path("data/climate/AO.csv")).unwrap();
    let flat: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                format!("{l}\n")
            } else {
                let mut parts: Vec<&str> = l.split(',').collect();
                parts[2] = "0.5";
                format!("{}\n", parts.join(","))
            }
        })
        .collect();
    std::fs::write(f.path("data/climate/AO.csv"), flat).unwrap();
    let out = call(&f.with_data("corr", &["correlate", "--lag-max", "6"])).unwrap();
    assert_eq!(out.exit_code(), 2);
    assert!(out.warnings[0].starts_with("AO"));
    let peaks = std::fs::read_to_string(f.path("corr/correlations/peaks.csv")).unwrap();
    assert!(peaks.contains("AO,NA,NA,0;1;2;3;4;5;6"));
    let soi = std::fs::read_to_string(f.path("corr/correlations/SOI.csv")).unwrap();
    assert_eq!(soi.lines().count(), 1 + 7);
}

#[test]
fn train_outputs_are_consistent_and_independent_of_job_count() {
    let f = Fixture::new();
    call(&f.with_data("one", &["--models", "ols,etr,xgb", "--jobs", "1", "train"])).unwrap();
    call(&f.with_data("two", &["--models", "ols,etr,xgb", "--jobs", "3", "train"])).unwrap();
    for file in ["metrics.csv", "backtests.csv", "rmse_matrix.csv", "predictive/extended_xgb.csv", "models/benchmark_etr.json"] {
        assert_eq!(
            std::fs::read(f.root.join("one").join(file)).unwrap(),
            std::fs::read(f.root.join("two").join(file)).unwrap(),
            "{file}"
        );
    }

    let matrix = std::fs::read_to_string(f.path("one/rmse_matrix.csv")).unwrap();
    assert_eq!(matrix.lines().next().unwrap(), "model,benchmark,extended");
    assert_eq!(matrix.lines().count(), 4);

    // Re-rendering the report from the CSVs reproduces report.txt.
    let dir = f.root.join("one");
    let read = |n: &str| std::fs::read_to_string(dir.join(n)).unwrap();
    assert_eq!(
        render_report(&read("metrics.csv"), &read("backtests.csv"), Some(&read("selection.txt"))).unwrap(),
        read("report.txt")
    );

    // Saved models reload with their algorithm tag.
    let model = TrainedModel::from_json(&read("models/extended_ols.json")).unwrap();
    assert_eq!(model.algorithm().as_str(), "ols");

    // Backtesting the saved predictive file reproduces the stored report.
    let report = backtest_file(&dir.join("predictive/extended_xgb.csv"), None, 0.05).unwrap();
    assert_eq!(report.to_text(), read("backtest/extended_xgb.txt"));
}

#[test]
fn backtest_rejects_mismatched_or_empty_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let pred = tmp.path().join("pred.csv");
    let mut text = String::from("row_id,date,y_true,point,p5,p50,p95\n");
    for i in 0..20 {
        text.push_str(&format!("{i},2020-01-01,{},0.05,0.04,0.05,0.06\n", if i % 10 == 0 { 0.03 } else { 0.05 }));
    }
    std::fs::write(&pred, &text).unwrap();
    let report = backtest_file(&pred, None, 0.05).unwrap();
    assert_eq!((report.n, report.x), (20, 2));

    let actuals = tmp.path().join("actuals.csv");
    std::fs::write(&actuals, "y_true\n0.01\n0.02\n").unwrap();
    let err = backtest_file(&pred, Some(&actuals), 0.05).unwrap_err().to_string();
    assert!(err.contains('2') && err.contains("20"), "{err}");

    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, "row_id,date,y_true,point,p5,p50,p95\n").unwrap();
    assert!(matches!(backtest_file(&empty, None, 0.05), Err(Error::EmptyInput)));

    let out = tmp.path().join("bt");
    let o = cli(&["--out", &s(&out), "backtest", "--predictive", &s(&pred)]).unwrap();
    assert!(o.summary.contains("x = 2"));
    assert!(std::fs::read_to_string(out.join("backtest.csv")).unwrap().starts_with("label,n,x,"));
}

#[test]
fn failed_run_leaves_no_output_directory() {
    let f = Fixture::new();
    std::fs::write(f.path("data/tranches.csv"), "issue_date,bogus\n").unwrap();
    let err = call(&f.with_data("fail", &["train"])).unwrap_err();
    assert!(err.to_string().contains("ingest"), "{err}");
    assert!(!f.root.join("fail").exists());
    let leftovers: Vec<_> = std::fs::read_dir(&f.root)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().contains("staging"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn flags_override_config_and_bad_values_are_rejected() {
    let parsed =
        Cli::try_parse_from(["catbond", "--features", "benchmark", "--selection", "none", "--split", "random", "--seed", "9", "train"])
            .unwrap();
    let cfg = parsed.resolve_config().unwrap();
    assert_eq!(cfg.features.len(), 1);
    assert_eq!(cfg.seed, 9);
    assert!(Cli::try_parse_from(["catbond", "--models", "svm", "train"]).is_err());
    assert!(Cli::try_parse_from(["catbond", "--split", "sideways", "train"]).is_err());
    assert!(cli(&["--jobs", "0", "train"]).is_err());
    assert!(cli(&["train"]).unwrap_err().to_string().contains("tranche"));
}
