//! Batch commands: `ingest`, `synth`, `correlate`, `train`, `backtest` and
//! `report`. Each command writes plain CSV/text outputs through a staging
//! directory, so a failed run leaves no partial files behind.

mod config;
mod output;
mod pipeline;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{RunConfig, SelectionMode, SplitKind, SCHEMA_VERSION};
pub use output::{render_table, Staging};
pub use pipeline::{
    predictive_seed, prepare_spec, search_seed, split_seed, train_evaluate, JobResult, PipelineOptions, PipelineResult,
    PreparedSpec,
};

use crate::backtest::{exceedances, BacktestReport, BaselZone, CSV_HEADER};
use crate::dataset::{generate_synthetic, ClimateParseOptions, Dataset};
use crate::error::{Error, Result};
use crate::features::{lagged_correlations, FeatureSpec};
use crate::forecast::{parse_predictive_csv, predictive_csv};
use crate::regressors::Algorithm;

#[derive(Debug, Parser)]
#[command(name = "catbond", version, about = "Catastrophe-bond coupon forecasting and VaR backtesting")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Feature specs to evaluate: benchmark, extended, or both comma-separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub features: Option<Vec<FeatureSpec>>,
    /// Comma-separated models: ols,rf,brr,gbr,etr,ard,lgbm,xgb.
    #[arg(long, global = true, value_delimiter = ',')]
    pub models: Option<Vec<Algorithm>>,
    /// elasticnet or none.
    #[arg(long, global = true)]
    pub selection: Option<SelectionMode>,
    /// chrono or random.
    #[arg(long, global = true)]
    pub split: Option<SplitKind>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for concurrent model jobs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Tranche CSV (overrides the config).
    #[arg(long, global = true)]
    pub tranches: Option<PathBuf>,
    /// Directory of climate series CSVs (overrides the config).
    #[arg(long, global = true)]
    pub climate_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate tranche and climate inputs and write normalized copies.
    Ingest,
    /// Generate a synthetic dataset with planted climate effects.
    Synth {
        /// Number of tranches.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Lagged correlation of coupons with every climate series.
    Correlate {
        #[arg(long)]
        lag_min: Option<u32>,
        #[arg(long)]
        lag_max: Option<u32>,
    },
    /// Tune, fit and evaluate every model under every feature spec.
    Train {
        /// Random-search draws per model.
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Backtest the 5th-percentile forecasts of a predictive CSV.
    Backtest {
        #[arg(long)]
        predictive: PathBuf,
        /// Optional CSV with a `y_true` column replacing the predictive file's actuals.
        #[arg(long)]
        actuals: Option<PathBuf>,
        #[arg(long)]
        coverage: Option<f64>,
    },
    /// Render a text report from the outputs of `train`.
    Report {
        /// Directory holding `metrics.csv` and `backtests.csv` (defaults to --out).
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

/// Files written by a command and any non-fatal findings.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub files: Vec<String>,
    pub warnings: Vec<String>,
    pub summary: String,
}

impl Outcome {
    /// 0 when clean, 2 when the command completed with flagged findings.
    pub fn exit_code(&self) -> i32 {
        if self.warnings.is_empty() {
            0
        } else {
            2
        }
    }
}

impl Cli {
    /// Config file (or defaults) with command-line overrides applied.
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.features {
            cfg.features = v.clone();
        }
        if let Some(v) = &self.models {
            cfg.models = v.clone();
        }
        if let Some(v) = self.selection {
            cfg.selection = v;
        }
        if let Some(v) = self.split {
            cfg.split = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = &self.tranches {
            cfg.tranches = Some(v.clone());
        }
        if let Some(v) = &self.climate_dir {
            cfg.climate_dir = Some(v.clone());
        }
        match &self.command {
            Command::Synth { n: Some(n) } => cfg.synth_rows = *n,
            Command::Correlate { lag_min, lag_max } => {
                cfg.lag_min = lag_min.unwrap_or(cfg.lag_min);
                cfg.lag_max = lag_max.unwrap_or(cfg.lag_max);
            }
            Command::Train { draws: Some(d) } => cfg.search_draws = *d,
            Command::Backtest { coverage: Some(c), .. } => cfg.coverage = *c,
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = cli.resolve_config()?;
    match &cli.command {
        Command::Ingest => cmd_ingest(&cfg),
        Command::Synth { .. } => cmd_synth(&cfg),
        Command::Correlate { .. } => cmd_correlate(&cfg),
        Command::Train { .. } => cmd_train(&cfg),
        Command::Backtest { predictive, actuals, .. } => cmd_backtest(&cfg, predictive, actuals.as_deref()),
        Command::Report { input } => cmd_report(&cfg, input.as_deref().unwrap_or(&cfg.out)),
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let (tranches, climate) = cfg.require_inputs()?;
    Dataset::load(tranches, climate, cfg.strict, ClimateParseOptions { interpolate: cfg.interpolate })
        .map_err(|e| e.in_stage("ingest"))
}

fn stage_dataset(st: &mut Staging, dataset: &Dataset) -> Result<()> {
    st.write("tranches.csv", crate::dataset::write_tranches(dataset.tranches()))?;
    for (name, s) in dataset.climate() {
        st.write(&format!("climate/{name}.csv"), s.to_long_csv())?;
    }
    Ok(())
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<Outcome> {
    let dataset = load_dataset(cfg)?;
    let mut st = Staging::new(&cfg.out)?;
    stage_dataset(&mut st, &dataset)?;
    let ts = dataset.tranches();
    let mut summary = String::new();
    writeln!(summary, "tranches = {}", ts.len()).unwrap();
    if let (Some(a), Some(b)) = (ts.first(), ts.last()) {
        writeln!(summary, "issue_dates = {} .. {}", a.issue_date, b.issue_date).unwrap();
    }
    for (name, s) in dataset.climate() {
        writeln!(summary, "series {name} = {} .. {} ({} months)", s.first(), s.last(), s.len()).unwrap();
    }
    st.write("ingest_summary.txt", &summary)?;
    Ok(Outcome { files: st.commit()?, warnings: vec![], summary })
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<Outcome> {
    log::info!("seed synth = {}", cfg.seed);
    let syn = generate_synthetic(cfg.seed, cfg.synth_rows).map_err(|e| e.in_stage("synth"))?;
    let mut st = Staging::new(&cfg.out)?;
    stage_dataset(&mut st, &syn.dataset)?;
    st.write("planted.txt", syn.planted.to_sidecar())?;
    st.write("seeds.txt", format!("synth = {}\n", cfg.seed))?;
    let summary = format!("synthetic tranches = {}\nseed = {}\n", syn.dataset.len(), cfg.seed);
    Ok(Outcome { files: st.commit()?, warnings: vec![], summary })
}

pub fn cmd_correlate(cfg: &RunConfig) -> Result<Outcome> {
    let dataset = load_dataset(cfg)?;
    if dataset.climate().is_empty() {
        return Err(Error::Config("no climate series to correlate".into()).in_stage("correlate"));
    }
    let mut st = Staging::new(&cfg.out)?;
    let mut peaks = String::from("index,peak_lag,correlation,undefined_lags\n");
    let mut warnings = Vec::new();
    for (name, series) in dataset.climate() {
        let table = lagged_correlations(dataset.tranches(), series, cfg.lag_min, cfg.lag_max)
            .map_err(|e| e.in_stage("correlate"))?;
        st.write(&format!("correlations/{name}.csv"), table.to_csv())?;
        let undefined = table.undefined_lags();
        if !undefined.is_empty() {
            let msg = format!("{name}: correlation undefined at lags {undefined:?} (zero variance)");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        let undefined: Vec<String> = undefined.iter().map(u32::to_string).collect();
        match table.peak() {
            Some((lag, c)) => writeln!(peaks, "{name},{lag},{c},{}", undefined.join(";")).unwrap(),
            None => writeln!(peaks, "{name},NA,NA,{}", undefined.join(";")).unwrap(),
        }
    }
    st.write("correlations/peaks.csv", &peaks)?;
    Ok(Outcome { files: st.commit()?, warnings, summary: peaks })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// Writes every artifact of a finished pipeline run into `st`.
pub fn stage_pipeline(st: &mut Staging, cfg: &RunConfig, result: &PipelineResult) -> Result<String> {
    let mut metrics = String::from("model,features,n_features,cv_rmse,test_mse,test_mae,test_rmse,test_r2\n");
    let mut backtests = format!("{CSV_HEADER}\n");
    for job in &result.jobs {
        let tag = format!("{}_{}", job.spec, job.algorithm);
        let m = &job.metrics;
        writeln!(
            metrics,
            "{},{},{},{},{},{},{},{}",
            job.algorithm,
            job.spec,
            job.columns.len(),
            job.cv_rmse,
            m.mse,
            m.mae,
            m.rmse,
            fmt_opt(m.r2)
        )
        .unwrap();
        writeln!(backtests, "{}", job.backtest.csv_row(&format!("{}/{}", job.algorithm, job.spec))).unwrap();
        st.write(&format!("models/{tag}.json"), job.model.to_json()?)?;
        st.write(
            &format!("predictive/{tag}.csv"),
            predictive_csv(&job.test_rows, &job.test_dates, &job.y_test, &job.predictive),
        )?;
        st.write(&format!("backtest/{tag}.txt"), job.backtest.to_text())?;
    }

    let mut matrix = String::from("model");
    for spec in &cfg.features {
        write!(matrix, ",{spec}").unwrap();
    }
    matrix.push('\n');
    for &a in &cfg.models {
        matrix.push_str(a.label());
        for &spec in &cfg.features {
            let rmse = result.job(spec, a).map(|j| j.metrics.rmse);
            write!(matrix, ",{}", fmt_opt(rmse)).unwrap();
        }
        matrix.push('\n');
    }

    let mut selection = String::new();
    for p in &result.prepared {
        writeln!(selection, "[{}]", p.spec).unwrap();
        writeln!(selection, "columns = {}", p.matrix.columns.join(",")).unwrap();
        if let Some(s) = &p.selection {
            writeln!(selection, "lambda = {}", s.cv.lambda).unwrap();
            writeln!(selection, "alpha = {}", s.cv.alpha_mix).unwrap();
            writeln!(selection, "cv_rmse = {}", s.cv.cv_rmse).unwrap();
        }
        for w in &p.matrix.warnings {
            writeln!(selection, "warning = {w}").unwrap();
        }
    }

    let mut seeds = format!("master = {}\n", cfg.seed);
    for (k, v) in &result.seeds {
        writeln!(seeds, "{k} = {v}").unwrap();
    }

    st.write("metrics.csv", &metrics)?;
    st.write("rmse_matrix.csv", &matrix)?;
    st.write("backtests.csv", &backtests)?;
    st.write("selection.txt", &selection)?;
    st.write("seeds.txt", &seeds)?;
    st.write("config.toml", cfg.to_toml())?;
    let report = render_report(&metrics, &backtests, Some(&selection))?;
    st.write("report.txt", &report)?;
    Ok(report)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<Outcome> {
    let dataset = load_dataset(cfg)?;
    let opts = PipelineOptions::from(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let result = pool.install(|| train_evaluate(&dataset, &opts))?;
    let mut st = Staging::new(&cfg.out)?;
    let summary = stage_pipeline(&mut st, cfg, &result)?;
    Ok(Outcome { files: st.commit()?, warnings: vec![], summary })
}

fn read_actuals(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = match headers.iter().position(|h| h.eq_ignore_ascii_case("y_true")) {
        Some(c) => c,
        None if headers.len() == 1 => 0,
        None => return Err(Error::MissingHeader("y_true".into())),
    };
    reader
        .records()
        .enumerate()
        .map(|(i, r)| {
            let r = r?;
            r.get(col).unwrap_or("").parse::<f64>().map_err(|e| Error::MalformedRow {
                row: i + 1,
                field: "y_true".into(),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Backtest report for a predictive CSV; exceedances compare actuals with
/// its `p5` column.
pub fn backtest_file(predictive: &Path, actuals: Option<&Path>, coverage: f64) -> Result<BacktestReport> {
    let records = parse_predictive_csv(&std::fs::read_to_string(predictive)?)?;
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let var: Vec<f64> = records.iter().map(|r| r.p5).collect();
    let y: Vec<f64> = match actuals {
        Some(path) => {
            let y = read_actuals(path)?;
            if y.len() != var.len() {
                return Err(Error::invalid(format!(
                    "actuals have {} rows but the predictive file has {}",
                    y.len(),
                    var.len()
                )));
            }
            y
        }
        None => records.iter().map(|r| r.y_true).collect(),
    };
    BacktestReport::from_series(&exceedances(&y, &var)?, coverage)
}

pub fn cmd_backtest(cfg: &RunConfig, predictive: &Path, actuals: Option<&Path>) -> Result<Outcome> {
    let report = backtest_file(predictive, actuals, cfg.coverage).map_err(|e| e.in_stage("backtest"))?;
    let label = predictive.file_stem().map_or_else(|| "predictive".into(), |s| s.to_string_lossy().to_string());
    let mut st = Staging::new(&cfg.out)?;
    st.write("backtest.txt", report.to_text())?;
    st.write("backtest.csv", format!("{CSV_HEADER}\n{}\n", report.csv_row(&label)))?;
    Ok(Outcome { files: st.commit()?, warnings: vec![], summary: report.to_text() })
}

fn read_csv_rows(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}

fn short(v: &str) -> String {
    if v.parse::<i64>().is_ok() {
        return v.to_string();
    }
    v.parse::<f64>().map_or_else(|_| v.to_string(), |x| format!("{x:.6}"))
}

/// Text report: test RMSE per model and feature spec, then backtests.
pub fn render_report(metrics_csv: &str, backtests_csv: &str, selection: Option<&str>) -> Result<String> {
    let (mh, mrows) = read_csv_rows(metrics_csv)?;
    let idx = |name: &str| {
        mh.iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingHeader(name.to_string()))
    };
    let (im, isp, ir, icv) = (idx("model")?, idx("features")?, idx("test_rmse")?, idx("cv_rmse")?);
    let mut specs: Vec<String> = Vec::new();
    let mut models: Vec<String> = Vec::new();
    let mut cell: BTreeMap<(String, String), (String, String)> = BTreeMap::new();
    for r in &mrows {
        if !specs.contains(&r[isp]) {
            specs.push(r[isp].clone());
        }
        if !models.contains(&r[im]) {
            models.push(r[im].clone());
        }
        cell.insert((r[im].clone(), r[isp].clone()), (r[ir].clone(), r[icv].clone()));
    }
    let mut header = vec!["model".to_string()];
    for s in &specs {
        header.push(format!("{s} rmse"));
        header.push(format!("{s} cv"));
    }
    let rows: Vec<Vec<String>> = models
        .iter()
        .map(|m| {
            let label = m.parse::<Algorithm>().map_or_else(|_| m.clone(), |a| a.label().to_string());
            let mut row = vec![label];
            for s in &specs {
                let (rmse, cv) = cell.get(&(m.clone(), s.clone())).cloned().unwrap_or(("NA".into(), "NA".into()));
                row.push(short(&rmse));
                row.push(short(&cv));
            }
            row
        })
        .collect();

    let mut out = String::from("Test-partition RMSE (cv = mean out-of-fold RMSE on the training rows)\n\n");
    out.push_str(&render_table(&header, &rows));

    let (bh, brows) = read_csv_rows(backtests_csv)?;
    let brows: Vec<Vec<String>> = brows.iter().map(|r| r.iter().map(|v| short(v)).collect()).collect();
    out.push_str("\nVaR backtests\n\n");
    out.push_str(&render_table(&bh, &brows));
    if let Some(sel) = selection {
        out.push_str("\nFeature sets\n\n");
        out.push_str(sel);
    }
    Ok(out)
}

pub fn cmd_report(cfg: &RunConfig, input: &Path) -> Result<Outcome> {
    let read = |name: &str| {
        std::fs::read_to_string(input.join(name))
            .map_err(|e| Error::Config(format!("{}: {e}", input.join(name).display())).in_stage("report"))
    };
    let metrics = read("metrics.csv")?;
    let backtests = read("backtests.csv")?;
    let selection = std::fs::read_to_string(input.join("selection.txt")).ok();
    let report = render_report(&metrics, &backtests, selection.as_deref()).map_err(|e| e.in_stage("report"))?;
    let mut st = Staging::new(&cfg.out)?;
    st.write("report.txt", &report)?;
    Ok(Outcome { files: st.commit()?, warnings: vec![], summary: report })
}

/// Colors the zone line when stdout is a terminal.
pub fn colorize_zone(text: &str) -> String {
    if !std::io::stdout().is_terminal() {
        return text.to_string();
    }
    let paint = |zone: BaselZone| match zone {
        BaselZone::Green => "\x1b[32m",
        BaselZone::Yellow => "\x1b[33m",
        BaselZone::Red => "\x1b[31m",
    };
    text.lines()
        .map(|l| {
            for z in [BaselZone::Green, BaselZone::Yellow, BaselZone::Red] {
                if l.ends_with(&format!("= {z}")) {
                    return format!("{}{l}\x1b[0m\n", paint(z));
                }
            }
            format!("{l}\n")
        })
        .collect()
}
