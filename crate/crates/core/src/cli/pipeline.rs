//! In-memory train/evaluate pipeline behind the `train` command.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;

use super::config::{RunConfig, SelectionMode, SplitKind};
use crate::backtest::{exceedances, BacktestReport};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::{build_features, elastic_net_select, ElasticNetGrid, FeatureMatrix, FeatureSpec, Selection, Standardize};
use crate::forecast::{
    calibrate, point_metrics, predictive_distribution, split_80_10_10, var_forecasts, PointMetrics,
    PredictiveDistribution, ResidualCalibration, SplitIndices, SplitMode, VarMode, DEFAULT_QUANTILES,
};
use crate::regressors::{random_search_cv, Algorithm, ModelSpec, SearchSpace, SearchSpec, TrainedModel};
use crate::stats::mix_seed;

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    pub features: Vec<FeatureSpec>,
    pub models: Vec<Algorithm>,
    pub selection: SelectionMode,
    pub split: SplitKind,
    pub seed: u64,
    pub search_draws: usize,
    pub search_folds: usize,
    pub shuffle_folds: Option<u64>,
    pub search_space: SearchSpace,
    pub elastic_net: ElasticNetGrid,
    pub n_draws: usize,
    pub var_mode: VarMode,
    pub coverage: f64,
}

impl From<&RunConfig> for PipelineOptions {
    fn from(c: &RunConfig) -> Self {
        Self {
            features: c.features.clone(),
            models: c.models.clone(),
            selection: c.selection,
            split: c.split,
            seed: c.seed,
            search_draws: c.search_draws,
            search_folds: c.search_folds,
            shuffle_folds: c.shuffle_folds,
            search_space: c.search_space.clone(),
            elastic_net: ElasticNetGrid::default(),
            n_draws: c.n_draws,
            var_mode: c.var_mode,
            coverage: c.coverage,
        }
    }
}

/// Seeds derived from the master seed. Tags depend only on the stage and
/// the algorithm, so a model sees the same hyperparameter draws and
/// simulation noise under both feature specs and in any model subset.
pub fn split_seed(seed: u64) -> u64 {
    mix_seed(seed, 1)
}

pub fn search_seed(seed: u64, algorithm: Algorithm) -> u64 {
    mix_seed(seed, 1000 + algorithm as u64)
}

pub fn predictive_seed(seed: u64, algorithm: Algorithm) -> u64 {
    mix_seed(seed, 2000 + algorithm as u64)
}

#[derive(Clone, Debug)]
pub struct JobResult {
    pub spec: FeatureSpec,
    pub algorithm: Algorithm,
    pub columns: Vec<String>,
    pub best: ModelSpec,
    pub cv_rmse: f64,
    pub model: TrainedModel,
    pub metrics: PointMetrics,
    pub calibration: ResidualCalibration,
    pub test_rows: Vec<usize>,
    pub test_dates: Vec<NaiveDate>,
    pub y_test: Vec<f64>,
    pub predictive: PredictiveDistribution,
    pub var: Vec<f64>,
    pub backtest: BacktestReport,
}

#[derive(Clone, Debug)]
pub struct PreparedSpec {
    pub spec: FeatureSpec,
    pub matrix: FeatureMatrix,
    pub selection: Option<Selection>,
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub split: SplitIndices,
    pub prepared: Vec<PreparedSpec>,
    pub jobs: Vec<JobResult>,
    pub seeds: BTreeMap<String, u64>,
}

impl PipelineResult {
    pub fn job(&self, spec: FeatureSpec, algorithm: Algorithm) -> Option<&JobResult> {
        self.jobs.iter().find(|j| j.spec == spec && j.algorithm == algorithm)
    }

    pub fn selection(&self) -> Option<&Selection> {
        self.prepared.iter().find_map(|p| p.selection.as_ref())
    }
}

/// Design matrix for `spec`, standardized on the training rows, with
/// elastic-net selection applied to the extended spec when requested.
pub fn prepare_spec(dataset: &Dataset, spec: FeatureSpec, train: &[usize], opts: &PipelineOptions) -> Result<PreparedSpec> {
    let matrix = build_features(dataset, spec, Standardize::OnRows(train)).map_err(|e| e.in_stage("features"))?;
    if spec != FeatureSpec::Extended || opts.selection == SelectionMode::None {
        return Ok(PreparedSpec { spec, matrix, selection: None });
    }
    let selection = elastic_net_select(&matrix, train, &opts.elastic_net).map_err(|e| e.in_stage("selection"))?;
    if selection.selected.is_empty() {
        return Err(Error::invalid("elastic net removed every column").in_stage("selection"));
    }
    log::info!(
        "elastic net kept {}/{} columns (lambda {:.3e}, alpha {})",
        selection.selected.len(),
        matrix.n_cols(),
        selection.cv.lambda,
        selection.cv.alpha_mix
    );
    let matrix = matrix.select_columns(&selection.selected);
    Ok(PreparedSpec { spec, matrix, selection: Some(selection) })
}

fn run_job(
    prepared: &PreparedSpec,
    algorithm: Algorithm,
    split: &SplitIndices,
    opts: &PipelineOptions,
) -> Result<JobResult> {
    let stage = |name: &str| format!("{name}[{}/{}]", prepared.spec, algorithm);
    let fm = &prepared.matrix;
    let (x_train, y_train) = fm.rows(&split.train);
    let search = SearchSpec {
        space: opts.search_space.clone(),
        draws: opts.search_draws,
        folds: opts.search_folds,
        seed: search_seed(opts.seed, algorithm),
        shuffle_folds: opts.shuffle_folds,
    };
    let result = random_search_cv(&x_train, &y_train, algorithm, &search).map_err(|e| e.in_stage(&stage("train")))?;
    let model = result.model;

    let (x_cal, y_cal) = fm.rows(&split.calibration);
    let cal_pred = model.predict(&x_cal)?;
    let residuals: Vec<f64> = y_cal.iter().zip(&cal_pred).map(|(y, p)| y - p).collect();
    let calibration = calibrate(&residuals, &DEFAULT_QUANTILES).map_err(|e| e.in_stage(&stage("calibrate")))?;

    let (x_test, y_test) = fm.rows(&split.test);
    let points = model.predict(&x_test)?;
    let metrics = point_metrics(&y_test, &points)?;
    let predictive = predictive_distribution(
        &points,
        &calibration,
        opts.n_draws,
        predictive_seed(opts.seed, algorithm),
        false,
    )
    .map_err(|e| e.in_stage(&stage("predict")))?;
    let var = var_forecasts(&predictive, &calibration, opts.var_mode, opts.coverage);
    let backtest = BacktestReport::from_series(&exceedances(&y_test, &var)?, opts.coverage)
        .map_err(|e| e.in_stage(&stage("backtest")))?;

    Ok(JobResult {
        spec: prepared.spec,
        algorithm,
        columns: fm.columns.clone(),
        best: result.best,
        cv_rmse: result.cv_rmse,
        model,
        metrics,
        calibration,
        test_dates: split.test.iter().map(|&i| fm.row_dates[i]).collect(),
        test_rows: split.test.clone(),
        y_test,
        predictive,
        var,
        backtest,
    })
}

/// Every (feature spec, model) pair: CV-tuned fit on the training rows,
/// residual calibration, test metrics, predictive distribution and
/// backtest. Jobs run on the current rayon pool; results keep the order
/// specs x models.
pub fn train_evaluate(dataset: &Dataset, opts: &PipelineOptions) -> Result<PipelineResult> {
    let mode = match opts.split {
        SplitKind::Chrono => SplitMode::Chronological,
        SplitKind::Random => SplitMode::Random { seed: split_seed(opts.seed) },
    };
    let split = split_80_10_10(dataset.len(), mode).map_err(|e| e.in_stage("split"))?;

    let mut seeds = BTreeMap::new();
    if opts.split == SplitKind::Random {
        seeds.insert("split".to_string(), split_seed(opts.seed));
    }
    for &a in &opts.models {
        seeds.insert(format!("search.{a}"), search_seed(opts.seed, a));
        seeds.insert(format!("predictive.{a}"), predictive_seed(opts.seed, a));
    }
    for (k, v) in &seeds {
        log::info!("seed {k} = {v}");
    }

    let prepared: Vec<PreparedSpec> = opts
        .features
        .iter()
        .map(|&spec| prepare_spec(dataset, spec, &split.train, opts))
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, Algorithm)> = (0..prepared.len())
        .flat_map(|k| opts.models.iter().map(move |&a| (k, a)))
        .collect();
    let jobs: Vec<JobResult> = pairs
        .par_iter()
        .map(|&(k, a)| {
            let job = run_job(&prepared[k], a, &split, opts);
            if let Ok(j) = &job {
                log::info!("{}/{}: test RMSE {:.6}", j.spec, a, j.metrics.rmse);
            }
            job
        })
        .collect::<Result<_>>()?;

    Ok(PipelineResult {
        split,
        prepared,
        jobs,
        seeds,
    })
}
