//! Tune, fit and evaluate all eight algorithms under both feature specs on
//! a synthetic dataset and write the same artifacts as the `train` command.
//!
//! cargo run --release --example full_pipeline -- [out_dir]

use catbond::cli::{stage_pipeline, train_evaluate, PipelineOptions, RunConfig, Staging};
use catbond::dataset::generate_synthetic;
use catbond::regressors::SearchSpace;

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let out = std::env::args().nth(1).unwrap_or_else(|| "pipeline_out".into());
    let cfg = RunConfig {
        out: out.clone().into(),
        search_draws: 8,
        search_space: SearchSpace { n_trees: (50, 200), n_rounds: (50, 300), ..SearchSpace::default() },
        ..RunConfig::default()
    };
    let ds = generate_synthetic(cfg.seed, 734)?.dataset;
    let result = train_evaluate(&ds, &PipelineOptions::from(&cfg))?;
    let mut stage = Staging::new(&cfg.out)?;
    let report = stage_pipeline(&mut stage, &cfg, &result)?;
    let files = stage.commit()?;
    println!("{report}\n{} files written to {out}", files.len());
    Ok(())
}
