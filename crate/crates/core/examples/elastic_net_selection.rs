//! Build the benchmark and extended design matrices, then let a
//! cross-validated elastic net choose columns of the extended design.

use catbond::dataset::generate_synthetic;
use catbond::features::{build_features, elastic_net_select, ElasticNetGrid, FeatureSpec, Standardize};
use catbond::forecast::{split_80_10_10, SplitMode};

fn main() -> anyhow::Result<()> {
    let ds = generate_synthetic(1, 734)?.dataset;
    let split = split_80_10_10(ds.len(), SplitMode::Chronological)?;
    for spec in FeatureSpec::ALL {
        let fm = build_features(&ds, spec, Standardize::OnRows(&split.train))?;
        println!("{spec}: {} rows x {} columns", fm.n_rows(), fm.n_cols());
        for w in &fm.warnings {
            println!("  warning: {w}");
        }
    }

    let fm = build_features(&ds, FeatureSpec::Extended, Standardize::OnRows(&split.train))?;
    let sel = elastic_net_select(&fm, &split.train, &ElasticNetGrid::default())?;
    println!(
        "\nelastic net: lambda {:.3e}, alpha {}, CV RMSE {:.5}",
        sel.cv.lambda, sel.cv.alpha_mix, sel.cv.cv_rmse
    );
    for (name, beta) in fm.columns.iter().zip(&sel.cv.fit.coefficients) {
        let mark = if sel.selected.contains(name) { "kept" } else { "dropped" };
        println!("  {name:<20} {beta:>10.6}  {mark}");
    }
    Ok(())
}
