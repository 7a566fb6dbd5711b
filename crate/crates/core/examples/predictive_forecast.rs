//! 80:10:10 protocol: fit on the first 80%, calibrate a normal error model
//! on the next 10%, and simulate predictive intervals for the last 10%.

use catbond::dataset::generate_synthetic;
use catbond::features::{build_features, FeatureSpec, Standardize};
use catbond::forecast::{
    calibrate, point_metrics, predictive_distribution, split_80_10_10, SplitMode, DEFAULT_QUANTILES,
};
use catbond::regressors::{fit, Algorithm, ModelSpec};

fn main() -> anyhow::Result<()> {
    let ds = generate_synthetic(1, 734)?.dataset;
    let split = split_80_10_10(ds.len(), SplitMode::Chronological)?;
    println!("train {} / calibration {} / test {}", split.train.len(), split.calibration.len(), split.test.len());
    let fm = build_features(&ds, FeatureSpec::Extended, Standardize::OnRows(&split.train))?;

    let (xtr, ytr) = fm.rows(&split.train);
    let model = fit(&ModelSpec::default_for(Algorithm::Ols, 0), &xtr, &ytr)?;

    let (xc, yc) = fm.rows(&split.calibration);
    let resid: Vec<f64> = yc.iter().zip(model.predict(&xc)?).map(|(y, p)| y - p).collect();
    let calib = calibrate(&resid, &DEFAULT_QUANTILES)?;
    println!("calibration residuals: mean {:.5}, sd {:.5}", calib.mean, calib.std);

    let (xte, yte) = fm.rows(&split.test);
    let points = model.predict(&xte)?;
    let m = point_metrics(&yte, &points)?;
    println!("test MSE {:.6}  MAE {:.5}  RMSE {:.5}", m.mse, m.mae, m.rmse);

    let pred = predictive_distribution(&points, &calib, 1000, 99, false)?;
    let inside = pred.rows.iter().zip(&yte).filter(|(r, y)| r.p5 <= **y && **y <= r.p95).count();
    println!("90% interval coverage on test: {inside}/{}", yte.len());
    for (r, y) in pred.rows.iter().zip(&yte).take(5) {
        println!("  y {y:.4}  point {:.4}  [{:.4}, {:.4}]", r.point, r.p5, r.p95);
    }
    Ok(())
}
