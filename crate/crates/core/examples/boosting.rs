//! Gradient boosting, second-order boosting with leaf regularization and
//! histogram-based leaf-wise boosting, with their training-loss curves.

use catbond::regressors::{
    fit_gradient_boosting, fit_histogram_boosting, fit_second_order_boosting, GradientBoostingParams,
    HistogramParams, SecondOrderParams,
};
use catbond::stats::rmse;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn data(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<f64>, Vec<f64>) {
    let x = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-2.0f64..2.0));
    let y = (0..n)
        .map(|i| (2.0 * x[(i, 0)]).tanh() + x[(i, 1)].abs() + 0.2 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    (x, y)
}

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (x, y) = data(&mut rng, 500);
    let (xt, yt) = data(&mut rng, 500);

    let gb = fit_gradient_boosting(&x, &y, &GradientBoostingParams { n_rounds: 200, ..Default::default() })?;
    let xgb = fit_second_order_boosting(
        &x,
        &y,
        &SecondOrderParams { n_rounds: 200, lambda: 1.0, gamma: 0.01, ..Default::default() },
    )?;
    let lgbm = fit_histogram_boosting(&x, &y, &HistogramParams { n_rounds: 200, max_leaves: 8, ..Default::default() })?;

    for (name, model) in [("gradient boosting", &gb), ("second-order", &xgb), ("histogram", &lgbm)] {
        let loss = &model.training_loss;
        println!(
            "{name:<18} loss {:.4} -> {:.4}  test RMSE {:.4}",
            loss[0],
            loss[loss.len() - 1],
            rmse(&model.predict(&xt)?, &yt)
        );
    }
    Ok(())
}
