//! A single regression tree, a random forest and extremely randomized
//! trees on a noisy nonlinear target.

use catbond::regressors::{fit_cart, fit_extra_trees, fit_forest, ForestParams};
use catbond::stats::rmse;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn data(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<f64>, Vec<f64>) {
    let x = DMatrix::from_fn(n, 4, |_, _| rng.random_range(-2.0f64..2.0));
    let y = (0..n)
        .map(|i| x[(i, 0)].sin() + 0.5 * x[(i, 1)] * x[(i, 2)] + 0.2 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    (x, y)
}

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (x, y) = data(&mut rng, 400);
    let (xt, yt) = data(&mut rng, 400);

    let cart = fit_cart(&x, &y, Some(6), 5);
    println!("CART depth 6: {} leaves, test RMSE {:.4}", cart.n_leaves(), rmse(&cart.predict(&xt), &yt));

    let rf = fit_forest(&x, &y, &ForestParams { n_trees: 200, ..ForestParams::random_forest(7) })?;
    println!("random forest (200 trees):    test RMSE {:.4}", rmse(&rf.predict(&xt)?, &yt));

    let etr = fit_extra_trees(&x, &y, &ForestParams { n_trees: 200, ..ForestParams::extra_trees(7) })?;
    println!("extra trees (200 trees):      test RMSE {:.4}", rmse(&etr.predict(&xt)?, &yt));
    Ok(())
}
