//! OLS, Bayesian ridge and ARD on a design where only two of six columns
//! matter; ARD drives the irrelevant precisions to the upper bound.

use catbond::regressors::{fit_ard, fit_bayesian_ridge, fit_ols, ArdParams, BayesRidgeParams, OlsParams};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 200;
    let x = DMatrix::from_fn(n, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y: Vec<f64> = (0..n)
        .map(|i| 1.0 + 2.0 * x[(i, 0)] - 1.5 * x[(i, 1)] + 0.3 * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let ols = fit_ols(&x, &y, &OlsParams::default())?;
    let brr = fit_bayesian_ridge(&x, &y, &BayesRidgeParams { alpha: 10.0, lambda: 1.0, fit_intercept: true })?;
    let ard = fit_ard(&x, &y, &ArdParams::default())?;

    println!("{:>3} {:>9} {:>9} {:>9} {:>10}", "j", "ols", "brr", "ard", "ard prec");
    for j in 0..6 {
        println!(
            "{j:>3} {:>9.4} {:>9.4} {:>9.4} {:>10.3e}{}",
            ols.weights[j],
            brr.mean[j],
            ard.mean[j],
            ard.lambdas[j],
            if ard.pruned[j] { "  pruned" } else { "" }
        );
    }
    println!("ARD noise precision {:.2} after {} iterations", ard.alpha, ard.n_iter);
    let sd: Vec<String> = brr.predictive_variance(&x.rows(0, 3).into_owned()).iter().map(|v| format!("{:.3}", v.sqrt())).collect();
    println!("BRR predictive sd on the first rows: {}", sd.join(", "));
    Ok(())
}
