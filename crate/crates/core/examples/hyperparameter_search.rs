//! Randomized hyperparameter search with K-fold cross-validation for every
//! algorithm, followed by a JSON round trip of the winning model.

use catbond::regressors::{random_search_cv, Algorithm, SearchSpace, SearchSpec, TrainedModel};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 300;
    let x = DMatrix::from_fn(n, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y: Vec<f64> = (0..n)
        .map(|i| x[(i, 0)] + (x[(i, 1)] * x[(i, 2)]).tanh() + 0.3 * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let search = SearchSpec {
        draws: 6,
        space: SearchSpace { n_trees: (50, 150), n_rounds: (50, 200), ..SearchSpace::default() },
        seed: 17,
        ..SearchSpec::default()
    };
    for alg in Algorithm::ALL {
        let r = random_search_cv(&x, &y, alg, &search)?;
        println!("{:<5} best draw {} of {}  CV RMSE {:.4}", alg.label(), r.best_index, r.scores.len(), r.cv_rmse);
        if alg == Algorithm::Xgb {
            let json = r.model.to_json()?;
            let back = TrainedModel::from_json(&json)?;
            assert_eq!(back.predict(&x)?, r.model.predict(&x)?);
            println!("      {} bytes of JSON reload to identical predictions", json.len());
        }
    }
    Ok(())
}
