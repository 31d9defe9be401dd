//! Fit an LPS model to measurements of a random rank-2 density MPO.

use tnlearn::learner::{init_model, train, TrainConfig};
use tnlearn::sampling::{random_density_mpo, seeded_rng, Dataset};
use tnlearn::Result;

fn main() -> Result<()> {
    let n = 4;
    let rho = random_density_mpo(n, 2, &mut seeded_rng(0))?;
    let train_set = Dataset::generate(&rho, 200, 1, Some(2))?;
    let test_set = Dataset::generate(&rho, 200, 2, Some(2))?;

    let model = init_model(n, 4, &mut seeded_rng(3))?;
    let cfg = TrainConfig { steps: 1000, seed: 4, eval_every: 100, ..TrainConfig::default() };
    let (_, trace) = train(&model, &train_set, &cfg, Some(&test_set))?;
    for row in &trace.rows {
        println!(
            "step {:5}  loss' {:.4e}  R2 train {:.4}  R2 test {:.4}",
            row.step,
            row.loss_prime,
            row.r2_train.unwrap_or(f64::NAN),
            row.r2_test.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
