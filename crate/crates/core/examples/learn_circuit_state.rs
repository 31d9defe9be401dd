//! Learn a noisy 6-qubit circuit state and compare sorted probability curves.

use tnlearn::circuit::{noisy_circuit_density, CircuitSpec};
use tnlearn::learner::{distribution_fidelity, init_model, train, TrainConfig};
use tnlearn::sampling::{generate_records, seeded_rng, Dataset};
use tnlearn::Result;

fn main() -> Result<()> {
    let n = 6;
    for gamma in [0.0, 0.5, 1.0] {
        let rho = noisy_circuit_density(&CircuitSpec { n_qubits: n, depth: 2, seed: 21, gamma })?;
        let data = Dataset::generate(&rho, 500, 1, None)?;
        let cfg = TrainConfig { steps: 2000, learning_rate: 2e-3, seed: 2, eval_every: 2000, ..TrainConfig::default() };
        let (model, _) = train(&init_model(n, 4, &mut seeded_rng(3))?, &data, &cfg, None)?;

        let eval = generate_records(&rho, 100, &mut seeded_rng(4))?;
        let exact: Vec<f64> = eval.iter().map(|r| r.probability).collect();
        let predicted = model.predict_all(&eval);
        match distribution_fidelity(&predicted, &exact) {
            Ok(f) => println!("gamma {gamma}: fidelity {f:.4}"),
            Err(e) => println!("gamma {gamma}: fit diverged ({e})"),
        }
    }
    Ok(())
}
