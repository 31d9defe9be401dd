//! Hardware-efficient-ansatz states under global depolarizing noise.

use tnlearn::circuit::{hea_state, noisy_circuit_density, purity, CircuitSpec};
use tnlearn::sampling::{exact_probability, random_measurement, seeded_rng};
use tnlearn::Result;

fn main() -> Result<()> {
    let mut rng = seeded_rng(0);
    for depth in 1..=3 {
        let spec = CircuitSpec { n_qubits: 8, depth, seed: 3, gamma: 0.0 };
        println!("depth {depth}: state ranks {:?}", hea_state(&spec)?.bond_ranks());
    }
    for gamma in [0.0, 0.5, 1.0] {
        let rho = noisy_circuit_density(&CircuitSpec { n_qubits: 8, depth: 2, seed: 3, gamma })?;
        let m = random_measurement(8, &mut rng)?;
        println!(
            "gamma {gamma}: purity {:.5}, trace {:.5}, p(random measurement) {:.3e} (2^-8 = {:.3e})",
            purity(&rho),
            rho.trace().re,
            exact_probability(&rho, &m)?,
            0.5f64.powi(8)
        );
    }
    Ok(())
}
