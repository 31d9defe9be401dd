//! Hardware-efficient-ansatz states in MPS form and global depolarizing noise.
//!
//! Layer `ℓ` applies one random rotation per qubit followed by CNOTs on the
//! pairs `(0,1), (2,3), …` when `ℓ` is even and `(1,2), (3,4), …` when `ℓ`
//! is odd; the lower index is always the control.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{seeded_rng, RotationParams, Unitary2};
use crate::tensor::{DenseTensor, C64};
use crate::tt::{Mpo, Mps};

/// Singular values below this fraction of the largest are dropped when a
/// two-site gate is split back into cores.
pub const SPLIT_TOL: f64 = 1e-12;

/// Name of the CNOT layout, recorded alongside generated states.
pub const BRICK_PATTERN: &str = "even-layer (0,1),(2,3)..; odd-layer (1,2),(3,4)..; control=lower";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub n_qubits: usize,
    pub depth: usize,
    pub seed: u64,
    pub gamma: f64,
}

impl CircuitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::Argument("circuit needs at least one qubit".into()));
        }
        check_gamma(self.gamma)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Argument(format!("gamma {gamma} outside [0, 1]")));
    }
    Ok(())
}

pub fn apply_single_qubit_gate(s: &Mps, site: usize, u: &Unitary2) -> Result<Mps> {
    if site >= s.n_sites() {
        return Err(Error::Argument(format!(
            "site {site} out of range for {} qubits",
            s.n_sites()
        )));
    }
    let mut out = s.clone();
    let core = &mut out.cores_mut()[site];
    let (l, r) = (core.shape()[0], core.shape()[2]);
    let old = core.data().to_vec();
    let data = core.data_mut();
    for a in 0..l {
        for b in 0..r {
            let x0 = old[(a * 2) * r + b];
            let x1 = old[(a * 2 + 1) * r + b];
            data[(a * 2) * r + b] = u[0][0] * x0 + u[0][1] * x1;
            data[(a * 2 + 1) * r + b] = u[1][0] * x0 + u[1][1] * x1;
        }
    }
    Ok(out)
}

/// CNOT on neighbouring sites, re-split by SVD keeping every singular value
/// above [`SPLIT_TOL`] relative to the largest.
pub fn apply_cnot(s: &Mps, control: usize, target: usize) -> Result<Mps> {
    let n = s.n_sites();
    if control >= n || target >= n {
        return Err(Error::Argument(format!(
            "CNOT ({control}, {target}) out of range for {n} qubits"
        )));
    }
    if control.abs_diff(target) != 1 {
        return Err(Error::Argument(format!(
            "CNOT needs adjacent qubits, got {control} and {target}"
        )));
    }
    let left = control.min(target);
    let (a, b) = (s.core(left), s.core(left + 1));
    let (l, r) = (a.shape()[0], b.shape()[2]);
    // theta[l, i, j, r]
    let theta = a.contract(b, &[(2, 0)])?;
    let mut gated = DenseTensor::zeros(&[l, 2, 2, r]);
    for x in 0..l {
        for i in 0..2 {
            for j in 0..2 {
                let (i2, j2) = if control == left { (i, j ^ i) } else { (i ^ j, j) };
                for y in 0..r {
                    gated.set(&[x, i2, j2, y], theta.get(&[x, i, j, y]));
                }
            }
        }
    }
    let f = gated.into_reshaped(&[l * 2, 2 * r])?.svd()?;
    let cutoff = f.s[0] * SPLIT_TOL;
    let keep = f.s.iter().take_while(|&&v| v > cutoff).count().max(1);
    let k_full = f.rank();
    let mut u = DenseTensor::zeros(&[l, 2, keep]);
    for row in 0..l * 2 {
        for c in 0..keep {
            u.data_mut()[row * keep + c] = f.u.data()[row * k_full + c];
        }
    }
    let mut v = DenseTensor::zeros(&[keep, 2, r]);
    for c in 0..keep {
        for col in 0..2 * r {
            v.data_mut()[c * 2 * r + col] = f.vh.data()[c * 2 * r + col] * f.s[c];
        }
    }
    let mut out = s.clone();
    out.set_pair(left, u, v)?;
    Ok(out)
}

/// CNOT pairs of brick layer `layer`.
pub fn brick_pairs(n_qubits: usize, layer: usize) -> Vec<(usize, usize)> {
    let start = layer % 2;
    (start..n_qubits.saturating_sub(1))
        .step_by(2)
        .map(|k| (k, k + 1))
        .collect()
}

/// Runs the ansatz from `|0…0⟩` without any truncation.
pub fn hea_state(spec: &CircuitSpec) -> Result<Mps> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let mut state = Mps::zero_state(spec.n_qubits)?;
    for layer in 0..spec.depth {
        for q in 0..spec.n_qubits {
            let u = RotationParams::random(&mut rng).unitary();
            state = apply_single_qubit_gate(&state, q, &u)?;
        }
        for (c, t) in brick_pairs(spec.n_qubits, layer) {
            state = apply_cnot(&state, c, t)?;
        }
    }
    Ok(state)
}

/// `|s⟩⟨s|` as an MPO whose bond ranks are the squares of the MPS ranks.
pub fn state_to_density(s: &Mps) -> Mpo {
    let cores = s
        .cores()
        .iter()
        .map(|c| {
            let (l, r) = (c.shape()[0], c.shape()[2]);
            // (a, i, b) x (a', j, b')* -> (a, a', i, j, b, b')
            c.contract(&c.conj(), &[])
                .and_then(|t| t.permute(&[0, 3, 1, 4, 2, 5]))
                .and_then(|t| t.into_reshaped(&[l * l, 2, 2, r * r]))
                .expect("outer product of a valid core")
        })
        .collect();
    Mpo::new(cores).expect("bonds stay consistent")
}

/// `(1 − γ) ρ + (γ / 2^N) I`; interior bond ranks grow by one.
pub fn depolarize(rho: &Mpo, gamma: f64) -> Result<Mpo> {
    check_gamma(gamma)?;
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::Argument(format!("depolarize needs unit trace, got {tr}")));
    }
    let n = rho.n_sites();
    let noise = Mpo::identity(n)?.scale_distributed(gamma / 2f64.powi(n as i32));
    rho.scale(C64::new(1.0 - gamma, 0.0)).add(&noise)
}

/// `Tr(ρ²)`.
pub fn purity(rho: &Mpo) -> f64 {
    rho.trace_product(rho).expect("same operator").re
}

/// Ansatz state, projected and depolarized with `spec.gamma`.
pub fn noisy_circuit_density(spec: &CircuitSpec) -> Result<Mpo> {
    let psi = hea_state(spec)?;
    depolarize(&state_to_density(&psi), spec.gamma)
}
