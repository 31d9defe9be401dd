//! Locally purified model `σ = ΩΩ†`, its loss, analytic gradients and SGD.
//!
//! A prediction for the projector onto `|ψ⟩ = ⊗ₙ|ψₙ⟩` is `‖Ω†|ψ⟩‖²`. Writing
//! `vₙ[a, j, b] = Σᵢ ωₙ[a, i, j, b]·conj(ψₙ[i])` gives an MPS `v` with
//! `v = conj(Ω†|ψ⟩)`, so the prediction is `⟨v|v⟩`. Because `v` is linear in
//! the cores, the Wirtinger derivative with respect to `conj(ωₙ)` is
//! `ψₙ[i]·Gₙ[a, j, b]`, where `Gₙ` is `vₙ` dressed with the cached left and
//! right environments of the `⟨v|v⟩` network.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{Dataset, Measurement, MeasurementRecord};
use crate::tensor::{DenseTensor, C64, ONE, ZERO};
use crate::tt::Mpo;

#[derive(Clone, Debug, PartialEq)]
pub struct LpsModel {
    omega: Mpo,
    chi_m: usize,
}

impl LpsModel {
    /// Wraps an existing `Ω`; interior ranks must all equal `chi_m`.
    pub fn from_omega(omega: Mpo, chi_m: usize) -> Result<Self> {
        let ranks = omega.bond_ranks();
        let n = omega.n_sites();
        if ranks[1..n].iter().any(|&r| r != chi_m) {
            return Err(Error::Dimension(format!(
                "interior ranks {ranks:?} differ from chi_m = {chi_m}"
            )));
        }
        Ok(Self { omega, chi_m })
    }

    pub fn omega(&self) -> &Mpo {
        &self.omega
    }

    pub fn chi_m(&self) -> usize {
        self.chi_m
    }

    pub fn n_qubits(&self) -> usize {
        self.omega.n_sites()
    }

    /// `σ = ΩΩ†` as an explicit MPO (bond ranks `chi_m²`).
    pub fn sigma(&self) -> Result<Mpo> {
        self.omega.multiply(&self.omega.adjoint())
    }

    pub fn predict(&self, m: &Measurement) -> f64 {
        let v = reduced_cores(&self.omega, m);
        let mut env = vec![ONE];
        for (core, &(l, r)) in v.cores.iter().zip(&v.dims) {
            env = push_left(&env, core, l, r);
        }
        env[0].re
    }

    pub fn predict_all(&self, records: &[MeasurementRecord]) -> Vec<f64> {
        records.iter().map(|r| self.predict(&r.measurement)).collect()
    }

    /// Prediction plus `∂p̃/∂conj(ωₙ)` for every core.
    pub fn predict_with_wirtinger(&self, m: &Measurement) -> (f64, Vec<DenseTensor>) {
        let n = self.n_qubits();
        let v = reduced_cores(&self.omega, m);

        let mut left = Vec::with_capacity(n + 1);
        left.push(vec![ONE]);
        for (k, &(l, r)) in v.dims.iter().enumerate() {
            left.push(push_left(&left[k], &v.cores[k], l, r));
        }
        let mut right = vec![Vec::new(); n];
        right[n - 1] = vec![ONE];
        for k in (1..n).rev() {
            let (l, r) = v.dims[k];
            right[k - 1] = push_right(&right[k], &v.cores[k], l, r);
        }
        let p = left[n][0].re;

        let grads = (0..n)
            .map(|k| {
                let (l, r) = v.dims[k];
                let core = &v.cores[k];
                let (el, er) = (&left[k], &right[k]);
                // g[a, j, b] = Σ el[a, a'] v[a', j, b'] er[b, b']
                let mut tmp = vec![ZERO; l * 2 * r];
                for a in 0..l {
                    for a2 in 0..l {
                        let e = el[a * l + a2];
                        if e == ZERO {
                            continue;
                        }
                        for jb in 0..2 * r {
                            tmp[a * 2 * r + jb] += e * core[a2 * 2 * r + jb];
                        }
                    }
                }
                let mut g = vec![ZERO; l * 2 * r];
                for aj in 0..l * 2 {
                    for b in 0..r {
                        let mut acc = ZERO;
                        for b2 in 0..r {
                            acc += tmp[aj * r + b2] * er[b * r + b2];
                        }
                        g[aj * r + b] = acc;
                    }
                }
                let psi = m.qubit_states[k];
                let mut d = DenseTensor::zeros(&[l, 2, 2, r]);
                let out = d.data_mut();
                for a in 0..l {
                    for (i, &pi) in psi.iter().enumerate() {
                        for j in 0..2 {
                            for b in 0..r {
                                out[((a * 2 + i) * 2 + j) * r + b] = pi * g[(a * 2 + j) * r + b];
                            }
                        }
                    }
                }
                d
            })
            .collect();
        (p, grads)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.omega.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let omega = Mpo::load(path)?;
        let chi_m = omega.max_rank();
        Self::from_omega(omega, chi_m)
    }
}

struct Reduced {
    cores: Vec<Vec<C64>>,
    dims: Vec<(usize, usize)>,
}

/// `vₙ[a, j, b] = Σᵢ ωₙ[a, i, j, b] conj(ψₙ[i])`.
fn reduced_cores(omega: &Mpo, m: &Measurement) -> Reduced {
    assert_eq!(omega.n_sites(), m.n_qubits(), "measurement size differs from model");
    let mut cores = Vec::with_capacity(omega.n_sites());
    let mut dims = Vec::with_capacity(omega.n_sites());
    for (c, psi) in omega.cores().iter().zip(&m.qubit_states) {
        let (l, r) = (c.shape()[0], c.shape()[3]);
        let w = c.data();
        let (p0, p1) = (psi[0].conj(), psi[1].conj());
        let mut v = vec![ZERO; l * 2 * r];
        for a in 0..l {
            for j in 0..2 {
                for b in 0..r {
                    v[(a * 2 + j) * r + b] =
                        w[((a * 2) * 2 + j) * r + b] * p0 + w[((a * 2 + 1) * 2 + j) * r + b] * p1;
                }
            }
        }
        cores.push(v);
        dims.push((l, r));
    }
    Reduced { cores, dims }
}

/// `E'[b, b'] = Σ conj(v[a, j, b]) E[a, a'] v[a', j, b']`.
fn push_left(env: &[C64], v: &[C64], l: usize, r: usize) -> Vec<C64> {
    // t[a, j, b'] = Σ_a' E[a, a'] v[a', j, b']
    let mut t = vec![ZERO; l * 2 * r];
    for a in 0..l {
        for a2 in 0..l {
            let e = env[a * l + a2];
            if e == ZERO {
                continue;
            }
            for jb in 0..2 * r {
                t[a * 2 * r + jb] += e * v[a2 * 2 * r + jb];
            }
        }
    }
    let mut out = vec![ZERO; r * r];
    for aj in 0..l * 2 {
        for b in 0..r {
            let x = v[aj * r + b].conj();
            if x == ZERO {
                continue;
            }
            for b2 in 0..r {
                out[b * r + b2] += x * t[aj * r + b2];
            }
        }
    }
    out
}

/// `E'[a, a'] = Σ conj(v[a, j, b]) E[b, b'] v[a', j, b']`.
fn push_right(env: &[C64], v: &[C64], l: usize, r: usize) -> Vec<C64> {
    // t[a', j, b] = Σ_b' v[a', j, b'] E[b, b']
    let mut t = vec![ZERO; l * 2 * r];
    for aj in 0..l * 2 {
        for b in 0..r {
            let mut acc = ZERO;
            for b2 in 0..r {
                acc += v[aj * r + b2] * env[b * r + b2];
            }
            t[aj * r + b] = acc;
        }
    }
    let mut out = vec![ZERO; l * l];
    for a in 0..l {
        for a2 in 0..l {
            let mut acc = ZERO;
            for jb in 0..2 * r {
                acc += v[a * 2 * r + jb].conj() * t[a2 * 2 * r + jb];
            }
            out[a * l + a2] = acc;
        }
    }
    out
}

/// `Ω` with interior ranks `chi_m`, Gaussian cores, rescaled to `Tr(ΩΩ†) = 1`.
pub fn init_model<R: Rng + ?Sized>(n_qubits: usize, chi_m: usize, rng: &mut R) -> Result<LpsModel> {
    if n_qubits == 0 || chi_m == 0 {
        return Err(Error::Argument("n_qubits and chi_m must be at least 1".into()));
    }
    let omega = Mpo::random_gaussian(&Mpo::uniform_ranks(n_qubits, chi_m), rng)?;
    // Tr(ΩΩ†) is the squared Frobenius norm
    let tr = omega.frobenius_norm().powi(2);
    LpsModel::from_omega(omega.scale_distributed(1.0 / tr.sqrt()), chi_m)
}

/// `C = (2^N)²`.
pub fn loss_normalization(n_qubits: usize) -> f64 {
    4f64.powi(n_qubits as i32)
}

/// Normalized loss `L′ = (2^N)² · mean (p̃ − p)²`.
pub fn loss(model: &LpsModel, batch: &[MeasurementRecord]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Argument("loss needs a non-empty batch".into()));
    }
    let mse = batch
        .iter()
        .map(|r| (model.predict(&r.measurement) - r.probability).powi(2))
        .sum::<f64>()
        / batch.len() as f64;
    Ok(loss_normalization(model.n_qubits()) * mse)
}

/// Gradient of `L′` over the real parameters of every `Ω` core.
///
/// Entry `x + iy` of a core holds `∂L′/∂Re(ω) + i·∂L′/∂Im(ω)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub cores: Vec<DenseTensor>,
}

impl Gradient {
    pub fn wrt_real(&self, site: usize) -> Vec<f64> {
        self.cores[site].data().iter().map(|g| g.re).collect()
    }

    pub fn wrt_imag(&self, site: usize) -> Vec<f64> {
        self.cores[site].data().iter().map(|g| g.im).collect()
    }

    pub fn norm(&self) -> f64 {
        self.cores.iter().map(|c| c.frobenius_norm().powi(2)).sum::<f64>().sqrt()
    }
}

pub fn gradient(model: &LpsModel, batch: &[MeasurementRecord]) -> Result<Gradient> {
    if batch.is_empty() {
        return Err(Error::Argument("gradient needs a non-empty batch".into()));
    }
    let weight = 2.0 * loss_normalization(model.n_qubits()) / batch.len() as f64;
    let mut total: Vec<DenseTensor> = model
        .omega
        .cores()
        .iter()
        .map(|c| DenseTensor::zeros(c.shape()))
        .collect();
    for rec in batch {
        let (p, dconj) = model.predict_with_wirtinger(&rec.measurement);
        // ∂/∂Re + i ∂/∂Im = 2 ∂/∂conj(ω)
        let factor = C64::new(2.0 * weight * (p - rec.probability), 0.0);
        for (acc, d) in total.iter_mut().zip(&dconj) {
            for (x, y) in acc.data_mut().iter_mut().zip(d.data()) {
                *x += factor * y;
            }
        }
    }
    Ok(Gradient { cores: total })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
}

fn default_batch() -> usize {
    5
}
fn default_lr() -> f64 {
    0.01
}
fn default_eval_every() -> usize {
    50
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            batch_size: default_batch(),
            learning_rate: default_lr(),
            seed: 0,
            eval_every: default_eval_every(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub loss_prime: f64,
    pub r2_train: Option<f64>,
    pub r2_test: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
}

impl TrainTrace {
    /// CSV with columns `step, loss_prime, r2_train, r2_test`; an undefined
    /// metric is written as an empty field.
    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["step", "loss_prime", "r2_train", "r2_test"])?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            out.write_record([
                r.step.to_string(),
                r.loss_prime.to_string(),
                opt(r.r2_train),
                opt(r.r2_test),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn evaluate(model: &LpsModel, step: usize, train: &Dataset, test: Option<&Dataset>) -> Result<TraceRow> {
    let preds = model.predict_all(&train.records);
    let truths = train.probabilities();
    let mse = preds.iter().zip(&truths).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / preds.len() as f64;
    let r2_test = match test {
        Some(t) => r_squared(&model.predict_all(&t.records), &t.probabilities()).ok(),
        None => None,
    };
    Ok(TraceRow {
        step,
        loss_prime: loss_normalization(model.n_qubits()) * mse,
        r2_train: r_squared(&preds, &truths).ok(),
        r2_test,
    })
}

/// Plain SGD at a constant rate on uniformly drawn (with replacement) batches.
pub fn train(
    model: &LpsModel,
    train_set: &Dataset,
    config: &TrainConfig,
    test_set: Option<&Dataset>,
) -> Result<(LpsModel, TrainTrace)> {
    if config.steps == 0 || config.batch_size == 0 || config.eval_every == 0 {
        return Err(Error::Argument("steps, batch_size and eval_every must be positive".into()));
    }
    if !(config.learning_rate >= 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::Argument(format!("learning rate {}", config.learning_rate)));
    }
    if config.batch_size > train_set.len() {
        return Err(Error::Argument(format!(
            "batch of {} exceeds dataset of {}",
            config.batch_size,
            train_set.len()
        )));
    }
    if train_set.n_qubits() != model.n_qubits() || test_set.is_some_and(|t| t.n_qubits() != model.n_qubits()) {
        return Err(Error::Dimension("dataset and model qubit counts differ".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut current = model.clone();
    let mut trace = TrainTrace::default();
    trace.rows.push(evaluate(&current, 0, train_set, test_set)?);
    let lr = C64::new(config.learning_rate, 0.0);
    let mut batch = Vec::with_capacity(config.batch_size);
    for step in 1..=config.steps {
        batch.clear();
        for _ in 0..config.batch_size {
            batch.push(train_set.records[rng.random_range(0..train_set.len())].clone());
        }
        let g = gradient(&current, &batch)?;
        for (core, gc) in current.omega.cores_mut().iter_mut().zip(&g.cores) {
            for (w, d) in core.data_mut().iter_mut().zip(gc.data()) {
                *w -= lr * d;
            }
        }
        if step % config.eval_every == 0 || step == config.steps {
            trace.rows.push(evaluate(&current, step, train_set, test_set)?);
        }
    }
    Ok((current, trace))
}

/// Relative spread below which truths count as identical in [`r_squared`].
pub const RELATIVE_SPREAD_TOL: f64 = 1e-12;

/// `1 − mean squared residual / population variance of the truths`.
pub fn r_squared(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() || truths.is_empty() {
        return Err(Error::Argument("r_squared needs equal non-empty lengths".into()));
    }
    let n = truths.len() as f64;
    let mean = truths.iter().sum::<f64>() / n;
    let var = truths.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    // a spread at rounding level counts as constant
    let scale = truths.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    if var <= (RELATIVE_SPREAD_TOL * scale).powi(2) {
        return Err(Error::UndefinedMetric("truths have zero variance".into()));
    }
    let mse = predictions.iter().zip(truths).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
    Ok(1.0 - mse / var)
}

/// `Σ√(pᵢqᵢ) / √(Σpᵢ · Σqᵢ)`.
pub fn distribution_fidelity(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Argument("fidelity needs equal lengths".into()));
    }
    if p.iter().chain(q).any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::Argument("fidelity needs finite non-negative entries".into()));
    }
    let (sp, sq) = (p.iter().sum::<f64>(), q.iter().sum::<f64>());
    if sp <= 0.0 || sq <= 0.0 {
        return Err(Error::Argument("fidelity needs positive totals".into()));
    }
    let overlap: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    Ok((overlap / (sp * sq).sqrt()).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_density_mpo, random_measurement, seeded_rng};

    fn record(m: Measurement, p: f64) -> MeasurementRecord {
        MeasurementRecord { measurement: m, probability: p }
    }

    /// `Tr(E ΩΩ†)` from dense matrices.
    fn dense_prediction(model: &LpsModel, m: &Measurement) -> f64 {
        let om = model.omega().to_matrix().unwrap();
        let sigma = om.matmul(&om.adjoint().unwrap()).unwrap();
        let psi = m.to_mps().to_dense().unwrap();
        let len = psi.len();
        let v = psi.into_reshaped(&[len, 1]).unwrap();
        v.adjoint().unwrap().matmul(&sigma).unwrap().matmul(&v).unwrap().data()[0].re
    }

    #[test]
    fn init_is_trace_normalized_and_seeded() {
        let a = init_model(4, 3, &mut seeded_rng(1)).unwrap();
        assert!((a.sigma().unwrap().trace().re - 1.0).abs() < 1e-10);
        assert_eq!(a.omega().bond_ranks(), vec![1, 3, 3, 3, 1]);
        assert_eq!(a, init_model(4, 3, &mut seeded_rng(1)).unwrap());
        assert_ne!(a, init_model(4, 3, &mut seeded_rng(2)).unwrap());
        assert!(init_model(3, 0, &mut seeded_rng(1)).is_err());
    }

    #[test]
    fn projector_model_predicts_one() {
        let ket0 = [[ONE, ZERO], [ZERO, ZERO]];
        let model = LpsModel::from_omega(Mpo::product(&[ket0; 3]).unwrap(), 1).unwrap();
        assert!((model.predict(&Measurement::all_zero(3)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn predictions_match_dense_and_operator_forms() {
        let mut rng = seeded_rng(3);
        for (n, chi) in [(1, 1), (2, 2), (3, 2), (4, 3)] {
            let model = init_model(n, chi, &mut rng).unwrap();
            let sigma = model.sigma().unwrap();
            for _ in 0..5 {
                let m = random_measurement(n, &mut rng).unwrap();
                let p = model.predict(&m);
                assert!(p >= 0.0);
                assert!((p - dense_prediction(&model, &m)).abs() < 1e-12);
                assert!((p - sigma.sandwich(&m.to_mps()).unwrap().re).abs() < 1e-10);
                let (pw, _) = model.predict_with_wirtinger(&m);
                assert!((p - pw).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn predictions_scale_quadratically() {
        let mut rng = seeded_rng(4);
        let model = init_model(3, 2, &mut rng).unwrap();
        let alpha = 1.7;
        let scaled =
            LpsModel::from_omega(model.omega().scale(C64::new(alpha, 0.0)), 2).unwrap();
        for _ in 0..10 {
            let m = random_measurement(3, &mut rng).unwrap();
            let (p, q) = (model.predict(&m), scaled.predict(&m));
            assert!((q - alpha * alpha * p).abs() < 1e-12 * q.max(1e-3));
        }
    }

    #[test]
    fn loss_cases() {
        let ket0 = [[ONE, ZERO], [ZERO, ZERO]];
        let model = LpsModel::from_omega(Mpo::product(&[ket0; 4]).unwrap(), 1).unwrap();
        let perfect = vec![record(Measurement::all_zero(4), 1.0)];
        assert_eq!(loss(&model, &perfect).unwrap(), 0.0);
        let off = vec![record(Measurement::all_zero(4), 0.9)];
        assert!((loss(&model, &off).unwrap() - 2.56).abs() < 1e-12);
        assert!(loss(&model, &[]).is_err());
    }

    #[test]
    fn normalized_loss_is_scaled_mse() {
        let mut rng = seeded_rng(5);
        let rho = random_density_mpo(3, 2, &mut rng).unwrap();
        let model = init_model(3, 2, &mut rng).unwrap();
        let batch = crate::sampling::generate_records(&rho, 7, &mut rng).unwrap();
        let mut mse = 0.0;
        for r in &batch {
            mse += (dense_prediction(&model, &r.measurement) - r.probability).powi(2);
        }
        mse /= 7.0;
        assert!((loss(&model, &batch).unwrap() - 64.0 * mse).abs() < 1e-10 * 64.0 * mse);
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let mut rng = seeded_rng(6);
        let model = init_model(3, 2, &mut rng).unwrap();
        let batch: Vec<_> = (0..4)
            .map(|_| {
                let m = random_measurement(3, &mut rng).unwrap();
                let p = model.predict(&m);
                record(m, p)
            })
            .collect();
        let g = gradient(&model, &batch).unwrap();
        assert!(g.norm() < 1e-12);
    }

    /// Central differences of the loss over every real and imaginary part.
    fn finite_difference_check(n: usize, chi: usize, seed: u64) {
        let mut rng = seeded_rng(seed);
        let rho = random_density_mpo(n, 2, &mut rng).unwrap();
        let model = init_model(n, chi, &mut rng).unwrap();
        let batch = crate::sampling::generate_records(&rho, 3, &mut rng).unwrap();
        let g = gradient(&model, &batch).unwrap();
        let h = 1e-5;
        for site in 0..n {
            for idx in 0..model.omega().core(site).len() {
                for (part, analytic) in [(ONE, g.cores[site].data()[idx].re), (C64::new(0.0, 1.0), g.cores[site].data()[idx].im)] {
                    let shifted = |delta: f64| {
                        let mut om = model.omega().clone();
                        om.cores_mut()[site].data_mut()[idx] += part * delta;
                        loss(&LpsModel::from_omega(om, chi).unwrap(), &batch).unwrap()
                    };
                    let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                    let scale = analytic.abs().max(fd.abs()).max(1e-3);
                    assert!(
                        (fd - analytic).abs() / scale <= 1e-5,
                        "n={n} chi={chi} site={site} idx={idx}: fd={fd} analytic={analytic}"
                    );
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        finite_difference_check(2, 1, 7);
        finite_difference_check(3, 2, 8);
    }

    #[test]
    fn single_site_gradient_matches_hand_expansion() {
        // Ω = [[a, b], [c, d]] and ψ = |0⟩: p̃ = ‖Ω†|0⟩‖² = |a|² + |b|²,
        // so L′ = 4 (|a|² + |b|² − p)² and ∂L′/∂Re(a) = 16 (p̃ − p) Re(a), etc.
        let (a, b, c, d) = (C64::new(0.3, -0.2), C64::new(0.1, 0.5), C64::new(-0.4, 0.2), C64::new(0.7, 0.1));
        let omega = Mpo::new(vec![DenseTensor::new(vec![1, 2, 2, 1], vec![a, b, c, d]).unwrap()]).unwrap();
        let model = LpsModel::from_omega(omega, 1).unwrap();
        let p = 0.2;
        let batch = vec![record(Measurement::all_zero(1), p)];
        let pt = a.norm_sqr() + b.norm_sqr();
        assert!((model.predict(&Measurement::all_zero(1)) - pt).abs() < 1e-15);
        let g = gradient(&model, &batch).unwrap();
        let k = 16.0 * (pt - p);
        let want = [C64::new(k * a.re, k * a.im), C64::new(k * b.re, k * b.im), ZERO, ZERO];
        for (x, y) in g.cores[0].data().iter().zip(&want) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_learning_rate_leaves_model_untouched() {
        let mut rng = seeded_rng(9);
        let rho = random_density_mpo(3, 2, &mut rng).unwrap();
        let data = Dataset::generate(&rho, 20, 1, Some(2)).unwrap();
        let model = init_model(3, 2, &mut rng).unwrap();
        let cfg = TrainConfig { steps: 20, learning_rate: 0.0, seed: 3, eval_every: 5, ..TrainConfig::default() };
        let (out, trace) = train(&model, &data, &cfg, None).unwrap();
        assert_eq!(out, model);
        let steps: Vec<usize> = trace.rows.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![0, 5, 10, 15, 20]);
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = seeded_rng(10);
        let rho = random_density_mpo(3, 2, &mut rng).unwrap();
        let data = Dataset::generate(&rho, 30, 2, Some(2)).unwrap();
        let test = Dataset::generate(&rho, 30, 3, Some(2)).unwrap();
        let model = init_model(3, 2, &mut rng).unwrap();
        let cfg = TrainConfig { steps: 100, seed: 4, eval_every: 10, ..TrainConfig::default() };
        let a = train(&model, &data, &cfg, Some(&test)).unwrap();
        let b = train(&model, &data, &cfg, Some(&test)).unwrap();
        assert_eq!(a, b);
        assert!(train(&model, &data, &TrainConfig { batch_size: 31, ..cfg.clone() }, None).is_err());
    }

    #[test]
    fn r_squared_cases() {
        let t = [0.1, 0.2, 0.3];
        assert_eq!(r_squared(&t, &t).unwrap(), 1.0);
        assert!(r_squared(&[0.2, 0.2, 0.2], &t).unwrap().abs() < 1e-12);
        assert!((r_squared(&[0.1, 0.2, 0.2], &t).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(r_squared(&[0.1, 0.1], &[0.3, 0.3]), Err(Error::UndefinedMetric(_))));
        let flat = [0.125, 0.125 + 1e-17, 0.125 - 1e-17];
        assert!(matches!(r_squared(&t, &flat), Err(Error::UndefinedMetric(_))));
        assert!(r_squared(&[0.1], &t).is_err());
    }

    #[test]
    fn fidelity_cases() {
        let p = [0.1, 0.4, 0.5];
        assert!((distribution_fidelity(&p, &p).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(distribution_fidelity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let f = distribution_fidelity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((f - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!(distribution_fidelity(&[-0.1, 1.0], &[1.0, 1.0]).is_err());
        assert!(distribution_fidelity(&[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(distribution_fidelity(&[1.0], &[1.0, 1.0]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn fidelity_is_symmetric(p in proptest::collection::vec(0.0f64..1.0, 1..20), seed in 0u64..100) {
            let mut rng = seeded_rng(seed);
            let q: Vec<f64> = p.iter().map(|_| rng.random::<f64>() + 1e-3).collect();
            let p: Vec<f64> = p.iter().map(|x| x + 1e-3).collect();
            let a = distribution_fidelity(&p, &q).unwrap();
            let b = distribution_fidelity(&q, &p).unwrap();
            proptest::prop_assert!((a - b).abs() <= 1e-15);
            proptest::prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
