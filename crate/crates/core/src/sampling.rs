//! Ground-truth states, random factorized measurements and labelled datasets.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::{C64, ONE, ZERO};
use crate::tt::{Mpo, Mps};

/// Identifies the random stream used to build datasets.
pub const GENERATOR_VERSION: &str = "chacha8-v1";

/// Tolerance on imaginary parts and range violations of exact probabilities.
pub const PROBABILITY_TOL: f64 = 1e-10;

pub type Unitary2 = [[C64; 2]; 2];

/// Seeded generator used for every sampling routine in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent seed from a master seed and a list of tags
/// (grid coordinates, repeat index, stream purpose …).
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for t in tags {
        h.update(t.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Bloch-sphere rotation by `angle` about the unit vector `axis`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationParams {
    pub axis: [f64; 3],
    pub angle: f64,
}

impl RotationParams {
    pub fn new(axis: [f64; 3], angle: f64) -> Result<Self> {
        let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Argument(format!("rotation axis has norm {norm}")));
        }
        Ok(Self { axis, angle })
    }

    /// Uniform axis on the sphere and uniform angle on `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let cos_polar: f64 = rng.random_range(-1.0..1.0);
        let azimuth: f64 = rng.random_range(0.0..2.0 * PI);
        let angle: f64 = rng.random_range(0.0..2.0 * PI);
        let sin_polar = (1.0 - cos_polar * cos_polar).max(0.0).sqrt();
        Self {
            axis: [sin_polar * azimuth.cos(), sin_polar * azimuth.sin(), cos_polar],
            angle,
        }
    }

    /// `cos(θ/2)·I − i·sin(θ/2)·(n̂·σ⃗)`.
    pub fn unitary(&self) -> Unitary2 {
        let [nx, ny, nz] = self.axis;
        let c = (self.angle / 2.0).cos();
        let s = (self.angle / 2.0).sin();
        [
            [C64::new(c, -s * nz), C64::new(-s * ny, -s * nx)],
            [C64::new(s * ny, -s * nx), C64::new(c, s * nz)],
        ]
    }
}

pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> (RotationParams, Unitary2) {
    let p = RotationParams::random(rng);
    (p, p.unitary())
}

/// A factorized rank-1 projector `⊗ₖ |ψₖ⟩⟨ψₖ|`.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub qubit_states: Vec<[C64; 2]>,
}

impl Measurement {
    pub fn new(qubit_states: Vec<[C64; 2]>) -> Result<Self> {
        if qubit_states.is_empty() {
            return Err(Error::Argument("a measurement needs at least one qubit".into()));
        }
        for (k, s) in qubit_states.iter().enumerate() {
            let n = s[0].norm_sqr() + s[1].norm_sqr();
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::Argument(format!("qubit {k} state has squared norm {n}")));
            }
        }
        Ok(Self { qubit_states })
    }

    pub fn all_zero(n_qubits: usize) -> Self {
        Self {
            qubit_states: vec![[ONE, ZERO]; n_qubits],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.qubit_states.len()
    }

    /// The projected-onto state as a rank-1 MPS.
    pub fn to_mps(&self) -> Mps {
        Mps::product(&self.qubit_states).expect("qubit states are valid product cores")
    }
}

/// A measurement paired with its acceptance probability.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub measurement: Measurement,
    pub probability: f64,
}

/// `⊗ₖ U_k|0⟩` with an independent random rotation per qubit.
pub fn random_measurement<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<Measurement> {
    if n_qubits == 0 {
        return Err(Error::Argument("n_qubits must be at least 1".into()));
    }
    let qubit_states = (0..n_qubits)
        .map(|_| {
            let u = RotationParams::random(rng).unitary();
            [u[0][0], u[1][0]]
        })
        .collect();
    Ok(Measurement { qubit_states })
}

/// `L L† / Tr(L L†)` for a Gaussian MPO `L` with interior ranks `chi_s`;
/// the result has interior ranks `chi_s²` and unit trace.
pub fn random_density_mpo<R: Rng + ?Sized>(n_qubits: usize, chi_s: usize, rng: &mut R) -> Result<Mpo> {
    if n_qubits == 0 || chi_s == 0 {
        return Err(Error::Argument("n_qubits and chi_s must be at least 1".into()));
    }
    let l = Mpo::random_gaussian(&Mpo::uniform_ranks(n_qubits, chi_s), rng)?;
    let llh = l.multiply(&l.adjoint())?;
    let tr = llh.trace().re;
    if !(tr.is_finite() && tr > 0.0) {
        return Err(Error::Numeric(format!("Tr(LL†) = {tr}")));
    }
    Ok(llh.scale_distributed(1.0 / tr))
}

/// `Tr(E ρ) = ⟨ψ|ρ|ψ⟩`, checked to be real and inside `[0, 1]` before clamping.
pub fn exact_probability(rho: &Mpo, m: &Measurement) -> Result<f64> {
    let p = rho.sandwich(&m.to_mps())?;
    if p.im.abs() > PROBABILITY_TOL {
        return Err(Error::Numeric(format!("probability has imaginary part {}", p.im)));
    }
    if p.re < -PROBABILITY_TOL || p.re > 1.0 + PROBABILITY_TOL || !p.re.is_finite() {
        return Err(Error::Numeric(format!("probability {} outside [0, 1]", p.re)));
    }
    Ok(p.re.clamp(0.0, 1.0))
}

pub fn generate_records<R: Rng + ?Sized>(
    rho: &Mpo,
    m_size: usize,
    rng: &mut R,
) -> Result<Vec<MeasurementRecord>> {
    if m_size == 0 {
        return Err(Error::Argument("dataset size must be at least 1".into()));
    }
    (0..m_size)
        .map(|_| {
            let measurement = random_measurement(rho.n_sites(), rng)?;
            let probability = exact_probability(rho, &measurement)?;
            Ok(MeasurementRecord {
                measurement,
                probability,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n_qubits: usize,
    pub m: usize,
    #[serde(default)]
    pub chi_s: Option<usize>,
    pub seed: u64,
    pub generator: String,
    /// Free-form description of the state the labels were computed from.
    #[serde(default)]
    pub source: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub records: Vec<MeasurementRecord>,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    qubits: Vec<[f64; 4]>,
    p: f64,
}

impl Dataset {
    pub fn new(meta: DatasetMeta, records: Vec<MeasurementRecord>) -> Result<Self> {
        if records.iter().any(|r| r.measurement.n_qubits() != meta.n_qubits) {
            return Err(Error::Dimension("records disagree with dataset qubit count".into()));
        }
        if records.len() != meta.m {
            return Err(Error::Format(format!(
                "header announces {} records, found {}",
                meta.m,
                records.len()
            )));
        }
        Ok(Self { meta, records })
    }

    /// Labels `m_size` fresh random measurements of `rho`, drawing from a
    /// stream seeded by `seed`.
    pub fn generate(rho: &Mpo, m_size: usize, seed: u64, chi_s: Option<usize>) -> Result<Self> {
        let mut rng = seeded_rng(seed);
        let records = generate_records(rho, m_size, &mut rng)?;
        Self::new(
            DatasetMeta {
                n_qubits: rho.n_sites(),
                m: m_size,
                chi_s,
                seed,
                generator: GENERATOR_VERSION.into(),
                source: None,
            },
            records,
        )
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_qubits(&self) -> usize {
        self.meta.n_qubits
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.probability).collect()
    }

    /// Header line of metadata, then one JSON record per line.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        serde_json::to_writer(&mut w, &self.meta)?;
        writeln!(w)?;
        for r in &self.records {
            let line = RecordLine {
                qubits: r
                    .measurement
                    .qubit_states
                    .iter()
                    .map(|s| [s[0].re, s[0].im, s[1].re, s[1].im])
                    .collect(),
                p: r.probability,
            };
            serde_json::to_writer(&mut w, &line)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty dataset file".into()))??;
        let meta: DatasetMeta = serde_json::from_str(&header)?;
        let mut records = Vec::with_capacity(meta.m);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: RecordLine = serde_json::from_str(&line)?;
            let states = rec
                .qubits
                .iter()
                .map(|q| [C64::new(q[0], q[1]), C64::new(q[2], q[3])])
                .collect();
            if !(-1e-12..=1.0 + 1e-12).contains(&rec.p) {
                return Err(Error::Format(format!("probability {} out of range", rec.p)));
            }
            records.push(MeasurementRecord {
                measurement: Measurement::new(states)?,
                probability: rec.p,
            });
        }
        Self::new(meta, records)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(u: &Unitary2, v: [C64; 2]) -> [C64; 2] {
        [u[0][0] * v[0] + u[0][1] * v[1], u[1][0] * v[0] + u[1][1] * v[1]]
    }

    #[test]
    fn zero_angle_is_identity() {
        let u = RotationParams::new([0.6, 0.0, 0.8], 0.0).unwrap().unitary();
        assert_eq!(u, [[ONE, ZERO], [ZERO, ONE]]);
    }

    #[test]
    fn random_unitaries_are_unitary() {
        let mut rng = seeded_rng(1);
        for _ in 0..100 {
            let (p, u) = random_rotation(&mut rng);
            let norm = p.axis.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            assert!((0.0..2.0 * PI).contains(&p.angle));
            for i in 0..2 {
                for j in 0..2 {
                    let uu: C64 = (0..2).map(|k| u[i][k] * u[j][k].conj()).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((uu - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn z_rotation_by_pi() {
        let u = RotationParams::new([0.0, 0.0, 1.0], PI).unwrap().unitary();
        assert!((u[0][0] - C64::new(0.0, -1.0)).norm() < 1e-15);
        assert!((u[1][1] - C64::new(0.0, 1.0)).norm() < 1e-15);
        assert!(u[0][1].norm() < 1e-15 && u[1][0].norm() < 1e-15);
        // U|0⟩ = -i|0⟩, so the projector is unchanged
        let v = apply(&u, [ONE, ZERO]);
        assert!((v[0].norm_sqr() - 1.0).abs() < 1e-15 && v[1].norm() < 1e-15);
    }

    #[test]
    fn rejects_non_unit_axis() {
        assert!(RotationParams::new([1.0, 1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn measurement_states_are_first_columns() {
        let mut rng = seeded_rng(2);
        let mut rng2 = seeded_rng(2);
        let m = random_measurement(4, &mut rng).unwrap();
        for s in &m.qubit_states {
            let u = RotationParams::random(&mut rng2).unitary();
            assert_eq!(*s, apply(&u, [ONE, ZERO]));
            assert!((s[0].norm_sqr() + s[1].norm_sqr() - 1.0).abs() < 1e-12);
        }
        assert_eq!(m.to_mps().bond_ranks(), vec![1; 5]);
        assert!(random_measurement(0, &mut rng).is_err());
    }

    #[test]
    fn density_mpo_properties() {
        let mut rng = seeded_rng(3);
        let rho = random_density_mpo(3, 2, &mut rng).unwrap();
        assert_eq!(rho.bond_ranks(), vec![1, 4, 4, 1]);
        assert!((rho.trace() - ONE).norm() < 1e-12);
        let m = rho.to_matrix().unwrap();
        assert!(m.max_abs_diff(&m.adjoint().unwrap()) < 1e-12);
    }

    #[test]
    fn exact_probability_special_states() {
        let zero = Mpo::product(&[[[ONE, ZERO], [ZERO, ZERO]]; 3]).unwrap();
        let p = exact_probability(&zero, &Measurement::all_zero(3)).unwrap();
        assert!((p - 1.0).abs() < 1e-15);

        let mixed = Mpo::identity(4).unwrap().scale_distributed(1.0 / 16.0);
        let mut rng = seeded_rng(4);
        for _ in 0..20 {
            let m = random_measurement(4, &mut rng).unwrap();
            assert!((exact_probability(&mixed, &m).unwrap() - 1.0 / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn broken_density_is_reported() {
        let neg = Mpo::identity(2).unwrap().scale(C64::new(-1.0, 0.0));
        let m = Measurement::all_zero(2);
        assert!(matches!(exact_probability(&neg, &m), Err(Error::Numeric(_))));
        let imag = Mpo::identity(2).unwrap().scale(C64::new(0.0, 0.5));
        assert!(matches!(exact_probability(&imag, &m), Err(Error::Numeric(_))));
    }

    #[test]
    fn dataset_round_trip_and_determinism() {
        let mut rng = seeded_rng(5);
        let rho = random_density_mpo(3, 2, &mut rng).unwrap();
        let a = Dataset::generate(&rho, 25, 77, Some(2)).unwrap();
        let b = Dataset::generate(&rho, 25, 77, Some(2)).unwrap();
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        a.write_to(&mut ba).unwrap();
        b.write_to(&mut bb).unwrap();
        assert_eq!(ba, bb);

        let back = Dataset::read_from(&ba[..]).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.meta.chi_s, Some(2));
        assert_eq!(back.meta.generator, GENERATOR_VERSION);

        let first_line = String::from_utf8(ba.clone()).unwrap();
        let record: serde_json::Value =
            serde_json::from_str(first_line.lines().nth(1).unwrap()).unwrap();
        assert_eq!(record["qubits"].as_array().unwrap().len(), 3);
        assert_eq!(record["qubits"][0].as_array().unwrap().len(), 4);
        assert!(record["p"].is_f64());
    }

    #[test]
    fn derived_seeds_differ_by_tag() {
        let a = derive_seed(1, &[2, 3]);
        assert_eq!(a, derive_seed(1, &[2, 3]));
        assert_ne!(a, derive_seed(1, &[3, 2]));
        assert_ne!(a, derive_seed(2, &[2, 3]));
    }
}
