//! Dense reference implementations built from explicit index loops and
//! nalgebra, sharing nothing with the crate's contraction code.

#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};
use tnlearn::sampling::Measurement;
use tnlearn::tt::{Mpo, Mps};
use tnlearn::C64;

pub fn bits(index: usize, n: usize) -> Vec<usize> {
    (0..n).map(|k| (index >> (n - 1 - k)) & 1).collect()
}

/// Amplitudes with site 0 as the most significant bit.
pub fn mps_vector(s: &Mps) -> DVector<C64> {
    let n = s.n_sites();
    DVector::from_fn(1 << n, |idx, _| {
        let b = bits(idx, n);
        let mut row = vec![C64::new(1.0, 0.0)];
        for (k, core) in s.cores().iter().enumerate() {
            let (l, r) = (core.shape()[0], core.shape()[2]);
            let mut next = vec![C64::new(0.0, 0.0); r];
            for a in 0..l {
                for c in 0..r {
                    next[c] += row[a] * core.get(&[a, b[k], c]);
                }
            }
            row = next;
        }
        row[0]
    })
}

pub fn mpo_matrix(o: &Mpo) -> DMatrix<C64> {
    let n = o.n_sites();
    DMatrix::from_fn(1 << n, 1 << n, |i, j| {
        let (bi, bj) = (bits(i, n), bits(j, n));
        let mut row = vec![C64::new(1.0, 0.0)];
        for (k, core) in o.cores().iter().enumerate() {
            let (l, r) = (core.shape()[0], core.shape()[3]);
            let mut next = vec![C64::new(0.0, 0.0); r];
            for a in 0..l {
                for c in 0..r {
                    next[c] += row[a] * core.get(&[a, bi[k], bj[k], c]);
                }
            }
            row = next;
        }
        row[0]
    })
}

pub fn measurement_vector(m: &Measurement) -> DVector<C64> {
    let mut v = DVector::from_element(1, C64::new(1.0, 0.0));
    for q in &m.qubit_states {
        v = v.kronecker(&DVector::from_column_slice(q));
    }
    v
}

pub fn expectation(op: &DMatrix<C64>, v: &DVector<C64>) -> C64 {
    (v.adjoint() * op * v)[(0, 0)]
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.norm()))
}

pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    max_abs(&(a - b))
}

pub fn vec_max_abs_diff(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
    (a - b).iter().fold(0.0, |acc, x| acc.max(x.norm()))
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_statistic(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(|a, b| a.total_cmp(b));
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic critical value of the KS statistic at significance 0.01.
pub fn ks_critical_001(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

pub struct Check {
    pub name: &'static str,
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn ok(&self) -> bool {
        self.error <= self.tolerance
    }
}

fn rel(err: f64, scale: f64) -> f64 {
    err / scale.max(1e-300)
}

/// Dense-oracle comparisons for every tensor-train operation on one random
/// instance with `n` sites.
pub fn oracle_checks(n: usize, seed: u64) -> Vec<Check> {
    use tnlearn::circuit::{depolarize, purity};
    use tnlearn::learner::init_model;
    use tnlearn::sampling::{exact_probability, random_density_mpo, random_measurement, seeded_rng};

    let mut rng = seeded_rng(seed);
    let ranks = |chi: usize| -> Vec<usize> { (0..=n).map(|k| if k == 0 || k == n { 1 } else { chi }).collect() };
    let tol = 1e-10;
    let mut out = Vec::new();

    let s = Mps::random_gaussian(&ranks(3), &mut rng).unwrap();
    let dense = mps_vector(&s);
    let ours = DVector::from_column_slice(s.to_dense().unwrap().data());
    let scale = dense.iter().fold(0.0f64, |a, x| a.max(x.norm()));
    out.push(Check { name: "mps_to_dense", error: rel(vec_max_abs_diff(&ours, &dense), scale), tolerance: tol });

    let a = Mpo::random_gaussian(&ranks(2), &mut rng).unwrap();
    let b = Mpo::random_gaussian(&ranks(3), &mut rng).unwrap();
    let (da, db) = (mpo_matrix(&a), mpo_matrix(&b));
    let prod = &da * &db;
    let got = mpo_matrix(&a.multiply(&b).unwrap());
    out.push(Check { name: "mpo_multiply", error: rel(max_abs_diff(&got, &prod), max_abs(&prod)), tolerance: tol });

    let sum = &da + &db;
    let got = mpo_matrix(&a.add(&b).unwrap());
    out.push(Check { name: "mpo_add", error: rel(max_abs_diff(&got, &sum), max_abs(&sum)), tolerance: tol });

    let phi = Mps::random_gaussian(&ranks(2), &mut rng).unwrap();
    let vphi = mps_vector(&phi);
    let want = expectation(&da, &vphi);
    let got = a.sandwich(&phi).unwrap();
    out.push(Check { name: "sandwich", error: rel((got - want).norm(), want.norm()), tolerance: tol });

    let want = &da * &vphi;
    let got = mps_vector(&a.apply(&phi).unwrap());
    let scale = want.iter().fold(0.0f64, |m, x| m.max(x.norm()));
    out.push(Check { name: "apply_mpo_to_mps", error: rel(vec_max_abs_diff(&got, &want), scale), tolerance: tol });

    let rho = random_density_mpo(n, 2, &mut rng).unwrap();
    let drho = mpo_matrix(&rho);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let m = random_measurement(n, &mut rng).unwrap();
        let want = expectation(&drho, &measurement_vector(&m)).re;
        worst = worst.max((exact_probability(&rho, &m).unwrap() - want).abs());
    }
    out.push(Check { name: "exact_probability", error: worst, tolerance: 1e-12 });

    let model = init_model(n, 2, &mut rng).unwrap();
    let om = mpo_matrix(model.omega());
    let sigma = &om * om.adjoint();
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let m = random_measurement(n, &mut rng).unwrap();
        let want = expectation(&sigma, &measurement_vector(&m)).re;
        worst = worst.max(rel((model.predict(&m) - want).abs(), want.abs()));
    }
    out.push(Check { name: "predict", error: worst, tolerance: tol });

    let gamma = 0.37;
    let identity = DMatrix::<C64>::identity(1 << n, 1 << n);
    let want = drho.map(|x| x * (1.0 - gamma)) + identity.map(|x| x * (gamma / (1 << n) as f64));
    let got = mpo_matrix(&depolarize(&rho, gamma).unwrap());
    out.push(Check { name: "depolarize", error: rel(max_abs_diff(&got, &want), max_abs(&want)), tolerance: 1e-12 });

    let want = (&drho * &drho).trace().re;
    out.push(Check { name: "purity", error: rel((purity(&rho) - want).abs(), want), tolerance: tol });
    out
}

/// Worst entry-wise relative disagreement between central differences
/// (step 1e-5) of `L′` and the analytic gradient, over every real and
/// imaginary parameter. Entries are scaled by `max(|analytic|, |fd|)`, floored
/// at 1e-3 of the largest analytic component.
pub fn gradient_check(n: usize, chi: usize, seed: u64) -> f64 {
    use tnlearn::learner::{gradient, init_model, loss, LpsModel};
    use tnlearn::sampling::{generate_records, random_density_mpo, seeded_rng};

    let mut rng = seeded_rng(seed);
    let rho = random_density_mpo(n, 2, &mut rng).unwrap();
    let model = init_model(n, chi, &mut rng).unwrap();
    let batch = generate_records(&rho, 5, &mut rng).unwrap();
    let g = gradient(&model, &batch).unwrap();
    let largest = g
        .cores
        .iter()
        .flat_map(|c| c.data().iter().flat_map(|z| [z.re.abs(), z.im.abs()]))
        .fold(0.0, f64::max);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for site in 0..n {
        for idx in 0..model.omega().core(site).len() {
            for (dir, analytic) in [
                (C64::new(1.0, 0.0), g.cores[site].data()[idx].re),
                (C64::new(0.0, 1.0), g.cores[site].data()[idx].im),
            ] {
                let shifted = |delta: f64| {
                    let mut cores = model.omega().cores().to_vec();
                    cores[site].data_mut()[idx] += dir * delta;
                    let m = LpsModel::from_omega(Mpo::new(cores).unwrap(), chi).unwrap();
                    loss(&m, &batch).unwrap()
                };
                let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                let scale = analytic.abs().max(fd.abs()).max(1e-3 * largest);
                worst = worst.max((fd - analytic).abs() / scale);
            }
        }
    }
    worst
}
