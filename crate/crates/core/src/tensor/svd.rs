//! Thin SVD of complex matrices by one-sided (Hestenes) Jacobi rotations.

use super::{DenseTensor, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Relative orthogonality a column pair must reach before it is skipped.
pub const OFF_DIAGONAL_TOL: f64 = 1e-14;
pub const MAX_SWEEPS: usize = 10_000;

/// `m = u · diag(s) · vh` with `k = min(rows, cols)` singular values.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `rows × k`, orthonormal columns.
    pub u: DenseTensor,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// `k × cols`, orthonormal rows.
    pub vh: DenseTensor,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Rebuilds `u[:, ..keep] · diag(s[..keep]) · vh[..keep, :]`.
    pub fn reconstruct(&self, keep: usize) -> DenseTensor {
        let (m, k) = (self.u.shape()[0], self.u.shape()[1]);
        let n = self.vh.shape()[1];
        let keep = keep.min(k);
        let mut out = DenseTensor::zeros(&[m, n]);
        let (u, vh) = (self.u.data(), self.vh.data());
        let data = out.data_mut();
        for i in 0..m {
            for r in 0..keep {
                let w = u[i * k + r] * self.s[r];
                if w == ZERO {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += w * vh[r * n + j];
                }
            }
        }
        out
    }
}

pub fn svd(m: &DenseTensor) -> Result<Svd> {
    if m.ndim() != 2 {
        return Err(Error::Argument(format!(
            "svd needs a matrix, got shape {:?}",
            m.shape()
        )));
    }
    let (rows, cols) = (m.shape()[0], m.shape()[1]);
    if rows >= cols {
        let (u, s, v) = jacobi_tall(m.data(), rows, cols)?;
        Ok(assemble(u, s, v, rows, cols))
    } else {
        // A^H = U' S V'^H  =>  A = V' S U'^H
        let mut adj = vec![ZERO; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                adj[j * rows + i] = m.data()[i * cols + j].conj();
            }
        }
        let (u, s, v) = jacobi_tall(&adj, cols, rows)?;
        Ok(assemble(v, s, u, rows, cols))
    }
}

/// Column-major buffers: `u_cols[j]` has `rows` entries, `v_cols[j]` has `k`.
type JacobiOutput = (Vec<Vec<C64>>, Vec<f64>, Vec<Vec<C64>>);

/// Returns normalized left vectors, singular values and right vectors of a
/// tall `rows × cols` row-major matrix, sorted by decreasing singular value.
fn jacobi_tall(a: &[C64], rows: usize, cols: usize) -> Result<JacobiOutput> {
    let mut work: Vec<Vec<C64>> = (0..cols)
        .map(|j| (0..rows).map(|i| a[i * cols + j]).collect())
        .collect();
    let mut v: Vec<Vec<C64>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { ONE } else { ZERO }).collect())
        .collect();

    // rounding in the inner products limits attainable orthogonality to ~rows·eps
    let tol = OFF_DIAGONAL_TOL.max(rows as f64 * f64::EPSILON);
    let mut norms: Vec<f64> = work.iter().map(|c| norm_sqr(c)).collect();
    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&work[p], &work[q]);
                let g = gamma.norm();
                if g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut work, p, q, c, s, phase);
                rotate(&mut v, p, q, c, s, phase);
                norms[p] = norm_sqr(&work[p]);
                norms[q] = norm_sqr(&work[q]);
            }
        }
        sweeps += 1;
        if !rotated {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            return Err(Error::Numeric(format!(
                "jacobi svd did not converge after {sweeps} sweeps"
            )));
        }
    }

    let mut order: Vec<usize> = (0..cols).collect();
    let sv: Vec<f64> = work.iter().map(|c| norm_sqr(c).sqrt()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]).then(i.cmp(&j)));

    let mut u_cols: Vec<Vec<C64>> = Vec::with_capacity(cols);
    let mut s_sorted = Vec::with_capacity(cols);
    let mut v_cols = Vec::with_capacity(cols);
    let mut deficient = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        let s = sv[j];
        s_sorted.push(s);
        v_cols.push(v[j].clone());
        if s > f64::MIN_POSITIVE * 1e10 {
            u_cols.push(work[j].iter().map(|x| x / s).collect());
        } else {
            u_cols.push(vec![ZERO; rows]);
            deficient.push(slot);
        }
    }
    complete_basis(&mut u_cols, &deficient, rows);
    Ok((u_cols, s_sorted, v_cols))
}

/// Replaces the listed columns by unit vectors orthogonal to all others,
/// drawn from the standard basis by Gram-Schmidt.
fn complete_basis(cols: &mut [Vec<C64>], slots: &[usize], rows: usize) {
    let mut candidate = 0usize;
    for &slot in slots {
        while candidate < rows {
            let mut e = vec![ZERO; rows];
            e[candidate] = ONE;
            candidate += 1;
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for (k, col) in cols.iter().enumerate() {
                    if k == slot || (slots.contains(&k) && norm_sqr(col) == 0.0) {
                        continue;
                    }
                    let proj = dot(col, &e);
                    for (ei, ci) in e.iter_mut().zip(col) {
                        *ei -= proj * ci;
                    }
                }
            }
            let n = norm_sqr(&e).sqrt();
            if n > 1e-8 {
                cols[slot] = e.into_iter().map(|x| x / n).collect();
                break;
            }
        }
    }
}

fn assemble(u: Vec<Vec<C64>>, s: Vec<f64>, v: Vec<Vec<C64>>, rows: usize, cols: usize) -> Svd {
    let k = s.len();
    debug_assert_eq!(k, rows.min(cols));
    let mut u_mat = DenseTensor::zeros(&[rows, k]);
    for (j, col) in u.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            u_mat.data_mut()[i * k + j] = x;
        }
    }
    let mut vh = DenseTensor::zeros(&[k, cols]);
    for (r, col) in v.iter().enumerate() {
        for (j, &x) in col.iter().enumerate() {
            vh.data_mut()[r * cols + j] = x.conj();
        }
    }
    Svd { u: u_mat, s, vh }
}

fn rotate(cols: &mut [Vec<C64>], p: usize, q: usize, c: f64, s: f64, phase: C64) {
    // x_p' = c x_p - s e^{-i phi} x_q ;  x_q' = s e^{i phi} x_p + c x_q
    let (left, right) = cols.split_at_mut(q);
    let xp = &mut left[p];
    let xq = &mut right[0];
    let pc = phase.conj();
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let ap = *a;
        let bq = *b;
        *a = ap * c - bq * pc * s;
        *b = ap * phase * s + bq * c;
    }
}

fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn norm_sqr(x: &[C64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(&[rows, cols], |_| {
            C64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
        })
    }

    fn check_orthonormal_columns(m: &DenseTensor) -> f64 {
        let g = m.adjoint().unwrap().matmul(m).unwrap();
        g.max_abs_diff(&DenseTensor::identity(g.shape()[0]))
    }

    fn check(m: &DenseTensor) {
        let f = m.svd().unwrap();
        let err = f.reconstruct(f.rank()).max_abs_diff(m);
        let scale = m.frobenius_norm().max(1.0);
        assert!(err / scale < 1e-10, "reconstruction error {err}");
        assert!(check_orthonormal_columns(&f.u) < 1e-10);
        assert!(check_orthonormal_columns(&f.vh.adjoint().unwrap()) < 1e-10);
        assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
        assert!(f.s.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn diagonal_singular_values() {
        let mut m = DenseTensor::zeros(&[2, 2]);
        m.set(&[0, 0], C64::new(3.0, 0.0));
        m.set(&[1, 1], C64::new(1.0, 0.0));
        let f = m.svd().unwrap();
        assert!((f.s[0] - 3.0).abs() < 1e-15 && (f.s[1] - 1.0).abs() < 1e-15);

        // reversed order is sorted
        let mut m = DenseTensor::zeros(&[2, 2]);
        m.set(&[0, 0], C64::new(1.0, 0.0));
        m.set(&[1, 1], C64::new(0.0, -3.0));
        let f = m.svd().unwrap();
        assert_eq!(f.s, vec![3.0, 1.0]);
        check(&m);
    }

    #[test]
    fn zero_matrix() {
        let m = DenseTensor::zeros(&[3, 3]);
        let f = m.svd().unwrap();
        assert_eq!(f.s, vec![0.0; 3]);
        check(&m);
    }

    #[test]
    fn random_rectangular_matrices() {
        check(&random(4, 6, 1));
        check(&random(6, 4, 2));
        check(&random(1, 5, 3));
        check(&random(7, 1, 4));
        check(&random(40, 40, 5));
        check(&random(128, 32, 6));
    }

    #[test]
    fn rank_deficient_matrix() {
        // outer product of two vectors has rank one
        let a = random(5, 1, 7);
        let b = random(1, 4, 8);
        let m = a.matmul(&b).unwrap();
        let f = m.svd().unwrap();
        assert!(f.s[1] < 1e-14 * f.s[0]);
        check(&m);

        let mut z = DenseTensor::zeros(&[4, 3]);
        z.set(&[2, 1], C64::new(0.0, 2.0));
        check(&z);
    }

    #[test]
    fn non_matrix_input() {
        assert!(matches!(
            DenseTensor::zeros(&[2, 2, 2]).svd(),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn agrees_with_independent_library() {
        use nalgebra::{Complex, DMatrix};
        let m = random(5, 7, 9);
        let na = DMatrix::from_fn(5, 7, |i, j| {
            let x = m.get(&[i, j]);
            Complex::new(x.re, x.im)
        });
        let mut reference: Vec<f64> = na.singular_values().iter().copied().collect();
        reference.sort_by(|a, b| b.total_cmp(a));
        let ours = m.svd().unwrap().s;
        for (a, b) in ours.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn singular_values_carry_frobenius_mass(seed in 0u64..500, rows in 1usize..9, cols in 1usize..9) {
            let m = random(rows, cols, seed);
            let f = m.svd().unwrap();
            let mass: f64 = f.s.iter().map(|s| s * s).sum();
            let fro = m.frobenius_norm().powi(2);
            proptest::prop_assert!((mass - fro).abs() <= 1e-10 * fro);
        }
    }
}
