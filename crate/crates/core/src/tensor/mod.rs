//! Dense complex tensors stored in row-major order.
//!
//! [`DenseTensor`] is the brute-force representation used to check every
//! tensor-train routine, and the factorization backend (see [`svd`]) used by
//! truncation and gate splitting.

mod svd;

pub use svd::{svd, Svd, MAX_SWEEPS, OFF_DIAGONAL_TOL};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Shorthand for the complex scalar used throughout the crate.
pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Dimension(format!("zero extent in shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "zero extent in {shape:?}");
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![ZERO; len],
        }
    }

    /// Builds a tensor by evaluating `f` at every multi-index in row-major order.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let mut t = Self::zeros(shape);
        let mut idx = vec![0usize; shape.len()];
        for k in 0..t.data.len() {
            t.data[k] = f(&idx);
            increment(&mut idx, shape);
        }
        t
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(&[n, n], |ix| if ix[0] == ix[1] { ONE } else { ZERO })
    }

    pub fn scalar(value: C64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn strides(&self) -> Vec<usize> {
        row_major_strides(&self.shape)
    }

    fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            debug_assert!(i < d);
            off = off * d + i;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> C64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: C64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    pub fn scale(&self, alpha: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| x * alpha).collect(),
        }
    }

    pub fn scale_in_place(&mut self, alpha: C64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    pub fn conj(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| x.conj()).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "cannot add {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest absolute entrywise difference; panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape, "shape mismatch in comparison");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Reinterprets the data with a new shape of equal size.
    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data.clone())
    }

    pub fn into_reshaped(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data)
    }

    /// Axis permutation: axis `t` of the result is axis `perm[t]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.ndim())?;
        if perm.iter().enumerate().all(|(t, &p)| t == p) {
            return Ok(self.clone());
        }
        let old_strides = self.strides();
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let gather: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; new_shape.len()];
        let mut src = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[src]);
            // odometer increment that tracks the source offset incrementally
            for ax in (0..new_shape.len()).rev() {
                idx[ax] += 1;
                src += gather[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                src -= gather[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self {
            shape: new_shape,
            data,
        })
    }

    /// Permutes axes, then merges contiguous runs of the permuted axes.
    ///
    /// `groups` lists, in order, the permuted-axis positions that form each
    /// output axis. An empty `groups` keeps every permuted axis separate.
    pub fn reindex(&self, permutation: &[usize], groups: &[Vec<usize>]) -> Result<Self> {
        let permuted = self.permute(permutation)?;
        if groups.is_empty() {
            return Ok(permuted);
        }
        let mut next = 0usize;
        let mut shape = Vec::with_capacity(groups.len());
        for g in groups {
            if g.is_empty() {
                return Err(Error::Argument("empty axis group".into()));
            }
            let mut extent = 1;
            for &ax in g {
                if ax != next {
                    return Err(Error::Argument(format!(
                        "groups {groups:?} are not a contiguous ordered partition"
                    )));
                }
                extent *= permuted.shape[ax];
                next += 1;
            }
            shape.push(extent);
        }
        if next != permuted.ndim() {
            return Err(Error::Argument(format!(
                "groups {groups:?} do not cover all {} axes",
                permuted.ndim()
            )));
        }
        permuted.into_reshaped(&shape)
    }

    /// Row-major unfolding: the first `row_axes` axes index rows.
    pub fn unfold(&self, row_axes: usize) -> Result<Self> {
        if row_axes == 0 || row_axes >= self.ndim() {
            return Err(Error::Argument(format!(
                "unfolding split {row_axes} outside 1..{}",
                self.ndim()
            )));
        }
        let rows = self.shape[..row_axes].iter().product();
        let cols = self.shape[row_axes..].iter().product();
        self.reshape(&[rows, cols])
    }

    /// Sums over paired axes. Result axes are the unpaired axes of `self`
    /// followed by the unpaired axes of `other`, each in original order.
    pub fn contract(&self, other: &Self, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut used_a = vec![false; self.ndim()];
        let mut used_b = vec![false; other.ndim()];
        for &(ia, ib) in pairs {
            if ia >= self.ndim() || ib >= other.ndim() {
                return Err(Error::Dimension(format!(
                    "pair ({ia}, {ib}) out of range for ranks {} and {}",
                    self.ndim(),
                    other.ndim()
                )));
            }
            if used_a[ia] || used_b[ib] {
                return Err(Error::Argument(format!("axis repeated in pairs {pairs:?}")));
            }
            if self.shape[ia] != other.shape[ib] {
                return Err(Error::Dimension(format!(
                    "paired extents differ: {} vs {}",
                    self.shape[ia], other.shape[ib]
                )));
            }
            used_a[ia] = true;
            used_b[ib] = true;
        }
        let free_a: Vec<usize> = (0..self.ndim()).filter(|&i| !used_a[i]).collect();
        let free_b: Vec<usize> = (0..other.ndim()).filter(|&i| !used_b[i]).collect();

        let perm_a: Vec<usize> = free_a.iter().copied().chain(pairs.iter().map(|p| p.0)).collect();
        let perm_b: Vec<usize> = pairs.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();
        let a = self.permute(&perm_a)?;
        let b = other.permute(&perm_b)?;

        let rows: usize = free_a.iter().map(|&i| self.shape[i]).product();
        let inner: usize = pairs.iter().map(|p| self.shape[p.0]).product();
        let cols: usize = free_b.iter().map(|&i| other.shape[i]).product();
        let data = matmul(&a.data, &b.data, rows, inner, cols);

        let mut shape: Vec<usize> = free_a.iter().map(|&i| self.shape[i]).collect();
        shape.extend(free_b.iter().map(|&i| other.shape[i]));
        if shape.is_empty() {
            shape.push(1);
        }
        Self::new(shape, data)
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ndim() != 2 || other.ndim() != 2 {
            return Err(Error::Argument("matmul needs two matrices".into()));
        }
        self.contract(other, &[(1, 0)])
    }

    /// Conjugate transpose of a matrix.
    pub fn adjoint(&self) -> Result<Self> {
        if self.ndim() != 2 {
            return Err(Error::Argument("adjoint needs a matrix".into()));
        }
        Ok(self.permute(&[1, 0])?.conj())
    }

    pub fn svd(&self) -> Result<Svd> {
        svd(self)
    }
}

pub(crate) fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for ax in (0..shape.len().saturating_sub(1)).rev() {
        strides[ax] = strides[ax + 1] * shape[ax + 1];
    }
    strides
}

fn increment(idx: &mut [usize], shape: &[usize]) {
    for ax in (0..shape.len()).rev() {
        idx[ax] += 1;
        if idx[ax] < shape[ax] {
            return;
        }
        idx[ax] = 0;
    }
}

fn check_permutation(perm: &[usize], ndim: usize) -> Result<()> {
    if perm.len() != ndim {
        return Err(Error::Argument(format!(
            "permutation {perm:?} has wrong length for {ndim} axes"
        )));
    }
    let mut seen = vec![false; ndim];
    for &p in perm {
        if p >= ndim || seen[p] {
            return Err(Error::Argument(format!("{perm:?} is not a permutation")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Row-major `(rows × inner) · (inner × cols)`.
pub(crate) fn matmul(a: &[C64], b: &[C64], rows: usize, inner: usize, cols: usize) -> Vec<C64> {
    let mut out = vec![ZERO; rows * cols];
    for i in 0..rows {
        let out_row = &mut out[i * cols..(i + 1) * cols];
        for k in 0..inner {
            let aik = a[i * inner + k];
            if aik == ZERO {
                continue;
            }
            let b_row = &b[k * cols..(k + 1) * cols];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
    out
}
