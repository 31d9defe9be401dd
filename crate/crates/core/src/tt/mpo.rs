use rand::Rng;

use super::mps::{check_bonds, gaussian};
use super::{check_same_length, Mps, MAX_DENSE_ENTRIES, PHYS};
use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, C64, ONE, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub struct Mpo {
    cores: Vec<DenseTensor>,
}

/// Output of [`Mpo::truncate_with_report`].
#[derive(Clone, Debug)]
pub struct Truncation {
    pub mpo: Mpo,
    /// Root-sum-square of the singular values dropped at bonds `1 … N-1`.
    pub discarded: Vec<f64>,
}

impl Mpo {
    /// Validates core shapes `(r_{n-1}, 2, 2, r_n)` with unit boundary ranks.
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Argument("an MPO needs at least one site".into()));
        }
        for (n, c) in cores.iter().enumerate() {
            if c.ndim() != 4 || c.shape()[1] != PHYS || c.shape()[2] != PHYS {
                return Err(Error::Dimension(format!(
                    "site {n}: expected (l, 2, 2, r) core, got {:?}",
                    c.shape()
                )));
            }
        }
        check_bonds(cores.iter().map(|c| (c.shape()[0], c.shape()[3])))?;
        Ok(Self { cores })
    }

    pub fn identity(n_sites: usize) -> Result<Self> {
        Self::product(&vec![[[ONE, ZERO], [ZERO, ONE]]; n_sites])
    }

    /// Rank-1 operator `⊗ₙ A_n` from row-major 2×2 blocks.
    pub fn product(blocks: &[[[C64; 2]; 2]]) -> Result<Self> {
        let cores = blocks
            .iter()
            .map(|b| DenseTensor::new(vec![1, 2, 2, 1], vec![b[0][0], b[0][1], b[1][0], b[1][1]]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(cores)
    }

    pub fn zero(n_sites: usize) -> Result<Self> {
        Self::product(&vec![[[ZERO; 2]; 2]; n_sites])
    }

    /// Cores with independent standard-normal real and imaginary parts;
    /// `ranks` lists `r_0 … r_N`.
    pub fn random_gaussian<R: Rng + ?Sized>(ranks: &[usize], rng: &mut R) -> Result<Self> {
        if ranks.len() < 2 {
            return Err(Error::Argument("need at least one site".into()));
        }
        let cores = ranks
            .windows(2)
            .map(|w| DenseTensor::from_fn(&[w[0], PHYS, PHYS, w[1]], |_| gaussian(rng)))
            .collect();
        Self::new(cores)
    }

    /// Ranks `1, χ, …, χ, 1` for `n_sites` sites.
    pub fn uniform_ranks(n_sites: usize, chi: usize) -> Vec<usize> {
        let mut r = vec![chi; n_sites + 1];
        r[0] = 1;
        r[n_sites] = 1;
        r
    }

    pub fn n_sites(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn core(&self, n: usize) -> &DenseTensor {
        &self.cores[n]
    }

    pub(crate) fn cores_mut(&mut self) -> &mut [DenseTensor] {
        &mut self.cores
    }

    pub fn into_cores(self) -> Vec<DenseTensor> {
        self.cores
    }

    /// Bond extents `r_0 … r_N`.
    pub fn bond_ranks(&self) -> Vec<usize> {
        let mut r = vec![self.cores[0].shape()[0]];
        r.extend(self.cores.iter().map(|c| c.shape()[3]));
        r
    }

    pub fn max_rank(&self) -> usize {
        self.bond_ranks().into_iter().max().unwrap_or(1)
    }

    /// Multiplies the operator by `alpha` through its first core.
    pub fn scale(&self, alpha: C64) -> Self {
        let mut out = self.clone();
        out.cores[0].scale_in_place(alpha);
        out
    }

    /// Multiplies the operator by a positive real factor spread evenly over
    /// the cores, `factor^(1/N)` each, so no single core under- or overflows.
    pub fn scale_distributed(&self, factor: f64) -> Self {
        assert!(factor >= 0.0, "distributed scale needs a non-negative factor");
        let per_core = C64::new(factor.powf(1.0 / self.n_sites() as f64), 0.0);
        let mut out = self.clone();
        out.cores.iter_mut().for_each(|c| c.scale_in_place(per_core));
        out
    }

    /// Conjugates every core and swaps its physical axes.
    pub fn adjoint(&self) -> Self {
        let cores = self
            .cores
            .iter()
            .map(|c| c.permute(&[0, 2, 1, 3]).expect("valid permutation").conj())
            .collect();
        Self { cores }
    }

    /// Transposes every core's physical axes (no conjugation).
    pub fn transpose(&self) -> Self {
        let cores = self
            .cores
            .iter()
            .map(|c| c.permute(&[0, 2, 1, 3]).expect("valid permutation"))
            .collect();
        Self { cores }
    }

    /// Coefficient tensor with axes `(i_1 … i_N, j_1 … j_N)`.
    pub fn to_dense(&self) -> Result<DenseTensor> {
        let n = self.n_sites();
        if 2 * n > 14 || (1usize << (2 * n)) > MAX_DENSE_ENTRIES {
            return Err(Error::Capacity(format!(
                "{n} operator sites exceed the dense conversion limit"
            )));
        }
        let mut acc = self.cores[0].clone();
        for core in &self.cores[1..] {
            let last = acc.ndim() - 1;
            acc = acc.contract(core, &[(last, 0)])?;
        }
        // axes are now (1, i1, j1, i2, j2, …, 1)
        let interleaved = acc.into_reshaped(&vec![PHYS; 2 * n])?;
        let perm: Vec<usize> = (0..n).map(|k| 2 * k).chain((0..n).map(|k| 2 * k + 1)).collect();
        interleaved.permute(&perm)
    }

    /// The operator as a `2^N × 2^N` matrix.
    pub fn to_matrix(&self) -> Result<DenseTensor> {
        let d = 1usize << self.n_sites();
        self.to_dense()?.into_reshaped(&[d, d])
    }

    /// Operator product `self · other`; bond ranks multiply.
    pub fn multiply(&self, other: &Mpo) -> Result<Mpo> {
        check_same_length(self.n_sites(), other.n_sites())?;
        let cores = self
            .cores
            .iter()
            .zip(&other.cores)
            .map(|(a, b)| {
                let (al, ar) = (a.shape()[0], a.shape()[3]);
                let (bl, br) = (b.shape()[0], b.shape()[3]);
                // (a, i, a', b, j, b') -> (a, b, i, j, a', b')
                a.contract(b, &[(2, 1)])?
                    .permute(&[0, 3, 1, 4, 2, 5])?
                    .into_reshaped(&[al * bl, PHYS, PHYS, ar * br])
            })
            .collect::<Result<Vec<_>>>()?;
        Mpo::new(cores)
    }

    /// Operator sum by core-wise direct sum; interior bond ranks add.
    pub fn add(&self, other: &Mpo) -> Result<Mpo> {
        check_same_length(self.n_sites(), other.n_sites())?;
        let n = self.n_sites();
        if n == 1 {
            return Mpo::new(vec![self.cores[0].add(&other.cores[0])?]);
        }
        let mut cores = Vec::with_capacity(n);
        for (k, (a, b)) in self.cores.iter().zip(&other.cores).enumerate() {
            let (al, ar) = (a.shape()[0], a.shape()[3]);
            let (bl, br) = (b.shape()[0], b.shape()[3]);
            let (l, r, b_l_off, b_r_off) = if k == 0 {
                (1, ar + br, 0, ar)
            } else if k == n - 1 {
                (al + bl, 1, al, 0)
            } else {
                (al + bl, ar + br, al, ar)
            };
            let mut c = DenseTensor::zeros(&[l, PHYS, PHYS, r]);
            for x in 0..al {
                for i in 0..PHYS {
                    for j in 0..PHYS {
                        for y in 0..ar {
                            c.set(&[x, i, j, y], a.get(&[x, i, j, y]));
                        }
                    }
                }
            }
            for x in 0..bl {
                for i in 0..PHYS {
                    for j in 0..PHYS {
                        for y in 0..br {
                            c.set(&[x + b_l_off, i, j, y + b_r_off], b.get(&[x, i, j, y]));
                        }
                    }
                }
            }
            cores.push(c);
        }
        Mpo::new(cores)
    }

    pub fn trace(&self) -> C64 {
        let mut env = vec![ONE];
        for c in &self.cores {
            let (l, r) = (c.shape()[0], c.shape()[3]);
            let mut next = vec![ZERO; r];
            for a in 0..l {
                if env[a] == ZERO {
                    continue;
                }
                for i in 0..PHYS {
                    for b in 0..r {
                        next[b] += env[a] * c.get(&[a, i, i, b]);
                    }
                }
            }
            env = next;
        }
        env[0]
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Mpo) -> Result<C64> {
        check_same_length(self.n_sites(), other.n_sites())?;
        let mut env = vec![ONE];
        let mut rb = 1usize;
        for (a, b) in self.cores.iter().zip(&other.cores) {
            let (al, ar) = (a.shape()[0], a.shape()[3]);
            let (bl, br) = (b.shape()[0], b.shape()[3]);
            debug_assert_eq!(env.len(), al * bl);
            let mut next = vec![ZERO; ar * br];
            for x in 0..al {
                for y in 0..bl {
                    let e = env[x * rb + y];
                    if e == ZERO {
                        continue;
                    }
                    for i in 0..PHYS {
                        for j in 0..PHYS {
                            for x2 in 0..ar {
                                let ea = e * a.get(&[x, i, j, x2]);
                                for y2 in 0..br {
                                    next[x2 * br + y2] += ea * b.get(&[y, j, i, y2]);
                                }
                            }
                        }
                    }
                }
            }
            env = next;
            rb = br;
        }
        Ok(env[0])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.adjoint()
            .trace_product(self)
            .map(|v| v.re.max(0.0).sqrt())
            .unwrap_or(0.0)
    }

    /// `⟨φ|O|φ⟩` by a left-to-right zipper over the three-layer network.
    pub fn sandwich(&self, phi: &Mps) -> Result<C64> {
        check_same_length(self.n_sites(), phi.n_sites())?;
        // env[a, o, b]: bra bond a, operator bond o, ket bond b
        let mut env = DenseTensor::scalar(ONE).into_reshaped(&[1, 1, 1])?;
        for (o, s) in self.cores.iter().zip(phi.cores()) {
            let bra = s.conj();
            // (o, b, i, a')
            let t1 = env.contract(&bra, &[(0, 0)])?;
            // (b, a', j, o')
            let t2 = t1.contract(o, &[(0, 0), (2, 1)])?;
            // (a', o', b')
            env = t2.contract(s, &[(0, 0), (2, 1)])?;
        }
        Ok(env.data()[0])
    }

    /// `O|s⟩` as an MPS whose bond ranks are products of the inputs'.
    pub fn apply(&self, s: &Mps) -> Result<Mps> {
        check_same_length(self.n_sites(), s.n_sites())?;
        let cores = self
            .cores
            .iter()
            .zip(s.cores())
            .map(|(o, c)| {
                let (ol, or) = (o.shape()[0], o.shape()[3]);
                let (sl, sr) = (c.shape()[0], c.shape()[2]);
                // (o, i, o', s, s') -> (o, s, i, o', s')
                o.contract(c, &[(2, 1)])?
                    .permute(&[0, 3, 1, 2, 4])?
                    .into_reshaped(&[ol * sl, PHYS, or * sr])
            })
            .collect::<Result<Vec<_>>>()?;
        Mps::new(cores)
    }

    pub fn truncate(&self, chi_max: usize) -> Result<Mpo> {
        Ok(self.truncate_with_report(chi_max)?.mpo)
    }

    /// TT-rounding: a left-to-right orthogonalization sweep, then a
    /// right-to-left sweep keeping at most `chi_max` singular values per bond.
    pub fn truncate_with_report(&self, chi_max: usize) -> Result<Truncation> {
        if chi_max == 0 {
            return Err(Error::Argument("chi_max must be at least 1".into()));
        }
        const P: usize = PHYS * PHYS;
        let n = self.n_sites();
        let mut cores: Vec<DenseTensor> = self
            .cores
            .iter()
            .map(|c| c.reshape(&[c.shape()[0], P, c.shape()[3]]))
            .collect::<Result<_>>()?;

        for k in 0..n.saturating_sub(1) {
            let (l, r) = (cores[k].shape()[0], cores[k].shape()[2]);
            let f = cores[k].reshape(&[l * P, r])?.svd()?;
            let rank = f.rank();
            cores[k] = f.u.into_reshaped(&[l, P, rank])?;
            let mut carry = f.vh;
            for (row, &s) in f.s.iter().enumerate() {
                for x in &mut carry.data_mut()[row * r..(row + 1) * r] {
                    *x *= s;
                }
            }
            cores[k + 1] = carry.contract(&cores[k + 1], &[(1, 0)])?;
        }

        let mut discarded = vec![0.0; n.saturating_sub(1)];
        for k in (1..n).rev() {
            let (l, r) = (cores[k].shape()[0], cores[k].shape()[2]);
            let f = cores[k].reshape(&[l, P * r])?.svd()?;
            let keep = chi_max.min(f.rank());
            discarded[k - 1] = f.s[keep..].iter().map(|s| s * s).fold(0.0, |a, w| a + w).sqrt();
            let cols = P * r;
            let vh: Vec<C64> = f.vh.data()[..keep * cols].to_vec();
            cores[k] = DenseTensor::new(vec![keep, P, r], vh)?;
            let k_full = f.rank();
            let mut us = DenseTensor::zeros(&[l, keep]);
            for i in 0..l {
                for j in 0..keep {
                    us.data_mut()[i * keep + j] = f.u.data()[i * k_full + j] * f.s[j];
                }
            }
            cores[k - 1] = cores[k - 1].contract(&us, &[(2, 0)])?;
        }

        let cores = cores
            .into_iter()
            .map(|c| {
                let (l, r) = (c.shape()[0], c.shape()[2]);
                c.into_reshaped(&[l, PHYS, PHYS, r])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Truncation {
            mpo: Mpo::new(cores)?,
            discarded,
        })
    }
}
