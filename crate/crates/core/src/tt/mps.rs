use rand::Rng;
use rand_distr::StandardNormal;

use super::{MAX_DENSE_ENTRIES, PHYS};
use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, C64, ONE, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub struct Mps {
    cores: Vec<DenseTensor>,
}

impl Mps {
    /// Validates core shapes `(r_{n-1}, 2, r_n)` with unit boundary ranks.
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Argument("an MPS needs at least one site".into()));
        }
        for (n, c) in cores.iter().enumerate() {
            if c.ndim() != 3 || c.shape()[1] != PHYS {
                return Err(Error::Dimension(format!(
                    "site {n}: expected (l, 2, r) core, got {:?}",
                    c.shape()
                )));
            }
        }
        check_bonds(cores.iter().map(|c| (c.shape()[0], c.shape()[2])))?;
        Ok(Self { cores })
    }

    /// Rank-1 product state `⊗ₙ (a_n|0⟩ + b_n|1⟩)`.
    pub fn product(states: &[[C64; 2]]) -> Result<Self> {
        let cores = states
            .iter()
            .map(|s| DenseTensor::new(vec![1, 2, 1], s.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(cores)
    }

    /// Computational basis state `|b_1 … b_N⟩`.
    pub fn basis(bits: &[u8]) -> Result<Self> {
        let states: Vec<[C64; 2]> = bits
            .iter()
            .map(|&b| if b == 0 { [ONE, ZERO] } else { [ZERO, ONE] })
            .collect();
        Self::product(&states)
    }

    /// Cores with independent standard-normal real and imaginary parts;
    /// `ranks` lists `r_0 … r_N`.
    pub fn random_gaussian<R: Rng + ?Sized>(ranks: &[usize], rng: &mut R) -> Result<Self> {
        if ranks.len() < 2 {
            return Err(Error::Argument("need at least one site".into()));
        }
        let cores = ranks
            .windows(2)
            .map(|w| DenseTensor::from_fn(&[w[0], PHYS, w[1]], |_| gaussian(rng)))
            .collect();
        Self::new(cores)
    }

    pub fn zero_state(n_sites: usize) -> Result<Self> {
        Self::basis(&vec![0; n_sites])
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

    /// Bond extents `r_0 … r_N`.
    pub fn bond_ranks(&self) -> Vec<usize> {
        let mut r = vec![self.cores[0].shape()[0]];
        r.extend(self.cores.iter().map(|c| c.shape()[2]));
        r
    }

    pub fn max_rank(&self) -> usize {
        self.bond_ranks().into_iter().max().unwrap_or(1)
    }

    /// Replaces core `n`; the new core must keep the neighbouring bonds.
    pub fn set_core(&mut self, n: usize, core: DenseTensor) -> Result<()> {
        if core.shape() != self.cores[n].shape() {
            return Err(Error::Dimension(format!(
                "site {n}: replacement shape {:?} differs from {:?}",
                core.shape(),
                self.cores[n].shape()
            )));
        }
        self.cores[n] = core;
        Ok(())
    }

    /// Replaces two neighbouring cores at once, allowing their shared bond to change.
    pub(crate) fn set_pair(&mut self, n: usize, left: DenseTensor, right: DenseTensor) -> Result<()> {
        let mut cores = self.cores.clone();
        cores[n] = left;
        cores[n + 1] = right;
        *self = Self::new(cores)?;
        Ok(())
    }

    pub fn scale(&self, alpha: C64) -> Self {
        let mut out = self.clone();
        out.cores[0].scale_in_place(alpha);
        out
    }

    /// `⟨self|other⟩`, contracted left to right.
    pub fn inner(&self, other: &Mps) -> Result<C64> {
        super::check_same_length(self.n_sites(), other.n_sites())?;
        // env[a, b]: a is the bra bond, b the ket bond
        let mut env = vec![ONE];
        let (mut ra, mut rb) = (1usize, 1usize);
        for (ca, cb) in self.cores.iter().zip(&other.cores) {
            let (na, nb) = (ca.shape()[2], cb.shape()[2]);
            let (da, db) = (ca.data(), cb.data());
            let mut next = vec![ZERO; na * nb];
            for a in 0..ra {
                for b in 0..rb {
                    let e = env[a * rb + b];
                    if e == ZERO {
                        continue;
                    }
                    for i in 0..PHYS {
                        for a2 in 0..na {
                            let x = e * da[(a * PHYS + i) * na + a2].conj();
                            for b2 in 0..nb {
                                next[a2 * nb + b2] += x * db[(b * PHYS + i) * nb + b2];
                            }
                        }
                    }
                }
            }
            env = next;
            ra = na;
            rb = nb;
        }
        Ok(env[0])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.inner(self).map(|v| v.re).unwrap_or(0.0)
    }

    /// Amplitude tensor with one axis of extent 2 per site.
    pub fn to_dense(&self) -> Result<DenseTensor> {
        let n = self.n_sites();
        if n > 14 || (1usize << n) > MAX_DENSE_ENTRIES {
            return Err(Error::Capacity(format!(
                "{n} sites exceed the dense conversion limit"
            )));
        }
        let mut acc = self.cores[0].clone();
        for core in &self.cores[1..] {
            let last = acc.ndim() - 1;
            acc = acc.contract(core, &[(last, 0)])?;
        }
        // drop the unit boundary axes
        acc.into_reshaped(&vec![PHYS; n])
    }
}

pub(crate) fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub(crate) fn check_bonds(bonds: impl Iterator<Item = (usize, usize)>) -> Result<()> {
    let bonds: Vec<(usize, usize)> = bonds.collect();
    if bonds[0].0 != 1 || bonds[bonds.len() - 1].1 != 1 {
        return Err(Error::Dimension("boundary bond ranks must equal 1".into()));
    }
    for (n, w) in bonds.windows(2).enumerate() {
        if w[0].1 != w[1].0 {
            return Err(Error::Dimension(format!(
                "bond {}: right extent {} of site {n} differs from left extent {} of site {}",
                n + 1,
                w[0].1,
                w[1].0,
                n + 1
            )));
        }
    }
    Ok(())
}
