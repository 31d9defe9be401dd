//! Tensor trains for pure states ([`Mps`]) and operators ([`Mpo`]).
//!
//! Core axes are ordered `(left bond, physical…, right bond)`; every
//! physical index has extent 2. Operator cores carry the row (output) index
//! before the column (input) index, so `core[a, i, j, b]` holds the
//! `|i⟩⟨j|` component of site `n`.

mod io;
mod mpo;
mod mps;

pub use io::TtDocument;
pub use mpo::{Mpo, Truncation};
pub use mps::Mps;

use crate::error::{Error, Result};

/// Physical dimension of every site.
pub const PHYS: usize = 2;

/// Dense conversion refuses to build more than this many amplitudes
/// (2^14, i.e. 14 qubits of state or 7 sites of operator).
pub const MAX_DENSE_ENTRIES: usize = 1 << 14;

pub(crate) fn check_same_length(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Argument(format!(
            "tensor trains have different lengths: {a} vs {b}"
        )));
    }
    Ok(())
}
