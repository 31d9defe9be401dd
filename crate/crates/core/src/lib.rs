//! Learning low-rank locally purified tensor-network models of quantum states
//! from single-qubit measurement data.

#![allow(clippy::needless_range_loop)]

pub mod circuit;
pub mod error;
pub mod experiments;
pub mod learner;
pub mod sampling;
pub mod tensor;
pub mod tt;

pub use error::{Error, Result};
pub use tensor::{DenseTensor, C64};
