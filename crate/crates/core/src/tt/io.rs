//! Text serialization of tensor trains.
//!
//! A document is a JSON object
//! `{version, kind, n_sites, bond_ranks, cores}` where `cores[n]` is a nested
//! array following the core's axes and every leaf is an `[re, im]` pair.
//! Floats are written in shortest round-trip form, so reading a document
//! back reproduces every core bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Mpo, Mps};
use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, C64};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TtDocument {
    pub version: u32,
    pub kind: String,
    pub n_sites: usize,
    pub bond_ranks: Vec<usize>,
    pub cores: Vec<Value>,
}

impl TtDocument {
    pub fn from_mps(s: &Mps) -> Self {
        Self {
            version: FORMAT_VERSION,
            kind: "mps".into(),
            n_sites: s.n_sites(),
            bond_ranks: s.bond_ranks(),
            cores: s.cores().iter().map(nest).collect(),
        }
    }

    pub fn from_mpo(o: &Mpo) -> Self {
        Self {
            version: FORMAT_VERSION,
            kind: "mpo".into(),
            n_sites: o.n_sites(),
            bond_ranks: o.bond_ranks(),
            cores: o.cores().iter().map(nest).collect(),
        }
    }

    fn check_header(&self, kind: &str) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {}", self.version)));
        }
        if self.kind != kind {
            return Err(Error::Format(format!("expected {kind}, found {}", self.kind)));
        }
        if self.cores.len() != self.n_sites || self.bond_ranks.len() != self.n_sites + 1 {
            return Err(Error::Format("site count disagrees with cores or ranks".into()));
        }
        Ok(())
    }

    pub fn to_mps(&self) -> Result<Mps> {
        self.check_header("mps")?;
        let cores = self
            .cores
            .iter()
            .enumerate()
            .map(|(n, v)| unnest(v, &[self.bond_ranks[n], 2, self.bond_ranks[n + 1]]))
            .collect::<Result<Vec<_>>>()?;
        Mps::new(cores)
    }

    pub fn to_mpo(&self) -> Result<Mpo> {
        self.check_header("mpo")?;
        let cores = self
            .cores
            .iter()
            .enumerate()
            .map(|(n, v)| unnest(v, &[self.bond_ranks[n], 2, 2, self.bond_ranks[n + 1]]))
            .collect::<Result<Vec<_>>>()?;
        Mpo::new(cores)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Mps {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, TtDocument::from_mps(self).to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        TtDocument::from_json(&fs::read_to_string(path)?)?.to_mps()
    }
}

impl Mpo {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, TtDocument::from_mpo(self).to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        TtDocument::from_json(&fs::read_to_string(path)?)?.to_mpo()
    }
}

fn nest(t: &DenseTensor) -> Value {
    fn build(data: &[C64], shape: &[usize]) -> Value {
        if shape.is_empty() {
            let x = data[0];
            return Value::from(vec![x.re, x.im]);
        }
        let stride = data.len() / shape[0];
        Value::Array(
            (0..shape[0])
                .map(|k| build(&data[k * stride..(k + 1) * stride], &shape[1..]))
                .collect(),
        )
    }
    build(t.data(), t.shape())
}

fn unnest(v: &Value, shape: &[usize]) -> Result<DenseTensor> {
    fn walk(v: &Value, shape: &[usize], out: &mut Vec<C64>) -> Result<()> {
        let arr = v
            .as_array()
            .ok_or_else(|| Error::Format("expected a nested array".into()))?;
        if shape.is_empty() {
            let pair: Option<Vec<f64>> = arr.iter().map(Value::as_f64).collect();
            match pair.as_deref() {
                Some([re, im]) => out.push(C64::new(*re, *im)),
                _ => return Err(Error::Format("expected an [re, im] pair".into())),
            }
            return Ok(());
        }
        if arr.len() != shape[0] {
            return Err(Error::Format(format!(
                "axis of extent {} holds {} entries",
                shape[0],
                arr.len()
            )));
        }
        arr.iter().try_for_each(|x| walk(x, &shape[1..], out))
    }
    let mut data = Vec::with_capacity(shape.iter().product());
    walk(v, shape, &mut data)?;
    DenseTensor::new(shape.to_vec(), data)
}
