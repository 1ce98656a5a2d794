//! Binary checkpoint format.
//!
//! ```text
//! b"YRCK" | u32 version | u32 header_len | header (JSON)
//! u32 tensor_count
//! per tensor: u32 name_len | name | u32 ndim | u64 dims[ndim] | f64 data[prod(dims)]
//! ```
//!
//! All integers and floats are little-endian. Optimizer accumulators are
//! stored as tensors named `adagrad/<parameter>`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::network::Network;
use super::{Estimator, EstimatorSpec};

const MAGIC: &[u8; 4] = b"YRCK";
const VERSION: u32 = 1;
const ACC_PREFIX: &str = "adagrad/";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    spec: EstimatorSpec,
    attributes: Vec<String>,
    step: u64,
    zero_alien: bool,
}

/// Tensors of `nets` in [`Estimator::parameter_info`] order.
fn tensors(nets: &[Network]) -> Vec<&[f64]> {
    let mut out = Vec::new();
    for n in nets {
        out.push(n.embedding.as_slice());
        out.extend(n.dense_tensors().into_iter().map(|(_, _, t)| t));
    }
    out
}

fn tensors_mut(nets: &mut [Network]) -> Vec<&mut [f64]> {
    nets.iter_mut().flat_map(Network::tensors_mut).collect()
}

impl Estimator {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            spec: self.spec,
            attributes: self.attributes.clone(),
            step: self.step,
            zero_alien: self.zero_alien,
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let info = self.parameter_info();
        let mut named: Vec<(String, &[usize], &[f64])> = info
            .iter()
            .zip(tensors(&self.networks))
            .map(|(p, t)| (p.name.clone(), p.shape.as_slice(), t))
            .collect();
        if let Some(acc) = &self.accumulators {
            named.extend(
                info.iter()
                    .zip(tensors(acc))
                    .map(|(p, t)| (format!("{ACC_PREFIX}{}", p.name), p.shape.as_slice(), t)),
            );
        }

        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(named.len() as u32).to_le_bytes());
        for (name, shape, data) in named {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for &d in shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let len = r.u32()? as usize;
        let header: Header = serde_json::from_slice(r.take(len)?)
            .map_err(|e| Error::Checkpoint(format!("header: {e}")))?;

        let mut stored: BTreeMap<String, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
        for _ in 0..r.u32()? {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let count = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
            let count =
                count.ok_or_else(|| Error::Checkpoint(format!("tensor `{name}` too large")))?;
            let data = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            if stored.insert(name.clone(), (shape, data)).is_some() {
                return Err(Error::Checkpoint(format!("duplicate tensor `{name}`")));
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
        }

        let mut est = Estimator::new(header.spec, header.attributes, 0)
            .map_err(|e| Error::Checkpoint(format!("header spec: {e}")))?;
        est.step = header.step;
        est.zero_alien = header.zero_alien;
        let info = est.parameter_info();

        let has_acc = stored.keys().any(|k| k.starts_with(ACC_PREFIX));
        let mut fill = |nets: &mut [Network], prefix: &str| -> Result<()> {
            for (p, dst) in info.iter().zip(tensors_mut(nets)) {
                let name = format!("{prefix}{}", p.name);
                let (shape, data) = stored
                    .remove(&name)
                    .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))?;
                if shape != p.shape {
                    return Err(Error::Checkpoint(format!(
                        "tensor `{name}` has shape {shape:?}, expected {:?}",
                        p.shape
                    )));
                }
                dst.copy_from_slice(&data);
            }
            Ok(())
        };
        fill(&mut est.networks, "")?;
        if has_acc {
            let mut acc: Vec<Network> = est.networks.iter().map(|n| n.filled(0.0)).collect();
            fill(&mut acc, ACC_PREFIX)?;
            est.accumulators = Some(acc);
        }
        if let Some(extra) = stored.keys().next() {
            return Err(Error::Checkpoint(format!("unexpected tensor `{extra}`")));
        }
        if est
            .networks
            .iter()
            .flat_map(|n| tensors(std::slice::from_ref(n)))
            .flatten()
            .any(|v| !v.is_finite())
        {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(est)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}
