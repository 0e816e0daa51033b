//! Binary parameter checkpoints.
//!
//! Layout, little-endian: `b"S2PK"`, `u16` version, `u32` tensor count, then
//! per tensor `u32` name length, UTF-8 name, `u32` rows, `u32` cols and
//! `rows * cols` `f64` values, in parameter declaration order.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grad::Param;
use crate::pipeline::Pipeline;
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 4] = b"S2PK";
pub const VERSION: u16 = 1;

pub fn encode(params: &[&Param]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.value.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(p.value.cols() as u32).to_le_bytes());
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Param>> {
    let mut r = Reader { bytes };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = r.u32()?;
    let mut params = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = r.u32()?;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let (rows, cols) = (r.u32()?, r.u32()?);
        let n = rows
            .checked_mul(cols)
            .filter(|n| n.checked_mul(8).is_some())
            .ok_or_else(|| Error::Checkpoint(format!("tensor `{name}` too large")))?;
        let raw = r.take(n * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        params.push(Param::new(name, Matrix::from_vec(rows, cols, data)));
    }
    if !r.bytes.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", r.bytes.len())));
    }
    Ok(params)
}

pub fn save(pipeline: &Pipeline, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(&pipeline.params()))?;
    Ok(())
}

/// Loads parameter values into `pipeline`, which must declare the same
/// names and shapes.
pub fn load(pipeline: &mut Pipeline, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let stored = decode(&bytes)?;
    let mut params = pipeline.params_mut();
    if stored.len() != params.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} tensors, pipeline declares {}",
            stored.len(),
            params.len()
        )));
    }
    for (p, s) in params.iter().zip(&stored) {
        if p.name != s.name || p.value.shape() != s.value.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor `{}` {:?} does not match `{}` {:?}",
                s.name,
                s.value.shape(),
                p.name,
                p.value.shape()
            )));
        }
    }
    for (p, s) in params.iter_mut().zip(stored) {
        p.value = s.value;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let a = Param::new("w", Matrix::from_vec(2, 3, vec![1.0, -2.0, 3.5, f64::MIN_POSITIVE, 0.0, -0.0]));
        let b = Param::new("shift.mean_bias", Matrix::zeros(24, 1));
        let bytes = encode(&[&a, &b]);
        assert_eq!(&bytes[..4], b"S2PK");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].name, "w");
        assert_eq!(back[0].value.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            a.value.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(back[1].value.shape(), (24, 1));
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let bytes = encode(&[&Param::new("w", Matrix::zeros(2, 2))]);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(decode(&extra).is_err());
    }
}
