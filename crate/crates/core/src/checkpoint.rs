//! Flat binary parameter checkpoints.
//!
//! Layout (all integers little-endian `u64`):
//!
//! ```text
//! "DNT1" | count | { name_len | name bytes | rank | dims... | f32 data... } * count
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"DNT1";

pub fn encode(tensors: &[(String, Tensor<f32>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u64).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u64).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                CoreError::Format(format!("truncated at byte {} (wanted {n} more)", self.pos))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| CoreError::Format(format!("length {v} overflows")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<(String, Tensor<f32>)>> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(CoreError::Format("bad magic, expected DNT1".into()));
    }
    let count = c.usize()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = c.usize()?;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|e| CoreError::Format(format!("tensor name is not UTF-8: {e}")))?
            .to_string();
        let rank = c.usize()?;
        let shape = (0..rank).map(|_| c.usize()).collect::<Result<Vec<_>>>()?;
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| CoreError::Format(format!("tensor '{name}' is too large")))?;
        let raw = c.take(
            numel
                .checked_mul(4)
                .ok_or_else(|| CoreError::Format("overflow".into()))?,
        )?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        let t = Tensor::new(&shape, data)
            .map_err(|e| CoreError::Format(format!("tensor '{name}': {e}")))?;
        out.push((name, t));
    }
    if c.pos != bytes.len() {
        return Err(CoreError::Format(format!(
            "{} trailing bytes",
            bytes.len() - c.pos
        )));
    }
    Ok(out)
}

pub fn save(path: impl AsRef<Path>, tensors: &[(String, Tensor<f32>)]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(tensors))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Vec<(String, Tensor<f32>)>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    decode(&buf)
}
