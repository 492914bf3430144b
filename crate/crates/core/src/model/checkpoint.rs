//! Binary checkpoint container.
//!
//! ```text
//! magic        6 bytes   "PACRR1"
//! config_len   u64 LE
//! config       UTF-8 JSON of PacrrConfig
//! n_tensors    u32 LE
//! per tensor:  name_len u32 LE, name UTF-8, rank u32 LE, dims u64 LE × rank, count u64 LE
//! data         f32 LE for every tensor, in header order
//! crc32        u32 LE, IEEE CRC-32 of every preceding byte
//! ```
//!
//! The format version is part of the magic string.

use std::fs;
use std::path::Path;

use super::{PacrrConfig, PacrrParams};
use crate::error::{Error, Result};
use crate::neural::{ParamGroup, Tensor};

pub const MAGIC: &[u8; 6] = b"PACRR1";

fn encode(params: &PacrrParams<f32>) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    let config = serde_json::to_vec(&params.config).expect("config serializes");
    buf.extend_from_slice(&(config.len() as u64).to_le_bytes());
    buf.extend_from_slice(&config);
    buf.extend_from_slice(&(params.groups.len() as u32).to_le_bytes());
    for g in &params.groups {
        buf.extend_from_slice(&(g.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(g.name.as_bytes());
        buf.extend_from_slice(&(g.tensor.dims().len() as u32).to_le_bytes());
        for &d in g.tensor.dims() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        buf.extend_from_slice(&(g.tensor.len() as u64).to_le_bytes());
    }
    for g in &params.groups {
        for v in g.tensor.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Checkpoint("length overflows usize".into()))
    }

    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }
}

fn decode(bytes: &[u8]) -> Result<PacrrParams<f32>> {
    if bytes.len() < MAGIC.len() + 4 {
        return Err(Error::Checkpoint("file too short".into()));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        if bytes.starts_with(b"PACRR") {
            return Err(Error::Checkpoint(format!(
                "unsupported format version `{}`",
                String::from_utf8_lossy(&bytes[5..6])
            )));
        }
        return Err(Error::Checkpoint("not a PACRR checkpoint (bad magic)".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(Error::Checkpoint("checksum mismatch".into()));
    }

    let mut r = Reader {
        bytes: body,
        pos: MAGIC.len(),
    };
    let config_len = r.u64()?;
    let config: PacrrConfig = serde_json::from_slice(r.take(config_len)?)
        .map_err(|e| Error::Checkpoint(format!("config header: {e}")))?;
    let n = r.u32()? as usize;
    let mut headers = Vec::with_capacity(n);
    for _ in 0..n {
        let name_len = r.u32()? as usize;
        let name = r.string(name_len)?;
        let rank = r.u32()? as usize;
        let dims = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let count = r.u64()?;
        if dims.iter().product::<usize>() != count {
            return Err(Error::Checkpoint(format!("tensor {name}: dims disagree with count")));
        }
        headers.push((name, dims, count));
    }
    let mut groups = Vec::with_capacity(n);
    for (name, dims, count) in headers {
        let raw = r.take(count.checked_mul(4).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        groups.push(ParamGroup::new(name, Tensor::from_vec(&dims, values)?));
    }
    if r.pos != body.len() {
        return Err(Error::Checkpoint("trailing bytes after tensor data".into()));
    }

    let expected = super::init_params::<f32>(&config)
        .map_err(|e| Error::Checkpoint(format!("stored config invalid: {e}")))?;
    for (want, got) in expected.groups.iter().zip(&groups) {
        if want.name != got.name || want.tensor.dims() != got.tensor.dims() {
            return Err(Error::Checkpoint(format!(
                "tensor `{}` {:?} does not fit config (expected `{}` {:?})",
                got.name,
                got.tensor.dims(),
                want.name,
                want.tensor.dims()
            )));
        }
    }
    if expected.groups.len() != groups.len() {
        return Err(Error::Checkpoint("wrong number of tensors for config".into()));
    }
    Ok(PacrrParams { config, groups })
}

pub fn save_params(params: &PacrrParams<f32>, path: &Path) -> Result<()> {
    fs::write(path, encode(params)).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: &Path) -> Result<PacrrParams<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    fn sample() -> PacrrParams<f32> {
        let mut cfg = PacrrConfig::tiny("kwindow");
        cfg.seed = 42;
        cfg.learning_rate = 0.0123;
        let mut p: PacrrParams<f32> = init_params(&cfg).unwrap();
        // Non-trivial biases so every tensor carries information.
        for (i, g) in p.groups.iter_mut().enumerate() {
            if g.name.ends_with("bias") || g.name == "lstm.b" {
                g.tensor.fill(0.25 * i as f32 - 1.0);
            }
        }
        p
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = sample();
        let bytes = encode(&p);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.config, p.config);
        let bits = |p: &PacrrParams<f32>| p.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&p));
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = encode(&sample());
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::Checkpoint(m)) if m.contains("magic")));
    }

    #[test]
    fn other_version_rejected() {
        let mut bytes = encode(&sample());
        bytes[5] = b'2';
        assert!(matches!(decode(&bytes), Err(Error::Checkpoint(m)) if m.contains("version")));
    }

    #[test]
    fn corruption_fails_checksum() {
        let mut bytes = encode(&sample());
        let mid = bytes.len() - 10;
        bytes[mid] ^= 0x40;
        assert!(matches!(decode(&bytes), Err(Error::Checkpoint(m)) if m.contains("checksum")));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pacrr");
        let p = sample();
        save_params(&p, &path).unwrap();
        assert_eq!(load_params(&path).unwrap(), p);
    }
}
