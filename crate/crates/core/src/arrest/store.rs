//! Versioned binary container for trained network weights.
//!
//! Layout (all integers little-endian):
//! `magic "BRDYARN\0" | version u32 | config-JSON (u32 length + bytes) |
//! tensor count u32 | tensors | fnv1a-64 checksum of everything above`.
//! Each tensor is `name (u16 length + utf8) | rank u8 | dims u32 each |
//! f64 data`. Loading refuses version or checksum mismatches.

use std::io::{Read, Write};

use super::tensor::{fnv1a64, Tensor};
use super::{ArrestError, ConvBlock, DenseParams, LstmParams, NetConfig, NetParams};

const MAGIC: &[u8; 8] = b"BRDYARN\0";
pub const MODEL_VERSION: u32 = 1;

fn push_tensor(buf: &mut Vec<u8>, name: &str, t: &Tensor) {
    buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    buf.push(t.shape.len() as u8);
    for &d in &t.shape {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in &t.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serialize trained parameters (weights plus running statistics).
pub fn save_model<W: Write>(p: &NetParams, mut w: W) -> Result<(), ArrestError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    let cfg = serde_json::to_vec(&p.config)
        .map_err(|e| ArrestError::ModelFormat(format!("config encode: {e}")))?;
    buf.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    buf.extend_from_slice(&cfg);
    let tensors = p.all_tensors();
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in &tensors {
        push_tensor(&mut buf, name, t);
    }
    let checksum = fnv1a64(&buf);
    buf.extend_from_slice(&checksum.to_le_bytes());
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ArrestError> {
        if self.pos + n > self.buf.len() {
            return Err(ArrestError::ModelFormat("truncated model file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, ArrestError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ArrestError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8, ArrestError> {
        Ok(self.take(1)?[0])
    }
}

fn read_tensor(c: &mut Cursor) -> Result<(String, Tensor), ArrestError> {
    let name_len = c.u16()? as usize;
    let name = String::from_utf8(c.take(name_len)?.to_vec())
        .map_err(|_| ArrestError::ModelFormat("bad tensor name".into()))?;
    let rank = c.u8()? as usize;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(c.u32()? as usize);
    }
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        data.push(f64::from_le_bytes(c.take(8)?.try_into().unwrap()));
    }
    Ok((name, Tensor { shape, data }))
}

/// Load parameters, verifying magic, version, and checksum.
pub fn load_model<R: Read>(mut r: R) -> Result<NetParams, ArrestError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < MAGIC.len() + 4 + 8 {
        return Err(ArrestError::ModelFormat("file too short".into()));
    }
    let (body, tail) = buf.split_at(buf.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    if fnv1a64(body) != stored {
        return Err(ArrestError::ChecksumMismatch);
    }
    let mut c = Cursor { buf: body, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(ArrestError::ModelFormat("bad magic".into()));
    }
    let version = c.u32()?;
    if version != MODEL_VERSION {
        return Err(ArrestError::VersionMismatch { found: version });
    }
    let cfg_len = c.u32()? as usize;
    let config: NetConfig = serde_json::from_slice(c.take(cfg_len)?)
        .map_err(|e| ArrestError::ModelFormat(format!("config decode: {e}")))?;
    config.validate()?;
    let n_tensors = c.u32()? as usize;
    let mut tensors = std::collections::BTreeMap::new();
    for _ in 0..n_tensors {
        let (name, t) = read_tensor(&mut c)?;
        tensors.insert(name, t);
    }
    if c.pos != body.len() {
        return Err(ArrestError::ModelFormat("trailing bytes".into()));
    }

    let mut grab = |name: &str| -> Result<Tensor, ArrestError> {
        tensors
            .remove(name)
            .ok_or_else(|| ArrestError::ModelFormat(format!("missing tensor {name}")))
    };
    let lstm = LstmParams {
        w_ih: grab("lstm.w_ih")?,
        w_hh: grab("lstm.w_hh")?,
        b: grab("lstm.b")?,
    };
    let mut blocks = Vec::with_capacity(3);
    for i in 0..3 {
        blocks.push(ConvBlock {
            w: grab(&format!("conv{i}.w"))?,
            b: grab(&format!("conv{i}.b"))?,
            gamma: grab(&format!("conv{i}.gamma"))?,
            beta: grab(&format!("conv{i}.beta"))?,
            running_mean: grab(&format!("conv{i}.running_mean"))?,
            running_var: grab(&format!("conv{i}.running_var"))?,
        });
    }
    let head = DenseParams {
        w: grab("head.w")?,
        b: grab("head.b")?,
    };
    let p = NetParams {
        config,
        lstm,
        blocks,
        head,
    };
    // shape sanity against the config
    let expected = super::init_params(&p.config)?;
    for ((_, a), (_, b)) in p.all_tensors().iter().zip(expected.all_tensors().iter()) {
        if a.shape != b.shape {
            return Err(ArrestError::ModelFormat("tensor shape mismatch".into()));
        }
    }
    if !p.all_finite() {
        return Err(ArrestError::ModelFormat("non-finite weights".into()));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::super::{forward, init_params, NetConfig, SeriesSample};
    use super::*;
    use crate::rng::{normal, seeded_rng};

    fn sample() -> SeriesSample {
        let mut rng = seeded_rng(4);
        let mut s = SeriesSample {
            channels: vec![
                (0..10).map(|_| normal(&mut rng)).collect(),
                (0..10).map(|_| normal(&mut rng)).collect(),
            ],
            mask: vec![true; 10],
            label: None,
        };
        s.mask[8] = false;
        s.mask[9] = false;
        for ch in s.channels.iter_mut() {
            ch[8] = 0.0;
            ch[9] = 0.0;
        }
        s
    }

    #[test]
    fn round_trip_gives_bit_identical_probs() {
        let p = init_params(&NetConfig::default()).unwrap();
        let mut buf = Vec::new();
        save_model(&p, &mut buf).unwrap();
        let q = load_model(&buf[..]).unwrap();
        assert_eq!(p, q);
        let s = sample();
        let a = forward(&p, &s).unwrap();
        let b = forward(&q, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupted_byte_fails_checksum() {
        let p = init_params(&NetConfig::default()).unwrap();
        let mut buf = Vec::new();
        save_model(&p, &mut buf).unwrap();
        let mid = buf.len() / 2;
        buf[mid] ^= 0xff;
        assert!(matches!(
            load_model(&buf[..]),
            Err(ArrestError::ChecksumMismatch)
        ));
    }

    #[test]
    fn wrong_version_is_refused() {
        let p = init_params(&NetConfig::default()).unwrap();
        let mut buf = Vec::new();
        save_model(&p, &mut buf).unwrap();
        // bump the version field then re-stamp the checksum
        buf[8] = 0x2a;
        let body_len = buf.len() - 8;
        let sum = fnv1a64(&buf[..body_len]);
        let n = buf.len();
        buf[n - 8..].copy_from_slice(&sum.to_le_bytes());
        assert!(matches!(
            load_model(&buf[..]),
            Err(ArrestError::VersionMismatch { found: 0x2a })
        ));
    }
}
