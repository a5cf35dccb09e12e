// SPDX-License-Identifier: MIT OR Apache-2.0

//! `APRB` activation store file format, version 1. All integers little-endian.
//!
//! ```text
//! magic     "APRB"           4 bytes
//! version   u16 = 1
//! dtype     u8               0 = f32, 1 = i8
//! reserved  u8 = 0
//! n_layers  u32
//! n_samples u32
//! n_neurons u32
//! pair ids  n_samples x (len u16, UTF-8 bytes)
//! layers    n_layers x (scale f64, n_samples * n_neurons values, row-major)
//! crc32     u32 over every preceding byte (IEEE polynomial)
//! ```

use std::fs;
use std::path::Path;

use super::{ActivationStore, Dtype, LayerData};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"APRB";
pub const FORMAT_VERSION: u16 = 1;

pub fn encode_store(store: &ActivationStore) -> Result<Vec<u8>> {
    let n_layers = u32::try_from(store.n_layers()).map_err(|_| Error::Shape("too many layers".into()))?;
    let n_samples = u32::try_from(store.n_samples()).map_err(|_| Error::Shape("too many samples".into()))?;
    let n_neurons = u32::try_from(store.n_neurons()).map_err(|_| Error::Shape("too many neurons".into()))?;
    let cells = store.n_samples() * store.n_neurons();

    let mut out = Vec::with_capacity(32 + store.n_layers() * (8 + cells * store.dtype().width()));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(store.dtype().tag());
    out.push(0);
    out.extend_from_slice(&n_layers.to_le_bytes());
    out.extend_from_slice(&n_samples.to_le_bytes());
    out.extend_from_slice(&n_neurons.to_le_bytes());
    for id in store.pair_ids() {
        let len = u16::try_from(id.len())
            .map_err(|_| Error::Shape(format!("pair id longer than 65535 bytes: {id:.32}...")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    for l in 0..store.n_layers() {
        let layer = store.layer_data(l);
        out.extend_from_slice(&layer.scale().to_le_bytes());
        match layer {
            LayerData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            LayerData::I8 { codes, .. } => out.extend(codes.iter().map(|&c| c as u8)),
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(Error::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_store(bytes: &[u8]) -> Result<ActivationStore> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = c.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dtype_tag = c.take(1)?[0];
    let _reserved = c.take(1)?;
    let n_layers = c.u32()? as usize;
    let n_samples = c.u32()? as usize;
    let n_neurons = c.u32()? as usize;

    // Verify the checksum before trusting any size field further.
    if bytes.len() < c.pos + 4 {
        return Err(Error::Truncated);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    let dtype = Dtype::from_tag(dtype_tag)?;

    let mut c = Cursor { buf: body, pos: c.pos };
    let parsed = (|| -> Result<ActivationStore> {
        let mut pair_ids = Vec::with_capacity(n_samples.min(body.len() / 2));
        for _ in 0..n_samples {
            let len = c.u16()? as usize;
            let raw = c.take(len)?;
            let id = std::str::from_utf8(raw).map_err(|_| Error::Shape("pair id is not UTF-8".into()))?;
            pair_ids.push(id.to_string());
        }
        let cells = n_samples.checked_mul(n_neurons).ok_or(Error::Truncated)?;
        let mut layers = Vec::with_capacity(n_layers.min(body.len() / 8));
        for _ in 0..n_layers {
            let scale = c.f64()?;
            let payload = c.take(cells.checked_mul(dtype.width()).ok_or(Error::Truncated)?)?;
            layers.push(match dtype {
                Dtype::F32 => LayerData::F32(
                    payload.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect(),
                ),
                Dtype::I8 => LayerData::I8 { codes: payload.iter().map(|&b| b as i8).collect(), scale },
            });
        }
        if c.pos != body.len() {
            return Err(Error::LengthMismatch { expected: c.pos + 4, actual: bytes.len() });
        }
        ActivationStore::from_layers(dtype, n_neurons, pair_ids, layers)
    })();

    if stored != computed {
        // A short file usually shows up as both; report the structural cause.
        return match parsed {
            Err(Error::Truncated) => Err(Error::Truncated),
            _ => Err(Error::Checksum { stored, computed }),
        };
    }
    parsed
}

pub fn write_store(store: &ActivationStore, path: &Path) -> Result<()> {
    let bytes = encode_store(store)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_store(path: &Path) -> Result<ActivationStore> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_store(&bytes)
}
