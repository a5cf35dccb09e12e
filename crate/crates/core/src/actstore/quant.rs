// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Storage type of activation payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    I8,
}

impl Dtype {
    pub fn tag(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::I8 => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::I8),
            t => Err(Error::UnsupportedDtype(t)),
        }
    }

    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::I8 => 1,
        }
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dtype::F32 => "f32",
            Dtype::I8 => "i8",
        })
    }
}

impl std::str::FromStr for Dtype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Dtype::F32),
            "i8" => Ok(Dtype::I8),
            _ => Err(Error::Config(format!("unknown dtype `{s}` (f32|i8)"))),
        }
    }
}

/// Symmetric i8 scale: `max|v| / 127`, or 1 for an all-zero input.
pub fn i8_scale(values: &[f64]) -> f64 {
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        1.0
    } else {
        max_abs / 127.0
    }
}

/// i8 codes for `values` under a shared `max|v|`.
pub(crate) fn i8_codes(values: &[f64]) -> Vec<i8> {
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return vec![0; values.len()];
    }
    // v * 127 / max rather than v / scale: exact on ties such as 0.5 -> 63.5.
    values.iter().map(|v| (v * 127.0 / max_abs).round().clamp(-127.0, 127.0) as i8).collect()
}

/// Encodes `values` as little-endian bytes. Returns the bytes and the scale
/// (1 for f32).
pub fn quantize(values: &[f64], dtype: Dtype) -> Result<(Vec<u8>, f64)> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("activations"));
    }
    match dtype {
        Dtype::F32 => {
            let mut out = Vec::with_capacity(values.len() * 4);
            for &v in values {
                let f = v as f32;
                if !f.is_finite() {
                    return Err(Error::NonFinite("activations (f32 overflow)"));
                }
                out.extend_from_slice(&f.to_le_bytes());
            }
            Ok((out, 1.0))
        }
        Dtype::I8 => {
            let bytes = i8_codes(values).into_iter().map(|c| c as u8).collect();
            Ok((bytes, i8_scale(values)))
        }
    }
}

/// Inverse of [`quantize`]; `n_values` is the element count the metadata promises.
pub fn dequantize(bytes: &[u8], scale: f64, dtype: Dtype, n_values: usize) -> Result<Vec<f64>> {
    let expected = n_values * dtype.width();
    if bytes.len() != expected {
        return Err(Error::LengthMismatch { expected, actual: bytes.len() });
    }
    let out = match dtype {
        Dtype::F32 => bytes.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))).collect(),
        Dtype::I8 => bytes.iter().map(|&b| f64::from(b as i8) * scale).collect(),
    };
    Ok(out)
}
