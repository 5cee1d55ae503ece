//! Binary field files with a JSON sidecar.
//!
//! Layout: 8-byte magic `PATMGFLD`, u32 format version, u32 reserved (zero),
//! u32 rank, one u32 per axis, then the payload as little-endian f64 in
//! row-major order. The sidecar (`<file>.json`) carries spacing, time step
//! and units.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};

pub const MAGIC: &[u8; 8] = b"PATMGFLD";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    #[serde(default)]
    pub spacing: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub units: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

pub fn encode(field: &ArrayD<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 + 4 * field.ndim() + 8 * field.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&(field.ndim() as u32).to_le_bytes());
    for &n in field.shape() {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for v in field.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ArrayD<f64>> {
    let fail = |m: &str| PatError::Format(m.to_string());
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(fail("missing magic header"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(8);
    if version != VERSION {
        return Err(PatError::Format(format!("unsupported version {version}")));
    }
    let rank = word(16) as usize;
    let header = 20 + 4 * rank;
    if bytes.len() < header {
        return Err(fail("truncated dims"));
    }
    let dims: Vec<usize> = (0..rank).map(|i| word(20 + 4 * i) as usize).collect();
    let count: usize = dims.iter().product();
    if bytes.len() != header + 8 * count {
        return Err(PatError::Format(format!(
            "payload holds {} bytes, dims {:?} need {}",
            bytes.len() - header,
            dims,
            8 * count
        )));
    }
    let data = bytes[header..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ArrayD::from_shape_vec(IxDyn(&dims), data).map_err(|e| PatError::Format(e.to_string()))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_field(path: &Path, field: &ArrayD<f64>, meta: &FieldMeta) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(field))?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<(ArrayD<f64>, FieldMeta)> {
    let field = decode(&fs::read(path)?)?;
    let side = sidecar_path(path);
    let meta = if side.exists() {
        serde_json::from_str(&fs::read_to_string(side)?)?
    } else {
        FieldMeta::default()
    };
    Ok((field, meta))
}
