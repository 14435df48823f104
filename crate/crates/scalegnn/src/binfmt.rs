//! One little-endian array per file: an 8-byte magic, a `u64` element
//! count, then the elements.

use std::fs;
use std::path::Path;

use crate::error::{io_err, Error, Result};

pub const EDGES_MAGIC: &[u8; 8] = b"SGNEDGE1";
pub const FEATURES_MAGIC: &[u8; 8] = b"SGNFEAT1";
pub const LABELS_MAGIC: &[u8; 8] = b"SGNLABL1";
pub const SPLITS_MAGIC: &[u8; 8] = b"SGNSPLT1";
pub const HOP_MAGIC: &[u8; 8] = b"SGNHOPX1";

const HEADER: usize = 16;

fn kind(magic: &[u8; 8]) -> &'static str {
    match magic {
        EDGES_MAGIC => "edge",
        FEATURES_MAGIC => "feature",
        LABELS_MAGIC => "label",
        SPLITS_MAGIC => "split",
        _ => "hop",
    }
}

pub fn encode_u64(magic: &[u8; 8], values: &[u64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 8 * values.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_f32(magic: &[u8; 8], values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 4 * values.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Checks the header and returns the payload.
fn payload<'b>(path: &Path, bytes: &'b [u8], magic: &[u8; 8], width: u64) -> Result<&'b [u8]> {
    if bytes.len() < HEADER || &bytes[..8] != magic {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            kind: kind(magic),
        });
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let body = &bytes[HEADER..];
    let found = body.len() as u64 / width;
    if body.len() as u64 % width != 0 || found != count {
        return Err(Error::CountMismatch {
            path: path.to_path_buf(),
            expected: count,
            found,
        });
    }
    Ok(body)
}

pub fn decode_u64(path: &Path, bytes: &[u8], magic: &[u8; 8]) -> Result<Vec<u64>> {
    Ok(payload(path, bytes, magic, 8)?
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn decode_f32(path: &Path, bytes: &[u8], magic: &[u8; 8]) -> Result<Vec<f64>> {
    Ok(payload(path, bytes, magic, 4)?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect())
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_fixed() {
        let b = encode_u64(LABELS_MAGIC, &[1, 258]);
        assert_eq!(&b[..8], b"SGNLABL1");
        assert_eq!(&b[8..16], &[2, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&b[16..24], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&b[24..26], &[2, 1]);
        let p = Path::new("x");
        assert_eq!(decode_u64(p, &b, LABELS_MAGIC).unwrap(), vec![1, 258]);
        assert!(matches!(decode_u64(p, &b, EDGES_MAGIC), Err(Error::BadMagic { .. })));
        assert!(matches!(decode_u64(p, &b[..20], LABELS_MAGIC), Err(Error::CountMismatch { .. })));
        let f = encode_f32(FEATURES_MAGIC, &[0.5, -2.0]);
        assert_eq!(&f[16..20], &0.5f32.to_le_bytes());
        assert_eq!(decode_f32(p, &f, FEATURES_MAGIC).unwrap(), vec![0.5, -2.0]);
    }
}
