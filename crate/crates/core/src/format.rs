//! Shared little-endian float32 matrix container used by the VCAF, VCOF and
//! checkpoint formats.
//!
//! Layout: 4-byte ASCII magic, `version: u32`, `rows: u32`, `cols: u32`,
//! then `rows * cols` float32 values in row-major order. All integers and
//! floats are little-endian.

use std::path::Path;

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

/// A decoded float32 matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Blob {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

pub fn encode_blob(magic: &[u8; 4], rows: usize, cols: usize, data: &[f32]) -> Vec<u8> {
    debug_assert_eq!(rows * cols, data.len());
    let mut out = Vec::with_capacity(HEADER_LEN + data.len() * 4);
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes one blob from the front of `bytes`, returning it with the number
/// of bytes consumed. Trailing bytes are left to the caller.
pub fn decode_blob_prefix(magic: &[u8; 4], bytes: &[u8]) -> Result<(Blob, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            "header",
            format!("expected {HEADER_LEN} bytes, found {}", bytes.len()),
        ));
    }
    if &bytes[0..4] != magic {
        return Err(Error::format(
            "magic",
            format!(
                "expected {:?}, found {:?}",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(&bytes[0..4])
            ),
        ));
    }
    let version = read_u32(&bytes[4..8]);
    if version != FORMAT_VERSION {
        return Err(Error::format(
            "version",
            format!("unsupported version {version}, expected {FORMAT_VERSION}"),
        ));
    }
    let rows = read_u32(&bytes[8..12]) as usize;
    let cols = read_u32(&bytes[12..16]) as usize;
    let payload = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format("payload", format!("{rows}x{cols} overflows")))?;
    let available = bytes.len() - HEADER_LEN;
    if available < payload {
        return Err(Error::format(
            "payload",
            format!("expected {payload} bytes, found {available}"),
        ));
    }
    let data = bytes[HEADER_LEN..HEADER_LEN + payload]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((Blob { rows, cols, data }, HEADER_LEN + payload))
}

/// Decodes a blob that must span the whole input.
pub fn decode_blob(magic: &[u8; 4], bytes: &[u8]) -> Result<Blob> {
    let (blob, used) = decode_blob_prefix(magic, bytes)?;
    if used != bytes.len() {
        return Err(Error::format(
            "payload",
            format!("expected {used} bytes, found {} (trailing data)", bytes.len()),
        ));
    }
    Ok(blob)
}

pub(crate) fn read_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_truncation_is_reported() {
        let err = decode_blob(b"VCOF", b"VCOF").unwrap_err();
        assert!(matches!(err, Error::Format { field: "header", .. }));
    }

    #[test]
    fn payload_truncation_reports_byte_counts() {
        let mut bytes = encode_blob(b"VCOF", 2, 3, &[0.0; 6]);
        bytes.truncate(bytes.len() - 5);
        let err = decode_blob(b"VCOF", &bytes).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 24 bytes, found 19"), "{msg}");
    }

    #[test]
    fn wrong_version_is_rejected() {
        let mut bytes = encode_blob(b"VCAF", 1, 1, &[1.0]);
        bytes[4] = 9;
        let err = decode_blob(b"VCAF", &bytes).unwrap_err();
        assert!(matches!(err, Error::Format { field: "version", .. }));
    }
}
