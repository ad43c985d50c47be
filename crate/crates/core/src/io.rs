//! On-disk formats.
//!
//! Binary matrix layout (little-endian throughout):
//!
//! ```text
//! offset  size  field
//! 0       4     magic  b"RMRA"
//! 4       2     format version (u16, currently 1)
//! 6       4     rows (u32)
//! 10      4     cols (u32)
//! 14      8·r·c row-major IEEE-754 f64 payload
//! ```
//!
//! CSV files are headerless and comma-separated unless stated otherwise.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RMRA";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 14;

pub fn encode_matrix(m: &DMatrix<f64>) -> Vec<u8> {
    let (rows, cols) = m.shape();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * rows * cols);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(rows as u32).to_le_bytes());
    buf.extend_from_slice(&(cols as u32).to_le_bytes());
    for i in 0..rows {
        for j in 0..cols {
            buf.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    buf
}

pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<DMatrix<f64>> {
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad("bad magic bytes".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let expected = HEADER_LEN + 8 * rows * cols;
    if bytes.len() != expected {
        return Err(bad(format!(
            "payload length {} does not match {rows}x{cols}",
            bytes.len() - HEADER_LEN
        )));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for chunk in bytes[HEADER_LEN..].chunks_exact(8) {
        data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, encode_matrix(m))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = fs::read(path)?;
    decode_matrix(&bytes, path)
}

pub fn write_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| format_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Headerless numeric CSV; every row must have the same width.
pub fn read_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    reason: format!("row {} has {} columns, expected {w}", line + 1, rec.len()),
                })
            }
            _ => {}
        }
        for field in rec.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                reason: format!("row {}: cannot parse {field:?}", line + 1),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, width.unwrap_or(0), &data))
}

/// Reads `.rmra` binary or CSV, chosen by extension.
pub fn read_any(path: &Path) -> Result<DMatrix<f64>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_csv(path),
        _ => read_matrix(path),
    }
}

/// Shortest round-trip decimal representation.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}
