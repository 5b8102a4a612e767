use super::{atomic_write, read_exact_f32, read_exact_u32};
use crate::dense::FeatureMatrix;
use crate::error::{Error, Result};
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 4] = b"MMF1";

/// Serialize a feature matrix: 4-byte magic, row and column counts as
/// little-endian u32, then the payload as little-endian f32, row-major.
pub fn encode(m: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * m.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.n_rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.n_cols() as u32).to_le_bytes());
    for &v in m.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < 12 {
        return Err(Error::Format("feature file shorter than its header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format(format!(
            "bad feature file magic {:?}",
            &bytes[..4]
        )));
    }
    let n_rows = read_exact_u32(bytes, 4) as usize;
    let dim = read_exact_u32(bytes, 8) as usize;
    let expected = 12 + 4 * n_rows * dim;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "feature file length {} does not match header ({} rows x {} dims needs {})",
            bytes.len(),
            n_rows,
            dim,
            expected
        )));
    }
    let mut data = Vec::with_capacity(n_rows * dim);
    for k in 0..n_rows * dim {
        data.push(read_exact_f32(bytes, 12 + 4 * k));
    }
    FeatureMatrix::from_vec(n_rows, dim, data)
}

pub fn save(path: &Path, m: &FeatureMatrix) -> Result<()> {
    atomic_write(path, &encode(m))
}

/// Load features from either the binary format (detected by magic) or the
/// text fallback: one row per line of whitespace-separated floats.
pub fn load(path: &Path) -> Result<FeatureMatrix> {
    let bytes = fs::read(path)?;
    if bytes.len() >= 4 && &bytes[..4] == MAGIC {
        return decode(&bytes);
    }
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Format("feature file is neither binary nor UTF-8 text".into()))?;
    parse_text(&text)
}

fn parse_text(text: &str) -> Result<FeatureMatrix> {
    let mut rows: Vec<Vec<f32>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split_whitespace() {
            let v: f32 = tok.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                msg: format!("'{}' is not a number", tok),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format("feature text file has no rows".into()));
    }
    FeatureMatrix::from_rows(&rows)
}
