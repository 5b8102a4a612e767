use super::{atomic_write, read_exact_f32, read_exact_u32};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 4] = b"MMP1";

/// Serialize trained parameters: magic, the five dimensions (users, items,
/// embedding width, visual input width, textual input width) as u32, then
/// the four tensors row-major as little-endian f32 in declaration order.
pub fn encode(params: &ModelParams<f32>) -> Vec<u8> {
    let dims = [
        params.user_emb.n_rows() as u32,
        params.item_emb.n_rows() as u32,
        params.user_emb.n_cols() as u32,
        params.proj_v.n_rows() as u32,
        params.proj_t.n_rows() as u32,
    ];
    let payload: usize = params
        .tensors()
        .iter()
        .map(|(_, t)| t.values().len())
        .sum();
    let mut out = Vec::with_capacity(24 + 4 * payload);
    out.extend_from_slice(MAGIC);
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for (_, t) in params.tensors() {
        for &v in t.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ModelParams<f32>> {
    if bytes.len() < 24 || &bytes[..4] != MAGIC {
        return Err(Error::Format("bad checkpoint header".into()));
    }
    let n_users = read_exact_u32(bytes, 4) as usize;
    let n_items = read_exact_u32(bytes, 8) as usize;
    let d = read_exact_u32(bytes, 12) as usize;
    let d_v = read_exact_u32(bytes, 16) as usize;
    let d_t = read_exact_u32(bytes, 20) as usize;
    let counts = [n_users * d, n_items * d, d_v * d, d_t * d];
    let total: usize = counts.iter().sum();
    if bytes.len() != 24 + 4 * total {
        return Err(Error::Format(format!(
            "checkpoint length {} does not match header (needs {})",
            bytes.len(),
            24 + 4 * total
        )));
    }
    let mut at = 24;
    let mut read_matrix = |rows: usize, cols: usize| -> DenseMatrix<f32> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(read_exact_f32(bytes, at));
            at += 4;
        }
        DenseMatrix::from_vec(rows, cols, data).unwrap()
    };
    Ok(ModelParams {
        user_emb: read_matrix(n_users, d),
        item_emb: read_matrix(n_items, d),
        proj_v: read_matrix(d_v, d),
        proj_t: read_matrix(d_t, d),
    })
}

pub fn save(path: &Path, params: &ModelParams<f32>) -> Result<()> {
    atomic_write(path, &encode(params))
}

pub fn load(path: &Path) -> Result<ModelParams<f32>> {
    decode(&fs::read(path)?)
}
