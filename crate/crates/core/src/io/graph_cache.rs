use super::{atomic_write, read_exact_f32, read_exact_u32, read_exact_u64};
use crate::error::{Error, Result};
use crate::sparse::SparseAdjacency;
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 4] = b"CSR1";

/// Serialize a square adjacency: magic, n as u32, nnz as u64, then the
/// offset / column / weight arrays in fixed-width little-endian.
pub fn encode(adj: &SparseAdjacency<f32>) -> Result<Vec<u8>> {
    if adj.n_rows() != adj.n_cols() {
        return Err(Error::Format(format!(
            "graph cache stores square graphs, got {}x{}",
            adj.n_rows(),
            adj.n_cols()
        )));
    }
    let n = adj.n_rows();
    let nnz = adj.nnz();
    let mut out = Vec::with_capacity(16 + 8 * (n + 1) + 8 * nnz);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(nnz as u64).to_le_bytes());
    for &o in adj.row_offsets() {
        out.extend_from_slice(&(o as u64).to_le_bytes());
    }
    for &c in adj.col_indices() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    for &w in adj.weights() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<SparseAdjacency<f32>> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(Error::Format("bad graph cache header".into()));
    }
    let n = read_exact_u32(bytes, 4) as usize;
    let nnz = read_exact_u64(bytes, 8) as usize;
    let expected = 16 + 8 * (n + 1) + 4 * nnz + 4 * nnz;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "graph cache length {} does not match header (n={}, nnz={} needs {})",
            bytes.len(),
            n,
            nnz,
            expected
        )));
    }
    let mut at = 16;
    let mut row_offsets = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        row_offsets.push(read_exact_u64(bytes, at) as usize);
        at += 8;
    }
    let mut col_indices = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        col_indices.push(read_exact_u32(bytes, at));
        at += 4;
    }
    let mut weights = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        weights.push(read_exact_f32(bytes, at));
        at += 4;
    }
    SparseAdjacency::from_csr(n, n, row_offsets, col_indices, weights)
        .map_err(|e| Error::Format(format!("graph cache failed validation: {}", e)))
}

pub fn save(path: &Path, adj: &SparseAdjacency<f32>) -> Result<()> {
    atomic_write(path, &encode(adj)?)
}

pub fn load(path: &Path) -> Result<SparseAdjacency<f32>> {
    decode(&fs::read(path)?)
}
