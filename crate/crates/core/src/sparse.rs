use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rayon::prelude::*;

/// Weighted sparse adjacency in canonical CSR form: within each row the
/// column indices are strictly increasing, offsets are monotone, and all
/// weights are finite and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdjacency<S = f32> {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    weights: Vec<S>,
}

impl<S: Scalar> SparseAdjacency<S> {
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Assemble from raw CSR arrays, checking canonical form.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<u32>,
        weights: Vec<S>,
    ) -> Result<Self> {
        let adj = Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            weights,
        };
        adj.validate()?;
        Ok(adj)
    }

    /// Assemble from per-row `(col, weight)` lists; each list must already be
    /// sorted by strictly increasing column.
    pub fn from_rows(n_cols: usize, rows: &[Vec<(u32, S)>]) -> Result<Self> {
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut col_indices = Vec::with_capacity(nnz);
        let mut weights = Vec::with_capacity(nnz);
        row_offsets.push(0);
        for row in rows {
            for &(c, w) in row {
                col_indices.push(c);
                weights.push(w);
            }
            row_offsets.push(col_indices.len());
        }
        Self::from_csr(rows.len(), n_cols, row_offsets, col_indices, weights)
    }

    /// O(nnz) canonical-form check.
    pub fn validate(&self) -> Result<()> {
        if self.row_offsets.len() != self.n_rows + 1 {
            return Err(Error::Format(format!(
                "row_offsets length {} != n_rows+1 = {}",
                self.row_offsets.len(),
                self.n_rows + 1
            )));
        }
        if self.row_offsets[0] != 0 {
            return Err(Error::Format("row_offsets[0] != 0".into()));
        }
        if *self.row_offsets.last().unwrap() != self.col_indices.len()
            || self.col_indices.len() != self.weights.len()
        {
            return Err(Error::Format("offset/index/weight lengths disagree".into()));
        }
        for r in 0..self.n_rows {
            let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
            if lo > hi {
                return Err(Error::Format(format!("row {} has decreasing offsets", r)));
            }
            let mut prev: Option<u32> = None;
            for k in lo..hi {
                let c = self.col_indices[k];
                if c as usize >= self.n_cols {
                    return Err(Error::Format(format!(
                        "row {} column {} out of range (n_cols={})",
                        r, c, self.n_cols
                    )));
                }
                if let Some(p) = prev {
                    if c <= p {
                        return Err(Error::Format(format!(
                            "row {} columns not strictly increasing at {}",
                            r, c
                        )));
                    }
                }
                prev = Some(c);
                let w = self.weights[k];
                if !w.is_finite() || w < S::zero() {
                    return Err(Error::Format(format!(
                        "row {} column {} has invalid weight {}",
                        r, c, w
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    #[inline]
    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    #[inline]
    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    #[inline]
    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    /// `(columns, weights)` of one row.
    #[inline]
    pub fn row(&self, r: usize) -> (&[u32], &[S]) {
        let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
        (&self.col_indices[lo..hi], &self.weights[lo..hi])
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, u32, S)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (cols, ws) = self.row(r);
            cols.iter().zip(ws.iter()).map(move |(&c, &w)| (r, c, w))
        })
    }

    /// Exact transpose; weights are moved, not recomputed.
    pub fn transpose(&self) -> SparseAdjacency<S> {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.n_cols {
            counts[i + 1] += counts[i];
        }
        let row_offsets = counts.clone();
        let mut col_indices = vec![0u32; self.nnz()];
        let mut weights = vec![S::zero(); self.nnz()];
        let mut cursor = counts;
        for r in 0..self.n_rows {
            let (cols, ws) = self.row(r);
            for (&c, &w) in cols.iter().zip(ws.iter()) {
                let pos = cursor[c as usize];
                col_indices[pos] = r as u32;
                weights[pos] = w;
                cursor[c as usize] += 1;
            }
        }
        SparseAdjacency {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets,
            col_indices,
            weights,
        }
    }

    /// Sparse-dense product `self * x`. Rows are computed independently so
    /// the result does not depend on the degree of parallelism.
    pub fn spmm(&self, x: &DenseMatrix<S>) -> Result<DenseMatrix<S>> {
        if self.n_cols != x.n_rows() {
            return Err(Error::ShapeMismatch(format!(
                "spmm: adjacency {}x{} times dense {}x{}",
                self.n_rows,
                self.n_cols,
                x.n_rows(),
                x.n_cols()
            )));
        }
        let d = x.n_cols();
        let mut out = DenseMatrix::zeros(self.n_rows, d);
        let rows: Vec<&mut [S]> = out.values_mut().chunks_mut(d.max(1)).collect();
        rows.into_par_iter().enumerate().for_each(|(r, dst)| {
            let (cols, ws) = self.row(r);
            let mut acc = vec![0.0f64; d];
            for (&c, &w) in cols.iter().zip(ws.iter()) {
                let src = x.row(c as usize);
                let w = w.as_f64();
                for (a, &v) in acc.iter_mut().zip(src.iter()) {
                    *a += w * v.as_f64();
                }
            }
            for (o, &a) in dst.iter_mut().zip(acc.iter()) {
                *o = S::from_f64(a);
            }
        });
        Ok(out)
    }

    pub fn map_weights<T: Scalar>(&self, f: impl Fn(S) -> T) -> SparseAdjacency<T> {
        SparseAdjacency {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            weights: self.weights.iter().map(|&w| f(w)).collect(),
        }
    }

    pub fn to_f64(&self) -> SparseAdjacency<f64> {
        self.map_weights(|w| w.as_f64())
    }

    /// Materialize as a dense matrix (test oracles, small graphs only).
    pub fn to_dense(&self) -> DenseMatrix<S> {
        let mut m = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (r, c, w) in self.iter_entries() {
            m.set(r, c as usize, w);
        }
        m
    }
}
