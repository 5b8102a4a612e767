use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix. Item feature matrices, embedding tables and
/// projection weights are all stored this way.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<S = f32> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

/// Per-item modality features (`n_rows` = number of items, `cols` = feature dim).
pub type FeatureMatrix = DenseMatrix<f32>;

impl<S: Scalar> DenseMatrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "expected {}x{}={} values, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let n = rows.len();
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "row {} has {} values, expected {}",
                    i,
                    r.len(),
                    cols
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: n, cols, data })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn values(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn fill(&mut self, v: S) {
        self.data.fill(v);
    }

    /// Index of the first non-finite entry, if any.
    pub fn find_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|p| (p / self.cols.max(1), p % self.cols.max(1)))
    }

    pub fn is_finite(&self) -> bool {
        self.find_non_finite().is_none()
    }

    /// `self * other`, accumulating each cell in 64-bit.
    pub fn matmul(&self, other: &DenseMatrix<S>) -> Result<DenseMatrix<S>> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "matmul: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let dst = out.row_mut(i);
            let mut acc = vec![0.0f64; other.cols];
            for (k, &aik) in a.iter().enumerate() {
                let b = other.row(k);
                let aik = aik.as_f64();
                for (j, &bkj) in b.iter().enumerate() {
                    acc[j] += aik * bkj.as_f64();
                }
            }
            for (d, &v) in dst.iter_mut().zip(acc.iter()) {
                *d = S::from_f64(v);
            }
        }
        Ok(out)
    }

    /// `selfᵀ * other`, accumulating in 64-bit. Used for projection gradients.
    pub fn transpose_matmul(&self, other: &DenseMatrix<S>) -> Result<DenseMatrix<S>> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "transpose_matmul: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut acc = vec![0.0f64; self.cols * other.cols];
        for r in 0..self.rows {
            let a = self.row(r);
            let b = other.row(r);
            for (i, &ai) in a.iter().enumerate() {
                let ai = ai.as_f64();
                let dst = &mut acc[i * other.cols..(i + 1) * other.cols];
                for (d, &bj) in dst.iter_mut().zip(b.iter()) {
                    *d += ai * bj.as_f64();
                }
            }
        }
        let data = acc.into_iter().map(S::from_f64).collect();
        DenseMatrix::from_vec(self.cols, other.cols, data)
    }

    /// Values copied out as f64, in row-major order.
    pub fn to_f64_values(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
    }

    /// Stack two matrices with the same width on top of each other.
    pub fn vstack(top: &DenseMatrix<S>, bottom: &DenseMatrix<S>) -> Result<DenseMatrix<S>> {
        if top.cols != bottom.cols {
            return Err(Error::ShapeMismatch(format!(
                "vstack: widths {} and {} differ",
                top.cols, bottom.cols
            )));
        }
        let mut data = Vec::with_capacity(top.data.len() + bottom.data.len());
        data.extend_from_slice(&top.data);
        data.extend_from_slice(&bottom.data);
        Ok(DenseMatrix {
            rows: top.rows + bottom.rows,
            cols: top.cols,
            data,
        })
    }

    /// Split into the first `n_top` rows and the rest.
    pub fn split_rows(self, n_top: usize) -> (DenseMatrix<S>, DenseMatrix<S>) {
        let cols = self.cols;
        let mut top_data = self.data;
        let bottom_data = top_data.split_off(n_top * cols);
        (
            DenseMatrix {
                rows: n_top,
                cols,
                data: top_data,
            },
            DenseMatrix {
                rows: self.rows - n_top,
                cols,
                data: bottom_data,
            },
        )
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(S) -> T) -> DenseMatrix<T> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn to_f64(&self) -> DenseMatrix<f64> {
        self.map(|v| v.as_f64())
    }
}

impl DenseMatrix<f64> {
    pub fn to_f32(&self) -> DenseMatrix<f32> {
        self.map(|v| v as f32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(DenseMatrix::<f32>::from_vec(2, 3, vec![0.0; 5]).is_err());
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let a = DenseMatrix::from_vec(2, 3, vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = DenseMatrix::from_vec(3, 2, vec![7.0f64, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        let mut expect = DenseMatrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += a.get(i, k) * b.get(k, j);
                }
                expect.set(i, j, s);
            }
        }
        assert_eq!(c, expect);
    }

    #[test]
    fn transpose_matmul_matches_explicit_transpose() {
        let a = DenseMatrix::from_vec(3, 2, vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = DenseMatrix::from_vec(3, 2, vec![0.5f64, -1.0, 2.0, 0.0, 1.0, 3.0]).unwrap();
        let at = DenseMatrix::from_vec(2, 3, vec![1.0f64, 3.0, 5.0, 2.0, 4.0, 6.0]).unwrap();
        assert_eq!(a.transpose_matmul(&b).unwrap(), at.matmul(&b).unwrap());
    }

    #[test]
    fn non_finite_detection() {
        let mut m = DenseMatrix::<f32>::zeros(2, 2);
        assert!(m.is_finite());
        m.set(1, 0, f32::NAN);
        assert_eq!(m.find_non_finite(), Some((1, 0)));
    }
}
