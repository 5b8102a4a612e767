use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// All trainable tensors: free embeddings for users and items plus the two
/// linear maps that bring raw content features into the shared space.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S = f32> {
    pub user_emb: DenseMatrix<S>,
    pub item_emb: DenseMatrix<S>,
    pub proj_v: DenseMatrix<S>,
    pub proj_t: DenseMatrix<S>,
}

impl<S: Scalar> ModelParams<S> {
    pub fn zeros(n_users: usize, n_items: usize, d: usize, d_v: usize, d_t: usize) -> Self {
        Self {
            user_emb: DenseMatrix::zeros(n_users, d),
            item_emb: DenseMatrix::zeros(n_items, d),
            proj_v: DenseMatrix::zeros(d_v, d),
            proj_t: DenseMatrix::zeros(d_t, d),
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_emb.n_rows()
    }

    pub fn n_items(&self) -> usize {
        self.item_emb.n_rows()
    }

    pub fn dim(&self) -> usize {
        self.user_emb.n_cols()
    }

    /// The four tensors in a fixed order, paired with names for diagnostics.
    pub fn tensors(&self) -> [(&'static str, &DenseMatrix<S>); 4] {
        [
            ("user_emb", &self.user_emb),
            ("item_emb", &self.item_emb),
            ("proj_v", &self.proj_v),
            ("proj_t", &self.proj_t),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut DenseMatrix<S>); 4] {
        [
            ("user_emb", &mut self.user_emb),
            ("item_emb", &mut self.item_emb),
            ("proj_v", &mut self.proj_v),
            ("proj_t", &mut self.proj_t),
        ]
    }

    pub fn to_f64(&self) -> ModelParams<f64> {
        ModelParams {
            user_emb: self.user_emb.to_f64(),
            item_emb: self.item_emb.to_f64(),
            proj_v: self.proj_v.to_f64(),
            proj_t: self.proj_t.to_f64(),
        }
    }
}

impl ModelParams<f64> {
    pub fn to_f32(&self) -> ModelParams<f32> {
        ModelParams {
            user_emb: self.user_emb.to_f32(),
            item_emb: self.item_emb.to_f32(),
            proj_v: self.proj_v.to_f32(),
            proj_t: self.proj_t.to_f32(),
        }
    }
}

/// Gradient accumulator shaped like the parameters it differentiates.
#[derive(Debug, Clone)]
pub struct Gradients<S = f32> {
    pub user_emb: DenseMatrix<S>,
    pub item_emb: DenseMatrix<S>,
    pub proj_v: DenseMatrix<S>,
    pub proj_t: DenseMatrix<S>,
}

impl<S: Scalar> Gradients<S> {
    pub fn zeros_like(params: &ModelParams<S>) -> Self {
        Self {
            user_emb: DenseMatrix::zeros(params.user_emb.n_rows(), params.user_emb.n_cols()),
            item_emb: DenseMatrix::zeros(params.item_emb.n_rows(), params.item_emb.n_cols()),
            proj_v: DenseMatrix::zeros(params.proj_v.n_rows(), params.proj_v.n_cols()),
            proj_t: DenseMatrix::zeros(params.proj_t.n_rows(), params.proj_t.n_cols()),
        }
    }

    pub fn tensors(&self) -> [(&'static str, &DenseMatrix<S>); 4] {
        [
            ("user_emb", &self.user_emb),
            ("item_emb", &self.item_emb),
            ("proj_v", &self.proj_v),
            ("proj_t", &self.proj_t),
        ]
    }

    /// Error out if any accumulated gradient is not finite.
    pub fn check_finite(&self) -> Result<()> {
        for (name, t) in self.tensors() {
            if let Some((r, c)) = t.find_non_finite() {
                return Err(Error::NonFiniteGradient(format!(
                    "{}[{}][{}] = {}",
                    name,
                    r,
                    c,
                    t.get(r, c)
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let p = ModelParams::<f32>::zeros(3, 4, 2, 5, 6);
        assert_eq!((p.n_users(), p.n_items(), p.dim()), (3, 4, 2));
        assert_eq!(p.proj_v.n_rows(), 5);
        assert_eq!(p.proj_t.n_rows(), 6);
        let g = Gradients::zeros_like(&p);
        assert_eq!(g.item_emb.n_rows(), 4);
        assert!(g.check_finite().is_ok());
    }

    #[test]
    fn non_finite_gradient_detected() {
        let p = ModelParams::<f32>::zeros(2, 2, 2, 2, 2);
        let mut g = Gradients::zeros_like(&p);
        g.proj_t.set(1, 0, f32::INFINITY);
        assert!(matches!(
            g.check_finite(),
            Err(Error::NonFiniteGradient(_))
        ));
    }
}
