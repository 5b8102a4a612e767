use num_traits::Float;

/// Floating-point scalar the numeric kernels are generic over.
///
/// Production storage and training run on `f32`; gradient verification
/// instantiates the same code paths with `f64`. Reductions always
/// accumulate in `f64` regardless of the element type.
pub trait Scalar:
    Float + Send + Sync + std::fmt::Debug + std::fmt::Display + std::iter::Sum + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
    fn from_f32(v: f32) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_f32(v: f32) -> Self {
        v
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    #[inline]
    fn from_f32(v: f32) -> Self {
        v as f64
    }
}

/// Dot product with 64-bit accumulation.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x.as_f64() * y.as_f64();
    }
    acc
}

/// Euclidean norm with 64-bit accumulation.
#[inline]
pub fn norm<S: Scalar>(a: &[S]) -> f64 {
    dot(a, a).sqrt()
}
