//! Dense nonnegative linear-algebra kernels.
//!
//! Everything downstream (rank selection, archive building, inference) sits
//! on these four operations: NMF factorization with multiplicative updates,
//! nonnegative least squares by an active-set method, matrix-vector
//! reconstruction, and cosine similarity. All functions are pure over
//! immutable inputs and safe to call from many threads.

mod nmf;
mod nnls;

pub use nmf::{nmf_factorize, Factorization};
pub use nnls::{nnls_solve, ProjectionResult};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use thiserror::Error;

/// Errors from the numeric kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid rank {k}: must satisfy 1 <= k <= {max}")]
    InvalidRank { k: usize, max: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A nonnegative observation matrix with `n` feature rows and `m` sample
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
}

impl FeatureMatrix {
    /// Validates nonnegativity, finiteness, and nonempty shape.
    pub fn new(values: Array2<f64>) -> Result<Self, LinalgError> {
        let (n, m) = values.dim();
        if n == 0 || m == 0 {
            return Err(LinalgError::DegenerateInput(format!(
                "matrix must be nonempty, got {n}x{m}"
            )));
        }
        for &v in values.iter() {
            if !v.is_finite() {
                return Err(LinalgError::DegenerateInput(
                    "matrix contains a non-finite entry".into(),
                ));
            }
            if v < 0.0 {
                return Err(LinalgError::DegenerateInput(
                    "matrix contains a negative entry".into(),
                ));
            }
        }
        Ok(Self { values })
    }

    /// Number of features (rows).
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of samples (columns).
    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    /// Owned copy of the given sample columns, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Array2<f64> {
        self.values.select(Axis(1), indices)
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.values.view())
    }

    /// True if at least one entry is strictly positive.
    pub fn has_positive_entry(&self) -> bool {
        self.values.iter().any(|&v| v > 0.0)
    }
}

pub(crate) fn frobenius(a: &ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Matrix-vector product `m * h`; the reconstruction of a sample from
/// signature coefficients.
pub fn reconstruct(m: ArrayView2<f64>, h: ArrayView1<f64>) -> Result<Array1<f64>, LinalgError> {
    if m.ncols() != h.len() {
        return Err(LinalgError::DimensionMismatch {
            expected: m.ncols(),
            got: h.len(),
        });
    }
    Ok(m.dot(&h))
}

/// Cosine similarity `a.b / (|a||b|)`, clamped to [-1, 1].
///
/// A zero-norm argument yields 0 rather than NaN: a vanishing reconstruction
/// should read as minimal confidence downstream.
pub fn cosine_similarity(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64, LinalgError> {
    if a.len() != b.len() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((a.dot(&b) / (na * nb)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn feature_matrix_rejects_negatives_and_nonfinite() {
        assert!(FeatureMatrix::new(array![[1.0, -0.1]]).is_err());
        assert!(FeatureMatrix::new(array![[f64::NAN]]).is_err());
        assert!(FeatureMatrix::new(array![[f64::INFINITY]]).is_err());
        assert!(FeatureMatrix::new(Array2::zeros((0, 3))).is_err());
        assert!(FeatureMatrix::new(array![[0.0, 1.0], [2.0, 3.0]]).is_ok());
    }

    #[test]
    fn reconstruct_identity_and_zero() {
        let id = array![[1.0, 0.0], [0.0, 1.0]];
        let h = array![3.0, 4.0];
        assert_eq!(reconstruct(id.view(), h.view()).unwrap(), array![3.0, 4.0]);

        let z = array![0.0, 0.0];
        assert_eq!(reconstruct(id.view(), z.view()).unwrap(), array![0.0, 0.0]);
    }

    #[test]
    fn reconstruct_hand_product() {
        let m = array![[1.0, 0.0], [1.0, 1.0]];
        let h = array![2.0, 3.0];
        assert_eq!(reconstruct(m.view(), h.view()).unwrap(), array![2.0, 5.0]);
    }

    #[test]
    fn reconstruct_dimension_mismatch() {
        let m = array![[1.0, 0.0], [1.0, 1.0]];
        let h = array![2.0, 3.0, 4.0];
        assert!(matches!(
            reconstruct(m.view(), h.view()),
            Err(LinalgError::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn cosine_known_values() {
        let a = array![1.0, 2.0, 3.0];
        assert_eq!(cosine_similarity(a.view(), a.view()).unwrap(), 1.0);

        let e1 = array![1.0, 0.0];
        let e2 = array![0.0, 1.0];
        assert_eq!(cosine_similarity(e1.view(), e2.view()).unwrap(), 0.0);

        let d = array![1.0, 1.0];
        let got = cosine_similarity(d.view(), e1.view()).unwrap();
        assert!((got - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn cosine_zero_norm_is_zero() {
        let z = array![0.0, 0.0];
        let a = array![1.0, 2.0];
        assert_eq!(cosine_similarity(z.view(), a.view()).unwrap(), 0.0);
        assert_eq!(cosine_similarity(a.view(), z.view()).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric_scale_invariant_and_self_unit(
            a in proptest::collection::vec(0.0f64..10.0, 4),
            b in proptest::collection::vec(0.0f64..10.0, 4),
            c in 0.001f64..1000.0,
        ) {
            let av = Array1::from_vec(a);
            let bv = Array1::from_vec(b);
            let sab = cosine_similarity(av.view(), bv.view()).unwrap();
            let sba = cosine_similarity(bv.view(), av.view()).unwrap();
            prop_assert!((sab - sba).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&sab));

            let scaled = av.mapv(|v| v * c);
            let s_scaled = cosine_similarity(scaled.view(), bv.view()).unwrap();
            prop_assert!((sab - s_scaled).abs() < 1e-9);

            if av.dot(&av) > 0.0 {
                let saa = cosine_similarity(av.view(), av.view()).unwrap();
                prop_assert!((saa - 1.0).abs() < 1e-12);
            }
        }
    }
}
