//! NMF by multiplicative updates on the Frobenius objective.

use ndarray::{Array2, Zip};

use super::{frobenius, FeatureMatrix, LinalgError};
use crate::rng::{seeded_rng, uniform_open_closed};

/// Denominator floor: multiplicative updates must never divide by zero, and
/// a strictly positive floor keeps entries from locking at exact zero.
const UPDATE_FLOOR: f64 = 1e-12;

/// Columns of `w` with L2 norm below this are pruned after convergence.
const DEGENERATE_COLUMN_NORM: f64 = 1e-10;

/// Result of factorizing `X ~ W H` with `W >= 0`, `H >= 0`.
#[derive(Debug, Clone)]
pub struct Factorization {
    /// n x k; columns are latent signatures.
    pub w: Array2<f64>,
    /// k x m; rows are per-sample activations of each signature.
    pub h: Array2<f64>,
    /// Effective rank after pruning degenerate columns.
    pub k: usize,
    /// `|X - WH|_F / |X|_F` at convergence.
    pub relative_error: f64,
    /// Frobenius residual after every accepted iteration; non-increasing.
    pub objective_trace: Vec<f64>,
}

/// Factorize a nonnegative matrix at rank `k` with seeded multiplicative
/// updates.
///
/// Stops when the relative objective decrease falls below `tol` or after
/// `max_iters` iterations. An iteration that fails to decrease the objective
/// (possible only at the numerical noise floor) is rolled back, so the
/// reported trace is non-increasing by construction. Deterministic for a
/// fixed seed.
pub fn nmf_factorize(
    x: &FeatureMatrix,
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<Factorization, LinalgError> {
    let (n, m) = (x.n(), x.m());
    let max_rank = n.min(m);
    if k < 1 || k > max_rank {
        return Err(LinalgError::InvalidRank { k, max: max_rank });
    }
    if !x.has_positive_entry() {
        return Err(LinalgError::DegenerateInput(
            "cannot factorize an all-zero matrix".into(),
        ));
    }
    if max_iters == 0 {
        return Err(LinalgError::InvalidParameter("max_iters must be >= 1".into()));
    }
    if !(tol > 0.0) {
        return Err(LinalgError::InvalidParameter("tol must be > 0".into()));
    }

    let xv = x.values();
    let x_norm = x.frobenius_norm();

    // Uniform (0, 1] entries scaled by mean(X)/k: positive everywhere so no
    // entry is locked at zero, deterministic for the seed.
    let mut rng = seeded_rng(seed);
    let scale = xv.iter().sum::<f64>() / (n * m) as f64 / k as f64;
    let mut w = Array2::from_shape_simple_fn((n, k), || uniform_open_closed(&mut rng) * scale);
    let mut h = Array2::from_shape_simple_fn((k, m), || uniform_open_closed(&mut rng) * scale);

    let mut prev_obj = frobenius(&(xv - &w.dot(&h)).view());
    let mut trace = Vec::with_capacity(max_iters.min(1024) + 1);
    trace.push(prev_obj);

    for _ in 0..max_iters {
        let w_prev = w.clone();
        let h_prev = h.clone();

        // H <- H * (WtX) / (WtW H + floor)
        let wtx = w.t().dot(xv);
        let wtwh = w.t().dot(&w).dot(&h);
        Zip::from(&mut h).and(&wtx).and(&wtwh).for_each(|hv, &num, &den| {
            *hv *= num / (den + UPDATE_FLOOR);
        });

        // W <- W * (XHt) / (W HHt + floor)
        let xht = xv.dot(&h.t());
        let whht = w.dot(&h.dot(&h.t()));
        Zip::from(&mut w).and(&xht).and(&whht).for_each(|wv, &num, &den| {
            *wv *= num / (den + UPDATE_FLOOR);
        });

        let obj = frobenius(&(xv - &w.dot(&h)).view());
        if obj > prev_obj {
            // Converged to the numerical floor; keep the better iterate.
            w = w_prev;
            h = h_prev;
            break;
        }
        trace.push(obj);
        debug_assert!(obj <= prev_obj);
        if prev_obj == 0.0 || (prev_obj - obj) / prev_obj < tol {
            break;
        }
        prev_obj = obj;
    }

    let (w, h, k_eff) = prune_degenerate_columns(w, h)?;
    let relative_error = frobenius(&(xv - &w.dot(&h)).view()) / x_norm;
    debug_assert!(relative_error.is_finite() && relative_error >= 0.0);

    Ok(Factorization {
        w,
        h,
        k: k_eff,
        relative_error,
        objective_trace: trace,
    })
}

fn prune_degenerate_columns(
    w: Array2<f64>,
    h: Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>, usize), LinalgError> {
    let keep: Vec<usize> = (0..w.ncols())
        .filter(|&j| w.column(j).dot(&w.column(j)).sqrt() >= DEGENERATE_COLUMN_NORM)
        .collect();
    if keep.is_empty() {
        return Err(LinalgError::DegenerateInput(
            "all signature columns collapsed to zero".into(),
        ));
    }
    if keep.len() == w.ncols() {
        let k = w.ncols();
        return Ok((w, h, k));
    }
    let w2 = w.select(ndarray::Axis(1), &keep);
    let h2 = h.select(ndarray::Axis(0), &keep);
    let k = keep.len();
    Ok((w2, h2, k))
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn objective_never_increases(seed in 0u64..1000, n in 3usize..10, m in 3usize..10) {
            let mut rng = crate::rng::seeded_rng(seed);
            use rand::Rng;
            let x = FeatureMatrix::new(
                Array2::from_shape_simple_fn((n, m), || rng.random::<f64>())
            ).unwrap();
            let k = 2.min(n).min(m);
            let f = nmf_factorize(&x, k, seed, 200, 1e-10).unwrap();
            for pair in f.objective_trace.windows(2) {
                prop_assert!(pair[1] <= pair[0]);
            }
            prop_assert!(f.relative_error >= 0.0 && f.relative_error.is_finite());
        }
    }
}
