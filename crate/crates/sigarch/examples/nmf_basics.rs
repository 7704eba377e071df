//! Core numeric kernels: NMF factorization, NNLS projection, and cosine
//! scoring on a small hand-made matrix.
//!
//! ```bash
//! cargo run --example nmf_basics
//! ```

use ndarray::{array, Array2};
use rand::Rng;
use sigarch::linalg::{cosine_similarity, nmf_factorize, nnls_solve, FeatureMatrix};
use sigarch::rng::seeded_rng;

fn main() {
    // Build a 12x20 matrix from two planted signatures.
    let mut rng = seeded_rng(7);
    let mut w_true = Array2::<f64>::zeros((12, 2));
    for r in 0..6 {
        w_true[(r, 0)] = rng.random::<f64>() + 0.2;
    }
    for r in 6..12 {
        w_true[(r, 1)] = rng.random::<f64>() + 0.2;
    }
    let h_true = Array2::from_shape_simple_fn((2, 20), || rng.random::<f64>());
    let x = FeatureMatrix::new(w_true.dot(&h_true)).unwrap();

    let f = nmf_factorize(&x, 2, 42, 2000, 1e-10).unwrap();
    println!(
        "factorized {}x{} at rank {}: relative error {:.2e} after {} iterations",
        x.n(),
        x.m(),
        f.k,
        f.relative_error,
        f.objective_trace.len()
    );
    println!(
        "objective trace is non-increasing: {} -> {:.4} -> {:.4e}",
        f.objective_trace[0],
        f.objective_trace[f.objective_trace.len() / 2],
        f.objective_trace.last().unwrap()
    );

    // Project a fresh sample onto the learned signatures.
    let sample = x.column(3).to_owned();
    let projection = nnls_solve(f.w.view(), sample.view(), 1e-10).unwrap();
    println!(
        "NNLS coefficients for sample 3: {:?} (residual {:.2e})",
        projection
            .coefficients
            .iter()
            .map(|v| format!("{v:.3}"))
            .collect::<Vec<_>>(),
        projection.residual_norm
    );

    let cos = cosine_similarity(sample.view(), projection.reconstruction.view()).unwrap();
    println!("cosine(sample, reconstruction) = {cos:.6}");

    // A vector outside the learned cone reconstructs poorly.
    let outsider = array![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
    let p = nnls_solve(f.w.view(), outsider.view(), 1e-10).unwrap();
    let cos = cosine_similarity(outsider.view(), p.reconstruction.view()).unwrap();
    println!("an off-cone vector reconstructs with cosine {cos:.3}");
}
