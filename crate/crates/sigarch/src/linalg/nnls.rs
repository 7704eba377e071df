//! Nonnegative least squares by the Lawson-Hanson active-set method.
//!
//! Solves `argmin_{h >= 0} |x - M h|^2` exactly (to a tolerance) for the
//! small column counts an archive carries. Active-set was chosen over
//! projected gradient for its finite-termination semantics: at convergence
//! the KKT conditions hold to `tol`, which the tests check directly.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::LinalgError;

/// NNLS projection of a sample onto a signature matrix.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    /// Nonnegative coefficient vector `h`.
    pub coefficients: Array1<f64>,
    /// `M h`, the reconstruction of the input.
    pub reconstruction: Array1<f64>,
    /// `|x - M h|_2`.
    pub residual_norm: f64,
}

/// Solve `argmin_{h >= 0} |x - m h|^2`.
///
/// At the solution, components held at zero have gradient `>= -tol` and free
/// components have gradient within `[-tol, tol]`.
pub fn nnls_solve(
    m: ArrayView2<f64>,
    x: ArrayView1<f64>,
    tol: f64,
) -> Result<ProjectionResult, LinalgError> {
    let (n, k) = m.dim();
    if x.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if k == 0 {
        return Err(LinalgError::InvalidParameter(
            "matrix must have at least one column".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(LinalgError::InvalidParameter("tol must be > 0".into()));
    }
    for j in 0..k {
        if m.column(j).dot(&m.column(j)) == 0.0 {
            return Err(LinalgError::DegenerateInput(format!(
                "column {j} has zero norm"
            )));
        }
    }

    let mut h = Array1::<f64>::zeros(k);
    let mut passive = vec![false; k];
    // Columns numerically dependent on the current passive set are barred
    // from re-entering; with exact duplicates this still satisfies KKT
    // because the twin column carries the same gradient.
    let mut barred = vec![false; k];
    let mut residual = x.to_owned();

    let max_outer = 3 * k + 30;
    for _ in 0..max_outer {
        // w = Mt r is the negative gradient; the best candidate to free.
        let w = m.t().dot(&residual);
        let mut entering: Option<usize> = None;
        for j in 0..k {
            if !passive[j] && !barred[j] && w[j] > tol && entering.is_none_or(|b| w[j] > w[b]) {
                entering = Some(j);
            }
        }
        let Some(enter) = entering else { break };
        passive[enter] = true;

        // Inner loop: restore feasibility of the passive-set LS solution.
        loop {
            match solve_passive_ls(&m, &x, &passive) {
                Some(z) => {
                    let negative: Vec<usize> = (0..k)
                        .filter(|&j| passive[j] && z[j] <= 0.0)
                        .collect();
                    if negative.is_empty() {
                        for j in 0..k {
                            h[j] = if passive[j] { z[j] } else { 0.0 };
                        }
                        break;
                    }
                    // Step toward z until the first coefficient hits zero.
                    let mut alpha = f64::INFINITY;
                    for &j in &negative {
                        let denom = h[j] - z[j];
                        if denom > 0.0 {
                            alpha = alpha.min(h[j] / denom);
                        } else {
                            alpha = 0.0;
                        }
                    }
                    for j in 0..k {
                        if passive[j] {
                            h[j] += alpha * (z[j] - h[j]);
                        }
                    }
                    for j in 0..k {
                        if passive[j] && h[j] <= 1e-14 {
                            h[j] = 0.0;
                            passive[j] = false;
                        }
                    }
                }
                None => {
                    // Entering column is linearly dependent on the passive
                    // set; back it out.
                    passive[enter] = false;
                    barred[enter] = true;
                    break;
                }
            }
        }
        residual = &x - &m.dot(&h);
    }

    let reconstruction = m.dot(&h);
    let residual_norm = (&x - &reconstruction).mapv(|v| v * v).sum().sqrt();
    Ok(ProjectionResult {
        coefficients: h,
        reconstruction,
        residual_norm,
    })
}

/// Unconstrained least squares restricted to the passive columns, solved by
/// Cholesky on the normal equations (column counts here are small). Returns
/// `None` when the passive Gram matrix is numerically singular.
fn solve_passive_ls(
    m: &ArrayView2<f64>,
    x: &ArrayView1<f64>,
    passive: &[bool],
) -> Option<Array1<f64>> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let p = cols.len();
    if p == 0 {
        return Some(Array1::zeros(passive.len()));
    }
    let mut a = Array2::<f64>::zeros((p, p));
    let mut b = Array1::<f64>::zeros(p);
    for (ri, &cj) in cols.iter().enumerate() {
        b[ri] = m.column(cj).dot(x);
        for (ci, &ck) in cols.iter().enumerate().take(ri + 1) {
            let v = m.column(cj).dot(&m.column(ck));
            a[(ri, ci)] = v;
            a[(ci, ri)] = v;
        }
    }

    let z = cholesky_solve(a, b)?;
    let mut full = Array1::<f64>::zeros(passive.len());
    for (ri, &cj) in cols.iter().enumerate() {
        full[cj] = z[ri];
    }
    Some(full)
}

fn cholesky_solve(mut a: Array2<f64>, mut b: Array1<f64>) -> Option<Array1<f64>> {
    let p = a.nrows();
    let scale = (0..p).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
    if scale <= 0.0 {
        return None;
    }
    // In-place lower Cholesky.
    for j in 0..p {
        let mut d = a[(j, j)];
        for r in 0..j {
            d -= a[(j, r)] * a[(j, r)];
        }
        if d <= 1e-13 * scale {
            return None;
        }
        let l = d.sqrt();
        a[(j, j)] = l;
        for i in (j + 1)..p {
            let mut v = a[(i, j)];
            for r in 0..j {
                v -= a[(i, r)] * a[(j, r)];
            }
            a[(i, j)] = v / l;
        }
    }
    // Forward substitution L y = b.
    for i in 0..p {
        let mut v = b[i];
        for r in 0..i {
            v -= a[(i, r)] * b[r];
        }
        b[i] = v / a[(i, i)];
    }
    // Back substitution Lt z = y.
    for i in (0..p).rev() {
        let mut v = b[i];
        for r in (i + 1)..p {
            v -= a[(r, i)] * b[r];
        }
        b[i] = v / a[(i, i)];
    }
    Some(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Independent KKT check: gradient of 0.5|x - Mh|^2 is -Mt(x - Mh).
    /// Free components must sit within [-tol, tol]; clamped components must
    /// be >= -tol.
    pub(crate) fn kkt_violation(m: ArrayView2<f64>, x: ArrayView1<f64>, h: ArrayView1<f64>) -> f64 {
        let r = &x - &m.dot(&h);
        let mut worst = 0.0f64;
        for j in 0..m.ncols() {
            let grad = -m.column(j).dot(&r);
            if h[j] > 0.0 {
                worst = worst.max(grad.abs());
            } else {
                worst = worst.max(-grad);
            }
        }
        worst
    }

    #[test]
    fn identity_projection() {
        let m = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let x = array![1.0, 0.0, 2.0];
        let r = nnls_solve(m.view(), x.view(), 1e-10).unwrap();
        assert!((&r.coefficients - &array![1.0, 0.0, 2.0])
            .iter()
            .all(|v| v.abs() < 1e-12));
        assert!(r.residual_norm < 1e-12);
    }

    #[test]
    fn single_column_closed_form() {
        // argmin_h |x - m h| = (m.x)/(m.m) = 4/5 when positive
        let m = array![[1.0], [2.0]];
        let x = array![2.0, 1.0];
        let r = nnls_solve(m.view(), x.view(), 1e-10).unwrap();
        assert!((r.coefficients[0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn clamped_coordinate_resolves_by_kkt() {
        // Unconstrained solution is [2, -1]; NNLS clamps the second
        // coordinate and re-solves to [6/5, 0].
        let m = array![[1.0, 2.0], [2.0, 1.0]];
        let x = array![0.0, 3.0];
        let r = nnls_solve(m.view(), x.view(), 1e-10).unwrap();
        assert!((r.coefficients[0] - 1.2).abs() < 1e-10, "{:?}", r.coefficients);
        assert!(r.coefficients[1].abs() < 1e-12);
        assert!(kkt_violation(m.view(), x.view(), r.coefficients.view()) <= 1e-9);
    }

    #[test]
    fn dimension_mismatch() {
        let m = array![[1.0], [2.0]];
        let x = array![1.0, 2.0, 3.0];
        assert!(matches!(
            nnls_solve(m.view(), x.view(), 1e-8),
            Err(LinalgError::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn zero_column_is_degenerate() {
        let m = array![[1.0, 0.0], [2.0, 0.0]];
        let x = array![1.0, 1.0];
        assert!(matches!(
            nnls_solve(m.view(), x.view(), 1e-8),
            Err(LinalgError::DegenerateInput(_))
        ));
    }

    #[test]
    fn duplicate_columns_still_satisfy_kkt() {
        let m = array![[1.0, 1.0], [2.0, 2.0]];
        let x = array![1.0, 1.0];
        let r = nnls_solve(m.view(), x.view(), 1e-10).unwrap();
        assert!(kkt_violation(m.view(), x.view(), r.coefficients.view()) <= 1e-9);
    }

    #[test]
    fn random_instances_satisfy_kkt_and_dominate_candidates() {
        use crate::rng::seeded_rng;
        use rand::Rng;
        let mut rng = seeded_rng(2024);
        for _ in 0..200 {
            let n = rng.random_range(1..=10);
            let k = rng.random_range(1..=10);
            let m = Array2::from_shape_simple_fn((n, k), || rng.random::<f64>() + 0.01);
            let x = Array1::from_shape_simple_fn(n, || rng.random::<f64>() * 2.0 - 0.5);
            let r = nnls_solve(m.view(), x.view(), 1e-8).unwrap();
            let viol = kkt_violation(m.view(), x.view(), r.coefficients.view());
            assert!(viol <= 1e-6, "KKT violation {viol}");

            let best = r.residual_norm;
            for _ in 0..300 {
                let cand = Array1::from_shape_simple_fn(k, || rng.random::<f64>() * 2.0);
                let res = (&x - &m.dot(&cand)).mapv(|v| v * v).sum().sqrt();
                assert!(best <= res + 1e-9, "candidate beat NNLS: {res} < {best}");
            }
        }
    }
}
