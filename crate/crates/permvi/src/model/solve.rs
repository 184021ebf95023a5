//! Dense least-squares and Cholesky routines used by the model fitters.
//!
//! Least squares goes through Householder QR (numerically stable, no normal
//! equations). Rank-deficient or underdetermined systems fall back to a
//! ridge solve with a fixed jitter of 1e−10 on the Gram diagonal — a
//! deterministic alternative to a pseudo-inverse — and report a flag so the
//! resulting model can carry a warning.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Jitter added to the Gram diagonal when the design is rank deficient.
pub const RIDGE_JITTER: f64 = 1e-10;

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = m`. Errors when `m` is
/// not (numerically) positive definite.
pub fn cholesky(m: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(Error::ShapeMismatch(format!(
            "cholesky: matrix is {rows}×{cols}, not square"
        )));
    }
    let n = rows;
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::NotPositiveDefinite(format!(
                        "pivot {sum:.3e} at index {i}"
                    )));
                }
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solve `L Lᵀ x = b` given the lower Cholesky factor.
fn cholesky_solve(l: &Array2<f64>, b: &ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    // Forward: L z = b.
    let mut z = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[(i, k)] * z[k];
        }
        z[i] = sum / l[(i, i)];
    }
    // Backward: Lᵀ x = z.
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut sum = z[i];
        for k in i + 1..n {
            sum -= l[(k, i)] * x[k];
        }
        x[i] = sum / l[(i, i)];
    }
    x
}

/// Ridge solve `(AᵀA + jitter·I) x = Aᵀ b` via Cholesky.
pub fn solve_ridge(a: &ArrayView2<f64>, b: &ArrayView1<f64>, jitter: f64) -> Result<Array1<f64>> {
    let m = a.ncols();
    let mut gram = a.t().dot(a);
    for j in 0..m {
        gram[(j, j)] += jitter;
    }
    let l = cholesky(&gram.view())?;
    let atb = a.t().dot(b);
    Ok(cholesky_solve(&l, &atb.view()))
}

/// Least-squares solution of `min ‖A x − b‖₂` via Householder QR.
///
/// Returns `(x, rank_deficient)`. When the triangular factor has a
/// negligible pivot — or the system is underdetermined — the solve restarts
/// as a ridge problem with [`RIDGE_JITTER`] and the flag is set.
pub fn lstsq(a: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Result<(Array1<f64>, bool)> {
    let (n, m) = a.dim();
    if b.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "lstsq: A is {n}×{m} but b has length {}",
            b.len()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("lstsq: zero-column design".into()));
    }
    if n < m {
        return Ok((solve_ridge(a, b, RIDGE_JITTER)?, true));
    }

    let mut r = a.to_owned();
    let mut qtb = b.to_owned();
    // Pivot tolerance relative to the largest column norm of A.
    let max_col_norm = (0..m)
        .map(|j| r.column(j).dot(&r.column(j)).sqrt())
        .fold(0.0f64, f64::max);
    let tol = f64::EPSILON * (n.max(m) as f64) * max_col_norm.max(1.0);

    for k in 0..m {
        // Householder vector for column k below the diagonal.
        let mut norm2 = 0.0;
        for i in k..n {
            norm2 += r[(i, k)] * r[(i, k)];
        }
        let norm = norm2.sqrt();
        if norm <= tol {
            // Dependent column — restart with a ridge solve.
            return Ok((solve_ridge(a, b, RIDGE_JITTER)?, true));
        }
        let alpha = if r[(k, k)] >= 0.0 { -norm } else { norm };
        let v0 = r[(k, k)] - alpha;
        // vᵀv = 2·norm·(norm + |r_kk|) in exact arithmetic; compute directly.
        let mut vtv = v0 * v0;
        for i in k + 1..n {
            vtv += r[(i, k)] * r[(i, k)];
        }
        if vtv <= 0.0 {
            return Ok((solve_ridge(a, b, RIDGE_JITTER)?, true));
        }

        // Apply H = I − 2vvᵀ/vᵀv to the remaining columns and to b.
        for j in k + 1..m {
            let mut dot = v0 * r[(k, j)];
            for i in k + 1..n {
                dot += r[(i, k)] * r[(i, j)];
            }
            let scale = 2.0 * dot / vtv;
            r[(k, j)] -= scale * v0;
            for i in k + 1..n {
                let vik = r[(i, k)];
                r[(i, j)] -= scale * vik;
            }
        }
        let mut dot = v0 * qtb[k];
        for i in k + 1..n {
            dot += r[(i, k)] * qtb[i];
        }
        let scale = 2.0 * dot / vtv;
        qtb[k] -= scale * v0;
        for i in k + 1..n {
            qtb[i] -= scale * r[(i, k)];
        }

        r[(k, k)] = alpha;
        for i in k + 1..n {
            r[(i, k)] = 0.0;
        }
        if alpha.abs() <= tol {
            return Ok((solve_ridge(a, b, RIDGE_JITTER)?, true));
        }
    }

    // Back substitution on the m×m triangle.
    let mut x = Array1::<f64>::zeros(m);
    for i in (0..m).rev() {
        let mut sum = qtb[i];
        for j in i + 1..m {
            sum -= r[(i, j)] * x[j];
        }
        x[i] = sum / r[(i, i)];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Ok((solve_ridge(a, b, RIDGE_JITTER)?, true));
    }
    Ok((x, false))
}

/// Weighted least squares: scale rows of `A` and `b` by `√w`, then [`lstsq`].
pub fn lstsq_weighted(
    a: &ArrayView2<f64>,
    b: &ArrayView1<f64>,
    w: &[f64],
) -> Result<(Array1<f64>, bool)> {
    let (n, m) = a.dim();
    if w.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "lstsq_weighted: {n} rows but {} weights",
            w.len()
        )));
    }
    let mut aw = Array2::<f64>::zeros((n, m));
    let mut bw = Array1::<f64>::zeros(n);
    for i in 0..n {
        let s = w[i].max(0.0).sqrt();
        for j in 0..m {
            aw[(i, j)] = a[(i, j)] * s;
        }
        bw[i] = b[i] * s;
    }
    lstsq(&aw.view(), &bw.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn cholesky_reconstructs() {
        let m = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let l = cholesky(&m.view()).unwrap();
        let rec = l.dot(&l.t());
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(rec[(i, j)], m[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = array![[1.0, 2.0], [2.0, 1.0]]; // eigenvalues 3 and −1
        assert!(matches!(
            cholesky(&m.view()),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn lstsq_exact_system() {
        // x = (3, −2) solves this square well-conditioned system exactly.
        let a = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let b = array![3.0, -2.0, 1.0];
        let (x, flag) = lstsq(&a.view(), &b.view()).unwrap();
        assert!(!flag);
        assert_abs_diff_eq!(x[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn lstsq_matches_normal_equations_oracle() {
        // Random-ish 40×5 design: distinct per-column frequencies keep the
        // columns linearly independent and the Gram matrix well conditioned.
        let n = 40;
        let m = 5;
        let mut a = Array2::<f64>::zeros((n, m));
        for i in 0..n {
            for j in 0..m {
                a[(i, j)] = ((j as f64 + 1.0) * 0.37 * i as f64).sin() + 0.1 * j as f64;
            }
        }
        let b = Array1::from_iter((0..n).map(|i| (i as f64 * 0.3).cos()));
        let (x, flag) = lstsq(&a.view(), &b.view()).unwrap();
        assert!(!flag);
        // Oracle: solve AᵀA x = Aᵀ b by Cholesky (fine for this small case).
        let oracle = solve_ridge(&a.view(), &b.view(), 0.0).unwrap();
        for j in 0..m {
            assert_abs_diff_eq!(x[j], oracle[j], epsilon = 1e-9);
        }
        // Residual orthogonality: Aᵀ(b − Ax) ≈ 0.
        let resid = &b - &a.dot(&x);
        let grad = a.t().dot(&resid);
        for g in grad.iter() {
            assert!(g.abs() < 1e-9);
        }
    }

    #[test]
    fn lstsq_flags_rank_deficiency() {
        // Second column is twice the first.
        let a = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]];
        let b = array![1.0, 2.0, 3.0, 4.0];
        let (x, flag) = lstsq(&a.view(), &b.view()).unwrap();
        assert!(flag);
        // The ridge solution still reproduces b ≈ A x.
        let fitted = a.dot(&x);
        for (f, t) in fitted.iter().zip(b.iter()) {
            assert_abs_diff_eq!(f, t, epsilon = 1e-4);
        }
    }

    #[test]
    fn lstsq_underdetermined_flags() {
        let a = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let b = array![1.0, 2.0];
        let (_, flag) = lstsq(&a.view(), &b.view()).unwrap();
        assert!(flag);
    }

    #[test]
    fn weighted_least_squares_reweights() {
        // With all weight on the first two rows, the line through them wins.
        let a = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]];
        let b = array![0.0, 1.0, 5.0];
        let w = [1.0, 1.0, 0.0];
        let (x, _) = lstsq_weighted(&a.view(), &b.view(), &w).unwrap();
        assert_abs_diff_eq!(x[0], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-10);
    }
}
