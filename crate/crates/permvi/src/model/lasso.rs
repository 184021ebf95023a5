//! L1-penalized linear regression by cyclic coordinate descent.
//!
//! Features are standardized internally (mean 0, squared norm n) so one
//! penalty applies evenly; reported coefficients are mapped back to the
//! original scale. The objective (1/(2n))‖ỹ − X̃β̃‖² + λ‖β̃‖₁ is
//! non-increasing across sweeps, which the solver checks as it runs.

use ndarray::Array2;

use crate::data::{DataMatrix, Task, TargetVector};
use crate::error::{Error, Result};
use crate::model::{LinearModel, Link, Penalty};
use crate::stats::mean;

pub const MAX_SWEEPS: usize = 10_000;
pub const COEF_TOL: f64 = 1e-8;
pub const KKT_TOL: f64 = 1e-6;

/// Columns scaled to mean 0 and (1/n)·Σx² = 1. Constant columns get scale 0
/// and are pinned to coefficient 0.
pub(crate) struct Standardized {
    pub xs: Array2<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

pub(crate) fn standardize(x: &DataMatrix) -> Standardized {
    let (n, p) = (x.n(), x.p());
    let mut xs = Array2::<f64>::zeros((n, p));
    let mut means = vec![0.0; p];
    let mut scales = vec![0.0; p];
    for j in 0..p {
        let col = x.column(j);
        let m = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        let s = var.sqrt();
        means[j] = m;
        scales[j] = s;
        if s > 0.0 {
            for i in 0..n {
                xs[(i, j)] = (col[i] - m) / s;
            }
        }
    }
    Standardized { xs, means, scales }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Smallest penalty that zeroes every coefficient:
/// `max_j |x̃_jᵀ(y − ȳ)| / n` on the standardized design.
pub fn lambda_max(x: &DataMatrix, y: &TargetVector) -> f64 {
    let std = standardize(x);
    let n = x.n() as f64;
    let ybar = mean(y.as_slice());
    let yc: Vec<f64> = y.as_slice().iter().map(|v| v - ybar).collect();
    (0..x.p())
        .map(|j| {
            let dot: f64 = std
                .xs
                .column(j)
                .iter()
                .zip(&yc)
                .map(|(a, b)| a * b)
                .sum();
            (dot / n).abs()
        })
        .fold(0.0, f64::max)
}

fn objective(resid: &[f64], beta: &[f64], lambda: f64, n: f64) -> f64 {
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    rss / (2.0 * n) + lambda * l1
}

/// Fit lasso regression at penalty `lambda` (`lambda = 0` reduces to least
/// squares, solved by the same sweeps). Non-convergence returns
/// [`Error::NoConvergence`] carrying the last iterate.
pub fn fit_lasso(x: &DataMatrix, y: &TargetVector, lambda: f64) -> Result<LinearModel> {
    fit_lasso_warm(x, y, lambda, None)
}

/// Same as [`fit_lasso`] but optionally starting from a previous solution's
/// standardized coefficients (used by penalty-path searches).
pub fn fit_lasso_warm(
    x: &DataMatrix,
    y: &TargetVector,
    lambda: f64,
    warm: Option<&[f64]>,
) -> Result<LinearModel> {
    if y.task() != Task::Regression {
        return Err(Error::InvalidArgument(
            "fit_lasso requires a regression target".into(),
        ));
    }
    if y.n() != x.n() {
        return Err(Error::ShapeMismatch(format!(
            "fit_lasso: {} rows vs {} targets",
            x.n(),
            y.n()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "fit_lasso: penalty must be a finite nonnegative real, got {lambda}"
        )));
    }

    let (n, p) = (x.n(), x.p());
    let nf = n as f64;
    let std = standardize(x);
    let ybar = mean(y.as_slice());

    let mut beta = match warm {
        Some(w) if w.len() == p => w.to_vec(),
        _ => vec![0.0; p],
    };
    // Residual r = ỹ − X̃β̃ maintained incrementally.
    let mut resid: Vec<f64> = (0..n)
        .map(|i| {
            let mut pred = 0.0;
            for j in 0..p {
                pred += std.xs[(i, j)] * beta[j];
            }
            y.as_slice()[i] - ybar - pred
        })
        .collect();

    let mut prev_obj = objective(&resid, &beta, lambda, nf);
    let mut converged = false;
    let mut max_delta = f64::INFINITY;
    for _sweep in 0..MAX_SWEEPS {
        max_delta = 0.0;
        for j in 0..p {
            if std.scales[j] == 0.0 {
                continue; // constant column: coefficient pinned to 0
            }
            let old = beta[j];
            // ρ_j = (1/n)·x̃_jᵀ(r + x̃_j β_j); with ‖x̃_j‖²/n = 1 the update
            // is a plain soft threshold.
            let mut rho = 0.0;
            for i in 0..n {
                rho += std.xs[(i, j)] * resid[i];
            }
            rho = rho / nf + old;
            let new = soft_threshold(rho, lambda);
            if new != old {
                let delta = new - old;
                for i in 0..n {
                    resid[i] -= std.xs[(i, j)] * delta;
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        let obj = objective(&resid, &beta, lambda, nf);
        debug_assert!(
            obj <= prev_obj + 1e-12 * (1.0 + prev_obj.abs()),
            "coordinate descent objective increased: {prev_obj} -> {obj}"
        );
        prev_obj = obj;
        if max_delta <= COEF_TOL {
            converged = true;
            break;
        }
    }

    // KKT stationarity on the standardized problem:
    //   |(1/n)·x̃_jᵀr| ≤ λ (+tol)          for β̃_j = 0
    //   (1/n)·x̃_jᵀr = λ·sign(β̃_j) (±tol)  for β̃_j ≠ 0
    let mut kkt_ok = true;
    for j in 0..p {
        if std.scales[j] == 0.0 {
            continue;
        }
        let mut g = 0.0;
        for i in 0..n {
            g += std.xs[(i, j)] * resid[i];
        }
        g /= nf;
        let ok = if beta[j] == 0.0 {
            g.abs() <= lambda + KKT_TOL
        } else {
            (g - lambda * beta[j].signum()).abs() <= KKT_TOL
        };
        kkt_ok &= ok;
    }

    let model = unstandardized_model(&beta, &std, ybar, lambda);
    if !converged || !kkt_ok {
        return Err(Error::NoConvergence {
            iters: MAX_SWEEPS,
            max_delta,
            last: Box::new(model),
        });
    }
    Ok(model)
}

fn unstandardized_model(beta: &[f64], std: &Standardized, ybar: f64, lambda: f64) -> LinearModel {
    let coefficients: Vec<f64> = beta
        .iter()
        .zip(&std.scales)
        .map(|(b, s)| if *s > 0.0 { b / s } else { 0.0 })
        .collect();
    let offset: f64 = coefficients
        .iter()
        .zip(&std.means)
        .map(|(c, m)| c * m)
        .sum();
    LinearModel {
        coefficients,
        intercept: ybar - offset,
        link: Link::Identity,
        penalty: Penalty::L1 { lambda },
        rank_deficient: false,
        separation_flagged: false,
    }
}
