//! Binary logistic regression via iteratively reweighted least squares,
//! with optional class-balancing weights and an optional L1 penalty solved
//! by coordinate descent on the working least-squares problem.
//!
//! Step halving keeps the (penalized) deviance non-increasing; runaway
//! coefficients under perfect separation are capped by the iteration limit
//! plus a tiny ridge in each working solve, and the returned model carries a
//! flag instead of failing.

use ndarray::{Array1, Array2};

use crate::data::{DataMatrix, Task, TargetVector};
use crate::error::{Error, Result};
use crate::model::lasso::{standardize, Standardized};
use crate::model::solve::lstsq_weighted;
use crate::model::{LinearModel, Link, Penalty};

const MAX_ITERS: usize = 100;
const MAX_HALVINGS: usize = 30;
const DEV_TOL: f64 = 1e-10;
const PROB_CLAMP: f64 = 1e-12;
/// Coefficient magnitude (logit scale) treated as numerically separated.
const SEPARATION_BOUND: f64 = 30.0;

fn sigmoid(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// −2 × weighted log-likelihood with clamped probabilities.
fn deviance(eta: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let mut dev = 0.0;
    for i in 0..y.len() {
        let mu = sigmoid(eta[i]).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        dev -= 2.0 * w[i] * (y[i] * mu.ln() + (1.0 - y[i]) * (1.0 - mu).ln());
    }
    dev
}

/// Per-sample weights: uniform, or inversely proportional to class frequency
/// (normalized so the weights sum to n).
fn sample_weights(y: &[f64], class_balance: bool) -> Vec<f64> {
    let n = y.len();
    if !class_balance {
        return vec![1.0; n];
    }
    let n1 = y.iter().filter(|v| **v == 1.0).count();
    let n0 = n - n1;
    let (w0, w1) = (
        n as f64 / (2.0 * n0.max(1) as f64),
        n as f64 / (2.0 * n1.max(1) as f64),
    );
    y.iter().map(|v| if *v == 1.0 { w1 } else { w0 }).collect()
}

/// Smallest L1 penalty that zeroes every coefficient of the balanced
/// logistic fit: `max_j |(1/n)·Σᵢ wᵢ x̃ᵢⱼ (yᵢ − ȳ_w)|` on standardized
/// features, where ȳ_w is the weighted base rate.
pub fn lambda_max(x: &DataMatrix, y: &TargetVector, class_balance: bool) -> Result<f64> {
    let labels = binary_targets(x, y)?;
    let w = sample_weights(&labels, class_balance);
    let std = standardize(x);
    let n = x.n() as f64;
    let wsum: f64 = w.iter().sum();
    let ybar: f64 = labels.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / wsum;
    Ok((0..x.p())
        .map(|j| {
            let g: f64 = (0..x.n())
                .map(|i| w[i] * std.xs[(i, j)] * (labels[i] - ybar))
                .sum();
            (g / n).abs()
        })
        .fold(0.0, f64::max))
}

fn binary_targets(x: &DataMatrix, y: &TargetVector) -> Result<Vec<f64>> {
    if y.task() != Task::Classification || y.n_classes() != Some(2) {
        return Err(Error::InvalidArgument(
            "fit_logistic requires a binary classification target".into(),
        ));
    }
    if y.n() != x.n() {
        return Err(Error::ShapeMismatch(format!(
            "fit_logistic: {} rows vs {} targets",
            x.n(),
            y.n()
        )));
    }
    Ok(y.as_slice().to_vec())
}

/// Fit binary logistic regression. `penalty` is either `Penalty::None`
/// (plain IRLS) or `Penalty::L1 { lambda }` (IRLS with an inner coordinate
/// descent). With `class_balance`, samples are weighted inversely to their
/// class frequency.
pub fn fit_logistic(
    x: &DataMatrix,
    y: &TargetVector,
    penalty: Penalty,
    class_balance: bool,
) -> Result<LinearModel> {
    match penalty {
        Penalty::None => fit_irls(x, y, class_balance),
        Penalty::L1 { lambda } => {
            if !(lambda >= 0.0) || !lambda.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "fit_logistic: penalty must be a finite nonnegative real, got {lambda}"
                )));
            }
            fit_irls_l1(x, y, lambda, class_balance)
        }
    }
}

fn fit_irls(x: &DataMatrix, y: &TargetVector, class_balance: bool) -> Result<LinearModel> {
    let labels = binary_targets(x, y)?;
    let (n, p) = (x.n(), x.p());
    let w = sample_weights(&labels, class_balance);

    // Design with intercept column.
    let mut design = Array2::<f64>::zeros((n, p + 1));
    for i in 0..n {
        design[(i, 0)] = 1.0;
        for j in 0..p {
            design[(i, j + 1)] = x.values()[(i, j)];
        }
    }

    let mut theta = Array1::<f64>::zeros(p + 1);
    let mut eta = vec![0.0; n];
    let mut dev = deviance(&eta, &labels, &w);
    let mut rank_deficient = false;
    let mut converged = false;

    for _ in 0..MAX_ITERS {
        // Working response and weights at the current estimate.
        let mut wls_w = vec![0.0; n];
        let mut z = Array1::<f64>::zeros(n);
        for i in 0..n {
            let mu = sigmoid(eta[i]);
            let var = (mu * (1.0 - mu)).max(1e-10);
            wls_w[i] = w[i] * var;
            z[i] = eta[i] + (labels[i] - mu) / var;
        }
        let (candidate, flag) = lstsq_weighted(&design.view(), &z.view(), &wls_w)?;
        rank_deficient |= flag;

        // Step halving toward the previous point until deviance does not
        // increase (Newton steps can overshoot when probabilities saturate).
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Array1<f64> = (1.0 - step) * &theta + step * &candidate;
            let trial_eta: Vec<f64> = (0..n).map(|i| design.row(i).dot(&trial)).collect();
            let trial_dev = deviance(&trial_eta, &labels, &w);
            if trial_dev <= dev + 1e-12 * (1.0 + dev.abs()) {
                let delta = (&trial - &theta).iter().fold(0.0f64, |m, d| m.max(d.abs()));
                let improved = dev - trial_dev;
                theta = trial;
                eta = trial_eta;
                dev = trial_dev;
                accepted = true;
                if improved <= DEV_TOL * (1.0 + dev.abs()) || delta <= 1e-10 {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted || converged {
            converged = converged || !accepted;
            break;
        }
    }

    let max_coef = theta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let separation_flagged = !converged || max_coef > SEPARATION_BOUND;

    Ok(LinearModel {
        coefficients: theta.iter().skip(1).cloned().collect(),
        intercept: theta[0],
        link: Link::Logit,
        penalty: Penalty::None,
        rank_deficient,
        separation_flagged,
    })
}

/// Penalized objective on standardized features:
/// (1/n)·(−Σ wᵢ log lik) + λ‖β̃‖₁.
fn penalized_objective(eta: &[f64], y: &[f64], w: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let n = y.len() as f64;
    deviance(eta, y, w) / (2.0 * n) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

fn fit_irls_l1(
    x: &DataMatrix,
    y: &TargetVector,
    lambda: f64,
    class_balance: bool,
) -> Result<LinearModel> {
    let labels = binary_targets(x, y)?;
    let (n, p) = (x.n(), x.p());
    let nf = n as f64;
    let w = sample_weights(&labels, class_balance);
    let std: Standardized = standardize(x);

    let mut beta = vec![0.0f64; p];
    let mut intercept = 0.0f64;
    let mut eta = vec![0.0; n];
    let mut obj = penalized_objective(&eta, &labels, &w, &beta, lambda);
    let mut converged = false;

    for _ in 0..MAX_ITERS {
        // Quadratic approximation at the current point.
        let mut wls_w = vec![0.0; n];
        let mut z = vec![0.0; n];
        for i in 0..n {
            let mu = sigmoid(eta[i]);
            let var = (mu * (1.0 - mu)).max(1e-10);
            wls_w[i] = w[i] * var;
            z[i] = eta[i] + (labels[i] - mu) / var;
        }

        // Inner coordinate descent on the weighted penalized LS problem.
        let mut b = beta.clone();
        let mut b0 = intercept;
        let mut resid: Vec<f64> = (0..n)
            .map(|i| {
                let mut pred = b0;
                for j in 0..p {
                    if b[j] != 0.0 {
                        pred += std.xs[(i, j)] * b[j];
                    }
                }
                z[i] - pred
            })
            .collect();
        let wsum: f64 = wls_w.iter().sum();
        for _sweep in 0..1000 {
            let mut max_delta = 0.0f64;
            // Intercept (unpenalized).
            let num: f64 = wls_w.iter().zip(&resid).map(|(w, r)| w * r).sum();
            let d0 = num / wsum;
            if d0 != 0.0 {
                b0 += d0;
                for i in 0..n {
                    resid[i] -= d0;
                }
                max_delta = max_delta.max(d0.abs());
            }
            for j in 0..p {
                if std.scales[j] == 0.0 {
                    continue;
                }
                let old = b[j];
                let mut num = 0.0;
                let mut den = 0.0;
                for i in 0..n {
                    let xij = std.xs[(i, j)];
                    num += wls_w[i] * xij * (resid[i] + xij * old);
                    den += wls_w[i] * xij * xij;
                }
                let new = soft(num / nf, lambda) / (den / nf).max(1e-12);
                if new != old {
                    let delta = new - old;
                    for i in 0..n {
                        resid[i] -= std.xs[(i, j)] * delta;
                    }
                    b[j] = new;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            if max_delta <= 1e-7 {
                break;
            }
        }

        // Step halving on the true penalized objective.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let tb: Vec<f64> = beta
                .iter()
                .zip(&b)
                .map(|(o, n)| o + step * (n - o))
                .collect();
            let tb0 = intercept + step * (b0 - intercept);
            let teta: Vec<f64> = (0..n)
                .map(|i| {
                    let mut e = tb0;
                    for j in 0..p {
                        if tb[j] != 0.0 {
                            e += std.xs[(i, j)] * tb[j];
                        }
                    }
                    e
                })
                .collect();
            let tobj = penalized_objective(&teta, &labels, &w, &tb, lambda);
            if tobj <= obj + 1e-12 * (1.0 + obj.abs()) {
                let improved = obj - tobj;
                beta = tb;
                intercept = tb0;
                eta = teta;
                obj = tobj;
                accepted = true;
                if improved <= 1e-9 * (1.0 + obj.abs()) {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted || converged {
            converged = true;
            break;
        }
    }

    // Map back to the original scale.
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
    let max_coef = beta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(LinearModel {
        coefficients,
        intercept: intercept - offset,
        link: Link::Logit,
        penalty: Penalty::L1 { lambda },
        rank_deficient: false,
        separation_flagged: !converged || max_coef > SEPARATION_BOUND,
    })
}

fn soft(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}
