//! Built-in master models (OLS, lasso, logistic) with extractable
//! ground-truth importances, and a uniform prediction handle that also wraps
//! external black-box processes.

mod external;
pub mod lasso;
pub mod logistic;
pub mod solve;

pub use external::{ExternalPredictor, DEFAULT_TIMEOUT};
pub use lasso::{fit_lasso, lambda_max as lasso_lambda_max};
pub use logistic::{fit_logistic, lambda_max as logistic_lambda_max};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Task, TargetVector};
use crate::error::{Error, Result};
use crate::stats::sample_std;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Link {
    Identity,
    Logit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Penalty {
    None,
    L1 { lambda: f64 },
}

/// A fitted generalized linear model with identity or logit link. Immutable
/// once fitted; all fields are plain data so models can be saved and served.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub link: Link,
    pub penalty: Penalty,
    /// The design was rank deficient and a ridge jitter was used.
    #[serde(default)]
    pub rank_deficient: bool,
    /// The logistic fit hit its iteration cap or grew unbounded
    /// coefficients (perfect separation).
    #[serde(default)]
    pub separation_flagged: bool,
}

impl LinearModel {
    pub fn p(&self) -> usize {
        self.coefficients.len()
    }

    /// Prediction arity: 1 for identity link, 2 class probabilities for logit.
    pub fn output_arity(&self) -> usize {
        match self.link {
            Link::Identity => 1,
            Link::Logit => 2,
        }
    }

    /// Predict on a raw matrix: identity → n×1 of Xβ+b; logit → n×2 of
    /// [1−σ(Xβ+b), σ(Xβ+b)].
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let (n, p) = x.dim();
        if p != self.p() {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} features, matrix has {p}",
                self.p()
            )));
        }
        let beta = ArrayView1::from(&self.coefficients);
        let eta = x.dot(&beta) + self.intercept;
        match self.link {
            Link::Identity => {
                let mut out = Array2::zeros((n, 1));
                out.column_mut(0).assign(&eta);
                Ok(out)
            }
            Link::Logit => {
                let mut out = Array2::zeros((n, 2));
                for (i, e) in eta.iter().enumerate() {
                    let p1 = 1.0 / (1.0 + (-e).exp());
                    out[(i, 0)] = 1.0 - p1;
                    out[(i, 1)] = p1;
                }
                Ok(out)
            }
        }
    }

    /// Re-embed a model fitted on a column subset into the full feature
    /// space, with zero coefficients at the positions that were left out.
    /// `kept[k]` gives the full-space index of fitted coefficient `k`.
    pub fn expand_to(&self, full_p: usize, kept: &[usize]) -> Result<LinearModel> {
        if kept.len() != self.p() || kept.iter().any(|&j| j >= full_p) {
            return Err(Error::ShapeMismatch(format!(
                "expand_to: {} fitted coefficients into {} slots",
                self.p(),
                full_p
            )));
        }
        let mut coefficients = vec![0.0; full_p];
        for (k, &j) in kept.iter().enumerate() {
            coefficients[j] = self.coefficients[k];
        }
        Ok(LinearModel {
            coefficients,
            ..self.clone()
        })
    }
}

/// Ordinary least squares via Householder QR. Rank-deficient designs are
/// solved with a tiny ridge jitter and flagged on the model.
pub fn fit_ols(x: &DataMatrix, y: &TargetVector) -> Result<LinearModel> {
    if y.task() != Task::Regression {
        return Err(Error::InvalidArgument(
            "fit_ols requires a regression target".into(),
        ));
    }
    if y.n() != x.n() {
        return Err(Error::ShapeMismatch(format!(
            "fit_ols: {} rows vs {} targets",
            x.n(),
            y.n()
        )));
    }
    let (n, p) = (x.n(), x.p());
    let mut design = Array2::<f64>::zeros((n, p + 1));
    for i in 0..n {
        design[(i, 0)] = 1.0;
        for j in 0..p {
            design[(i, j + 1)] = x.values()[(i, j)];
        }
    }
    let b = ArrayView1::from(y.as_slice());
    let (theta, rank_deficient) = solve::lstsq(&design.view(), &b)?;
    Ok(LinearModel {
        coefficients: theta.iter().skip(1).cloned().collect(),
        intercept: theta[0],
        link: Link::Identity,
        penalty: Penalty::None,
        rank_deficient,
        separation_flagged: false,
    })
}

/// Which backend serves predictions.
#[derive(Debug)]
pub enum Backend {
    Builtin(LinearModel),
    External(ExternalPredictor),
}

/// Uniform prediction interface over built-in models and external-process
/// black boxes; yields n×q matrices of finite reals, with probability rows
/// validated to sum to 1 (±1e−6) when q ≥ 2.
#[derive(Debug)]
pub struct PredictorHandle {
    backend: Backend,
    output_arity: usize,
}

impl PredictorHandle {
    pub fn builtin(model: LinearModel) -> Self {
        let output_arity = model.output_arity();
        Self {
            backend: Backend::Builtin(model),
            output_arity,
        }
    }

    /// Launch an external predictor command with declared output arity `q`.
    pub fn external(command: &[String], q: usize, timeout: std::time::Duration) -> Result<Self> {
        Ok(Self {
            backend: Backend::External(ExternalPredictor::spawn(command, q, timeout)?),
            output_arity: q,
        })
    }

    pub fn output_arity(&self) -> usize {
        self.output_arity
    }

    /// The built-in model, when this handle wraps one.
    pub fn model(&self) -> Option<&LinearModel> {
        match &self.backend {
            Backend::Builtin(m) => Some(m),
            Backend::External(_) => None,
        }
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let out = match &self.backend {
            Backend::Builtin(m) => m.predict(x)?,
            Backend::External(e) => e.predict(x)?,
        };
        if out.dim() != (x.nrows(), self.output_arity) {
            return Err(Error::Predictor(format!(
                "predictor returned a {:?} matrix, expected ({}, {})",
                out.dim(),
                x.nrows(),
                self.output_arity
            )));
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Predictor("non-finite prediction".into()));
        }
        if self.output_arity >= 2 {
            for (i, row) in out.outer_iter().enumerate() {
                let s: f64 = row.sum();
                if (s - 1.0).abs() > 1e-6 {
                    return Err(Error::Predictor(format!(
                        "probability row {i} sums to {s}, not 1"
                    )));
                }
            }
        }
        Ok(out)
    }
}

/// Which functional of (β, σ̂) defines a linear model's own importance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GtConvention {
    /// |β_j|·σ̂_j, scale-invariant and proportional to the typical prediction
    /// change when feature j moves by one sample standard deviation.
    #[default]
    AbsBetaStd,
    /// |β_j| alone (scale-sensitive).
    AbsBeta,
    /// β_j²·σ̂_j² (variance-contribution flavor).
    SqBetaVar,
}

impl GtConvention {
    pub fn label(self) -> &'static str {
        match self {
            GtConvention::AbsBetaStd => "abs-beta-std",
            GtConvention::AbsBeta => "abs-beta",
            GtConvention::SqBetaVar => "sq-beta-var",
        }
    }
}

/// The model's own normalized importances on an evaluation matrix, under the
/// default |β_j|·σ̂_j convention. Zero-coefficient features score exactly 0.
pub fn ground_truth_importance(model: &LinearModel, x: &DataMatrix) -> Result<Vec<f64>> {
    ground_truth_importance_with(model, x, GtConvention::default())
}

/// As [`ground_truth_importance`] with an explicit convention.
pub fn ground_truth_importance_with(
    model: &LinearModel,
    x: &DataMatrix,
    convention: GtConvention,
) -> Result<Vec<f64>> {
    if model.p() != x.p() {
        return Err(Error::ShapeMismatch(format!(
            "model has {} coefficients, matrix has {} features",
            model.p(),
            x.p()
        )));
    }
    let raw: Vec<f64> = model
        .coefficients
        .iter()
        .enumerate()
        .map(|(j, b)| {
            if *b == 0.0 {
                return 0.0;
            }
            let col = x.column(j).to_vec();
            let sd = sample_std(&col);
            match convention {
                GtConvention::AbsBetaStd => b.abs() * sd,
                GtConvention::AbsBeta => b.abs(),
                GtConvention::SqBetaVar => b * b * sd * sd,
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateImportance(
            "all model coefficients are zero".into(),
        ));
    }
    Ok(raw.iter().map(|v| v / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn ols_exact_single_feature() {
        let x = DataMatrix::from_values(array![[1.0], [2.0], [3.0], [4.0]]).unwrap();
        let y = TargetVector::regression(vec![2.0, 4.0, 6.0, 8.0]).unwrap();
        let m = fit_ols(&x, &y).unwrap();
        assert_abs_diff_eq!(m.coefficients[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.intercept, 0.0, epsilon = 1e-9);
        assert!(!m.rank_deficient);
    }

    #[test]
    fn ols_recovers_known_beta_noise_free() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let beta = [1.5, -2.0, 0.0, 0.75];
        let mut xs = Array2::<f64>::zeros((50, 4));
        for v in xs.iter_mut() {
            *v = rng.gen::<f64>() * 4.0 - 2.0;
        }
        let y: Vec<f64> = (0..50)
            .map(|i| 0.3 + (0..4).map(|j| beta[j] * xs[(i, j)]).sum::<f64>())
            .collect();
        let x = DataMatrix::from_values(xs).unwrap();
        let m = fit_ols(&x, &TargetVector::regression(y.clone()).unwrap()).unwrap();
        for j in 0..4 {
            assert_abs_diff_eq!(m.coefficients[j], beta[j], epsilon = 1e-6);
        }
        // In-sample R² on noise-free data is 1 up to rounding.
        let preds = m
            .predict(x.values())
            .unwrap()
            .column(0)
            .to_vec();
        let ybar = y.iter().sum::<f64>() / 50.0;
        let ss_res: f64 = preds.iter().zip(&y).map(|(p, t)| (p - t) * (p - t)).sum();
        let ss_tot: f64 = y.iter().map(|t| (t - ybar) * (t - ybar)).sum();
        assert!(1.0 - ss_res / ss_tot > 0.99);
    }

    #[test]
    fn logit_predictions_are_probability_rows() {
        let model = LinearModel {
            coefficients: vec![0.0, 0.0],
            intercept: 0.0,
            link: Link::Logit,
            penalty: Penalty::None,
            rank_deficient: false,
            separation_flagged: false,
        };
        let preds = model.predict(&array![[5.0, -3.0], [0.1, 0.2]]).unwrap();
        // All-zero parameters → probabilities (0.5, 0.5) in every row.
        for row in preds.outer_iter() {
            assert_abs_diff_eq!(row[0], 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(row[1], 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_coefficient_model_predicts_intercept() {
        let model = LinearModel {
            coefficients: vec![0.0, 0.0, 0.0],
            intercept: 4.25,
            link: Link::Identity,
            penalty: Penalty::None,
            rank_deficient: false,
            separation_flagged: false,
        };
        let preds = model
            .predict(&array![[1.0, 2.0, 3.0], [9.0, 9.0, 9.0]])
            .unwrap();
        assert!(preds.iter().all(|v| *v == 4.25));
    }

    #[test]
    fn ground_truth_formula() {
        // Unit-variance columns: scores proportional to |β|.
        let x = DataMatrix::from_values(array![
            [1.0, 1.0, 1.0],
            [-1.0, -1.0, -1.0],
            [1.0, -1.0, 1.0],
            [-1.0, 1.0, -1.0]
        ])
        .unwrap();
        let model = LinearModel {
            coefficients: vec![2.0, 1.0, 0.0],
            intercept: 0.0,
            link: Link::Identity,
            penalty: Penalty::None,
            rank_deficient: false,
            separation_flagged: false,
        };
        let gt = ground_truth_importance(&model, &x).unwrap();
        assert_abs_diff_eq!(gt[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gt[1], 1.0 / 3.0, epsilon = 1e-12);
        assert_eq!(gt[2], 0.0);
    }

    #[test]
    fn ground_truth_uses_sample_std() {
        // σ̂ = (2, 1) with β = (1, 1) → scores (2/3, 1/3).
        let x = DataMatrix::from_values(array![[2.0, 1.0], [-2.0, -1.0], [2.0, 1.0], [-2.0, -1.0]])
            .unwrap();
        let model = LinearModel {
            coefficients: vec![1.0, 1.0],
            intercept: 0.0,
            link: Link::Identity,
            penalty: Penalty::None,
            rank_deficient: false,
            separation_flagged: false,
        };
        let gt = ground_truth_importance(&model, &x).unwrap();
        assert_abs_diff_eq!(gt[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gt[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn ground_truth_is_permutation_equivariant() {
        let x = DataMatrix::from_values(array![
            [0.1, 3.0, -1.0],
            [0.5, 1.0, 2.0],
            [0.9, 2.0, 0.0],
            [0.2, 5.0, 1.0]
        ])
        .unwrap();
        let model = LinearModel {
            coefficients: vec![1.0, 0.5, 2.0],
            intercept: 0.0,
            link: Link::Identity,
            penalty: Penalty::None,
            rank_deficient: false,
            separation_flagged: false,
        };
        let gt = ground_truth_importance(&model, &x).unwrap();
        let xr = x.select_columns(&[2, 0, 1]).unwrap();
        let mr = LinearModel {
            coefficients: vec![2.0, 1.0, 0.5],
            ..model
        };
        let gtr = ground_truth_importance(&mr, &xr).unwrap();
        assert_abs_diff_eq!(gtr[0], gt[2], epsilon = 1e-15);
        assert_abs_diff_eq!(gtr[1], gt[0], epsilon = 1e-15);
        assert_abs_diff_eq!(gtr[2], gt[1], epsilon = 1e-15);
    }

    #[test]
    fn all_zero_coefficients_is_degenerate() {
        let x = DataMatrix::from_values(array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let model = LinearModel {
            coefficients: vec![0.0, 0.0],
            intercept: 1.0,
            link: Link::Identity,
            penalty: Penalty::None,
            rank_deficient: false,
            separation_flagged: false,
        };
        assert!(matches!(
            ground_truth_importance(&model, &x),
            Err(Error::DegenerateImportance(_))
        ));
    }

    #[test]
    fn expand_to_reinserts_zeros() {
        let model = LinearModel {
            coefficients: vec![1.5, -0.5],
            intercept: 0.2,
            link: Link::Identity,
            penalty: Penalty::None,
            rank_deficient: false,
            separation_flagged: false,
        };
        let full = model.expand_to(4, &[0, 3]).unwrap();
        assert_eq!(full.coefficients, vec![1.5, 0.0, 0.0, -0.5]);
        assert!(model.expand_to(4, &[0, 4]).is_err());
    }

    #[test]
    fn handle_validates_probability_rows() {
        let model = LinearModel {
            coefficients: vec![1.0],
            intercept: 0.0,
            link: Link::Logit,
            penalty: Penalty::None,
            rank_deficient: false,
            separation_flagged: false,
        };
        let handle = PredictorHandle::builtin(model);
        assert_eq!(handle.output_arity(), 2);
        let preds = handle.predict(&array![[0.5], [-0.5]]).unwrap();
        for row in preds.outer_iter() {
            assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn builtin_predictions_are_bit_identical_across_calls() {
        let model = LinearModel {
            coefficients: vec![0.3, -0.7, 0.001],
            intercept: 0.1,
            link: Link::Identity,
            penalty: Penalty::None,
            rank_deficient: false,
            separation_flagged: false,
        };
        let x = array![[0.1, 0.2, 0.3], [0.7, -0.1, 0.5], [1.0, 1.0, 1.0]];
        let a = model.predict(&x).unwrap();
        let b = model.predict(&x).unwrap();
        assert_eq!(a, b);
    }
}
