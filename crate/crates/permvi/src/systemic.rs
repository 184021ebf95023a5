//! Systemic importance: propagate each feature's perturbation to its
//! correlated neighbors before scoring, with a permutation-calibrated
//! threshold deciding which correlations count.

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

use crate::data::{clip_and_normalize, DataMatrix};
use crate::direct::{direct_raw, prediction_discrepancy, DiffMetric, Scheme, ScoringMetric};
use crate::error::{Error, Result};
use crate::model::PredictorHandle;
use crate::perm::{keyed_rng, shuffle_with};
use crate::report::{ImportanceReport, Provenance};
use crate::stats::{empirical_quantile, spearman};

/// Pairwise feature correlations with the calibrated propagation threshold
/// and the edges that clear it.
#[derive(Debug, Clone)]
pub struct CorrelationGraph {
    /// Symmetric p×p correlation matrix with unit diagonal.
    pub matrix: Array2<f64>,
    /// Propagation threshold: pairs with |ρ| ≤ tau are treated as noise.
    pub tau: f64,
    /// Significance level the threshold was calibrated at.
    pub alpha: f64,
    /// Seed of the calibration permutations.
    pub seed: u64,
    /// Index pairs (j, k) with j < k and |ρ_jk| > tau.
    pub edges: Vec<(usize, usize)>,
}

impl CorrelationGraph {
    /// Assemble a graph from a correlation matrix and threshold, validating
    /// symmetry, the unit diagonal, and tau's range, and deriving the edges.
    pub fn from_matrix(matrix: Array2<f64>, tau: f64, alpha: f64, seed: u64) -> Result<Self> {
        let p = matrix.nrows();
        if matrix.ncols() != p {
            return Err(Error::ShapeMismatch(format!(
                "correlation matrix is {}×{}, expected square",
                p,
                matrix.ncols()
            )));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidArgument(format!(
                "threshold tau must lie in [0,1], got {tau}"
            )));
        }
        for j in 0..p {
            if (matrix[[j, j]] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "correlation matrix diagonal entry {j} is {}, expected 1",
                    matrix[[j, j]]
                )));
            }
            for k in 0..j {
                let v = matrix[[j, k]];
                if (v - matrix[[k, j]]).abs() > 1e-12 || !(-1.0..=1.0).contains(&v) {
                    return Err(Error::InvalidArgument(format!(
                        "correlation matrix entry ({j},{k}) is not a symmetric value in [−1,1]"
                    )));
                }
            }
        }
        let mut edges = Vec::new();
        for j in 0..p {
            for k in (j + 1)..p {
                if matrix[[j, k]].abs() > tau {
                    edges.push((j, k));
                }
            }
        }
        Ok(CorrelationGraph {
            matrix,
            tau,
            alpha,
            seed,
            edges,
        })
    }

    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }

    /// Neighbors of feature `j`: every k ≠ j with |ρ_kj| > tau, with the
    /// signed correlation.
    pub fn neighbors(&self, j: usize) -> Vec<(usize, f64)> {
        (0..self.p())
            .filter(|&k| k != j && self.matrix[[j, k]].abs() > self.tau)
            .map(|k| (k, self.matrix[[j, k]]))
            .collect()
    }

    /// Write the correlation matrix as CSV with a feature-name header row
    /// and leading name column (heatmap input).
    pub fn write_heatmap_csv(&self, names: &[String], path: &Path) -> Result<()> {
        if names.len() != self.p() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature names for a {}×{} matrix",
                names.len(),
                self.p(),
                self.p()
            )));
        }
        let mut out = String::new();
        out.push_str("feature");
        for name in names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for j in 0..self.p() {
            out.push_str(&names[j]);
            for k in 0..self.p() {
                out.push(',');
                out.push_str(&format!("{}", self.matrix[[j, k]]));
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}

/// Pairwise Spearman correlation matrix (midranks for ties). A constant
/// column has no defined rank correlation; its off-diagonal entries are set
/// to 0 and a warning is logged.
pub fn spearman_matrix(x: &DataMatrix) -> Result<Array2<f64>> {
    if x.n() < 3 {
        return Err(Error::InvalidArgument(format!(
            "spearman_matrix: need at least 3 rows, got {}",
            x.n()
        )));
    }
    let columns: Vec<Vec<f64>> = (0..x.p()).map(|j| x.column(j).to_vec()).collect();
    spearman_of_columns(&columns, Some(&x.feature_names()))
}

fn is_constant(column: &[f64]) -> bool {
    column.windows(2).all(|w| w[0] == w[1])
}

fn spearman_of_columns(columns: &[Vec<f64>], names: Option<&[String]>) -> Result<Array2<f64>> {
    let p = columns.len();
    let constant: Vec<bool> = columns.iter().map(|c| is_constant(c)).collect();
    for (j, &c) in constant.iter().enumerate() {
        if c {
            let label = names
                .map(|n| n[j].clone())
                .unwrap_or_else(|| format!("column {j}"));
            log::warn!(
                "feature `{label}` is constant; its rank correlations are undefined and set to 0"
            );
        }
    }
    let mut matrix = Array2::<f64>::eye(p);
    for j in 0..p {
        for k in (j + 1)..p {
            let rho = if constant[j] || constant[k] {
                0.0
            } else {
                spearman(&columns[j], &columns[k])?
            };
            matrix[[j, k]] = rho;
            matrix[[k, j]] = rho;
        }
    }
    Ok(matrix)
}

/// Calibrate the propagation threshold on a training matrix: permute each
/// column independently (seeded, one stream per column), pool the
/// p(p−1)/2 absolute Spearman values of the permuted data, and take the
/// (1−alpha) empirical quantile — always an observed null value. The
/// returned graph carries the *original* matrix's correlations.
pub fn calibrate_threshold(x_train: &DataMatrix, alpha: f64, seed: u64) -> Result<CorrelationGraph> {
    if x_train.p() < 2 {
        return Err(Error::InvalidArgument(format!(
            "calibrate_threshold: need at least 2 features, got {}",
            x_train.p()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "calibrate_threshold: alpha must lie in (0,1), got {alpha}"
        )));
    }
    let pooled = null_correlations(x_train, seed)?;
    let tau = empirical_quantile(&pooled, 1.0 - alpha)?;
    let matrix = spearman_matrix(x_train)?;
    CorrelationGraph::from_matrix(matrix, tau.clamp(0.0, 1.0), alpha, seed)
}

/// Absolute pairwise Spearman values after independently permuting every
/// column (the empirical null for the threshold). Exposed for validation.
pub fn null_correlations(x: &DataMatrix, seed: u64) -> Result<Vec<f64>> {
    let permuted: Vec<Vec<f64>> = (0..x.p())
        .map(|j| {
            let mut col = x.column(j).to_vec();
            shuffle_with(&mut col, &mut keyed_rng(seed, j, 0));
            col
        })
        .collect();
    let null_matrix = spearman_of_columns(&permuted, None)?;
    let mut pooled = Vec::with_capacity(x.p() * (x.p() - 1) / 2);
    for j in 0..x.p() {
        for k in (j + 1)..x.p() {
            pooled.push(null_matrix[[j, k]].abs());
        }
    }
    Ok(pooled)
}

/// Raw systemic scores: permute feature j, add ρ_kj·δ to every neighbor k
/// (one additive update from each neighbor's original values), and score the
/// prediction disruption with the same metric as the direct method.
pub fn systemic_raw(
    handle: &PredictorHandle,
    x: &DataMatrix,
    metric: DiffMetric,
    scheme: Scheme,
    graph: &CorrelationGraph,
) -> Result<Vec<f64>> {
    if graph.p() != x.p() {
        return Err(Error::ShapeMismatch(format!(
            "correlation graph covers {} features but the matrix has {}",
            graph.p(),
            x.p()
        )));
    }
    let base = handle.predict(x.values())?;
    let raws: Vec<Result<f64>> = (0..x.p())
        .into_par_iter()
        .map(|j| {
            let original = x.column(j).to_vec();
            let permuted = scheme.apply(&original);
            let mut values = x.values().clone();
            for i in 0..x.n() {
                values[[i, j]] = permuted[i];
            }
            for (k, rho) in graph.neighbors(j) {
                for i in 0..x.n() {
                    values[[i, k]] += rho * (permuted[i] - original[i]);
                }
            }
            let preds = handle.predict(&values)?;
            Ok(prediction_discrepancy(&base, &preds, metric))
        })
        .collect();
    raws.into_iter().collect()
}

/// Systemic importance report: systemic share s (propagated disruption,
/// normalized), direct share d (from the plain direct method, its own
/// normalization), and indirect share i = s − d. When no correlation clears
/// the threshold this reduces bit-for-bit to the direct report.
pub fn systemic_scores(
    handle: &PredictorHandle,
    x: &DataMatrix,
    metric: DiffMetric,
    scheme: Scheme,
    graph: &CorrelationGraph,
) -> Result<ImportanceReport> {
    let start = std::time::Instant::now();
    let raw = systemic_raw(handle, x, metric, scheme, graph)?;
    let s = clip_and_normalize(&raw)?;
    let d = clip_and_normalize(&direct_raw(handle, x, metric, scheme, None)?)?;
    let i: Vec<f64> = s.iter().zip(d.iter()).map(|(a, b)| a - b).collect();
    ImportanceReport::new_systemic(
        ScoringMetric::Diff(metric),
        &x.feature_names(),
        raw,
        s,
        d,
        i,
        Provenance {
            seed: Some(graph.seed),
            tau: Some(graph.tau),
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
            ..Provenance::default()
        },
    )
}

/// One feature's systemic/direct/indirect decomposition plus its proxies
/// (features correlated above the threshold) and the share of importance
/// sitting on the feature or its proxies.
#[derive(Debug, Clone, Serialize)]
pub struct AuditResult {
    pub feature: String,
    pub systemic: f64,
    pub direct: f64,
    pub indirect: f64,
    /// (name, ρ) for every proxy with |ρ| > tau, in feature order.
    pub proxies: Vec<(String, f64)>,
    /// Sum of reference scores (ground truth when supplied, otherwise the
    /// direct shares) over the feature and its proxies.
    pub proxy_influenced_share: f64,
}

/// Audit a single feature: its decomposition, proxy list, and the share of
/// reference importance flowing through it or its proxies. `ground_truth`,
/// when given, must be normalized scores in feature order.
pub fn audit_feature(
    handle: &PredictorHandle,
    x: &DataMatrix,
    metric: DiffMetric,
    scheme: Scheme,
    graph: &CorrelationGraph,
    feature: &str,
    ground_truth: Option<&[f64]>,
) -> Result<AuditResult> {
    let j = x
        .feature_index(feature)
        .ok_or_else(|| Error::UnknownFeature(feature.to_string()))?;
    if let Some(gt) = ground_truth {
        if gt.len() != x.p() {
            return Err(Error::ShapeMismatch(format!(
                "ground-truth scores have length {}, expected {}",
                gt.len(),
                x.p()
            )));
        }
    }
    let report = systemic_scores(handle, x, metric, scheme, graph)?;
    let s = report.systemic.as_ref().unwrap();
    let d = report.direct.as_ref().unwrap();
    let i = report.indirect.as_ref().unwrap();
    let proxies: Vec<(String, f64)> = graph
        .neighbors(j)
        .into_iter()
        .map(|(k, rho)| (x.feature_name(k).to_string(), rho))
        .collect();
    let reference: &[f64] = ground_truth.unwrap_or(d);
    let mut share = reference[j];
    for (k, _) in graph.neighbors(j) {
        share += reference[k];
    }
    Ok(AuditResult {
        feature: feature.to_string(),
        systemic: s[j],
        direct: d[j],
        indirect: i[j],
        proxies,
        proxy_influenced_share: share,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinearModel, Link, Penalty};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;

    fn linear_handle(coefficients: Vec<f64>, intercept: f64) -> PredictorHandle {
        PredictorHandle::builtin(LinearModel {
            coefficients,
            intercept,
            link: Link::Identity,
            penalty: Penalty::None,
            rank_deficient: false,
            separation_flagged: false,
        })
    }

    #[test]
    fn spearman_matrix_monotone_transform_gives_one() {
        let x1: Vec<f64> = vec![0.3, -1.2, 2.4, 0.9, -0.5, 1.7];
        let x2: Vec<f64> = x1.iter().map(|v| v.exp()).collect();
        let mut values = Array2::zeros((6, 2));
        for i in 0..6 {
            values[[i, 0]] = x1[i];
            values[[i, 1]] = x2[i];
        }
        let x = DataMatrix::from_values(values).unwrap();
        let m = spearman_matrix(&x).unwrap();
        assert_abs_diff_eq!(m[[0, 1]], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn spearman_matrix_reversal_gives_minus_one() {
        let x = DataMatrix::from_values(array![[1.0, 3.0], [2.0, 2.0], [3.0, 1.0]]).unwrap();
        let m = spearman_matrix(&x).unwrap();
        assert_abs_diff_eq!(m[[0, 1]], -1.0, epsilon = 1e-12);
        assert_eq!(m[[0, 0]], 1.0);
        assert_eq!(m[[1, 1]], 1.0);
    }

    #[test]
    fn spearman_matrix_constant_column_zeroed() {
        let x = DataMatrix::from_values(array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]).unwrap();
        let m = spearman_matrix(&x).unwrap();
        assert_eq!(m[[0, 1]], 0.0);
        assert_eq!(m[[1, 0]], 0.0);
        assert_eq!(m[[1, 1]], 1.0);
    }

    #[test]
    fn spearman_independent_columns_small() {
        // Independent seeded Gaussian-ish columns: |ρ| stays inside the
        // sampling-noise bound.
        let n = 10_000;
        let mut rng = keyed_rng(4242, 0, 0);
        let mut values = Array2::zeros((n, 2));
        for i in 0..n {
            // Sum of 12 uniforms − 6: near-Gaussian, fine for a noise bound.
            for j in 0..2 {
                let s: f64 = (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0;
                values[[i, j]] = s;
            }
        }
        let x = DataMatrix::from_values(values).unwrap();
        let m = spearman_matrix(&x).unwrap();
        assert!(m[[0, 1]].abs() < 0.05, "|ρ| = {}", m[[0, 1]].abs());
    }

    #[test]
    fn calibrate_threshold_two_features_single_value() {
        let mut rng = keyed_rng(7, 0, 0);
        let mut values = Array2::zeros((50, 2));
        for i in 0..50 {
            values[[i, 0]] = rng.gen::<f64>();
            values[[i, 1]] = rng.gen::<f64>();
        }
        let x = DataMatrix::from_values(values).unwrap();
        // One pooled value → tau equals it for any alpha.
        let a = calibrate_threshold(&x, 0.01, 9).unwrap();
        let b = calibrate_threshold(&x, 0.5, 9).unwrap();
        assert_eq!(a.tau, b.tau);
        let pooled = null_correlations(&x, 9).unwrap();
        assert_eq!(pooled.len(), 1);
        assert_eq!(a.tau, pooled[0]);
    }

    #[test]
    fn calibrate_threshold_deterministic() {
        let mut rng = keyed_rng(8, 0, 0);
        let mut values = Array2::zeros((40, 4));
        for v in values.iter_mut() {
            *v = rng.gen::<f64>();
        }
        let x = DataMatrix::from_values(values).unwrap();
        let a = calibrate_threshold(&x, 0.01, 5).unwrap();
        let b = calibrate_threshold(&x, 0.01, 5).unwrap();
        assert_eq!(a.tau, b.tau);
        assert_eq!(a.edges, b.edges);
    }

    #[test]
    fn calibrated_threshold_controls_fresh_null_exceedance() {
        // Independent columns: a freshly permuted null sample should exceed
        // the calibrated threshold only about alpha of the time.
        let n = 500;
        let p = 20;
        let mut rng = keyed_rng(31, 0, 0);
        let mut values = Array2::zeros((n, p));
        for v in values.iter_mut() {
            *v = rng.gen::<f64>();
        }
        let x = DataMatrix::from_values(values).unwrap();
        let graph = calibrate_threshold(&x, 0.01, 1234).unwrap();
        let mut exceed = 0usize;
        let mut total = 0usize;
        for round in 0..30 {
            let fresh = null_correlations(&x, 90_000 + round).unwrap();
            exceed += fresh.iter().filter(|v| **v > graph.tau).count();
            total += fresh.len();
        }
        let fraction = exceed as f64 / total as f64;
        assert!(fraction <= 0.015, "null exceedance fraction {fraction}");
    }

    fn duplicated_column_fixture() -> (DataMatrix, PredictorHandle, CorrelationGraph) {
        // x₂ ≡ x₁ and the model only reads x₁.
        let col = vec![0.4, 1.9, -0.7, 2.6, 0.1, -1.4, 3.0, 0.8];
        let mut values = Array2::zeros((8, 2));
        for i in 0..8 {
            values[[i, 0]] = col[i];
            values[[i, 1]] = col[i];
        }
        let x = DataMatrix::from_values(values).unwrap();
        let handle = linear_handle(vec![2.0, 0.0], 0.0);
        let matrix = spearman_matrix(&x).unwrap();
        let graph = CorrelationGraph::from_matrix(matrix, 0.5, 0.01, 0).unwrap();
        (x, handle, graph)
    }

    #[test]
    fn duplicated_column_splits_systemic_evenly() {
        let (x, handle, graph) = duplicated_column_fixture();
        assert_eq!(graph.edges, vec![(0, 1)]);
        let report =
            systemic_scores(&handle, &x, DiffMetric::Mae, Scheme::Optimal, &graph).unwrap();
        let s = report.systemic.as_ref().unwrap();
        let d = report.direct.as_ref().unwrap();
        let i = report.indirect.as_ref().unwrap();
        assert_abs_diff_eq!(s[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 0.5, epsilon = 1e-12);
        assert_eq!(d, &vec![1.0, 0.0]);
        assert_abs_diff_eq!(i[0], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(i[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn audit_duplicated_column() {
        let (x, handle, graph) = duplicated_column_fixture();
        let audit = audit_feature(
            &handle,
            &x,
            DiffMetric::Mae,
            Scheme::Optimal,
            &graph,
            "x1",
            None,
        )
        .unwrap();
        assert_eq!(audit.direct, 0.0);
        assert_abs_diff_eq!(audit.indirect, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(audit.systemic, 0.5, epsilon = 1e-12);
        assert_eq!(audit.proxies.len(), 1);
        assert_eq!(audit.proxies[0].0, "x0");
        assert_abs_diff_eq!(audit.proxies[0].1, 1.0, epsilon = 1e-12);
        // Direct scores as the reference: x0 carries everything, so the
        // proxy-influenced share is the full unit mass.
        assert_abs_diff_eq!(audit.proxy_influenced_share, 1.0, epsilon = 1e-12);
        // Decomposition identity.
        assert_abs_diff_eq!(
            audit.systemic,
            audit.direct + audit.indirect,
            epsilon = 1e-9
        );
    }

    #[test]
    fn audit_unknown_feature_errors() {
        let (x, handle, graph) = duplicated_column_fixture();
        let err = audit_feature(
            &handle,
            &x,
            DiffMetric::Mae,
            Scheme::Optimal,
            &graph,
            "nope",
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownFeature(_)));
    }

    #[test]
    fn high_threshold_reduces_to_direct_bitwise() {
        let mut rng = keyed_rng(77, 0, 0);
        let mut values = Array2::zeros((30, 4));
        for v in values.iter_mut() {
            *v = rng.gen::<f64>() * 3.0 - 1.5;
        }
        let x = DataMatrix::from_values(values).unwrap();
        let handle = linear_handle(vec![1.0, -2.0, 0.5, 0.0], 0.7);
        let matrix = spearman_matrix(&x).unwrap();
        // tau = 1 dominates every off-diagonal |ρ| → no propagation.
        let graph = CorrelationGraph::from_matrix(matrix, 1.0, 0.01, 0).unwrap();
        assert!(graph.edges.is_empty());
        let systemic =
            systemic_scores(&handle, &x, DiffMetric::Mse, Scheme::Optimal, &graph).unwrap();
        let direct =
            crate::direct::direct_scores(&handle, &x, DiffMetric::Mse, Scheme::Optimal).unwrap();
        assert_eq!(systemic.raw, direct.raw);
        assert_eq!(systemic.systemic.as_ref().unwrap(), &direct.normalized);
        assert!(systemic
            .indirect
            .as_ref()
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn zero_direct_and_no_proxies_means_zero_systemic() {
        // Feature 2 has zero coefficient and is below-threshold with both
        // other features: its systemic share must be exactly zero.
        let mut rng = keyed_rng(91, 0, 0);
        let mut values = Array2::zeros((40, 3));
        for v in values.iter_mut() {
            *v = rng.gen::<f64>();
        }
        let x = DataMatrix::from_values(values).unwrap();
        let handle = linear_handle(vec![1.5, -0.8, 0.0], 0.0);
        let matrix = spearman_matrix(&x).unwrap();
        let graph = CorrelationGraph::from_matrix(matrix, 1.0, 0.01, 0).unwrap();
        let audit = audit_feature(
            &handle,
            &x,
            DiffMetric::Mse,
            Scheme::Optimal,
            &graph,
            "x2",
            None,
        )
        .unwrap();
        assert_eq!(audit.systemic, 0.0);
        assert_eq!(audit.direct, 0.0);
        assert_eq!(audit.indirect, 0.0);
        assert!(audit.proxies.is_empty());
    }

    #[test]
    fn heatmap_csv_layout() {
        let (x, _, graph) = duplicated_column_fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cor.csv");
        graph.write_heatmap_csv(&x.feature_names(), &path).unwrap();
        let body = std::fs::read_to_string(&path).unwrap();
        let mut lines = body.lines();
        assert_eq!(lines.next().unwrap(), "feature,x0,x1");
        assert_eq!(lines.next().unwrap(), "x0,1,1");
        assert_eq!(lines.next().unwrap(), "x1,1,1");
    }

    #[test]
    fn graph_validation_rejects_bad_matrices() {
        let asym = array![[1.0, 0.3], [0.2, 1.0]];
        assert!(CorrelationGraph::from_matrix(asym, 0.1, 0.01, 0).is_err());
        let bad_diag = array![[0.9, 0.3], [0.3, 1.0]];
        assert!(CorrelationGraph::from_matrix(bad_diag, 0.1, 0.01, 0).is_err());
        let bad_tau = array![[1.0, 0.3], [0.3, 1.0]];
        assert!(CorrelationGraph::from_matrix(bad_tau, 1.5, 0.01, 0).is_err());
    }
}
