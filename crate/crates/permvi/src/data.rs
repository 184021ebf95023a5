//! Core data containers, CSV ingestion with ordinal encoding, fold planning,
//! and score normalization.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// What a feature column holds after ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Numeric,
    Binary,
    /// Categorical column mapped to ordinal codes 0..K−1.
    OrdinalEncoded,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FeatureMeta {
    pub name: String,
    pub kind: FeatureKind,
}

/// An n×p matrix of finite reals with per-feature metadata; the universal
/// input to fitting and scoring. Immutable after construction.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    values: Array2<f64>,
    feature_meta: Vec<FeatureMeta>,
}

impl DataMatrix {
    /// Validate and build: all entries finite, `n ≥ 2`, `p ≥ 1`, and unique
    /// feature names.
    pub fn new(values: Array2<f64>, feature_meta: Vec<FeatureMeta>) -> Result<Self> {
        let (n, p) = values.dim();
        if p == 0 || feature_meta.len() != p {
            return Err(Error::ShapeMismatch(format!(
                "data matrix has {p} columns but {} feature descriptors",
                feature_meta.len()
            )));
        }
        if n < 2 {
            return Err(Error::EmptyDataset(format!(
                "need at least 2 rows, got {n}"
            )));
        }
        for (j, meta) in feature_meta.iter().enumerate() {
            for (i, v) in values.column(j).iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        column: meta.name.clone(),
                        row: i,
                    });
                }
            }
        }
        let mut names: Vec<&str> = feature_meta.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(
                "duplicate feature names in data matrix".into(),
            ));
        }
        Ok(Self {
            values,
            feature_meta,
        })
    }

    /// Build from a bare matrix with synthetic names `x0..x{p−1}`.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let meta = (0..values.ncols())
            .map(|j| FeatureMeta {
                name: format!("x{j}"),
                kind: FeatureKind::Numeric,
            })
            .collect();
        Self::new(values, meta)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    pub fn feature_meta(&self) -> &[FeatureMeta] {
        &self.feature_meta
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.feature_meta.iter().map(|m| m.name.clone()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_meta.iter().position(|m| m.name == name)
    }

    pub fn feature_name(&self, j: usize) -> &str {
        &self.feature_meta[j].name
    }

    /// Copy with column `j` replaced (used by the scoring loops).
    pub fn with_column(&self, j: usize, column: &[f64]) -> Result<Self> {
        if j >= self.p() || column.len() != self.n() {
            return Err(Error::ShapeMismatch(format!(
                "with_column: column {j} of length {} into {}×{}",
                column.len(),
                self.n(),
                self.p()
            )));
        }
        let mut values = self.values.clone();
        for (i, v) in column.iter().enumerate() {
            values[(i, j)] = *v;
        }
        Ok(Self {
            values,
            feature_meta: self.feature_meta.clone(),
        })
    }

    /// Copy restricted to the given column indices (order preserved).
    pub fn select_columns(&self, keep: &[usize]) -> Result<Self> {
        if keep.iter().any(|&j| j >= self.p()) {
            return Err(Error::ShapeMismatch(
                "select_columns: index out of range".into(),
            ));
        }
        let mut values = Array2::zeros((self.n(), keep.len()));
        for (out_j, &j) in keep.iter().enumerate() {
            values.column_mut(out_j).assign(&self.values.column(j));
        }
        DataMatrix::new(
            values,
            keep.iter().map(|&j| self.feature_meta[j].clone()).collect(),
        )
    }

    /// Copy restricted to the given row indices (order preserved).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.iter().any(|&i| i >= self.n()) {
            return Err(Error::ShapeMismatch("select_rows: index out of range".into()));
        }
        let mut values = Array2::zeros((rows.len(), self.p()));
        for (out_i, &i) in rows.iter().enumerate() {
            values.row_mut(out_i).assign(&self.values.row(i));
        }
        DataMatrix::new(values, self.feature_meta.clone())
    }
}

/// Regression targets or classification labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Regression,
    Classification,
}

/// The response column: reals for regression, class labels `0..C−1` for
/// classification (stored as exact floats).
#[derive(Debug, Clone)]
pub struct TargetVector {
    values: Vec<f64>,
    task: Task,
    n_classes: Option<usize>,
}

impl TargetVector {
    pub fn regression(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDataset("empty target vector".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                column: "<target>".into(),
                row: i,
            });
        }
        Ok(Self {
            values,
            task: Task::Regression,
            n_classes: None,
        })
    }

    /// Labels must cover a contiguous range `0..C−1` with every class present.
    pub fn classification(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset("empty target vector".into()));
        }
        let c = labels.iter().max().unwrap() + 1;
        let mut seen = vec![false; c];
        for &l in &labels {
            seen[l] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument(
                "classification labels must cover a contiguous range starting at 0".into(),
            ));
        }
        // A single-class target is representable (e.g. a degenerate
        // binarization); model fits reject it with their own errors.
        Ok(Self {
            values: labels.iter().map(|&l| l as f64).collect(),
            task: Task::Classification,
            n_classes: Some(c),
        })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.n_classes
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Class labels; errors on a regression target.
    pub fn labels(&self) -> Result<Vec<usize>> {
        if self.task != Task::Classification {
            return Err(Error::InvalidArgument(
                "labels() called on a regression target".into(),
            ));
        }
        Ok(self.values.iter().map(|&v| v as usize).collect())
    }

    /// Reinterpret a numeric target holding small nonnegative integers as
    /// classification labels (e.g. a 0/1 column loaded from CSV).
    pub fn to_classification(&self) -> Result<TargetVector> {
        if self.task == Task::Classification {
            return Ok(self.clone());
        }
        let labels = self
            .values
            .iter()
            .map(|&v| {
                if v.fract() == 0.0 && (0.0..=1e6).contains(&v) {
                    Ok(v as usize)
                } else {
                    Err(Error::InvalidArgument(format!(
                        "target value {v} is not a class label"
                    )))
                }
            })
            .collect::<Result<Vec<usize>>>()?;
        TargetVector::classification(labels)
    }

    /// Restrict to the given row indices (order preserved).
    pub fn select_rows(&self, rows: &[usize]) -> Result<TargetVector> {
        if rows.iter().any(|&i| i >= self.n()) {
            return Err(Error::ShapeMismatch("select_rows: index out of range".into()));
        }
        Ok(Self {
            values: rows.iter().map(|&i| self.values[i]).collect(),
            task: self.task,
            n_classes: self.n_classes,
        })
    }
}

/// How non-numeric CSV columns are turned into reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncodePolicy {
    /// Distinct category strings sorted lexicographically and mapped to
    /// 0..K−1. Any fixed order works for rank-based permutation schemes;
    /// the lexicographic one is reproducible across runs and platforms.
    #[default]
    LexicographicOrdinal,
    /// Refuse non-numeric columns outright.
    RejectNonNumeric,
}

/// Load a CSV with a mandatory header row. The `target` column becomes the
/// [`TargetVector`] (regression when numeric, classification when
/// categorical); all remaining columns form the [`DataMatrix`] in file order.
/// Non-numeric feature columns are ordinal-encoded per `encode`.
pub fn load_csv<P: AsRef<Path>>(
    path: P,
    target: &str,
    encode: EncodePolicy,
) -> Result<(DataMatrix, TargetVector)> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path_str.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
            },
            _ => Error::Csv {
                path: path_str.clone(),
                msg: e.to_string(),
            },
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path_str.clone(),
            msg: e.to_string(),
        })?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::MissingTarget {
            column: target.to_string(),
            path: path_str.clone(),
        })?;

    let mut cells: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv {
            path: path_str.clone(),
            msg: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Csv {
                path: path_str.clone(),
                msg: format!(
                    "row {} has {} fields, expected {}",
                    cells.len() + 2,
                    record.len(),
                    headers.len()
                ),
            });
        }
        cells.push(record.iter().map(|f| f.to_string()).collect());
    }
    if cells.is_empty() {
        return Err(Error::EmptyDataset(format!("`{path_str}` has no data rows")));
    }

    let n = cells.len();
    // A column is numeric iff every cell parses as a finite real; otherwise
    // the whole column is treated as categorical and ordinal-encoded.
    let mut feature_meta = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut target_col: Option<(Vec<f64>, FeatureKind, bool)> = None;
    for (j, name) in headers.iter().enumerate() {
        let raw: Vec<&str> = cells.iter().map(|row| row[j].as_str()).collect();
        let parsed: Vec<Option<f64>> = raw.iter().map(|s| s.parse::<f64>().ok()).collect();
        let (vals, kind, was_categorical) = if parsed.iter().all(|v| v.is_some()) {
            let vals: Vec<f64> = parsed.into_iter().map(|v| v.unwrap()).collect();
            if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    column: name.clone(),
                    row: i,
                });
            }
            let kind = if vals.iter().all(|&v| v == 0.0 || v == 1.0) {
                FeatureKind::Binary
            } else {
                FeatureKind::Numeric
            };
            (vals, kind, false)
        } else {
            if encode == EncodePolicy::RejectNonNumeric {
                return Err(Error::Csv {
                    path: path_str.clone(),
                    msg: format!("column `{name}` is not numeric and encoding is disabled"),
                });
            }
            if let Some(i) = raw.iter().position(|s| s.is_empty()) {
                return Err(Error::Csv {
                    path: path_str.clone(),
                    msg: format!("missing value in column `{name}`, row {}", i + 2),
                });
            }
            // Distinct category strings in lexicographic order → codes 0..K−1.
            let distinct: BTreeSet<&str> = raw.iter().copied().collect();
            let codes: BTreeMap<&str, usize> =
                distinct.iter().enumerate().map(|(c, s)| (*s, c)).collect();
            let vals: Vec<f64> = raw.iter().map(|s| codes[*s] as f64).collect();
            (vals, FeatureKind::OrdinalEncoded, true)
        };
        if j == target_idx {
            target_col = Some((vals, kind, was_categorical));
        } else {
            feature_meta.push(FeatureMeta {
                name: name.clone(),
                kind,
            });
            columns.push(vals);
        }
    }

    let p = columns.len();
    if p == 0 {
        return Err(Error::EmptyDataset(format!(
            "`{path_str}` has no feature columns besides the target"
        )));
    }
    let mut values = Array2::zeros((n, p));
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            values[(i, j)] = *v;
        }
    }
    let matrix = DataMatrix::new(values, feature_meta)?;

    let (tvals, _tkind, t_categorical) = target_col.expect("target column collected");
    let target = if t_categorical {
        TargetVector::classification(tvals.iter().map(|&v| v as usize).collect())?
    } else {
        TargetVector::regression(tvals)?
    };
    Ok((matrix, target))
}

/// Clip negatives to zero, then normalize to sum to one. Errors when nothing
/// positive remains (importance is undefined).
pub fn clip_and_normalize(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::InvalidArgument("clip_and_normalize: empty input".into()));
    }
    let clipped: Vec<f64> = raw.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegenerateImportance(
            "all raw scores are non-positive; normalized importance undefined".into(),
        ));
    }
    Ok(clipped.iter().map(|v| v / total).collect())
}

/// A balanced, seeded k-fold partition of `{0..n−1}`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FoldPlan {
    pub k: usize,
    /// `assignments[i]` is the fold index of row `i`.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    /// Row indices belonging to fold `fold`.
    pub fn fold_rows(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Deterministic balanced k-fold assignment: shuffle rows with the seed and
/// deal them round-robin, so fold sizes differ by at most one.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "kfold: need 2 ≤ k ≤ n, got k={k}, n={n}"
        )));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rows.shuffle(&mut rng);
    let mut assignments = vec![0usize; n];
    for (pos, &row) in rows.iter().enumerate() {
        assignments[row] = pos % k;
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}
