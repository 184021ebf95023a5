//! C ABI for the permvi library.
//!
//! Every object crosses the boundary as an opaque handle (`PvDataset*`,
//! `PvModel*`, `PvGraph*`, `PvReport*`, `PvAudit*`) created by a `pv_*`
//! constructor and released by the matching `pv_*_free`. Fallible calls
//! return a [`PvStatus`]; on any non-OK status the thread-local message from
//! [`pv_last_error_message`] describes the failure. Scalar getters on
//! handles return directly and yield 0/NaN/null when given a null handle.
//!
//! Returned strings are borrowed: they stay valid while the owning handle
//! lives (or, for the error message, until the next failing call on the same
//! thread). The generated header lives at `include/permvi.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ndarray::Array2;
use permvi::bench::l1_grid_fit;
use permvi::model::{
    fit_lasso, fit_logistic, fit_ols, lasso_lambda_max, logistic_lambda_max, Penalty,
};
use permvi::systemic::{
    audit_feature, calibrate_threshold, systemic_scores, AuditResult, CorrelationGraph,
};
use permvi::{
    breiman_scores, direct_scores, dominance_check, load_csv, DataMatrix, DiffMetric, DropMetric,
    EncodePolicy, Error, FeatureKind, ImportanceReport, PredictorHandle, Scheme, TargetVector,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvStatus {
    PvOk = 0,
    /// A required pointer argument was null.
    PvNullPointer = 1,
    /// A string argument was not valid UTF-8.
    PvUtf8 = 2,
    /// Invalid argument, unknown feature, or shape mismatch.
    PvInvalidArgument = 3,
    /// File could not be read or written.
    PvIo = 4,
    /// The data was malformed (CSV parse, missing target, non-finite cell).
    PvBadData = 5,
    /// A solver failed (no convergence, not positive definite).
    PvSolver = 6,
    /// Importance or correlation is undefined on this input.
    PvDegenerate = 7,
    /// The predictor returned malformed output.
    PvPredictor = 8,
    /// An internal panic was caught; the handle state is unspecified.
    PvPanic = 9,
}

/// Difference metric for direct and systemic scores.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub enum PvMetric {
    PvMae = 0,
    PvMse = 1,
    PvRmse = 2,
}

/// Permutation scheme for the deterministic methods.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub enum PvScheme {
    /// Half-rotation of the sorted ranks (maximal displacement).
    PvOptimal = 0,
    /// Half-rotation of the row order (rank-free approximation).
    PvApprox = 1,
}

/// Loss drop used by the sampled-permutation baseline.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub enum PvDropMetric {
    PvMseDrop = 0,
    PvNegBrierDrop = 1,
    PvAccuracyDrop = 2,
}

/// How non-numeric CSV cells are handled at load time.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub enum PvEncode {
    /// Encode string categories as ordinal codes in lexicographic order.
    PvEncodeOrdinal = 0,
    /// Fail on any non-numeric cell.
    PvEncodeReject = 1,
}

/// Target interpretation for [`pv_dataset_from_arrays`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub enum PvTask {
    PvRegression = 0,
    /// Targets must be non-negative integers (class labels).
    PvClassification = 1,
}

/// Built-in model families for [`pv_model_fit`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub enum PvModelKind {
    PvOls = 0,
    /// L1-penalized least squares; negative lambda selects it on a grid.
    PvLasso = 1,
    PvLogistic = 2,
    /// L1-penalized logistic; negative lambda selects it on a grid.
    PvL1Logistic = 3,
}

/// Which score vector [`pv_report_values`] copies out.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub enum PvScoreKind {
    /// Unnormalized scores.
    PvRaw = 0,
    /// Clipped at zero and scaled to sum to one.
    PvNormalized = 1,
    /// Systemic share (systemic reports only).
    PvSystemic = 2,
    /// Direct share (systemic reports only).
    PvDirect = 3,
    /// Systemic minus direct (systemic reports only).
    PvIndirect = 4,
}

/// Outcome of [`pv_dominance_check`]: the deterministic estimate dominates
/// the B-sample baseline when its squared distance to the Monte Carlo mean
/// stays within the sampling-variance budget.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PvDominance {
    /// Squared distance between deterministic and mean sampled raw scores.
    pub lhs: f64,
    /// Budget ‖σ̂²‖₂²/B.
    pub budget_literal: f64,
    /// Budget (Σ_j σ̂_j²)/B.
    pub budget_consistent: f64,
    pub within_literal: bool,
    pub within_consistent: bool,
}

/// A loaded table: feature matrix plus optional target.
pub struct PvDataset {
    x: DataMatrix,
    y: Option<TargetVector>,
    names: Vec<CString>,
}

/// A fitted built-in model behind the prediction interface.
pub struct PvModel {
    handle: PredictorHandle,
}

/// A calibrated correlation graph (threshold plus edges).
pub struct PvGraph {
    graph: CorrelationGraph,
}

/// An importance report (direct, baseline, or systemic).
pub struct PvReport {
    report: ImportanceReport,
    names: Vec<CString>,
}

/// A single-feature audit: decomposition and proxy list.
pub struct PvAudit {
    audit: AuditResult,
    feature: CString,
    proxy_names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(status: PvStatus, message: &str) -> PvStatus {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(sanitized).unwrap());
    status
}

fn map_error(e: &Error) -> PvStatus {
    let status = match e {
        Error::Io { .. } => PvStatus::PvIo,
        Error::Csv { .. }
        | Error::MissingTarget { .. }
        | Error::NonFinite { .. }
        | Error::EmptyDataset(_) => PvStatus::PvBadData,
        Error::InvalidArgument(_) | Error::UnknownFeature(_) | Error::ShapeMismatch(_) => {
            PvStatus::PvInvalidArgument
        }
        Error::NoConvergence { .. } | Error::NotPositiveDefinite(_) => PvStatus::PvSolver,
        Error::UndefinedCorrelation(_) | Error::DegenerateImportance(_) => PvStatus::PvDegenerate,
        Error::Predictor(_) => PvStatus::PvPredictor,
    };
    set_error(status, &e.to_string())
}

/// Run a fallible body, converting panics into [`PvStatus::PvPanic`].
fn guarded<F: FnOnce() -> PvStatus>(f: F) -> PvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(PvStatus::PvPanic, &format!("internal panic: {msg}"))
        }
    }
}

/// Null-checked UTF-8 decode of a C string argument.
unsafe fn decode<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, PvStatus> {
    if ptr.is_null() {
        return Err(set_error(
            PvStatus::PvNullPointer,
            &format!("{what} must not be null"),
        ));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| set_error(PvStatus::PvUtf8, &format!("{what} is not valid UTF-8")))
}

fn require<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, PvStatus> {
    unsafe { ptr.as_ref() }.ok_or_else(|| {
        set_error(
            PvStatus::PvNullPointer,
            &format!("{what} must not be null"),
        )
    })
}

fn emit<T>(out: *mut *mut T, value: T, what: &str) -> PvStatus {
    if out.is_null() {
        return set_error(
            PvStatus::PvNullPointer,
            &format!("{what} out-pointer must not be null"),
        );
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    PvStatus::PvOk
}

fn c_names(names: &[String]) -> Vec<CString> {
    names
        .iter()
        .map(|n| CString::new(n.as_str()).unwrap_or_default())
        .collect()
}

impl PvMetric {
    fn into_core(self) -> DiffMetric {
        match self {
            PvMetric::PvMae => DiffMetric::Mae,
            PvMetric::PvMse => DiffMetric::Mse,
            PvMetric::PvRmse => DiffMetric::Rmse,
        }
    }
}

impl PvScheme {
    fn into_core(self) -> Scheme {
        match self {
            PvScheme::PvOptimal => Scheme::Optimal,
            PvScheme::PvApprox => Scheme::Approx,
        }
    }
}

impl PvDropMetric {
    fn into_core(self) -> DropMetric {
        match self {
            PvDropMetric::PvMseDrop => DropMetric::MseDrop,
            PvDropMetric::PvNegBrierDrop => DropMetric::NegBrierDrop,
            PvDropMetric::PvAccuracyDrop => DropMetric::AccuracyDrop,
        }
    }
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn pv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread. Borrowed; valid until
/// the next failing call on the same thread. Empty if nothing failed yet.
#[no_mangle]
pub extern "C" fn pv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// Load a CSV with a named target column.
#[no_mangle]
pub extern "C" fn pv_dataset_load_csv(
    path: *const c_char,
    target: *const c_char,
    encode: PvEncode,
    out: *mut *mut PvDataset,
) -> PvStatus {
    guarded(|| {
        let path = match unsafe { decode(path, "path") } {
            Ok(s) => s,
            Err(st) => return st,
        };
        let target = match unsafe { decode(target, "target") } {
            Ok(s) => s,
            Err(st) => return st,
        };
        let policy = match encode {
            PvEncode::PvEncodeOrdinal => EncodePolicy::LexicographicOrdinal,
            PvEncode::PvEncodeReject => EncodePolicy::RejectNonNumeric,
        };
        match load_csv(path, target, policy) {
            Ok((x, y)) => {
                let names = c_names(&x.feature_names());
                emit(out, PvDataset { x, y: Some(y), names }, "dataset")
            }
            Err(e) => map_error(&e),
        }
    })
}

/// Build a dataset from a row-major n×p array. `names` may be null (columns
/// are auto-named x1..xp); `y` may be null (no target: fitting and baseline
/// scoring are unavailable, deterministic scoring still works).
#[no_mangle]
pub extern "C" fn pv_dataset_from_arrays(
    values: *const f64,
    n: usize,
    p: usize,
    names: *const *const c_char,
    y: *const f64,
    task: PvTask,
    out: *mut *mut PvDataset,
) -> PvStatus {
    guarded(|| {
        if values.is_null() {
            return set_error(PvStatus::PvNullPointer, "values must not be null");
        }
        if n == 0 || p == 0 {
            return set_error(PvStatus::PvInvalidArgument, "n and p must be positive");
        }
        let slice = unsafe { std::slice::from_raw_parts(values, n * p) };
        let array = match Array2::from_shape_vec((n, p), slice.to_vec()) {
            Ok(a) => a,
            Err(e) => return set_error(PvStatus::PvInvalidArgument, &e.to_string()),
        };
        let meta = if names.is_null() {
            (0..p)
                .map(|j| permvi::data::FeatureMeta {
                    name: format!("x{}", j + 1),
                    kind: FeatureKind::Numeric,
                })
                .collect()
        } else {
            let mut meta = Vec::with_capacity(p);
            for j in 0..p {
                let name = match unsafe { decode(*names.add(j), "feature name") } {
                    Ok(s) => s.to_string(),
                    Err(st) => return st,
                };
                meta.push(permvi::data::FeatureMeta {
                    name,
                    kind: FeatureKind::Numeric,
                });
            }
            meta
        };
        let x = match DataMatrix::new(array, meta) {
            Ok(x) => x,
            Err(e) => return map_error(&e),
        };
        let target = if y.is_null() {
            None
        } else {
            let ys = unsafe { std::slice::from_raw_parts(y, n) }.to_vec();
            let built = match task {
                PvTask::PvRegression => TargetVector::regression(ys),
                PvTask::PvClassification => {
                    let mut labels = Vec::with_capacity(n);
                    for v in ys {
                        if !v.is_finite() || v < 0.0 || v.fract() != 0.0 {
                            return set_error(
                                PvStatus::PvInvalidArgument,
                                &format!("classification target must be a non-negative integer, got {v}"),
                            );
                        }
                        labels.push(v as usize);
                    }
                    TargetVector::classification(labels)
                }
            };
            match built {
                Ok(t) => Some(t),
                Err(e) => return map_error(&e),
            }
        };
        let names = c_names(&x.feature_names());
        emit(out, PvDataset { x, y: target, names }, "dataset")
    })
}

/// Number of rows; 0 when the handle is null.
#[no_mangle]
pub extern "C" fn pv_dataset_rows(dataset: *const PvDataset) -> usize {
    unsafe { dataset.as_ref() }.map_or(0, |d| d.x.n())
}

/// Number of feature columns; 0 when the handle is null.
#[no_mangle]
pub extern "C" fn pv_dataset_cols(dataset: *const PvDataset) -> usize {
    unsafe { dataset.as_ref() }.map_or(0, |d| d.x.p())
}

/// Borrowed feature name, or null when the handle is null or j out of range.
#[no_mangle]
pub extern "C" fn pv_dataset_feature_name(dataset: *const PvDataset, j: usize) -> *const c_char {
    unsafe { dataset.as_ref() }
        .and_then(|d| d.names.get(j))
        .map_or(std::ptr::null(), |n| n.as_ptr())
}

/// Release a dataset. Null is a no-op.
#[no_mangle]
pub extern "C" fn pv_dataset_free(dataset: *mut PvDataset) {
    if !dataset.is_null() {
        drop(unsafe { Box::from_raw(dataset) });
    }
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// Fit a built-in model on the dataset's target. `lambda < 0` selects the
/// penalty on a 20-point grid (first value keeping at least one nonzero
/// coefficient). `class_balance` reweights logistic losses to equalize the
/// classes. Linear families on classification targets fit the labels as a
/// linear probability model; logistic families on regression targets require
/// the values to be binary labels.
#[no_mangle]
pub extern "C" fn pv_model_fit(
    dataset: *const PvDataset,
    kind: PvModelKind,
    lambda: f64,
    class_balance: bool,
    out: *mut *mut PvModel,
) -> PvStatus {
    guarded(|| {
        let ds = match require(dataset, "dataset") {
            Ok(d) => d,
            Err(st) => return st,
        };
        let y = match &ds.y {
            Some(y) => y,
            None => {
                return set_error(
                    PvStatus::PvInvalidArgument,
                    "dataset has no target; load with a target column or pass y",
                )
            }
        };
        let fitted = match kind {
            PvModelKind::PvOls | PvModelKind::PvLasso => {
                let numeric = TargetVector::regression(y.as_slice().to_vec());
                let y_reg = match numeric {
                    Ok(t) => t,
                    Err(e) => return map_error(&e),
                };
                match kind {
                    PvModelKind::PvOls => fit_ols(&ds.x, &y_reg),
                    _ if lambda >= 0.0 => fit_lasso(&ds.x, &y_reg, lambda),
                    _ => l1_grid_fit(lasso_lambda_max(&ds.x, &y_reg), |l| {
                        fit_lasso(&ds.x, &y_reg, l)
                    }),
                }
            }
            PvModelKind::PvLogistic | PvModelKind::PvL1Logistic => {
                let y_cls = match y.to_classification() {
                    Ok(t) => t,
                    Err(e) => return map_error(&e),
                };
                match kind {
                    PvModelKind::PvLogistic => {
                        fit_logistic(&ds.x, &y_cls, Penalty::None, class_balance)
                    }
                    _ if lambda >= 0.0 => {
                        fit_logistic(&ds.x, &y_cls, Penalty::L1 { lambda }, class_balance)
                    }
                    _ => match logistic_lambda_max(&ds.x, &y_cls, class_balance) {
                        Ok(lmax) => l1_grid_fit(lmax, |l| {
                            fit_logistic(&ds.x, &y_cls, Penalty::L1 { lambda: l }, class_balance)
                        }),
                        Err(e) => return map_error(&e),
                    },
                }
            }
        };
        match fitted {
            Ok(model) => emit(
                out,
                PvModel {
                    handle: PredictorHandle::builtin(model),
                },
                "model",
            ),
            Err(e) => map_error(&e),
        }
    })
}

/// Coefficient j of the fitted model; NaN when the handle is null or j out
/// of range.
#[no_mangle]
pub extern "C" fn pv_model_coefficient(model: *const PvModel, j: usize) -> f64 {
    unsafe { model.as_ref() }
        .and_then(|m| m.handle.model())
        .and_then(|m| m.coefficients.get(j).copied())
        .unwrap_or(f64::NAN)
}

/// Intercept of the fitted model; NaN when the handle is null.
#[no_mangle]
pub extern "C" fn pv_model_intercept(model: *const PvModel) -> f64 {
    unsafe { model.as_ref() }
        .and_then(|m| m.handle.model())
        .map_or(f64::NAN, |m| m.intercept)
}

/// Release a model. Null is a no-op.
#[no_mangle]
pub extern "C" fn pv_model_free(model: *mut PvModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

/// Deterministic single-permutation importance scores.
#[no_mangle]
pub extern "C" fn pv_direct_scores(
    model: *const PvModel,
    dataset: *const PvDataset,
    metric: PvMetric,
    scheme: PvScheme,
    out: *mut *mut PvReport,
) -> PvStatus {
    guarded(|| {
        let (m, ds) = match (require(model, "model"), require(dataset, "dataset")) {
            (Ok(m), Ok(d)) => (m, d),
            (Err(st), _) | (_, Err(st)) => return st,
        };
        match direct_scores(&m.handle, &ds.x, metric.into_core(), scheme.into_core()) {
            Ok(report) => {
                let names = c_names(&report.features);
                emit(out, PvReport { report, names }, "report")
            }
            Err(e) => map_error(&e),
        }
    })
}

/// Sampled-permutation baseline: B seeded permutations per feature, averaged
/// loss drop against the dataset's target.
#[no_mangle]
pub extern "C" fn pv_breiman_scores(
    model: *const PvModel,
    dataset: *const PvDataset,
    b: usize,
    seed: u64,
    metric: PvDropMetric,
    out: *mut *mut PvReport,
) -> PvStatus {
    guarded(|| {
        let (m, ds) = match (require(model, "model"), require(dataset, "dataset")) {
            (Ok(m), Ok(d)) => (m, d),
            (Err(st), _) | (_, Err(st)) => return st,
        };
        let y = match &ds.y {
            Some(y) => y,
            None => {
                return set_error(
                    PvStatus::PvInvalidArgument,
                    "baseline scoring needs a dataset target",
                )
            }
        };
        match breiman_scores(&m.handle, &ds.x, y, b, seed, metric.into_core()) {
            Ok(report) => {
                let names = c_names(&report.features);
                emit(out, PvReport { report, names }, "report")
            }
            Err(e) => map_error(&e),
        }
    })
}

/// Compare the deterministic estimate against a B-sample baseline: is the
/// squared distance to the Monte Carlo mean within the variance budget?
#[no_mangle]
pub extern "C" fn pv_dominance_check(
    model: *const PvModel,
    dataset: *const PvDataset,
    metric: PvMetric,
    b: usize,
    seed: u64,
    out: *mut PvDominance,
) -> PvStatus {
    guarded(|| {
        let (m, ds) = match (require(model, "model"), require(dataset, "dataset")) {
            (Ok(m), Ok(d)) => (m, d),
            (Err(st), _) | (_, Err(st)) => return st,
        };
        if out.is_null() {
            return set_error(PvStatus::PvNullPointer, "out must not be null");
        }
        match dominance_check(&m.handle, &ds.x, metric.into_core(), b, seed) {
            Ok(check) => {
                unsafe {
                    *out = PvDominance {
                        lhs: check.lhs,
                        budget_literal: check.rhs_literal,
                        budget_consistent: check.rhs_consistent,
                        within_literal: check.verdict_literal,
                        within_consistent: check.verdict_consistent,
                    };
                }
                PvStatus::PvOk
            }
            Err(e) => map_error(&e),
        }
    })
}

// ---------------------------------------------------------------------------
// Correlation graph and systemic scores
// ---------------------------------------------------------------------------

/// Calibrate the propagation threshold on the dataset: permute each column
/// (seeded), pool the absolute pairwise rank correlations, and take the
/// (1−alpha) quantile. The graph keeps the original data's correlations.
#[no_mangle]
pub extern "C" fn pv_calibrate_threshold(
    dataset: *const PvDataset,
    alpha: f64,
    seed: u64,
    out: *mut *mut PvGraph,
) -> PvStatus {
    guarded(|| {
        let ds = match require(dataset, "dataset") {
            Ok(d) => d,
            Err(st) => return st,
        };
        match calibrate_threshold(&ds.x, alpha, seed) {
            Ok(graph) => emit(out, PvGraph { graph }, "graph"),
            Err(e) => map_error(&e),
        }
    })
}

/// Calibrated threshold; NaN when the handle is null.
#[no_mangle]
pub extern "C" fn pv_graph_tau(graph: *const PvGraph) -> f64 {
    unsafe { graph.as_ref() }.map_or(f64::NAN, |g| g.graph.tau)
}

/// Number of feature pairs above the threshold; 0 when the handle is null.
#[no_mangle]
pub extern "C" fn pv_graph_edge_count(graph: *const PvGraph) -> usize {
    unsafe { graph.as_ref() }.map_or(0, |g| g.graph.edges.len())
}

/// Rank correlation between features j and k; NaN when the handle is null
/// or an index is out of range.
#[no_mangle]
pub extern "C" fn pv_graph_rho(graph: *const PvGraph, j: usize, k: usize) -> f64 {
    match unsafe { graph.as_ref() } {
        Some(g) if j < g.graph.matrix.nrows() && k < g.graph.matrix.ncols() => {
            g.graph.matrix[[j, k]]
        }
        _ => f64::NAN,
    }
}

/// Release a graph. Null is a no-op.
#[no_mangle]
pub extern "C" fn pv_graph_free(graph: *mut PvGraph) {
    if !graph.is_null() {
        drop(unsafe { Box::from_raw(graph) });
    }
}

/// Correlation-aware importance: each feature's permutation is propagated to
/// its graph neighbors before scoring. The report also carries the direct
/// and indirect (systemic − direct) shares.
#[no_mangle]
pub extern "C" fn pv_systemic_scores(
    model: *const PvModel,
    dataset: *const PvDataset,
    metric: PvMetric,
    scheme: PvScheme,
    graph: *const PvGraph,
    out: *mut *mut PvReport,
) -> PvStatus {
    guarded(|| {
        let (m, ds) = match (require(model, "model"), require(dataset, "dataset")) {
            (Ok(m), Ok(d)) => (m, d),
            (Err(st), _) | (_, Err(st)) => return st,
        };
        let g = match require(graph, "graph") {
            Ok(g) => g,
            Err(st) => return st,
        };
        match systemic_scores(
            &m.handle,
            &ds.x,
            metric.into_core(),
            scheme.into_core(),
            &g.graph,
        ) {
            Ok(report) => {
                let names = c_names(&report.features);
                emit(out, PvReport { report, names }, "report")
            }
            Err(e) => map_error(&e),
        }
    })
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Number of features in the report; 0 when the handle is null.
#[no_mangle]
pub extern "C" fn pv_report_len(report: *const PvReport) -> usize {
    unsafe { report.as_ref() }.map_or(0, |r| r.report.features.len())
}

/// Borrowed feature name, or null when the handle is null or j out of range.
#[no_mangle]
pub extern "C" fn pv_report_feature_name(report: *const PvReport, j: usize) -> *const c_char {
    unsafe { report.as_ref() }
        .and_then(|r| r.names.get(j))
        .map_or(std::ptr::null(), |n| n.as_ptr())
}

/// Copy a score vector into `out` (length must equal the report length).
/// Systemic/direct/indirect kinds fail on non-systemic reports.
#[no_mangle]
pub extern "C" fn pv_report_values(
    report: *const PvReport,
    kind: PvScoreKind,
    out: *mut f64,
    len: usize,
) -> PvStatus {
    guarded(|| {
        let r = match require(report, "report") {
            Ok(r) => r,
            Err(st) => return st,
        };
        if out.is_null() {
            return set_error(PvStatus::PvNullPointer, "out must not be null");
        }
        let p = r.report.features.len();
        if len != p {
            return set_error(
                PvStatus::PvInvalidArgument,
                &format!("out has length {len} but the report has {p} features"),
            );
        }
        let values: Option<&[f64]> = match kind {
            PvScoreKind::PvRaw => Some(&r.report.raw),
            PvScoreKind::PvNormalized => Some(&r.report.normalized),
            PvScoreKind::PvSystemic => r.report.systemic.as_deref(),
            PvScoreKind::PvDirect => r.report.direct.as_deref(),
            PvScoreKind::PvIndirect => r.report.indirect.as_deref(),
        };
        match values {
            Some(v) => {
                unsafe { std::slice::from_raw_parts_mut(out, len) }.copy_from_slice(v);
                PvStatus::PvOk
            }
            None => set_error(
                PvStatus::PvInvalidArgument,
                "this report has no systemic decomposition",
            ),
        }
    })
}

/// Release a report. Null is a no-op.
#[no_mangle]
pub extern "C" fn pv_report_free(report: *mut PvReport) {
    if !report.is_null() {
        drop(unsafe { Box::from_raw(report) });
    }
}

// ---------------------------------------------------------------------------
// Audits
// ---------------------------------------------------------------------------

/// Audit one feature: systemic/direct/indirect decomposition plus the list
/// of proxies (neighbors above the threshold).
#[no_mangle]
pub extern "C" fn pv_audit_feature(
    model: *const PvModel,
    dataset: *const PvDataset,
    metric: PvMetric,
    scheme: PvScheme,
    graph: *const PvGraph,
    feature: *const c_char,
    out: *mut *mut PvAudit,
) -> PvStatus {
    guarded(|| {
        let (m, ds) = match (require(model, "model"), require(dataset, "dataset")) {
            (Ok(m), Ok(d)) => (m, d),
            (Err(st), _) | (_, Err(st)) => return st,
        };
        let g = match require(graph, "graph") {
            Ok(g) => g,
            Err(st) => return st,
        };
        let feature = match unsafe { decode(feature, "feature") } {
            Ok(s) => s,
            Err(st) => return st,
        };
        match audit_feature(
            &m.handle,
            &ds.x,
            metric.into_core(),
            scheme.into_core(),
            &g.graph,
            feature,
            None,
        ) {
            Ok(audit) => {
                let feature = CString::new(audit.feature.as_str()).unwrap_or_default();
                let proxy_names = audit
                    .proxies
                    .iter()
                    .map(|(n, _)| CString::new(n.as_str()).unwrap_or_default())
                    .collect();
                emit(
                    out,
                    PvAudit {
                        audit,
                        feature,
                        proxy_names,
                    },
                    "audit",
                )
            }
            Err(e) => map_error(&e),
        }
    })
}

/// Borrowed name of the audited feature; null when the handle is null.
#[no_mangle]
pub extern "C" fn pv_audit_feature_name(audit: *const PvAudit) -> *const c_char {
    unsafe { audit.as_ref() }.map_or(std::ptr::null(), |a| a.feature.as_ptr())
}

/// Systemic share of the audited feature; NaN when the handle is null.
#[no_mangle]
pub extern "C" fn pv_audit_systemic(audit: *const PvAudit) -> f64 {
    unsafe { audit.as_ref() }.map_or(f64::NAN, |a| a.audit.systemic)
}

/// Direct share of the audited feature; NaN when the handle is null.
#[no_mangle]
pub extern "C" fn pv_audit_direct(audit: *const PvAudit) -> f64 {
    unsafe { audit.as_ref() }.map_or(f64::NAN, |a| a.audit.direct)
}

/// Indirect share (systemic − direct); NaN when the handle is null.
#[no_mangle]
pub extern "C" fn pv_audit_indirect(audit: *const PvAudit) -> f64 {
    unsafe { audit.as_ref() }.map_or(f64::NAN, |a| a.audit.indirect)
}

/// Number of proxies above the threshold; 0 when the handle is null.
#[no_mangle]
pub extern "C" fn pv_audit_proxy_count(audit: *const PvAudit) -> usize {
    unsafe { audit.as_ref() }.map_or(0, |a| a.audit.proxies.len())
}

/// Borrowed name of proxy i, or null when the handle is null or i out of
/// range.
#[no_mangle]
pub extern "C" fn pv_audit_proxy_name(audit: *const PvAudit, i: usize) -> *const c_char {
    unsafe { audit.as_ref() }
        .and_then(|a| a.proxy_names.get(i))
        .map_or(std::ptr::null(), |n| n.as_ptr())
}

/// Rank correlation between proxy i and the audited feature; NaN when the
/// handle is null or i out of range.
#[no_mangle]
pub extern "C" fn pv_audit_proxy_rho(audit: *const PvAudit, i: usize) -> f64 {
    unsafe { audit.as_ref() }
        .and_then(|a| a.audit.proxies.get(i))
        .map_or(f64::NAN, |(_, rho)| *rho)
}

/// Share of total importance carried by the audited feature and its proxies;
/// NaN when the handle is null.
#[no_mangle]
pub extern "C" fn pv_audit_influenced_share(audit: *const PvAudit) -> f64 {
    unsafe { audit.as_ref() }.map_or(f64::NAN, |a| a.audit.proxy_influenced_share)
}

/// Release an audit. Null is a no-op.
#[no_mangle]
pub extern "C" fn pv_audit_free(audit: *mut PvAudit) {
    if !audit.is_null() {
        drop(unsafe { Box::from_raw(audit) });
    }
}
