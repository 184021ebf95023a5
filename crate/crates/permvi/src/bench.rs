//! Synthetic benchmark harness: correlated data generators, a scenario grid
//! comparing four importance methods against model ground truth, and
//! ranking-stability ("flicker") analysis.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Task, TargetVector};
use crate::direct::{
    breiman_scores, direct_scores, DiffMetric, DropMetric, Scheme,
};
use crate::error::{Error, Result};
use crate::model::{
    fit_logistic, fit_ols, ground_truth_importance, lasso_lambda_max, logistic_lambda_max,
    solve::cholesky, LinearModel, Penalty, PredictorHandle,
};
use crate::report::ImportanceReport;
use crate::stats::{combine_variance, mean, normal_cdf, pearson, sample_variance, AggregateStat};

/// Response surface of a synthetic scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Response {
    Linear,
    Friedman,
}

impl Response {
    pub fn label(self) -> &'static str {
        match self {
            Response::Linear => "linear",
            Response::Friedman => "friedman",
        }
    }
}

impl std::str::FromStr for Response {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Response::Linear),
            "friedman" => Ok(Response::Friedman),
            _ => Err(Error::InvalidArgument(format!(
                "unknown response `{s}` (expected linear or friedman)"
            ))),
        }
    }
}

/// Master-model family fit inside a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Master {
    Unregularized,
    L1,
}

impl Master {
    pub fn label(self) -> &'static str {
        match self {
            Master::Unregularized => "unregularized",
            Master::L1 => "l1",
        }
    }
}

impl std::str::FromStr for Master {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unregularized" | "none" => Ok(Master::Unregularized),
            "l1" | "lasso" => Ok(Master::L1),
            _ => Err(Error::InvalidArgument(format!(
                "unknown master `{s}` (expected unregularized or l1)"
            ))),
        }
    }
}

/// One cell of the benchmark grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub p: usize,
    pub sigma_eps: f64,
    pub rho: f64,
    pub response: Response,
    pub task: Task,
    pub master: Master,
    pub reps: usize,
    pub base_seed: u64,
}

impl ScenarioSpec {
    /// Compact human-readable identifier used in output tables.
    pub fn label(&self) -> String {
        format!(
            "n={},p={},sigma={},rho={},{},{},{}",
            self.n,
            self.p,
            self.sigma_eps,
            self.rho,
            self.response.label(),
            match self.task {
                Task::Regression => "regression",
                Task::Classification => "classification",
            },
            self.master.label()
        )
    }
}

pub const DEFAULT_REPS: usize = 50;
pub const DEFAULT_BASE_SEED: u64 = 123;

/// The full factorial grid: 3 sizes × 2 widths × 2 noise levels × 2
/// correlation levels × 2 responses × 2 tasks × 2 masters = 192 scenarios.
pub fn default_grid(reps: usize, base_seed: u64) -> Vec<ScenarioSpec> {
    let mut grid = Vec::with_capacity(192);
    for &n in &[100usize, 1000, 10_000] {
        for &p in &[10usize, 100] {
            for &sigma_eps in &[0.1f64, 5.0] {
                for &rho in &[0.0f64, 0.3] {
                    for &response in &[Response::Linear, Response::Friedman] {
                        for &task in &[Task::Regression, Task::Classification] {
                            for &master in &[Master::Unregularized, Master::L1] {
                                grid.push(ScenarioSpec {
                                    n,
                                    p,
                                    sigma_eps,
                                    rho,
                                    response,
                                    task,
                                    master,
                                    reps,
                                    base_seed,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    grid
}

/// Block covariance: unit diagonal, `rho` among the first `informative`
/// features, `rho/2` among the rest, zero across blocks.
pub fn block_covariance(p: usize, rho: f64, informative: usize) -> Result<Array2<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!(
            "block_covariance: rho must lie in [0,1), got {rho}"
        )));
    }
    if informative > p {
        return Err(Error::InvalidArgument(format!(
            "block_covariance: informative block {informative} exceeds p={p}"
        )));
    }
    let mut c = Array2::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            c[[i, j]] = if i == j {
                1.0
            } else if i < informative && j < informative {
                rho
            } else if i >= informative && j >= informative {
                rho / 2.0
            } else {
                0.0
            };
        }
    }
    // An equicorrelated block is positive definite iff rho > −1/(m−1); with
    // rho ≥ 0 the only failure mode is rho = 1, excluded above. Factor once
    // anyway so out-of-grid requests fail loudly here rather than later.
    cholesky(&c.view())?;
    Ok(c)
}

/// Draw `n` rows from N(0, C) by scaling seeded standard normals with the
/// Cholesky factor of C.
pub fn gen_gaussian(n: usize, c: &ArrayView2<f64>, seed: u64) -> Result<DataMatrix> {
    let p = c.ncols();
    let l = cholesky(c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Array2::zeros((n, p));
    for i in 0..n {
        for j in 0..p {
            z[[i, j]] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    // Row-wise x Lᵀ keeps each row ~ N(0, LLᵀ).
    let out = z.dot(&l.t());
    DataMatrix::from_values(out)
}

/// Correlated uniforms: componentwise standard-normal CDF of [`gen_gaussian`]
/// output. Marginals are Uniform[0,1]; rank correlations are inherited from
/// the Gaussian draw.
pub fn gen_uniform_correlated(n: usize, c: &ArrayView2<f64>, seed: u64) -> Result<DataMatrix> {
    let gaussian = gen_gaussian(n, c, seed)?;
    let mapped = gaussian.values().mapv(normal_cdf);
    DataMatrix::from_values(mapped)
}

/// Friedman regression surface on the first five columns,
/// y = 10·sin(π·x₁x₂) + 20·(x₃−0.5)² + 10·x₄ + 5·x₅ + ε,
/// with seeded Gaussian noise of standard deviation `sigma_eps`.
pub fn friedman_response(x: &DataMatrix, sigma_eps: f64, seed: u64) -> Result<TargetVector> {
    if x.p() < 5 {
        return Err(Error::InvalidArgument(format!(
            "friedman_response: need at least 5 features, got {}",
            x.p()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = x.values();
    let y: Vec<f64> = (0..x.n())
        .map(|i| {
            let base = 10.0 * (std::f64::consts::PI * v[[i, 0]] * v[[i, 1]]).sin()
                + 20.0 * (v[[i, 2]] - 0.5).powi(2)
                + 10.0 * v[[i, 3]]
                + 5.0 * v[[i, 4]];
            base + sigma_eps * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    TargetVector::regression(y)
}

/// Seeded linear response with exactly ⌈p/2⌉ trailing zero coefficients:
/// the informative half gets magnitudes uniform on [1, 2] with random
/// signs; y = Xβ + ε. Returns the generating coefficients alongside y.
pub fn linear_response(
    x: &DataMatrix,
    seed: u64,
    sigma_eps: f64,
) -> Result<(TargetVector, Vec<f64>)> {
    if x.p() < 2 {
        return Err(Error::InvalidArgument(format!(
            "linear_response: need at least 2 features, got {}",
            x.p()
        )));
    }
    let p = x.p();
    let zeros = p.div_ceil(2);
    let informative = p - zeros;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut beta = vec![0.0; p];
    for b in beta.iter_mut().take(informative) {
        let magnitude = 1.0 + rng.gen::<f64>();
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        *b = sign * magnitude;
    }
    let v = x.values();
    let y: Vec<f64> = (0..x.n())
        .map(|i| {
            let mut s = 0.0;
            for (j, b) in beta.iter().enumerate() {
                s += b * v[[i, j]];
            }
            s + sigma_eps * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Ok((TargetVector::regression(y)?, beta))
}

/// Binary labels by strict comparison to the sample median (even n: mean of
/// the two middle order statistics). Values equal to the median go to class 0.
pub fn binarize_median(y: &[f64]) -> Result<TargetVector> {
    if y.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "binarize_median: need at least 2 values, got {}",
            y.len()
        )));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    TargetVector::classification(y.iter().map(|&v| usize::from(v > median)).collect())
}

/// Seeded shuffle split into (train, test) row indices with `test_frac` of
/// the rows held out (at least one row on each side).
pub fn holdout_split(n: usize, test_frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 || !(0.0..1.0).contains(&test_frac) {
        return Err(Error::InvalidArgument(format!(
            "holdout_split: need n ≥ 2 and test_frac in (0,1), got n={n}, test_frac={test_frac}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    crate::perm::shuffle_with(&mut order, &mut rng);
    let n_test = ((n as f64 * test_frac).round() as usize).clamp(1, n - 1);
    let test = order[..n_test].to_vec();
    let train = order[n_test..].to_vec();
    Ok((train, test))
}

/// The four methods compared on every scenario cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMethod {
    DirectOpt,
    DirectApprox,
    Breiman1,
    Breiman10,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 4] = [
        BenchMethod::DirectOpt,
        BenchMethod::DirectApprox,
        BenchMethod::Breiman1,
        BenchMethod::Breiman10,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BenchMethod::DirectOpt => "direct-opt",
            BenchMethod::DirectApprox => "direct-approx",
            BenchMethod::Breiman1 => "breiman-1",
            BenchMethod::Breiman10 => "breiman-10",
        }
    }
}

/// One repetition's comparison against ground truth for one method.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RepMetrics {
    pub ground_truth_cor: f64,
    pub max_score_diff: f64,
    pub mean_score_diff: f64,
    pub runtime_ms: f64,
}

/// All repetitions of one method within a scenario.
#[derive(Debug, Clone, Serialize)]
pub struct MethodSeries {
    pub method: BenchMethod,
    pub reps: Vec<RepMetrics>,
}

impl MethodSeries {
    /// (mean, sample variance) of a metric over this scenario's repetitions.
    pub fn summary(&self, metric: BenchMetric) -> (f64, f64) {
        let values: Vec<f64> = self.reps.iter().map(|r| metric.get(r)).collect();
        (mean(&values), sample_variance(&values))
    }
}

/// Metric columns recorded per repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMetric {
    GroundTruthCor,
    MaxScoreDiff,
    MeanScoreDiff,
    RuntimeMs,
}

impl BenchMetric {
    pub const TABLE: [BenchMetric; 3] = [
        BenchMetric::GroundTruthCor,
        BenchMetric::MaxScoreDiff,
        BenchMetric::MeanScoreDiff,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BenchMetric::GroundTruthCor => "ground_truth_cor",
            BenchMetric::MaxScoreDiff => "max_score_diff",
            BenchMetric::MeanScoreDiff => "mean_score_diff",
            BenchMetric::RuntimeMs => "runtime_ms",
        }
    }

    pub fn get(self, r: &RepMetrics) -> f64 {
        match self {
            BenchMetric::GroundTruthCor => r.ground_truth_cor,
            BenchMetric::MaxScoreDiff => r.max_score_diff,
            BenchMetric::MeanScoreDiff => r.mean_score_diff,
            BenchMetric::RuntimeMs => r.runtime_ms,
        }
    }
}

/// A completed scenario: four method series plus any per-repetition
/// failures (failed repetitions contribute no tuples).
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioResult {
    pub spec: ScenarioSpec,
    pub scenario_index: usize,
    pub methods: Vec<MethodSeries>,
    pub failures: Vec<String>,
}

impl ScenarioResult {
    pub fn method(&self, m: BenchMethod) -> &MethodSeries {
        self.methods.iter().find(|s| s.method == m).unwrap()
    }

    pub fn completed_reps(&self) -> usize {
        self.methods[0].reps.len()
    }
}

/// Harness-level switches.
#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    /// Swap the comparison metrics for the "default metric" variant:
    /// MAE-of-differences for the direct methods and accuracy-drop (instead
    /// of the Brier drop) for classification Breiman runs.
    pub default_metrics: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            default_metrics: false,
        }
    }
}

impl BenchOptions {
    fn diff_metric(&self) -> DiffMetric {
        if self.default_metrics {
            DiffMetric::Mae
        } else {
            DiffMetric::Mse
        }
    }

    fn drop_metric(&self, task: Task) -> DropMetric {
        match task {
            Task::Regression => DropMetric::MseDrop,
            Task::Classification => {
                if self.default_metrics {
                    DropMetric::AccuracyDrop
                } else {
                    DropMetric::NegBrierDrop
                }
            }
        }
    }
}

/// Per-repetition seeds, all derived from one cell stream keyed by
/// (base_seed, scenario index, repetition index).
struct CellSeeds {
    data: u64,
    response: u64,
    split: u64,
    breiman1: u64,
    breiman10: u64,
}

fn cell_seeds(base_seed: u64, scenario_index: usize, rep: usize) -> CellSeeds {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(((scenario_index as u64) << 32) | rep as u64);
    CellSeeds {
        data: rng.gen(),
        response: rng.gen(),
        split: rng.gen(),
        breiman1: rng.gen(),
        breiman10: rng.gen(),
    }
}

/// Largest penalty on a 20-point log grid from λ_max down to λ_max·1e−3
/// that keeps at least one nonzero coefficient.
pub fn l1_grid_fit<F>(lambda_max: f64, fit: F) -> Result<LinearModel>
where
    F: Fn(f64) -> Result<LinearModel>,
{
    let mut last_err: Option<Error> = None;
    for t in 0..20 {
        let lambda = lambda_max * 1e-3f64.powf(t as f64 / 19.0);
        match fit(lambda) {
            Ok(model) => {
                if model.coefficients.iter().any(|c| *c != 0.0) {
                    return Ok(model);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or(Error::DegenerateImportance(
        "no penalty level kept a nonzero coefficient".into(),
    )))
}

fn fit_master(
    spec: &ScenarioSpec,
    x_train: &DataMatrix,
    y_train: &TargetVector,
) -> Result<LinearModel> {
    match (spec.task, spec.master) {
        (Task::Regression, Master::Unregularized) => fit_ols(x_train, y_train),
        (Task::Regression, Master::L1) => {
            let lmax = lasso_lambda_max(x_train, y_train);
            l1_grid_fit(lmax, |lambda| {
                crate::model::fit_lasso(x_train, y_train, lambda)
            })
        }
        (Task::Classification, Master::Unregularized) => {
            fit_logistic(x_train, y_train, Penalty::None, true)
        }
        (Task::Classification, Master::L1) => {
            let lmax = logistic_lambda_max(x_train, y_train, true)?;
            l1_grid_fit(lmax, |lambda| {
                fit_logistic(x_train, y_train, Penalty::L1 { lambda }, true)
            })
        }
    }
}

fn compare_to_truth(report: &ImportanceReport, truth: &[f64]) -> Result<(f64, f64, f64)> {
    let cor = pearson(&report.normalized, truth)?;
    let mut max_diff = 0.0f64;
    let mut sum_diff = 0.0f64;
    for (s, t) in report.normalized.iter().zip(truth.iter()) {
        let d = (s - t).abs();
        max_diff = max_diff.max(d);
        sum_diff += d;
    }
    Ok((cor, max_diff, sum_diff / truth.len() as f64))
}

/// Run one repetition of a scenario; any failure is returned as an error
/// string for the failure log.
fn run_rep(
    spec: &ScenarioSpec,
    scenario_index: usize,
    rep: usize,
    opts: &BenchOptions,
) -> Result<[RepMetrics; 4]> {
    let seeds = cell_seeds(spec.base_seed, scenario_index, rep);

    // Data: Gaussian design for the linear response, correlated uniforms for
    // the Friedman surface; informative block = the response's active set.
    let informative = match spec.response {
        Response::Linear => spec.p - spec.p.div_ceil(2),
        Response::Friedman => 5,
    };
    let c = block_covariance(spec.p, spec.rho, informative)?;
    let x = match spec.response {
        Response::Linear => gen_gaussian(spec.n, &c.view(), seeds.data)?,
        Response::Friedman => gen_uniform_correlated(spec.n, &c.view(), seeds.data)?,
    };
    let y_cont = match spec.response {
        Response::Linear => linear_response(&x, seeds.response, spec.sigma_eps)?.0,
        Response::Friedman => friedman_response(&x, spec.sigma_eps, seeds.response)?,
    };
    let y = match spec.task {
        Task::Regression => y_cont,
        Task::Classification => binarize_median(y_cont.as_slice())?,
    };

    let (train_rows, test_rows) = holdout_split(spec.n, 0.2, seeds.split)?;
    let x_train = x.select_rows(&train_rows)?;
    let y_train = y.select_rows(&train_rows)?;
    let x_test = x.select_rows(&test_rows)?;
    let y_test = y.select_rows(&test_rows)?;

    let master = fit_master(spec, &x_train, &y_train)?;
    let truth = ground_truth_importance(&master, &x_test)?;
    let handle = PredictorHandle::builtin(master);

    let diff_metric = opts.diff_metric();
    let drop_metric = opts.drop_metric(spec.task);

    let mut out = Vec::with_capacity(4);
    for method in BenchMethod::ALL {
        let start = std::time::Instant::now();
        let report = match method {
            BenchMethod::DirectOpt => {
                direct_scores(&handle, &x_test, diff_metric, Scheme::Optimal)?
            }
            BenchMethod::DirectApprox => {
                direct_scores(&handle, &x_test, diff_metric, Scheme::Approx)?
            }
            BenchMethod::Breiman1 => {
                breiman_scores(&handle, &x_test, &y_test, 1, seeds.breiman1, drop_metric)?
            }
            BenchMethod::Breiman10 => {
                breiman_scores(&handle, &x_test, &y_test, 10, seeds.breiman10, drop_metric)?
            }
        };
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        let (cor, max_diff, mean_diff) = compare_to_truth(&report, &truth)?;
        out.push(RepMetrics {
            ground_truth_cor: cor,
            max_score_diff: max_diff,
            mean_score_diff: mean_diff,
            runtime_ms,
        });
    }
    Ok([out[0], out[1], out[2], out[3]])
}

/// Run one scenario; failed repetitions are logged, not fatal.
pub fn run_scenario(
    spec: &ScenarioSpec,
    scenario_index: usize,
    opts: &BenchOptions,
) -> ScenarioResult {
    let per_rep: Vec<std::result::Result<[RepMetrics; 4], String>> = (0..spec.reps)
        .into_par_iter()
        .map(|rep| {
            run_rep(spec, scenario_index, rep, opts)
                .map_err(|e| format!("scenario {} rep {rep}: {e}", spec.label()))
        })
        .collect();

    let mut methods: Vec<MethodSeries> = BenchMethod::ALL
        .iter()
        .map(|&m| MethodSeries {
            method: m,
            reps: Vec::with_capacity(spec.reps),
        })
        .collect();
    let mut failures = Vec::new();
    for outcome in per_rep {
        match outcome {
            Ok(tuple) => {
                for (series, metrics) in methods.iter_mut().zip(tuple.iter()) {
                    series.reps.push(*metrics);
                }
            }
            Err(msg) => failures.push(msg),
        }
    }
    ScenarioResult {
        spec: spec.clone(),
        scenario_index,
        methods,
        failures,
    }
}

/// Run a grid with default options; scenario index = position.
pub fn run_grid(grid: &[ScenarioSpec]) -> Vec<ScenarioResult> {
    run_grid_indexed(
        &grid.iter().cloned().enumerate().collect::<Vec<_>>(),
        &BenchOptions::default(),
    )
}

/// Run (index, spec) cells — indices are preserved so a filtered subset
/// reproduces exactly the same numbers as the full grid.
pub fn run_grid_indexed(
    cells: &[(usize, ScenarioSpec)],
    opts: &BenchOptions,
) -> Vec<ScenarioResult> {
    cells
        .par_iter()
        .map(|(index, spec)| run_scenario(spec, *index, opts))
        .collect()
}

/// Cross-scenario aggregate of one metric for one method: each scenario
/// contributes its repetition mean and variance. Returns `None` for an empty
/// selection; a single scenario yields a between-variance of zero.
pub fn aggregate_metric(
    results: &[ScenarioResult],
    method: BenchMethod,
    metric: BenchMetric,
) -> Option<AggregateStat> {
    let pairs: Vec<(f64, f64)> = results
        .iter()
        .filter(|r| r.completed_reps() > 0)
        .map(|r| r.method(method).summary(metric))
        .collect();
    match pairs.len() {
        0 => None,
        1 => {
            let (m, v) = pairs[0];
            let se = v.sqrt();
            Some(AggregateStat {
                mean: m,
                within_var_mean: v,
                between_var: 0.0,
                combined_se: se,
                band: (m - 2.0 * se, m + 2.0 * se),
            })
        }
        _ => combine_variance(&pairs).ok(),
    }
}

/// Tidy per-scenario CSV: one row per scenario×method×metric with the
/// repetition mean and a ±2·SE band (SE from the repetition variance). Wall
/// times are deliberately excluded so identical invocations produce
/// byte-identical files; see [`timings_csv`].
pub fn results_csv(results: &[ScenarioResult]) -> String {
    let mut out = String::from(
        "scenario,n,p,sigma_eps,rho,response,task,master,reps_ok,method,metric,mean,se,lo,hi\n",
    );
    for r in results {
        let reps_ok = r.completed_reps();
        for method in BenchMethod::ALL {
            let series = r.method(method);
            for metric in BenchMetric::TABLE {
                let (m, v) = series.summary(metric);
                let se = if reps_ok > 0 {
                    (v / reps_ok as f64).sqrt()
                } else {
                    f64::NAN
                };
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    r.scenario_index,
                    r.spec.n,
                    r.spec.p,
                    r.spec.sigma_eps,
                    r.spec.rho,
                    r.spec.response.label(),
                    match r.spec.task {
                        Task::Regression => "regression",
                        Task::Classification => "classification",
                    },
                    r.spec.master.label(),
                    reps_ok,
                    method.label(),
                    metric.label(),
                    m,
                    se,
                    m - 2.0 * se,
                    m + 2.0 * se
                ));
            }
        }
    }
    out
}

/// Per-scenario mean wall times (ms) of each method's scoring call. Not
/// byte-stable across runs by nature.
pub fn timings_csv(results: &[ScenarioResult]) -> String {
    let mut out = String::from("scenario,method,reps_ok,mean_runtime_ms\n");
    for r in results {
        for method in BenchMethod::ALL {
            let (m, _) = r.method(method).summary(BenchMetric::RuntimeMs);
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.scenario_index,
                method.label(),
                r.completed_reps(),
                m
            ));
        }
    }
    out
}

/// JSON summary grouped by (response, task): per method and metric, the
/// cross-scenario aggregate (mean, combined SE, ±2·SE band).
pub fn summary_json(results: &[ScenarioResult]) -> serde_json::Value {
    let mut groups = Vec::new();
    for response in [Response::Linear, Response::Friedman] {
        for task in [Task::Regression, Task::Classification] {
            let selected: Vec<ScenarioResult> = results
                .iter()
                .filter(|r| r.spec.response == response && r.spec.task == task)
                .cloned()
                .collect();
            if selected.is_empty() {
                continue;
            }
            let mut methods = Vec::new();
            for method in BenchMethod::ALL {
                let mut metrics = serde_json::Map::new();
                for metric in BenchMetric::TABLE {
                    if let Some(agg) = aggregate_metric(&selected, method, metric) {
                        metrics.insert(
                            metric.label().to_string(),
                            serde_json::to_value(&agg).unwrap(),
                        );
                    }
                }
                methods.push(serde_json::json!({
                    "method": method.label(),
                    "metrics": metrics,
                }));
            }
            groups.push(serde_json::json!({
                "response": response.label(),
                "task": match task {
                    Task::Regression => "regression",
                    Task::Classification => "classification",
                },
                "scenarios": selected.len(),
                "methods": methods,
            }));
        }
    }
    let failures: Vec<String> = results
        .iter()
        .flat_map(|r| r.failures.iter().cloned())
        .collect();
    serde_json::json!({
        "groups": groups,
        "total_scenarios": results.len(),
        "failures": failures,
    })
}

/// A method configuration for ranking-stability analysis.
#[derive(Debug, Clone)]
pub enum FlickerMethod {
    Direct {
        metric: DiffMetric,
        scheme: Scheme,
    },
    Breiman {
        b: usize,
        metric: DropMetric,
        /// Fixed seed → identical draws per run; `None` → seed varies with
        /// the run index (seed_base + run).
        seed: Option<u64>,
    },
}

impl FlickerMethod {
    pub fn label(&self) -> String {
        match self {
            FlickerMethod::Direct { scheme, .. } => match scheme {
                Scheme::Optimal => "direct-opt".into(),
                Scheme::Approx => "direct-approx".into(),
            },
            FlickerMethod::Breiman { b, seed, .. } => match seed {
                Some(_) => format!("breiman-{b}-fixed"),
                None => format!("breiman-{b}"),
            },
        }
    }
}

/// Ranking-stability outcome for one method: how many distinct ordered
/// top-k tuples appeared over the runs, with counts.
#[derive(Debug, Clone, Serialize)]
pub struct FlickerResult {
    pub method: String,
    /// (ordered top-k feature indices, occurrence count), sorted by count
    /// descending then tuple ascending.
    pub histogram: Vec<(Vec<usize>, usize)>,
    pub distinct: usize,
}

/// Execute each configured method `runs` times, recording the ordered top-k
/// feature tuples. Deterministic methods always produce one distinct tuple;
/// sampling methods with unfixed seeds may flicker.
pub fn flicker_analysis(
    handle: &PredictorHandle,
    x: &DataMatrix,
    y: &TargetVector,
    configs: &[FlickerMethod],
    runs: usize,
    k: usize,
    seed_base: u64,
) -> Result<Vec<FlickerResult>> {
    if runs < 1 {
        return Err(Error::InvalidArgument("flicker_analysis: runs ≥ 1".into()));
    }
    if k > x.p() {
        return Err(Error::InvalidArgument(format!(
            "flicker_analysis: k={k} exceeds p={}",
            x.p()
        )));
    }
    let mut out = Vec::with_capacity(configs.len());
    for config in configs {
        let mut counts: std::collections::BTreeMap<Vec<usize>, usize> =
            std::collections::BTreeMap::new();
        for run in 0..runs {
            let report = match config {
                FlickerMethod::Direct { metric, scheme } => {
                    direct_scores(handle, x, *metric, *scheme)?
                }
                FlickerMethod::Breiman { b, metric, seed } => {
                    let run_seed = seed.unwrap_or(seed_base + run as u64);
                    breiman_scores(handle, x, y, *b, run_seed, *metric)?
                }
            };
            *counts.entry(report.top_k(k)).or_insert(0) += 1;
        }
        let mut histogram: Vec<(Vec<usize>, usize)> = counts.into_iter().collect();
        histogram.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        out.push(FlickerResult {
            method: config.label(),
            distinct: histogram.len(),
            histogram,
        });
    }
    Ok(out)
}
