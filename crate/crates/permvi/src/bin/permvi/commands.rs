//! Subcommand implementations. Every command resolves its options against an
//! optional config file, runs the library pipeline, writes its outputs under
//! `--out-dir`, and records the effective configuration inside each JSON
//! artifact (schema_version 1 envelope).

use clap::Args;
use ndarray::Array2;
use serde_json::json;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use permvi::bench::{
    self, BenchMethod, BenchOptions, FlickerMethod, Master, Response, ScenarioSpec,
};
use permvi::model::{fit_logistic, fit_ols, ground_truth_importance, Penalty};
use permvi::systemic::{audit_feature, calibrate_threshold, systemic_scores};
use permvi::{
    breiman_scores, direct_scores, dominance_check, load_csv, DataMatrix, DiffMetric, DropMetric,
    EncodePolicy, Error, ImportanceReport, LinearModel, PredictorHandle, Result, Scheme, Task,
    TargetVector,
};

use crate::config::FileConfig;

const SCHEMA_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Shared option groups
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct DataOpts {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Name of the target column.
    #[arg(long)]
    pub target: Option<String>,
    /// Non-numeric feature handling: ordinal | reject.
    #[arg(long)]
    pub encode: Option<String>,
}

#[derive(Args, Debug)]
pub struct ModelOpts {
    /// Builtin master model: ols | lasso | logistic | l1-logistic.
    #[arg(long)]
    pub model: Option<String>,
    /// Penalty strength for lasso / l1-logistic. Default: the largest value
    /// on a 20-point log grid below the critical penalty that keeps at least
    /// one nonzero coefficient.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Disable inverse-frequency class weights for logistic masters.
    #[arg(long)]
    pub no_class_balance: bool,
    /// External predictor command (split on whitespace) speaking the
    /// line-based prediction protocol on stdin/stdout.
    #[arg(long, conflicts_with = "model")]
    pub external: Option<String>,
    /// Number of outputs per row produced by the external predictor.
    #[arg(long)]
    pub external_q: Option<usize>,
    /// Per-request timeout for the external predictor, in seconds.
    #[arg(long)]
    pub timeout: Option<u64>,
    /// Feature excluded from fitting (repeatable); its coefficient is pinned
    /// to zero but it remains in the report.
    #[arg(long)]
    pub exclude: Vec<String>,
}

fn parse_encode(s: &str) -> Result<EncodePolicy> {
    match s.to_ascii_lowercase().as_str() {
        "ordinal" => Ok(EncodePolicy::LexicographicOrdinal),
        "reject" => Ok(EncodePolicy::RejectNonNumeric),
        _ => Err(Error::InvalidArgument(format!(
            "unknown encode policy `{s}` (expected ordinal or reject)"
        ))),
    }
}

fn parse_task(s: &str) -> Result<Task> {
    match s.to_ascii_lowercase().as_str() {
        "regression" => Ok(Task::Regression),
        "classification" => Ok(Task::Classification),
        _ => Err(Error::InvalidArgument(format!(
            "unknown task `{s}` (expected regression or classification)"
        ))),
    }
}

struct Dataset {
    x: DataMatrix,
    y: TargetVector,
    path: PathBuf,
    target: String,
    encode: String,
}

fn load_dataset(opts: &DataOpts, cfg: &FileConfig) -> Result<Dataset> {
    let path = cfg
        .resolve_opt(opts.data.clone(), "data")?
        .ok_or_else(|| Error::InvalidArgument("missing --data".into()))?;
    let target = cfg
        .resolve_opt(opts.target.clone(), "target")?
        .ok_or_else(|| Error::InvalidArgument("missing --target".into()))?;
    let encode_label = cfg.resolve(opts.encode.clone(), "encode", "ordinal".to_string())?;
    let encode = parse_encode(&encode_label)?;
    let (x, y) = load_csv(&path, &target, encode)?;
    Ok(Dataset {
        x,
        y,
        path,
        target,
        encode: encode_label,
    })
}

/// Resolved model specification plus its JSON echo.
struct ResolvedModel {
    handle: PredictorHandle,
    echo: serde_json::Value,
    /// Scoring target matched to the model family (labels as reals for
    /// identity-link models on classification data, labels for logit ones).
    y_score: TargetVector,
}

fn build_handle(opts: &ModelOpts, cfg: &FileConfig, x: &DataMatrix, y: &TargetVector) -> Result<ResolvedModel> {
    if let Some(command_line) = cfg.resolve_opt(opts.external.clone(), "external")? {
        let command: Vec<String> = command_line
            .split_whitespace()
            .map(|s| s.to_string())
            .collect();
        let q = cfg.resolve(opts.external_q, "external-q", 1usize)?;
        let timeout = cfg.resolve(opts.timeout, "timeout", 60u64)?;
        let handle =
            PredictorHandle::external(&command, q, std::time::Duration::from_secs(timeout))?;
        return Ok(ResolvedModel {
            handle,
            echo: json!({ "external": command_line, "q": q, "timeout_secs": timeout }),
            y_score: y.clone(),
        });
    }

    let kind = cfg.resolve(opts.model.clone(), "model", "ols".to_string())?;
    let lambda = cfg.resolve_opt(opts.lambda, "lambda")?;
    let class_balance = !opts.no_class_balance;

    // Excluded features are dropped for fitting and re-inserted as exact
    // zero coefficients, so reports still cover every column.
    let mut kept: Vec<usize> = (0..x.p()).collect();
    for name in &opts.exclude {
        let j = x
            .feature_index(name)
            .ok_or_else(|| Error::UnknownFeature(name.clone()))?;
        kept.retain(|&k| k != j);
    }
    let x_fit = if kept.len() == x.p() {
        x.clone()
    } else {
        x.select_columns(&kept)?
    };

    let (model, y_score): (LinearModel, TargetVector) = match kind.as_str() {
        "ols" | "lasso" => {
            // Identity-link families score against real-valued targets;
            // class labels are used as 0/1 reals (linear probability form).
            let y_reg = match y.task() {
                Task::Regression => y.clone(),
                Task::Classification => TargetVector::regression(y.as_slice().to_vec())?,
            };
            let model = match kind.as_str() {
                "ols" => fit_ols(&x_fit, &y_reg)?,
                _ => match lambda {
                    Some(l) => permvi::model::fit_lasso(&x_fit, &y_reg, l)?,
                    None => bench::l1_grid_fit(
                        permvi::model::lasso_lambda_max(&x_fit, &y_reg),
                        |l| permvi::model::fit_lasso(&x_fit, &y_reg, l),
                    )?,
                },
            };
            (model, y_reg)
        }
        "logistic" | "l1-logistic" => {
            let y_cls = y.to_classification()?;
            let model = match kind.as_str() {
                "logistic" => fit_logistic(&x_fit, &y_cls, Penalty::None, class_balance)?,
                _ => match lambda {
                    Some(l) => {
                        fit_logistic(&x_fit, &y_cls, Penalty::L1 { lambda: l }, class_balance)?
                    }
                    None => bench::l1_grid_fit(
                        permvi::model::logistic_lambda_max(&x_fit, &y_cls, class_balance)?,
                        |l| fit_logistic(&x_fit, &y_cls, Penalty::L1 { lambda: l }, class_balance),
                    )?,
                },
            };
            (model, y_cls)
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown model `{other}` (expected ols, lasso, logistic, or l1-logistic)"
            )))
        }
    };
    let model = if kept.len() == x.p() {
        model
    } else {
        model.expand_to(x.p(), &kept)?
    };
    let fitted_lambda = match model.penalty {
        Penalty::L1 { lambda } => Some(lambda),
        Penalty::None => None,
    };
    let echo = json!({
        "kind": kind,
        "lambda": fitted_lambda,
        "class_balance": class_balance,
        "excluded": opts.exclude,
        "rank_deficient": model.rank_deficient,
        "separation_flagged": model.separation_flagged,
    });
    Ok(ResolvedModel {
        handle: PredictorHandle::builtin(model),
        echo,
        y_score,
    })
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Standard JSON envelope: schema version + effective configuration + payload.
fn write_envelope(path: &Path, config: &serde_json::Value, key: &str, payload: serde_json::Value) -> Result<()> {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "effective_config": config,
        key: payload,
    });
    let body = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::InvalidArgument(format!("serializing {key}: {e}")))?;
    write_text(path, &format!("{body}\n"))
}

fn report_value(report: &ImportanceReport) -> Result<serde_json::Value> {
    serde_json::to_value(report)
        .map_err(|e| Error::InvalidArgument(format!("serializing report: {e}")))
}

fn print_top_features(report: &ImportanceReport, k: usize) {
    for (rank, (j, score)) in report.ranking().into_iter().take(k).enumerate() {
        println!("  {}. {} = {:.6}", rank + 1, report.features[j], score);
    }
}

// ---------------------------------------------------------------------------
// importance
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct ImportanceArgs {
    #[command(flatten)]
    pub data: DataOpts,
    #[command(flatten)]
    pub model: ModelOpts,
    /// Difference metric: mae | mse | rmse.
    #[arg(long)]
    pub metric: Option<String>,
    /// Permutation scheme: optimal (rank shift) | approx (index shift).
    #[arg(long)]
    pub scheme: Option<String>,
    /// Also run the random-permutation baseline with B permutations per
    /// feature, plus the deterministic-vs-random budget check.
    #[arg(long, value_name = "B")]
    pub compare_breiman: Option<usize>,
    /// Baseline drop metric: mse-drop | neg-brier-drop | accuracy-drop.
    #[arg(long)]
    pub drop_metric: Option<String>,
    /// Seed for baseline permutations.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn cmd_importance(args: &ImportanceArgs, cfg: &FileConfig) -> Result<i32> {
    let dataset = load_dataset(&args.data, cfg)?;
    let resolved = build_handle(&args.model, cfg, &dataset.x, &dataset.y)?;
    let metric: DiffMetric = cfg.resolve(args.metric.clone(), "metric", "mse".into())?.parse()?;
    let scheme: Scheme = cfg
        .resolve(args.scheme.clone(), "scheme", "optimal".into())?
        .parse()?;
    let seed = cfg.resolve(args.seed, "seed", 123u64)?;
    let compare_b = cfg.resolve_opt(args.compare_breiman, "compare-breiman")?;
    let out_dir = cfg.resolve(args.out_dir.clone(), "out-dir", PathBuf::from("."))?;
    ensure_dir(&out_dir)?;

    let report = direct_scores(&resolved.handle, &dataset.x, metric, scheme)?;

    let mut effective = json!({
        "command": "importance",
        "data": dataset.path,
        "target": dataset.target,
        "encode": dataset.encode,
        "model": resolved.echo,
        "metric": metric.label(),
        "scheme": report.method.label(),
        "seed": seed,
    });

    if let Some(b) = compare_b {
        let drop_metric = resolve_drop_metric(
            cfg.resolve_opt(args.drop_metric.clone(), "drop-metric")?,
            &resolved,
            &dataset,
        )?;
        effective["compare_breiman"] = json!(b);
        effective["drop_metric"] = json!(drop_metric.label());
        let y_drop = target_for_drop(drop_metric, &resolved.y_score)?;
        let baseline = breiman_scores(&resolved.handle, &dataset.x, &y_drop, b, seed, drop_metric)?;
        write_envelope(
            &out_dir.join("breiman.json"),
            &effective,
            "report",
            report_value(&baseline)?,
        )?;
        baseline.write_csv(&out_dir.join("breiman.csv"))?;
        if b >= 2 {
            let check = dominance_check(&resolved.handle, &dataset.x, metric, b, seed)?;
            write_envelope(
                &out_dir.join("dominance.json"),
                &effective,
                "dominance",
                serde_json::to_value(&check)
                    .map_err(|e| Error::InvalidArgument(format!("serializing check: {e}")))?,
            )?;
            println!(
                "dominance check: deterministic distance {:.3e}, sampling bound {:.3e} ({})",
                check.lhs,
                check.rhs_consistent,
                if check.verdict_consistent {
                    "within budget"
                } else {
                    "above budget"
                }
            );
        }
    }

    write_envelope(
        &out_dir.join("importance.json"),
        &effective,
        "report",
        report_value(&report)?,
    )?;
    report.write_csv(&out_dir.join("importance.csv"))?;

    println!(
        "method {} · metric {} · {} features",
        report.method.label(),
        metric.label(),
        report.features.len()
    );
    print_top_features(&report, 5);
    println!("wrote {}", out_dir.join("importance.json").display());
    Ok(0)
}

/// Pick the baseline drop metric: explicit wins; otherwise Brier drop for
/// 2-column probability models, MSE drop for single-output models.
fn resolve_drop_metric(
    explicit: Option<String>,
    resolved: &ResolvedModel,
    dataset: &Dataset,
) -> Result<DropMetric> {
    if let Some(s) = explicit {
        return s.parse();
    }
    let is_classifier = resolved
        .handle
        .model()
        .map(|m| matches!(m.link, permvi::model::Link::Logit))
        .unwrap_or(dataset.y.task() == Task::Classification);
    Ok(if is_classifier {
        DropMetric::NegBrierDrop
    } else {
        DropMetric::MseDrop
    })
}

/// The baseline needs targets in the shape its metric expects.
fn target_for_drop(metric: DropMetric, y: &TargetVector) -> Result<TargetVector> {
    match metric {
        DropMetric::MseDrop => match y.task() {
            Task::Regression => Ok(y.clone()),
            Task::Classification => TargetVector::regression(y.as_slice().to_vec()),
        },
        DropMetric::NegBrierDrop | DropMetric::AccuracyDrop => y.to_classification(),
    }
}

// ---------------------------------------------------------------------------
// systemic
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct SystemicArgs {
    #[command(flatten)]
    pub data: DataOpts,
    #[command(flatten)]
    pub model: ModelOpts,
    /// Difference metric: mae | mse | rmse.
    #[arg(long)]
    pub metric: Option<String>,
    /// Permutation scheme: optimal | approx.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Significance level for the propagation threshold.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Calibration permutation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Protected feature to audit (adds audit.json).
    #[arg(long)]
    pub protected: Option<String>,
    /// Evaluation design: holdout (fit/calibrate on train, score held-out
    /// rows) | full (single matrix for everything).
    #[arg(long)]
    pub eval: Option<String>,
    /// Held-out fraction for `--eval holdout`.
    #[arg(long)]
    pub split_frac: Option<f64>,
    /// Seed of the holdout shuffle.
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn cmd_systemic(args: &SystemicArgs, cfg: &FileConfig) -> Result<i32> {
    let dataset = load_dataset(&args.data, cfg)?;
    let metric: DiffMetric = cfg.resolve(args.metric.clone(), "metric", "mse".into())?.parse()?;
    let scheme: Scheme = cfg
        .resolve(args.scheme.clone(), "scheme", "optimal".into())?
        .parse()?;
    let alpha = cfg.resolve(args.alpha, "alpha", 0.01f64)?;
    let seed = cfg.resolve(args.seed, "seed", 123u64)?;
    let eval = cfg.resolve(args.eval.clone(), "eval", "holdout".to_string())?;
    let split_frac = cfg.resolve(args.split_frac, "split-frac", 0.1f64)?;
    let split_seed = cfg.resolve(args.split_seed, "split-seed", 42u64)?;
    let protected = cfg.resolve_opt(args.protected.clone(), "protected")?;
    let out_dir = cfg.resolve(args.out_dir.clone(), "out-dir", PathBuf::from("."))?;
    ensure_dir(&out_dir)?;

    // Threshold and correlations come from the training rows; scores from the
    // held-out rows (or everything under --eval full).
    let (x_train, y_train, x_eval) = match eval.as_str() {
        "holdout" => {
            let (train, test) = bench::holdout_split(dataset.x.n(), split_frac, split_seed)?;
            (
                dataset.x.select_rows(&train)?,
                dataset.y.select_rows(&train)?,
                dataset.x.select_rows(&test)?,
            )
        }
        "full" => (dataset.x.clone(), dataset.y.clone(), dataset.x.clone()),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown eval mode `{other}` (expected holdout or full)"
            )))
        }
    };

    let resolved = build_handle(&args.model, cfg, &x_train, &y_train)?;
    if let Some(name) = &protected {
        if dataset.x.feature_index(name).is_none() {
            return Err(Error::UnknownFeature(name.clone()));
        }
    }

    let graph = calibrate_threshold(&x_train, alpha, seed)?;
    let report = systemic_scores(&resolved.handle, &x_eval, metric, scheme, &graph)?;

    let effective = json!({
        "command": "systemic",
        "data": dataset.path,
        "target": dataset.target,
        "encode": dataset.encode,
        "model": resolved.echo,
        "metric": metric.label(),
        "scheme": scheme_label(scheme),
        "alpha": alpha,
        "seed": seed,
        "eval": eval,
        "split_frac": split_frac,
        "split_seed": split_seed,
        "protected": protected,
    });

    write_envelope(
        &out_dir.join("systemic.json"),
        &effective,
        "report",
        report_value(&report)?,
    )?;
    report.write_csv(&out_dir.join("systemic.csv"))?;
    graph.write_heatmap_csv(&x_eval.feature_names(), &out_dir.join("correlation.csv"))?;

    let names = x_eval.feature_names();
    let edges: Vec<serde_json::Value> = graph
        .edges
        .iter()
        .map(|&(a, b)| {
            json!({
                "a": names[a],
                "b": names[b],
                "rho": graph.matrix[[a, b]],
            })
        })
        .collect();
    write_envelope(
        &out_dir.join("graph.json"),
        &effective,
        "graph",
        json!({
            "tau": graph.tau,
            "alpha": graph.alpha,
            "tolerance_quantile": 1.0 - graph.alpha,
            "seed": graph.seed,
            "edges": edges,
        }),
    )?;

    println!("tolerance quantile: {}", 1.0 - alpha);
    println!(
        "tau: {:.6} · {} edges above threshold",
        graph.tau,
        graph.edges.len()
    );
    print_top_features(&report, 5);

    if let Some(name) = &protected {
        // Ground-truth reference scores are available for builtin masters.
        let gt = resolved
            .handle
            .model()
            .and_then(|m| ground_truth_importance(m, &x_eval).ok());
        let audit = audit_feature(
            &resolved.handle,
            &x_eval,
            metric,
            scheme,
            &graph,
            name,
            gt.as_deref(),
        )?;
        write_envelope(
            &out_dir.join("audit.json"),
            &effective,
            "audit",
            serde_json::to_value(&audit)
                .map_err(|e| Error::InvalidArgument(format!("serializing audit: {e}")))?,
        )?;
        println!(
            "audit {}: systemic {:.6} = direct {:.6} + indirect {:.6}; {} proxies; proxy-influenced share {:.4}",
            audit.feature,
            audit.systemic,
            audit.direct,
            audit.indirect,
            audit.proxies.len(),
            audit.proxy_influenced_share
        );
    }
    println!("wrote {}", out_dir.join("systemic.json").display());
    Ok(0)
}

fn scheme_label(scheme: Scheme) -> &'static str {
    match scheme {
        Scheme::Optimal => "optimal",
        Scheme::Approx => "approx",
    }
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    /// Keep only scenarios with this sample count.
    #[arg(long)]
    pub n: Option<usize>,
    /// Keep only scenarios with this feature count.
    #[arg(long)]
    pub p: Option<usize>,
    /// Keep only scenarios with this noise level.
    #[arg(long)]
    pub sigma_eps: Option<f64>,
    /// Keep only scenarios with this correlation level.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Keep only this response surface: linear | friedman.
    #[arg(long)]
    pub response: Option<String>,
    /// Keep only this task: regression | classification.
    #[arg(long)]
    pub task: Option<String>,
    /// Keep only this master family: unregularized | l1.
    #[arg(long)]
    pub master: Option<String>,
    /// Repetitions per scenario.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Base seed for all scenario cells.
    #[arg(long)]
    pub base_seed: Option<u64>,
    /// Score with each family's plainest metric (MAE differences;
    /// accuracy drop for classification baselines).
    #[arg(long)]
    pub default_metrics: bool,
    /// Output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn cmd_benchmark(args: &BenchmarkArgs, cfg: &FileConfig) -> Result<i32> {
    let reps = cfg.resolve(args.reps, "reps", bench::DEFAULT_REPS)?;
    let base_seed = cfg.resolve(args.base_seed, "base-seed", bench::DEFAULT_BASE_SEED)?;
    let out_dir = cfg.resolve(args.out_dir.clone(), "out-dir", PathBuf::from("bench-out"))?;
    let default_metrics = args.default_metrics
        || cfg.get::<bool>("default-metrics")?.unwrap_or(false);

    let filter_n = cfg.resolve_opt(args.n, "n")?;
    let filter_p = cfg.resolve_opt(args.p, "p")?;
    let filter_sigma = cfg.resolve_opt(args.sigma_eps, "sigma-eps")?;
    let filter_rho = cfg.resolve_opt(args.rho, "rho")?;
    let filter_response: Option<Response> = cfg
        .resolve_opt(args.response.clone(), "response")?
        .map(|s| s.parse())
        .transpose()?;
    let filter_task: Option<Task> = cfg
        .resolve_opt(args.task.clone(), "task")?
        .map(|s| parse_task(&s))
        .transpose()?;
    let filter_master: Option<Master> = cfg
        .resolve_opt(args.master.clone(), "master")?
        .map(|s| s.parse())
        .transpose()?;

    // Indices refer to the full grid, so a filtered run reproduces exactly
    // the numbers the full run would produce for those cells.
    let grid = bench::default_grid(reps, base_seed);
    let cells: Vec<(usize, ScenarioSpec)> = grid
        .into_iter()
        .enumerate()
        .filter(|(_, s)| {
            filter_n.map_or(true, |v| s.n == v)
                && filter_p.map_or(true, |v| s.p == v)
                && filter_sigma.map_or(true, |v| s.sigma_eps == v)
                && filter_rho.map_or(true, |v| s.rho == v)
                && filter_response.map_or(true, |v| s.response == v)
                && filter_task.map_or(true, |v| s.task == v)
                && filter_master.map_or(true, |v| s.master == v)
        })
        .collect();
    if cells.is_empty() {
        return Err(Error::InvalidArgument(
            "benchmark filters match no scenarios".into(),
        ));
    }
    println!("running {} scenarios × {} repetitions", cells.len(), reps);

    ensure_dir(&out_dir)?;
    let opts = BenchOptions { default_metrics };
    let results = bench::run_grid_indexed(&cells, &opts);

    let effective = json!({
        "command": "benchmark",
        "reps": reps,
        "base_seed": base_seed,
        "default_metrics": default_metrics,
        "filters": {
            "n": filter_n, "p": filter_p, "sigma_eps": filter_sigma, "rho": filter_rho,
            "response": filter_response.map(|r| r.label()),
            "task": filter_task,
            "master": filter_master.map(|m| m.label()),
        },
        "scenarios": cells.len(),
    });

    write_text(&out_dir.join("scenarios.csv"), &bench::results_csv(&results))?;
    write_text(&out_dir.join("timings.csv"), &bench::timings_csv(&results))?;
    write_envelope(
        &out_dir.join("summary.json"),
        &effective,
        "summary",
        bench::summary_json(&results),
    )?;

    let failures: usize = results.iter().map(|r| r.failures.len()).sum();
    for method in BenchMethod::ALL {
        if let Some(agg) =
            bench::aggregate_metric(&results, method, bench::BenchMetric::GroundTruthCor)
        {
            println!(
                "  {:<14} ground-truth cor {:.4} ± {:.4}",
                method.label(),
                agg.mean,
                2.0 * agg.combined_se
            );
        }
    }
    println!("wrote {}", out_dir.join("summary.json").display());
    if failures > 0 {
        eprintln!("warning: {failures} repetition(s) failed; partial results retained");
        return Ok(5);
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// stability
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub data: DataOpts,
    #[command(flatten)]
    pub model: ModelOpts,
    /// Difference metric for the deterministic methods.
    #[arg(long)]
    pub metric: Option<String>,
    /// Baseline drop metric: mse-drop | neg-brier-drop | accuracy-drop.
    #[arg(long)]
    pub drop_metric: Option<String>,
    /// Number of independent runs.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Ranking depth (top-k tuple).
    #[arg(long)]
    pub k: Option<usize>,
    /// Permutations per feature for the random baseline.
    #[arg(long)]
    pub b: Option<usize>,
    /// First seed for unfixed baseline runs (run r uses seed-base + r).
    #[arg(long)]
    pub seed_base: Option<u64>,
    /// Fix the baseline seed across runs instead.
    #[arg(long, conflicts_with = "seed_base")]
    pub fixed_seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn cmd_stability(args: &StabilityArgs, cfg: &FileConfig) -> Result<i32> {
    let dataset = load_dataset(&args.data, cfg)?;
    let resolved = build_handle(&args.model, cfg, &dataset.x, &dataset.y)?;
    let metric: DiffMetric = cfg.resolve(args.metric.clone(), "metric", "mse".into())?.parse()?;
    let runs = cfg.resolve(args.runs, "runs", 10usize)?;
    let k = cfg.resolve(args.k, "k", 5usize)?;
    let b = cfg.resolve(args.b, "b", 1usize)?;
    let seed_base = cfg.resolve(args.seed_base, "seed-base", 1000u64)?;
    let fixed_seed = cfg.resolve_opt(args.fixed_seed, "fixed-seed")?;
    let out_dir = cfg.resolve(args.out_dir.clone(), "out-dir", PathBuf::from("."))?;
    ensure_dir(&out_dir)?;

    let drop_metric = resolve_drop_metric(
        cfg.resolve_opt(args.drop_metric.clone(), "drop-metric")?,
        &resolved,
        &dataset,
    )?;
    let y_drop = target_for_drop(drop_metric, &resolved.y_score)?;

    let configs = vec![
        FlickerMethod::Direct {
            metric,
            scheme: Scheme::Optimal,
        },
        FlickerMethod::Direct {
            metric,
            scheme: Scheme::Approx,
        },
        FlickerMethod::Breiman {
            b,
            metric: drop_metric,
            seed: fixed_seed,
        },
    ];
    let results = permvi::bench::flicker_analysis(
        &resolved.handle,
        &dataset.x,
        &y_drop,
        &configs,
        runs,
        k,
        seed_base,
    )?;

    let effective = json!({
        "command": "stability",
        "data": dataset.path,
        "target": dataset.target,
        "model": resolved.echo,
        "metric": metric.label(),
        "drop_metric": drop_metric.label(),
        "runs": runs,
        "k": k,
        "b": b,
        "seed_base": seed_base,
        "fixed_seed": fixed_seed,
    });

    let names = dataset.x.feature_names();
    let mut csv = String::from("method,distinct,tuple,count\n");
    let mut payload = Vec::new();
    for r in &results {
        for (tuple, count) in &r.histogram {
            let named: Vec<&str> = tuple.iter().map(|&j| names[j].as_str()).collect();
            csv.push_str(&format!(
                "{},{},{},{}\n",
                r.method,
                r.distinct,
                named.join("|"),
                count
            ));
        }
        payload.push(json!({
            "method": r.method,
            "distinct": r.distinct,
            "histogram": r.histogram.iter().map(|(tuple, count)| {
                json!({
                    "tuple": tuple.iter().map(|&j| names[j].clone()).collect::<Vec<_>>(),
                    "count": count,
                })
            }).collect::<Vec<_>>(),
        }));
        println!("{}: {} distinct top-{k} tuple(s) over {runs} runs", r.method, r.distinct);
    }
    write_text(&out_dir.join("stability.csv"), &csv)?;
    write_envelope(
        &out_dir.join("stability.json"),
        &effective,
        "stability",
        serde_json::Value::Array(payload),
    )?;
    println!("wrote {}", out_dir.join("stability.csv").display());
    Ok(0)
}

// ---------------------------------------------------------------------------
// fetch-data
// ---------------------------------------------------------------------------

const HMDA_CSV: &str = include_str!("../../../data/hmda_synth.csv");
const GERMAN_CSV: &str = include_str!("../../../data/german_credit_synth.csv");

#[derive(Args, Debug)]
pub struct FetchDataArgs {
    /// Directory to place the bundled case-study datasets in.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn cmd_fetch_data(args: &FetchDataArgs, cfg: &FileConfig) -> Result<i32> {
    let out_dir = cfg.resolve(args.out_dir.clone(), "out-dir", PathBuf::from("data"))?;
    ensure_dir(&out_dir)?;
    for (name, body) in [
        ("hmda_synth.csv", HMDA_CSV),
        ("german_credit_synth.csv", GERMAN_CSV),
    ] {
        let path = out_dir.join(name);
        write_text(&path, body)?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// serve
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// JSON file holding a fitted model (as written by `importance`'s
    /// effective-config echo or assembled by hand).
    #[arg(long)]
    pub model_file: PathBuf,
}

/// Speak the line-based prediction protocol on stdin/stdout with a saved
/// model, so the toolkit can audit itself as an "external" predictor.
pub fn cmd_serve(args: &ServeArgs) -> Result<i32> {
    let body = std::fs::read_to_string(&args.model_file).map_err(|e| Error::Io {
        path: args.model_file.display().to_string(),
        source: e,
    })?;
    let model: LinearModel = serde_json::from_str(&body)
        .map_err(|e| Error::InvalidArgument(format!("parsing model file: {e}")))?;

    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();

    while let Some(line) = lines.next() {
        let line = line.map_err(|e| Error::Predictor(format!("reading request: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let (n, p, q) = parse_request_header(&line)?;
        let mut x = Array2::zeros((n, p));
        for i in 0..n {
            let row = lines
                .next()
                .ok_or_else(|| Error::Predictor("request truncated mid-matrix".into()))?
                .map_err(|e| Error::Predictor(format!("reading request row: {e}")))?;
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() != p {
                return Err(Error::Predictor(format!(
                    "request row {i} has {} fields, expected {p}",
                    fields.len()
                )));
            }
            for (j, field) in fields.iter().enumerate() {
                x[[i, j]] = field.trim().parse::<f64>().map_err(|_| {
                    Error::Predictor(format!("request row {i}: bad real `{field}`"))
                })?;
            }
        }
        let preds = model.predict(&x)?;
        if preds.ncols() != q {
            return Err(Error::Predictor(format!(
                "model produces {} outputs per row, request expects {q}",
                preds.ncols()
            )));
        }
        let mut buf = String::new();
        for i in 0..n {
            for j in 0..q {
                if j > 0 {
                    buf.push(',');
                }
                buf.push_str(&format!("{}", preds[[i, j]]));
            }
            buf.push('\n');
        }
        buf.push_str("#end\n");
        out.write_all(buf.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Error::Predictor(format!("writing response: {e}")))?;
    }
    Ok(0)
}

fn parse_request_header(line: &str) -> Result<(usize, usize, usize)> {
    let rest = line
        .strip_prefix("#predict")
        .ok_or_else(|| Error::Predictor(format!("expected `#predict` header, got `{line}`")))?;
    let (mut n, mut p, mut q) = (None, None, None);
    for token in rest.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| Error::Predictor(format!("bad header token `{token}`")))?;
        let parsed: usize = value
            .parse()
            .map_err(|_| Error::Predictor(format!("bad header value `{token}`")))?;
        match key {
            "n" => n = Some(parsed),
            "p" => p = Some(parsed),
            "q" => q = Some(parsed),
            _ => return Err(Error::Predictor(format!("unknown header key `{key}`"))),
        }
    }
    match (n, p, q) {
        (Some(n), Some(p), Some(q)) if n > 0 && p > 0 && q > 0 => Ok((n, p, q)),
        _ => Err(Error::Predictor(format!(
            "header must carry positive n, p, and q: `{line}`"
        ))),
    }
}
