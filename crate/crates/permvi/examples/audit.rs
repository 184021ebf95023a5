//! End-to-end library walkthrough: fit a master model on the bundled
//! mortgage-denial dataset, score deterministic importance, calibrate a
//! correlation threshold, and audit one feature's systemic reliance.
//!
//! Run with `cargo run --release --example audit`.

use permvi::direct::{direct_scores, DiffMetric, Scheme};
use permvi::model::fit_ols;
use permvi::systemic::{audit_feature, calibrate_threshold, systemic_scores};
use permvi::{load_csv, EncodePolicy, PredictorHandle};

fn main() -> permvi::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/hmda_synth.csv");
    let (x, y) = load_csv(data, "dir", EncodePolicy::LexicographicOrdinal)?;
    let handle = PredictorHandle::builtin(fit_ols(&x, &y)?);

    // One deterministic permutation per feature; no seeds, no variance.
    let direct = direct_scores(&handle, &x, DiffMetric::Mse, Scheme::Optimal)?;
    println!("direct importance (top 3):");
    for j in direct.top_k(3) {
        println!("  {} = {:.4}", direct.features[j], direct.normalized[j]);
    }

    // Data-driven threshold for which correlations count as edges.
    let graph = calibrate_threshold(&x, 0.01, 123)?;
    println!("calibrated tau = {:.4}, {} edges", graph.tau, graph.edges.len());

    // Systemic scores propagate each perturbation to correlated features.
    let systemic = systemic_scores(&handle, &x, DiffMetric::Mse, Scheme::Optimal, &graph)?;
    let j = x.feature_index("black").expect("column exists");
    println!("systemic share of `black` = {:.4}", systemic.systemic.as_ref().expect("systemic run")[j]);

    // Decompose one feature: systemic = direct + indirect (via proxies).
    let audit = audit_feature(&handle, &x, DiffMetric::Mse, Scheme::Optimal, &graph, "black", None)?;
    println!(
        "audit black: systemic {:.4} = direct {:.4} + indirect {:.4} ({} proxies)",
        audit.systemic,
        audit.direct,
        audit.indirect,
        audit.proxies.len()
    );
    Ok(())
}
