//! Regenerates the bundled case-study fixtures (`data/hmda_synth.csv`,
//! `data/german_credit_synth.csv`).
//!
//! Both files are synthetic facsimiles: seeded draws from latent-Gaussian
//! models whose marginals, correlation structure, and audit behavior mimic
//! the public mortgage-screening and German-credit datasets the case studies
//! are modeled on. The generator searches a small seed range and keeps the
//! first draw that reproduces the qualitative audit findings with margin
//! (proxy correlations above the calibrated threshold, a small direct and
//! larger indirect share for the protected mortgage feature, an isolated
//! protected credit feature, and top-5 flicker under the B=1 baseline).
//! Run with: `cargo run -p permvi --release --example gen_fixtures`

use ndarray::Array2;
use permvi::bench::{self, FlickerMethod};
use permvi::model::{fit_logistic, fit_ols, Penalty};
use permvi::systemic::{audit_feature, calibrate_threshold, systemic_scores};
use permvi::{
    DataMatrix, DiffMetric, DropMetric, PredictorHandle, Scheme, TargetVector,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::Write as _;

fn main() {
    let out_dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    std::fs::create_dir_all(&out_dir).unwrap();

    let (hmda_csv, hmda_seed) = (1u64..200)
        .find_map(|seed| build_hmda(seed).map(|csv| (csv, seed)))
        .expect("no seed satisfied the mortgage fixture targets");
    println!("mortgage fixture: seed {hmda_seed}");
    write(&out_dir.join("hmda_synth.csv"), &hmda_csv);

    let (german_csv, german_seed) = (1u64..200)
        .find_map(|seed| build_german(seed).map(|csv| (csv, seed)))
        .expect("no seed satisfied the credit fixture targets");
    println!("credit fixture: seed {german_seed}");
    write(&out_dir.join("german_credit_synth.csv"), &german_csv);
}

fn write(path: &std::path::Path, body: &str) {
    let mut f = std::fs::File::create(path).unwrap();
    f.write_all(body.as_bytes()).unwrap();
    println!("wrote {}", path.display());
}

/// Draw n×p latent Gaussians with correlation `c`.
fn latents(n: usize, c: &Array2<f64>, seed: u64) -> Array2<f64> {
    bench::gen_gaussian(n, &c.view(), seed)
        .unwrap()
        .values()
        .clone()
}

/// Indices that would sort the column ascending (ties by index).
fn ascending_order(col: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..col.len()).collect();
    idx.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap().then(a.cmp(&b)));
    idx
}

/// Map a latent column to ordinal codes with exact level counts:
/// `cum` holds cumulative probabilities; codes start at `base`.
fn ordinal(col: &[f64], cum: &[f64], base: i64) -> Vec<f64> {
    let n = col.len();
    let order = ascending_order(col);
    let mut out = vec![0.0; n];
    let mut start = 0usize;
    for (level, &q) in cum.iter().enumerate() {
        let end = if level + 1 == cum.len() {
            n
        } else {
            (q * n as f64).round() as usize
        };
        for &i in &order[start..end] {
            out[i] = (base + level as i64) as f64;
        }
        start = end;
    }
    out
}

/// Binary column with exactly `round(rate·n)` ones on the largest latents.
fn binary(col: &[f64], rate: f64) -> Vec<f64> {
    ordinal(col, &[1.0 - rate, 1.0], 0)
}

// ---------------------------------------------------------------------------
// Mortgage-screening facsimile
// ---------------------------------------------------------------------------

const HMDA_NAMES: [&str; 12] = [
    "hir", "lvr", "ccs", "mcs", "pbcr", "dmi", "self", "single", "uria", "condominium", "black",
    "deny",
];

fn build_hmda(seed: u64) -> Option<String> {
    let n = 2380usize;
    let p = 12usize;
    // Latent correlations. The protected feature (10) loads on its proxies:
    // loan-to-value (1), credit score (2), condominium (9), denial (11).
    let pairs: &[(usize, usize, f64)] = &[
        (0, 1, 0.25),  // housing-expense ratio ~ loan-to-value
        (1, 2, 0.15),  // loan-to-value ~ credit score
        (2, 4, 0.30),  // credit score ~ bad public record
        (2, 11, 0.35), // credit score ~ denial
        (4, 11, 0.30), // bad record ~ denial
        (5, 11, 0.50), // denied insurance ~ denial
        (10, 1, 0.30), // protected ~ loan-to-value
        (10, 2, 0.42), // protected ~ credit score
        (10, 9, 0.33), // protected ~ condominium
        (10, 11, 0.48), // protected ~ denial
        (7, 10, 0.12), // single ~ protected (kept below threshold interest)
    ];
    let mut c = Array2::<f64>::eye(p);
    for &(a, b, r) in pairs {
        c[[a, b]] = r;
        c[[b, a]] = r;
    }
    let z = latents(n, &c, seed);
    let col = |j: usize| z.column(j).to_vec();

    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    // hir: right-skewed housing-expense-to-income ratio.
    cols.push(col(0).iter().map(|v| 0.255 * (0.33 * v - 0.054).exp()).collect());
    // lvr: loan-to-value ratio.
    cols.push(col(1).iter().map(|v| 0.74 + 0.15 * v).collect());
    // ccs: consumer credit score, 1 (best) .. 6.
    cols.push(ordinal(&col(2), &[0.55, 0.67, 0.75, 0.85, 0.93, 1.0], 1));
    // mcs: mortgage credit score, 1 .. 4.
    cols.push(ordinal(&col(3), &[0.06, 0.89, 0.95, 1.0], 1));
    cols.push(binary(&col(4), 0.074)); // pbcr: public bad credit record
    cols.push(binary(&col(5), 0.022)); // dmi: denied mortgage insurance
    cols.push(binary(&col(6), 0.116)); // self-employed
    cols.push(binary(&col(7), 0.393)); // single
    // uria: regional unemployment rate.
    cols.push(col(8).iter().map(|v| 3.9 + 1.25 * v).collect());
    cols.push(binary(&col(9), 0.288)); // condominium
    cols.push(binary(&col(10), 0.1424)); // black (protected)
    cols.push(binary(&col(11), 0.12)); // deny

    // Debt-to-income response: dominated by the housing-expense ratio, with
    // a deliberately tiny direct loading on the protected feature and
    // moderate loadings on its proxies. Right-skewed noise tail.
    let beta: [f64; 12] = [
        0.66,    // hir
        0.017,   // lvr
        0.004,   // ccs
        0.003,   // mcs
        0.012,   // pbcr
        0.025,   // dmi
        0.006,   // self
        0.004,   // single
        0.0015,  // uria
        -0.003,  // condominium
        0.0055,  // black: small direct path
        0.012,   // deny
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f7274);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = 0.291 - 0.255 * beta[0]; // recenter the hir contribution
        for j in 0..p {
            v += beta[j] * cols[j][i];
        }
        let z1: f64 = StandardNormal.sample(&mut rng);
        let u: f64 = rand::Rng::gen(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        v += 0.045 * z1;
        if u < 0.03 {
            // heavy right tail: over-extended borrowers
            v += 0.05 + 0.18 * ((0.9 * z2.abs()).exp() - 1.0);
        } else if u > 0.985 {
            // occasional near-zero debt ratios
            v *= rand::Rng::gen::<f64>(&mut rng);
        }
        y.push(v.clamp(0.0, 3.0));
    }

    let x = matrix(&cols, &HMDA_NAMES);
    let target = TargetVector::regression(y.clone()).unwrap();

    // --- acceptance pipeline: OLS on all rows, threshold at alpha 0.01. ---
    let model = fit_ols(&x, &target).unwrap();
    let handle = PredictorHandle::builtin(model);
    let graph = calibrate_threshold(&x, 0.01, 123).ok()?;
    let audit = audit_feature(
        &handle,
        &x,
        DiffMetric::Mse,
        Scheme::Optimal,
        &graph,
        "black",
        None,
    )
    .ok()?;
    // Factor-3 bands around direct 0.09% / indirect 0.35%, with margin.
    let d_ok = audit.direct >= 0.0005 && audit.direct <= 0.0020;
    let i_ok = audit.indirect >= 0.0018 && audit.indirect <= 0.0080;
    let sep_ok = audit.indirect > 1.5 * audit.direct;
    let proxy_names: Vec<&str> = audit.proxies.iter().map(|(n, _)| n.as_str()).collect();
    let proxies_ok = ["lvr", "ccs", "condominium", "deny"]
        .iter()
        .all(|want| proxy_names.contains(want));
    if !(d_ok && i_ok && sep_ok && proxies_ok) {
        println!(
            "  seed {seed}: d {:.5} i {:.5} proxies {:?} — rejected",
            audit.direct, audit.indirect, proxy_names
        );
        return None;
    }

    // --- held-out variant the CLI demo uses (90/10, fit+calibrate on train).
    let (train, test) = bench::holdout_split(n, 0.1, 42).unwrap();
    let x_tr = x.select_rows(&train).unwrap();
    let y_tr = target.select_rows(&train).unwrap();
    let x_te = x.select_rows(&test).unwrap();
    let m_tr = fit_ols(&x_tr, &y_tr).unwrap();
    let h_tr = PredictorHandle::builtin(m_tr);
    let g_tr = calibrate_threshold(&x_tr, 0.01, 123).ok()?;
    let a_te = audit_feature(&h_tr, &x_te, DiffMetric::Mse, Scheme::Optimal, &g_tr, "black", None).ok()?;
    if !(a_te.indirect > a_te.direct && a_te.direct > 0.0) {
        println!("  seed {seed}: holdout variant d {:.5} i {:.5} — rejected", a_te.direct, a_te.indirect);
        return None;
    }

    // --- flicker: B=1 baseline must show ≥2 distinct top-5 tuples for every
    // retry base the acceptance suite may use; deterministic methods 1.
    for base in [1000u64, 2000, 3000] {
        let res = bench::flicker_analysis(
            &handle,
            &x,
            &target,
            &[FlickerMethod::Breiman {
                b: 1,
                metric: DropMetric::MseDrop,
                seed: None,
            }],
            10,
            5,
            base,
        )
        .unwrap();
        if res[0].distinct < 2 {
            println!("  seed {seed}: no flicker at base {base} — rejected");
            return None;
        }
    }

    println!(
        "  seed {seed}: d {:.5} i {:.5} s {:.5} tau {:.4} proxies {:?}",
        audit.direct, audit.indirect, audit.systemic, graph.tau, audit.proxies
    );
    Some(to_csv(&x, &y, "dir"))
}

// ---------------------------------------------------------------------------
// German-credit facsimile
// ---------------------------------------------------------------------------

const GERMAN_NAMES: [&str; 20] = [
    "Account_status",
    "Duration",
    "Credit_history",
    "Purpose",
    "Credit_amount",
    "Savings",
    "Employment",
    "Installment_rate",
    "Sex-Marital_status",
    "Other_debtors",
    "Residence_duration",
    "Property",
    "Age",
    "Other_installment_plans",
    "Housing",
    "Existing_credits",
    "Job",
    "Num_dependents",
    "Telephone",
    "Foreign_worker",
];

fn build_german(seed: u64) -> Option<String> {
    let n = 1000usize;
    let p = 20usize;
    // Latent correlations; the protected feature (8) stays fully isolated.
    let pairs: &[(usize, usize, f64)] = &[
        (1, 4, 0.62),  // duration ~ amount
        (0, 5, 0.22),  // account status ~ savings
        (11, 14, 0.35), // property ~ housing
        (12, 10, 0.25), // age ~ residence duration
        (12, 6, 0.30), // age ~ employment
        (16, 4, 0.28), // job ~ amount
        (18, 4, 0.22), // telephone ~ amount
        (2, 15, 0.30), // credit history ~ existing credits
        (0, 2, 0.18),  // account status ~ credit history
    ];
    let mut c = Array2::<f64>::eye(p);
    for &(a, b, r) in pairs {
        c[[a, b]] = r;
        c[[b, a]] = r;
    }
    let z = latents(n, &c, seed);
    let col = |j: usize| z.column(j).to_vec();

    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    cols.push(ordinal(&col(0), &[0.274, 0.543, 0.606, 1.0], 0)); // account status
    cols.push(col(1).iter().map(|v| (20.9 + 11.0 * v).round().max(4.0)).collect()); // duration
    cols.push(ordinal(&col(2), &[0.04, 0.089, 0.619, 0.707, 1.0], 0)); // credit history
    cols.push(ordinal(
        &col(3),
        &[0.234, 0.337, 0.518, 0.63, 0.652, 0.702, 0.885, 0.897, 0.909, 1.0],
        0,
    )); // purpose
    cols.push(col(4).iter().map(|v| (3271.0 * (0.8 * v - 0.32).exp()).round()).collect()); // amount
    cols.push(ordinal(&col(5), &[0.603, 0.706, 0.769, 0.817, 1.0], 0)); // savings
    cols.push(ordinal(&col(6), &[0.062, 0.234, 0.573, 0.747, 1.0], 0)); // employment
    cols.push(ordinal(&col(7), &[0.136, 0.367, 0.524, 1.0], 1)); // installment rate
    cols.push(ordinal(&col(8), &[0.05, 0.36, 0.908, 1.0], 0)); // protected
    cols.push(ordinal(&col(9), &[0.907, 0.948, 1.0], 0)); // other debtors
    cols.push(ordinal(&col(10), &[0.13, 0.438, 0.587, 1.0], 1)); // residence duration
    cols.push(ordinal(&col(11), &[0.282, 0.514, 0.846, 1.0], 0)); // property
    cols.push(col(12).iter().map(|v| (35.5 + 11.4 * v).round().max(19.0)).collect()); // age
    cols.push(ordinal(&col(13), &[0.139, 0.186, 1.0], 0)); // other installment plans
    cols.push(ordinal(&col(14), &[0.179, 0.892, 1.0], 0)); // housing
    cols.push(ordinal(&col(15), &[0.633, 0.966, 0.994, 1.0], 1)); // existing credits
    cols.push(ordinal(&col(16), &[0.022, 0.222, 0.852, 1.0], 0)); // job
    cols.push(ordinal(&col(17), &[0.845, 1.0], 1)); // dependents
    cols.push(binary(&col(18), 0.404)); // telephone
    cols.push(binary(&col(19), 0.037)); // foreign worker

    // High-risk logit: dominated by account status, with moderate loadings on
    // duration, history, savings, and amount. No loading on the protected
    // feature. Class rate ≈ 30%.
    let std = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let s = (v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / v.len() as f64).sqrt();
        (m, s.max(1e-12))
    };
    let weights: [(usize, f64); 6] = [
        (0, -1.15), // account status: higher code (no account) → lower risk
        (1, 0.55),  // duration
        (2, -0.45), // credit history: richer history → lower risk
        (5, -0.35), // savings
        (4, 0.30),  // amount
        (7, 0.20),  // installment rate
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x63726564);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut logit = -1.35;
        for &(j, w) in &weights {
            let (m, s) = std(&cols[j]);
            logit += w * (cols[j][i] - m) / s;
        }
        let prob = 1.0 / (1.0 + (-logit as f64).exp());
        let u: f64 = rand::Rng::gen(&mut rng);
        labels.push(if u < prob { 1.0 } else { 0.0 });
    }
    let rate = labels.iter().sum::<f64>() / n as f64;
    if !(0.25..=0.35).contains(&rate) {
        println!("  seed {seed}: class rate {rate:.3} — rejected");
        return None;
    }

    let x = matrix(&cols, &GERMAN_NAMES);
    let y_cls = TargetVector::classification(labels.iter().map(|&v| v as usize).collect()).unwrap();

    // --- acceptance pipeline: sparse balanced logistic without the protected
    // column, threshold on all rows; protected systemic must be exactly 0.
    let protected = 8usize;
    let kept: Vec<usize> = (0..p).filter(|&j| j != protected).collect();
    let x_fit = x.select_columns(&kept).unwrap();
    let lmax = permvi::model::logistic_lambda_max(&x_fit, &y_cls, true).ok()?;
    let sparse = bench::l1_grid_fit(lmax, |l| {
        fit_logistic(&x_fit, &y_cls, Penalty::L1 { lambda: l }, true)
    })
    .ok()?
    .expand_to(p, &kept)
    .unwrap();
    let nonzero = sparse.coefficients.iter().filter(|c| **c != 0.0).count();
    let handle = PredictorHandle::builtin(sparse);
    let graph = calibrate_threshold(&x, 0.01, 123).ok()?;
    let max_rho = (0..p)
        .filter(|&j| j != protected)
        .map(|j| graph.matrix[[protected, j]].abs())
        .fold(0.0f64, f64::max);
    if max_rho > graph.tau - 0.015 {
        println!(
            "  seed {seed}: protected max |rho| {max_rho:.4} vs tau {:.4} — rejected",
            graph.tau
        );
        return None;
    }
    if !(1..=4).contains(&nonzero) {
        println!("  seed {seed}: {nonzero} nonzero coefficients — rejected");
        return None;
    }
    let report = systemic_scores(&handle, &x, DiffMetric::Mse, Scheme::Optimal, &graph).ok()?;
    let s = report.systemic.as_ref().unwrap()[protected];
    let d = report.direct.as_ref().unwrap()[protected];
    if s != 0.0 || d != 0.0 {
        println!("  seed {seed}: protected systemic {s} direct {d} — rejected");
        return None;
    }

    // --- held-out CLI variant: calibrate and fit on the 90% train split,
    // score the 10% holdout; protected must stay isolated there too.
    let (train, test) = bench::holdout_split(n, 0.1, 42).unwrap();
    let x_tr = x.select_rows(&train).unwrap();
    let y_tr = y_cls.select_rows(&train).unwrap();
    let x_te = x.select_rows(&test).unwrap();
    let x_tr_fit = x_tr.select_columns(&kept).unwrap();
    let lmax_tr = permvi::model::logistic_lambda_max(&x_tr_fit, &y_tr, true).ok()?;
    let sparse_tr = bench::l1_grid_fit(lmax_tr, |l| {
        fit_logistic(&x_tr_fit, &y_tr, Penalty::L1 { lambda: l }, true)
    })
    .ok()?
    .expand_to(p, &kept)
    .unwrap();
    let h_tr = PredictorHandle::builtin(sparse_tr);
    let g_tr = calibrate_threshold(&x_tr, 0.01, 123).ok()?;
    let max_rho_tr = (0..p)
        .filter(|&j| j != protected)
        .map(|j| g_tr.matrix[[protected, j]].abs())
        .fold(0.0f64, f64::max);
    if max_rho_tr > g_tr.tau - 0.01 {
        println!(
            "  seed {seed}: train-split protected max |rho| {max_rho_tr:.4} vs tau {:.4} — rejected",
            g_tr.tau
        );
        return None;
    }
    let rep_te = systemic_scores(&h_tr, &x_te, DiffMetric::Mse, Scheme::Optimal, &g_tr).ok()?;
    if rep_te.systemic.as_ref().unwrap()[protected] != 0.0 {
        println!("  seed {seed}: holdout protected systemic nonzero — rejected");
        return None;
    }

    println!(
        "  seed {seed}: rate {rate:.3}, {nonzero} nonzero, tau {:.4}, protected max |rho| {max_rho:.4}",
        graph.tau
    );
    Some(to_csv(&x, &labels, "class"))
}

// ---------------------------------------------------------------------------

fn matrix(cols: &[Vec<f64>], names: &[&str]) -> DataMatrix {
    let n = cols[0].len();
    let p = cols.len();
    let mut values = Array2::zeros((n, p));
    for (j, c) in cols.iter().enumerate() {
        for (i, &v) in c.iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    let meta = names
        .iter()
        .map(|n| permvi::data::FeatureMeta {
            name: n.to_string(),
            kind: permvi::FeatureKind::Numeric,
        })
        .collect();
    DataMatrix::new(values, meta).unwrap()
}

fn to_csv(x: &DataMatrix, y: &[f64], target: &str) -> String {
    let names = x.feature_names();
    let mut out = String::new();
    out.push_str(&names.join(","));
    out.push(',');
    out.push_str(target);
    out.push('\n');
    for i in 0..x.n() {
        for j in 0..x.p() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", x.values()[[i, j]]));
        }
        out.push(',');
        out.push_str(&format!("{}", y[i]));
        out.push('\n');
    }
    out
}
