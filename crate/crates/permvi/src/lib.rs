//! Permutation-based variable importance for fixed ("master") predictive models.
//!
//! The crate measures how much a model relies on each input feature by
//! permuting one column at a time and scoring how much the model's predictions
//! change. Three scoring families are provided:
//!
//! * **Direct importance** ([`direct::direct_scores`]) — one deterministic
//!   permutation per feature (an optimal rank shift, or a cheaper index
//!   shift), scored by the mean absolute or squared change in predictions.
//!   No seeds, no sampling variance.
//! * **Breiman-style baseline** ([`direct::breiman_scores`]) — the classical
//!   average performance drop over `B` seeded random permutations, with
//!   negative drops clipped to zero before normalization.
//! * **Systemic importance** ([`systemic::systemic_scores`]) — direct
//!   importance extended so that perturbing a feature also perturbs features
//!   correlated with it (above a calibrated threshold), separating a model's
//!   direct reliance on a feature from reliance routed through proxies.
//!   Used for stress-testing and fairness audits.
//!
//! Models are addressed through [`model::PredictorHandle`]: built-in linear,
//! lasso, and logistic masters (with extractable ground-truth importances) or
//! any external process speaking the line-based prediction protocol
//! (`docs/predictor-protocol.md`).
//!
//! [`bench`] contains the synthetic benchmark harness (scenario grid, data
//! generators, ranking-stability analysis) behind the `permvi benchmark` and
//! `permvi stability` subcommands.
//!
//! All randomized operations take explicit seeds and use a portable counter
//! RNG with per-(feature, repetition) streams, so results are bit-identical
//! across runs, thread counts, and machines.

pub mod bench;
pub mod data;
pub mod direct;
pub mod error;
pub mod model;
pub mod perm;
pub mod report;
pub mod stats;
pub mod systemic;

pub use data::{load_csv, DataMatrix, EncodePolicy, FeatureKind, Task, TargetVector};
pub use direct::{
    breiman_scores, direct_scores, dominance_check, prescreen, DiffMetric, DominanceCheck,
    DropMetric, Scheme, ScoringMetric,
};
pub use error::{Error, Result};
pub use model::{LinearModel, PredictorHandle};
pub use report::ImportanceReport;
