//! Importance report structure plus deterministic JSON/CSV serialization.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::direct::ScoringMetric;
use crate::error::{Error, Result};

/// How a report's scores were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Single rank-shift permutation per feature.
    DirectOpt,
    /// Single index-shift permutation per feature.
    DirectApprox,
    /// Averaged random-permutation performance drop.
    Breiman,
    /// Correlation-aware propagation on top of the direct scores.
    Systemic,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::DirectOpt => "direct-opt",
            Method::DirectApprox => "direct-approx",
            Method::Breiman => "breiman",
            Method::Systemic => "systemic",
        }
    }
}

/// Run parameters recorded alongside scores. Wall-clock fields are kept for
/// in-process inspection but skipped during serialization so that repeated
/// runs produce byte-identical artifacts.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Provenance {
    /// RNG seed, for methods that sample.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// Number of random permutations per feature, for methods that sample.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub b: Option<usize>,
    /// Correlation threshold, for the systemic method.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tau: Option<f64>,
    #[serde(skip, default)]
    pub runtime_ms: f64,
}

const SUM_TOL: f64 = 1e-9;

/// Per-feature importance scores with normalization invariants enforced at
/// construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: Method,
    pub metric: ScoringMetric,
    pub features: Vec<String>,
    /// Unnormalized scores, in feature order.
    pub raw: Vec<f64>,
    /// Scores clipped at zero and scaled to sum to one.
    pub normalized: Vec<f64>,
    /// Systemic share per feature (systemic reports only); sums to one.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub systemic: Option<Vec<f64>>,
    /// Direct share per feature (systemic reports only); sums to one.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub direct: Option<Vec<f64>>,
    /// Indirect share: systemic − direct. Sums to zero.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub indirect: Option<Vec<f64>>,
    pub provenance: Provenance,
}

fn check_lengths(features: &[String], vectors: &[&[f64]]) -> Result<()> {
    for v in vectors {
        if v.len() != features.len() {
            return Err(Error::ShapeMismatch(format!(
                "report has {} features but a score vector of length {}",
                features.len(),
                v.len()
            )));
        }
    }
    Ok(())
}

fn check_sums_to(values: &[f64], target: f64, what: &str) -> Result<()> {
    let sum: f64 = values.iter().sum();
    if (sum - target).abs() > SUM_TOL {
        return Err(Error::InvalidArgument(format!(
            "{what} scores sum to {sum}, expected {target}"
        )));
    }
    Ok(())
}

impl ImportanceReport {
    /// Build a direct or Breiman report, checking that `normalized` is
    /// nonnegative and sums to one.
    pub fn new(
        method: Method,
        metric: ScoringMetric,
        features: &[String],
        raw: Vec<f64>,
        normalized: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        check_lengths(features, &[&raw, &normalized])?;
        if normalized.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidArgument(
                "normalized scores must be nonnegative".into(),
            ));
        }
        check_sums_to(&normalized, 1.0, "normalized")?;
        Ok(ImportanceReport {
            method,
            metric,
            features: features.to_vec(),
            raw,
            normalized,
            systemic: None,
            direct: None,
            indirect: None,
            provenance,
        })
    }

    /// Build a systemic report, checking the decomposition invariants:
    /// systemic and direct shares each sum to one, indirect = systemic −
    /// direct elementwise (so it sums to zero).
    #[allow(clippy::too_many_arguments)]
    pub fn new_systemic(
        metric: ScoringMetric,
        features: &[String],
        raw: Vec<f64>,
        systemic: Vec<f64>,
        direct: Vec<f64>,
        indirect: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        check_lengths(features, &[&raw, &systemic, &direct, &indirect])?;
        check_sums_to(&systemic, 1.0, "systemic")?;
        check_sums_to(&direct, 1.0, "direct")?;
        check_sums_to(&indirect, 0.0, "indirect")?;
        for j in 0..features.len() {
            if (systemic[j] - direct[j] - indirect[j]).abs() > SUM_TOL {
                return Err(Error::InvalidArgument(format!(
                    "indirect[{j}] does not equal systemic[{j}] − direct[{j}]"
                )));
            }
        }
        Ok(ImportanceReport {
            method: Method::Systemic,
            metric,
            features: features.to_vec(),
            raw,
            normalized: systemic.clone(),
            systemic: Some(systemic),
            direct: Some(direct),
            indirect: Some(indirect),
            provenance,
        })
    }

    /// Features with their normalized scores, sorted descending (ties broken
    /// by feature order).
    pub fn ranking(&self) -> Vec<(usize, f64)> {
        let mut order: Vec<(usize, f64)> =
            self.normalized.iter().copied().enumerate().collect();
        order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        order
    }

    /// Indices of the top-k features by normalized score.
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        self.ranking().into_iter().take(k).map(|(j, _)| j).collect()
    }

    /// Serialize to pretty JSON. Field order is fixed by the struct, so the
    /// output is byte-identical across runs with equal inputs.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidArgument(format!("report serialization failed: {e}")))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let body = self.to_json()?;
        file.write_all(body.as_bytes())
            .and_then(|_| file.write_all(b"\n"))
            .map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })
    }

    /// Serialize the per-feature table as CSV. Columns depend on the method:
    /// `feature,raw,normalized` plus `systemic,direct,indirect` when present.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let has_decomposition = self.systemic.is_some();
        if has_decomposition {
            out.push_str("feature,raw,normalized,systemic,direct,indirect\n");
        } else {
            out.push_str("feature,raw,normalized\n");
        }
        for j in 0..self.features.len() {
            out.push_str(&self.features[j]);
            out.push(',');
            out.push_str(&format_float(self.raw[j]));
            out.push(',');
            out.push_str(&format_float(self.normalized[j]));
            if has_decomposition {
                out.push(',');
                out.push_str(&format_float(self.systemic.as_ref().unwrap()[j]));
                out.push(',');
                out.push_str(&format_float(self.direct.as_ref().unwrap()[j]));
                out.push(',');
                out.push_str(&format_float(self.indirect.as_ref().unwrap()[j]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}

/// Shortest round-trip float formatting (Rust's `Display` for f64).
fn format_float(v: f64) -> String {
    format!("{v}")
}
