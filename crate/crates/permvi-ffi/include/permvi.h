/* C interface for the permvi variable-importance library. */

#ifndef PERMVI_H
#define PERMVI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum PvStatus {
  PV_OK = 0,
  // A required pointer argument was null.
  PV_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  PV_UTF8 = 2,
  // Invalid argument, unknown feature, or shape mismatch.
  PV_INVALID_ARGUMENT = 3,
  // File could not be read or written.
  PV_IO = 4,
  // The data was malformed (CSV parse, missing target, non-finite cell).
  PV_BAD_DATA = 5,
  // A solver failed (no convergence, not positive definite).
  PV_SOLVER = 6,
  // Importance or correlation is undefined on this input.
  PV_DEGENERATE = 7,
  // The predictor returned malformed output.
  PV_PREDICTOR = 8,
  // An internal panic was caught; the handle state is unspecified.
  PV_PANIC = 9,
} PvStatus;

// How non-numeric CSV cells are handled at load time.
typedef enum PvEncode {
  // Encode string categories as ordinal codes in lexicographic order.
  PV_ENCODE_ORDINAL = 0,
  // Fail on any non-numeric cell.
  PV_ENCODE_REJECT = 1,
} PvEncode;

// Target interpretation for [`pv_dataset_from_arrays`].
typedef enum PvTask {
  PV_REGRESSION = 0,
  // Targets must be non-negative integers (class labels).
  PV_CLASSIFICATION = 1,
} PvTask;

// Built-in model families for [`pv_model_fit`].
typedef enum PvModelKind {
  PV_OLS = 0,
  // L1-penalized least squares; negative lambda selects it on a grid.
  PV_LASSO = 1,
  PV_LOGISTIC = 2,
  // L1-penalized logistic; negative lambda selects it on a grid.
  PV_L1_LOGISTIC = 3,
} PvModelKind;

// Difference metric for direct and systemic scores.
typedef enum PvMetric {
  PV_MAE = 0,
  PV_MSE = 1,
  PV_RMSE = 2,
} PvMetric;

// Permutation scheme for the deterministic methods.
typedef enum PvScheme {
  // Half-rotation of the sorted ranks (maximal displacement).
  PV_OPTIMAL = 0,
  // Half-rotation of the row order (rank-free approximation).
  PV_APPROX = 1,
} PvScheme;

// Loss drop used by the sampled-permutation baseline.
typedef enum PvDropMetric {
  PV_MSE_DROP = 0,
  PV_NEG_BRIER_DROP = 1,
  PV_ACCURACY_DROP = 2,
} PvDropMetric;

// Which score vector [`pv_report_values`] copies out.
typedef enum PvScoreKind {
  // Unnormalized scores.
  PV_RAW = 0,
  // Clipped at zero and scaled to sum to one.
  PV_NORMALIZED = 1,
  // Systemic share (systemic reports only).
  PV_SYSTEMIC = 2,
  // Direct share (systemic reports only).
  PV_DIRECT = 3,
  // Systemic minus direct (systemic reports only).
  PV_INDIRECT = 4,
} PvScoreKind;

// A single-feature audit: decomposition and proxy list.
typedef struct PvAudit PvAudit;

// A loaded table: feature matrix plus optional target.
typedef struct PvDataset PvDataset;

// A calibrated correlation graph (threshold plus edges).
typedef struct PvGraph PvGraph;

// A fitted built-in model behind the prediction interface.
typedef struct PvModel PvModel;

// An importance report (direct, baseline, or systemic).
typedef struct PvReport PvReport;

// Outcome of [`pv_dominance_check`]: the deterministic estimate dominates
// the B-sample baseline when its squared distance to the Monte Carlo mean
// stays within the sampling-variance budget.
typedef struct PvDominance {
  // Squared distance between deterministic and mean sampled raw scores.
  double lhs;
  // Budget ‖σ̂²‖₂²/B.
  double budget_literal;
  // Budget (Σ_j σ̂_j²)/B.
  double budget_consistent;
  bool within_literal;
  bool within_consistent;
} PvDominance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static C string.
const char *pv_version(void);

// Message for the most recent failure on this thread. Borrowed; valid until
// the next failing call on the same thread. Empty if nothing failed yet.
const char *pv_last_error_message(void);

// Load a CSV with a named target column.
enum PvStatus pv_dataset_load_csv(const char *path,
                                  const char *target,
                                  enum PvEncode encode,
                                  struct PvDataset **out);

// Build a dataset from a row-major n×p array. `names` may be null (columns
// are auto-named x1..xp); `y` may be null (no target: fitting and baseline
// scoring are unavailable, deterministic scoring still works).
enum PvStatus pv_dataset_from_arrays(const double *values,
                                     size_t n,
                                     size_t p,
                                     const char *const *names,
                                     const double *y,
                                     enum PvTask task,
                                     struct PvDataset **out);

// Number of rows; 0 when the handle is null.
size_t pv_dataset_rows(const struct PvDataset *dataset);

// Number of feature columns; 0 when the handle is null.
size_t pv_dataset_cols(const struct PvDataset *dataset);

// Borrowed feature name, or null when the handle is null or j out of range.
const char *pv_dataset_feature_name(const struct PvDataset *dataset, size_t j);

// Release a dataset. Null is a no-op.
void pv_dataset_free(struct PvDataset *dataset);

// Fit a built-in model on the dataset's target. `lambda < 0` selects the
// penalty on a 20-point grid (first value keeping at least one nonzero
// coefficient). `class_balance` reweights logistic losses to equalize the
// classes. Linear families on classification targets fit the labels as a
// linear probability model; logistic families on regression targets require
// the values to be binary labels.
enum PvStatus pv_model_fit(const struct PvDataset *dataset,
                           enum PvModelKind kind,
                           double lambda,
                           bool class_balance,
                           struct PvModel **out);

// Coefficient j of the fitted model; NaN when the handle is null or j out
// of range.
double pv_model_coefficient(const struct PvModel *model, size_t j);

// Intercept of the fitted model; NaN when the handle is null.
double pv_model_intercept(const struct PvModel *model);

// Release a model. Null is a no-op.
void pv_model_free(struct PvModel *model);

// Deterministic single-permutation importance scores.
enum PvStatus pv_direct_scores(const struct PvModel *model,
                               const struct PvDataset *dataset,
                               enum PvMetric metric,
                               enum PvScheme scheme,
                               struct PvReport **out);

// Sampled-permutation baseline: B seeded permutations per feature, averaged
// loss drop against the dataset's target.
enum PvStatus pv_breiman_scores(const struct PvModel *model,
                                const struct PvDataset *dataset,
                                size_t b,
                                uint64_t seed,
                                enum PvDropMetric metric,
                                struct PvReport **out);

// Compare the deterministic estimate against a B-sample baseline: is the
// squared distance to the Monte Carlo mean within the variance budget?
enum PvStatus pv_dominance_check(const struct PvModel *model,
                                 const struct PvDataset *dataset,
                                 enum PvMetric metric,
                                 size_t b,
                                 uint64_t seed,
                                 struct PvDominance *out);

// Calibrate the propagation threshold on the dataset: permute each column
// (seeded), pool the absolute pairwise rank correlations, and take the
// (1−alpha) quantile. The graph keeps the original data's correlations.
enum PvStatus pv_calibrate_threshold(const struct PvDataset *dataset,
                                     double alpha,
                                     uint64_t seed,
                                     struct PvGraph **out);

// Calibrated threshold; NaN when the handle is null.
double pv_graph_tau(const struct PvGraph *graph);

// Number of feature pairs above the threshold; 0 when the handle is null.
size_t pv_graph_edge_count(const struct PvGraph *graph);

// Rank correlation between features j and k; NaN when the handle is null
// or an index is out of range.
double pv_graph_rho(const struct PvGraph *graph, size_t j, size_t k);

// Release a graph. Null is a no-op.
void pv_graph_free(struct PvGraph *graph);

// Correlation-aware importance: each feature's permutation is propagated to
// its graph neighbors before scoring. The report also carries the direct
// and indirect (systemic − direct) shares.
enum PvStatus pv_systemic_scores(const struct PvModel *model,
                                 const struct PvDataset *dataset,
                                 enum PvMetric metric,
                                 enum PvScheme scheme,
                                 const struct PvGraph *graph,
                                 struct PvReport **out);

// Number of features in the report; 0 when the handle is null.
size_t pv_report_len(const struct PvReport *report);

// Borrowed feature name, or null when the handle is null or j out of range.
const char *pv_report_feature_name(const struct PvReport *report, size_t j);

// Copy a score vector into `out` (length must equal the report length).
// Systemic/direct/indirect kinds fail on non-systemic reports.
enum PvStatus pv_report_values(const struct PvReport *report,
                               enum PvScoreKind kind,
                               double *out,
                               size_t len);

// Release a report. Null is a no-op.
void pv_report_free(struct PvReport *report);

// Audit one feature: systemic/direct/indirect decomposition plus the list
// of proxies (neighbors above the threshold).
enum PvStatus pv_audit_feature(const struct PvModel *model,
                               const struct PvDataset *dataset,
                               enum PvMetric metric,
                               enum PvScheme scheme,
                               const struct PvGraph *graph,
                               const char *feature,
                               struct PvAudit **out);

// Borrowed name of the audited feature; null when the handle is null.
const char *pv_audit_feature_name(const struct PvAudit *audit);

// Systemic share of the audited feature; NaN when the handle is null.
double pv_audit_systemic(const struct PvAudit *audit);

// Direct share of the audited feature; NaN when the handle is null.
double pv_audit_direct(const struct PvAudit *audit);

// Indirect share (systemic − direct); NaN when the handle is null.
double pv_audit_indirect(const struct PvAudit *audit);

// Number of proxies above the threshold; 0 when the handle is null.
size_t pv_audit_proxy_count(const struct PvAudit *audit);

// Borrowed name of proxy i, or null when the handle is null or i out of
// range.
const char *pv_audit_proxy_name(const struct PvAudit *audit, size_t i);

// Rank correlation between proxy i and the audited feature; NaN when the
// handle is null or i out of range.
double pv_audit_proxy_rho(const struct PvAudit *audit, size_t i);

// Share of total importance carried by the audited feature and its proxies;
// NaN when the handle is null.
double pv_audit_influenced_share(const struct PvAudit *audit);

// Release an audit. Null is a no-op.
void pv_audit_free(struct PvAudit *audit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERMVI_H */
