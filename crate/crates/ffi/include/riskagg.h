#ifndef RISKAGG_H
#define RISKAGG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RaCopulaKind {
  RA_COPULA_KIND_INDEPENDENCE = 0,
  RA_COPULA_KIND_GAUSSIAN = 1,
  RA_COPULA_KIND_CLAYTON = 2,
} RaCopulaKind;

typedef enum RaMarginalKind {
  RA_MARGINAL_KIND_NORMAL = 0,
  RA_MARGINAL_KIND_LOG_NORMAL = 1,
} RaMarginalKind;

/**
 * Status codes returned by every fallible function.
 */
typedef enum RaStatus {
  RA_STATUS_OK = 0,
  RA_STATUS_NULL_POINTER = 1,
  RA_STATUS_DOMAIN = 2,
  RA_STATUS_PARAMETER = 3,
  RA_STATUS_NUMERIC = 4,
  RA_STATUS_RESOURCE = 5,
  RA_STATUS_DEGENERATE = 6,
  RA_STATUS_INTERNAL = 7,
} RaStatus;

/**
 * Opaque leaf covariance matrix.
 */
typedef struct RaCovMatrix RaCovMatrix;

/**
 * Opaque aggregation tree.
 */
typedef struct RaTree RaTree;

/**
 * Flat copy of a risk report.
 */
typedef struct RaRiskReport {
  double alpha;
  double s0;
  double s_z;
  double s1;
  double eta;
  double db;
  double s0_std_err;
  double s_z_std_err;
  /**
   * 1 when η and DB lie in [0, 1].
   */
  int32_t in_unit_interval;
  /**
   * 1 when the closed-form fields below are filled.
   */
  int32_t has_exact;
  double eta_exact;
  double db_exact;
} RaRiskReport;

/**
 * Verification summary of a covariance matrix.
 */
typedef struct RaCiReport {
  double max_violation;
  uint64_t checks;
  double min_eigenvalue;
  double max_eigenvalue;
  double total_variance;
  double sigma_z_squared;
} RaCiReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ra_last_error_message(void);

/**
 * Diversification benefit of the Gaussian tree.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum RaStatus ra_db_gaussian(size_t k, size_t m, double rho, double *out);

/**
 * Diversification factor η of the Gaussian tree.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum RaStatus ra_eta_gaussian(size_t k, size_t m, double rho, double *out);

/**
 * Standard deviation of a level-`p` node of the Gaussian tree.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum RaStatus ra_sigma_level(size_t k,
                             size_t m,
                             double rho,
                             double sigma_leaf,
                             size_t p,
                             double *out);

/**
 * Correlation of two leaves first joined at level `p`.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum RaStatus ra_effective_correlation(size_t k, size_t m, double rho, size_t p, double *out);

/**
 * Upper-tail xTVaR of a sample (`TVaR − mean`).
 *
 * # Safety
 * `values` must point to `len` readable doubles and `out` to a writable double.
 */
enum RaStatus ra_empirical_xtvar(const double *values, size_t len, double alpha, double *out);

/**
 * Creates a regular `(k, m)` tree.
 *
 * For `RA_MARGINAL_KIND_NORMAL` the leaf parameters are mean and standard
 * deviation; for `RA_MARGINAL_KIND_LOG_NORMAL` they are the mean and standard
 * deviation of the LogNormal itself. `copula_param` is ρ or θ and is ignored
 * for independence.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle to release
 * with [`ra_tree_free`].
 */
enum RaStatus ra_tree_new(size_t k,
                          size_t m,
                          enum RaMarginalKind marginal,
                          double leaf_mean,
                          double leaf_sd,
                          enum RaCopulaKind copula,
                          double copula_param,
                          struct RaTree **out);

/**
 * Releases a tree handle. NULL is ignored.
 *
 * # Safety
 * `tree` must come from [`ra_tree_new`] and not have been freed.
 */
void ra_tree_free(struct RaTree *tree);

/**
 * Number of leaves of a tree.
 *
 * # Safety
 * `tree` must be a live handle and `out` a valid pointer.
 */
enum RaStatus ra_tree_leaf_count(const struct RaTree *tree, size_t *out);

/**
 * Exact standalone sum at risk `N · xTVaR_α(leaf)`.
 *
 * # Safety
 * `tree` must be a live handle and `out` a valid pointer.
 */
enum RaStatus ra_tree_standalone(const struct RaTree *tree, double alpha, double *out);

/**
 * Simulates the tree and its independent baseline and fills `out`.
 *
 * # Safety
 * `tree` must be a live handle and `out` a valid pointer.
 */
enum RaStatus ra_risk_report(const struct RaTree *tree,
                             double alpha,
                             size_t n_sims,
                             uint64_t seed,
                             struct RaRiskReport *out);

/**
 * Builds the conditionally independent leaf covariance `C^(m)`.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle to release
 * with [`ra_cov_free`].
 */
enum RaStatus ra_cov_new(size_t k,
                         size_t m,
                         double rho,
                         double sigma_leaf,
                         struct RaCovMatrix **out);

/**
 * Releases a covariance handle. NULL is ignored.
 *
 * # Safety
 * `cov` must come from [`ra_cov_new`] and not have been freed.
 */
void ra_cov_free(struct RaCovMatrix *cov);

/**
 * Side length `N` of the matrix.
 *
 * # Safety
 * `cov` must be a live handle and `out` a valid pointer.
 */
enum RaStatus ra_cov_dim(const struct RaCovMatrix *cov, size_t *out);

/**
 * Entry `(i, j)`, 0-based.
 *
 * # Safety
 * `cov` must be a live handle and `out` a valid pointer.
 */
enum RaStatus ra_cov_get(const struct RaCovMatrix *cov, size_t i, size_t j, double *out);

/**
 * Copies the full row-major matrix into `buf`, which must hold `N * N` doubles.
 *
 * # Safety
 * `cov` must be a live handle and `buf` must point to `len` writable doubles.
 */
enum RaStatus ra_cov_copy(const struct RaCovMatrix *cov, double *buf, size_t len);

/**
 * Runs the conditional-independence and spectrum checks.
 *
 * # Safety
 * `cov` must be a live handle and `out` a valid pointer.
 */
enum RaStatus ra_cov_verify(const struct RaCovMatrix *cov, struct RaCiReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RISKAGG_H */
