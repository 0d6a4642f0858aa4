#ifndef MMSE_UPLINK_H
#define MMSE_UPLINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

enum MuStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  MU_STATUS_OK = 0,
  MU_STATUS_NULL_POINTER = 1,
  /**
   * Bad configuration or argument.
   */
  MU_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Solver, quadrature or covariance failure.
   */
  MU_STATUS_NUMERICAL = 3,
  MU_STATUS_IO = 4,
  MU_STATUS_OUT_OF_RANGE = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  MU_STATUS_PANIC = 6,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum MuStatus MuStatus;
#else
typedef int32_t MuStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * A parsed scenario file: one entry per (policy, N) pair.
 */
typedef struct MuScenario MuScenario;

/**
 * Result of a Monte Carlo experiment.
 */
typedef struct MuSummary MuSummary;

typedef struct MuScenarioInfo {
  size_t n_antennas;
  size_t n_mobiles;
  double c;
  double disk_radius;
  double alpha;
} MuScenarioInfo;

typedef struct MuStats {
  size_t trials;
  size_t rejected;
  double mean_se;
  double std_se;
  double mean_beta_n;
  double std_beta_n;
} MuStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *mu_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mu_version(void);

/**
 * Parses a JSON scenario document.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
MuStatus mu_scenario_from_json(const char *json, struct MuScenario **out_handle);

/**
 * # Safety
 * `handle` must be null or come from [`mu_scenario_from_json`] and not be used afterwards.
 */
void mu_scenario_free(struct MuScenario *handle);

/**
 * Number of (policy, N) scenarios in the handle; 0 for null.
 *
 * # Safety
 * `handle` must be null or a live scenario handle.
 */
size_t mu_scenario_count(const struct MuScenario *handle);

/**
 * # Safety
 * `handle` must be a live scenario handle and `info` a valid pointer.
 */
MuStatus mu_scenario_info(const struct MuScenario *handle,
                          size_t index,
                          struct MuScenarioInfo *info);

/**
 * Fixed-point and closed-form limits of the normalised SIR.
 *
 * # Safety
 * `handle` must be a live scenario handle; the outputs must be valid pointers.
 */
MuStatus mu_solve_beta(const struct MuScenario *handle,
                       size_t index,
                       double *beta_fixed,
                       double *beta_closed);

/**
 * Large-system spectral efficiency of a link with power `p0` at distance `r0`.
 *
 * # Safety
 * `handle` must be a live scenario handle and `se` a valid pointer.
 */
MuStatus mu_asymptotic_se(const struct MuScenario *handle,
                          size_t index,
                          double p0,
                          double r0,
                          double *se);

/**
 * Approximate CDF of the representative's spectral efficiency at `gamma`.
 *
 * # Safety
 * `handle` must be a live scenario handle and `prob` a valid pointer.
 */
MuStatus mu_se_cdf(const struct MuScenario *handle, size_t index, double gamma, double *prob);

/**
 * Runs `trials` Monte Carlo trials (0 uses the count from the scenario file).
 * Results depend only on the scenario and `seed`, not on `workers`.
 *
 * # Safety
 * `handle` must be a live scenario handle and `out_summary` a valid pointer.
 */
MuStatus mu_run_experiment(const struct MuScenario *handle,
                           size_t index,
                           size_t trials,
                           uint64_t seed,
                           size_t workers,
                           struct MuSummary **out_summary);

/**
 * # Safety
 * `handle` must be null or come from [`mu_run_experiment`] and not be used afterwards.
 */
void mu_summary_free(struct MuSummary *handle);

/**
 * # Safety
 * `handle` must be a live summary handle and `stats` a valid pointer.
 */
MuStatus mu_summary_stats(const struct MuSummary *handle, struct MuStats *stats);

/**
 * Copies up to `len` sorted spectral-efficiency samples into `buf` and
 * stores the total sample count in `total`. `buf` may be null when `len` is 0.
 *
 * # Safety
 * `handle` must be a live summary handle, `buf` valid for `len` writes and
 * `total` a valid pointer.
 */
MuStatus mu_summary_se_samples(const struct MuSummary *handle,
                               double *buf,
                               size_t len,
                               size_t *total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MMSE_UPLINK_H */
