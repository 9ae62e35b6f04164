#ifndef DEPS_PURIFY_H
#define DEPS_PURIFY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DpStatus {
  DP_STATUS_OK = 0,
  DP_STATUS_NULL_POINTER = 1,
  // Parameter outside its allowed range.
  DP_STATUS_DOMAIN = 2,
  // Operation applied to a state of the wrong sector or shape.
  DP_STATUS_SECTOR = 3,
  // State has weight outside the subspace an operation accepts.
  DP_STATUS_SUPPORT = 4,
  // Post-selection kept nothing.
  DP_STATUS_NOTHING_KEPT = 5,
  // Index past the end of a trace or run.
  DP_STATUS_OUT_OF_RANGE = 6,
  DP_STATUS_INVALID_STATE = 7,
  DP_STATUS_PANIC = 8,
} DpStatus;

// Density operator in either the 16-dim DEPS sector or the 4-dim Bell sector.
typedef struct DpDensity DpDensity;

typedef struct DpMcRun DpMcRun;

typedef struct DpTrace DpTrace;

typedef struct DpRoundRecord {
  size_t round;
  double fidelity;
  double pass_probability;
  double cumulative_yield;
} DpRoundRecord;

typedef struct DpComparison {
  double f0;
  double modified_yield;
  double modified_fidelity;
  double baseline_yield;
  double baseline_fidelity;
} DpComparison;

typedef struct DpMcStats {
  size_t round;
  uint64_t trials;
  uint64_t kept;
  // NaN when `kept` is zero.
  double fidelity_estimate;
  double standard_error;
  double pass_rate;
  double cumulative_yield;
} DpMcStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message on this thread, or null. Valid until the next failing
// call on the same thread.
const char *dp_last_error_message(void);

// F ↦ F' for Werner input fidelity `f`.
//
// # Safety
// `out` must be null or point to writable storage for one `double`.
enum DpStatus dp_fidelity_recursion(double f, double *out);

// p ↦ p²/(p² + (1 − p)²) on the two-state sector.
//
// # Safety
// `out` must be null or point to writable storage for one `double`.
enum DpStatus dp_sector_recursion(double p, double *out);

// Φ+ weight after step 1, `(4F + 3)/7`.
//
// # Safety
// `out` must be null or point to writable storage for one `double`.
enum DpStatus dp_sector_fidelity(double f, double *out);

// # Safety
// `out` must be null or point to writable storage for one handle.
enum DpStatus dp_werner_new(double f, struct DpDensity **out);

// # Safety
// `rho` must be null or a handle from this library that has not been freed.
void dp_density_free(struct DpDensity *rho);

// Hilbert-space dimension, 16 or 4. Zero for a null handle.
//
// # Safety
// `rho` must be null or a live handle.
size_t dp_density_dim(const struct DpDensity *rho);

// # Safety
// `rho` must be null or a live handle; `out` null or writable.
enum DpStatus dp_density_trace(const struct DpDensity *rho, double *out);

// Overlap with Φ+ of the handle's own sector.
//
// # Safety
// `rho` must be null or a live handle; `out` null or writable.
enum DpStatus dp_density_fidelity(const struct DpDensity *rho, double *out);

// Bit-flip correction. Writes a new handle to `out`; `yield_fraction` may be
// null.
//
// # Safety
// `rho` must be a live DEPS-sector handle; pointers null or writable.
enum DpStatus dp_step1_correct(const struct DpDensity *rho,
                               struct DpDensity **out,
                               double *yield_fraction);

// Discard-only variant keeping the port-(1,2) block.
//
// # Safety
// Same as [`dp_step1_correct`].
enum DpStatus dp_step1_baseline(const struct DpDensity *rho,
                                struct DpDensity **out,
                                double *yield_fraction);

// Exact iteration: round 0 is step 1 plus conversion, then `rounds`
// step-2 rounds.
//
// # Safety
// `out` must be null or writable.
enum DpStatus dp_iterate(double f0, size_t rounds, double eta, struct DpTrace **out);

// Number of records, `rounds + 1`. Zero for a null handle.
//
// # Safety
// `trace` must be null or a live handle.
size_t dp_trace_len(const struct DpTrace *trace);

// # Safety
// `trace` must be null or a live handle; `out` null or writable.
enum DpStatus dp_trace_round(const struct DpTrace *trace, size_t index, struct DpRoundRecord *out);

// # Safety
// `trace` must be null or a handle from [`dp_iterate`] not yet freed.
void dp_trace_free(struct DpTrace *trace);

// # Safety
// `out` must be null or writable.
enum DpStatus dp_compare_schemes(double f0, struct DpComparison *out);

// Monte Carlo run with `trials` initial pairs. Same seed, same numbers.
//
// # Safety
// `out` must be null or writable.
enum DpStatus dp_run_experiment(double f0,
                                size_t rounds,
                                uint64_t trials,
                                uint64_t seed,
                                double eta,
                                struct DpMcRun **out);

// # Safety
// `run` must be null or a live handle.
size_t dp_mc_len(const struct DpMcRun *run);

// # Safety
// `run` must be null or a live handle; `out` null or writable.
enum DpStatus dp_mc_round(const struct DpMcRun *run, size_t index, struct DpMcStats *out);

// # Safety
// `run` must be null or a handle from [`dp_run_experiment`] not yet freed.
void dp_mc_free(struct DpMcRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEPS_PURIFY_H */
