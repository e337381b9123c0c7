/* C interface to the fairfront frontier solver. */

#ifndef FAIRFRONT_H
#define FAIRFRONT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum FfStatus {
  FF_STATUS_OK = 0,
  /**
   * Null pointer, bad buffer length, or out-of-range parameter.
   */
  FF_STATUS_INVALID_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  FF_STATUS_UTF8 = 2,
  /**
   * File could not be read.
   */
  FF_STATUS_IO = 3,
  /**
   * Schema or data problem (parse failure, degenerate distribution).
   */
  FF_STATUS_DATA = 4,
  /**
   * Optimization failed.
   */
  FF_STATUS_SOLVER = 5,
  /**
   * Problem size exceeds a configured cap.
   */
  FF_STATUS_CAP = 6,
  /**
   * A panic was caught at the boundary.
   */
  FF_STATUS_PANIC = 7,
} FfStatus;

/**
 * Opaque result of a frontier approximation.
 */
typedef struct FfFrontierResult FfFrontierResult;

/**
 * Opaque joint-distribution model.
 */
typedef struct FfModel FfModel;

/**
 * Opaque result of an exact-oracle solve.
 */
typedef struct FfOracleResult FfOracleResult;

/**
 * Frontier approximation settings. Thresholds at or above one
 * deactivate their metric.
 */
typedef struct FfFrontierOptions {
  double alpha_sp;
  double alpha_eo;
  double alpha_oae;
  /**
   * Linear pieces per cut.
   */
  size_t pieces;
  /**
   * Outer iteration cap.
   */
  size_t max_iterations;
  /**
   * Cut-search restarts.
   */
  size_t restarts;
  uint64_t seed;
} FfFrontierOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Detail for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread; never freed by
 * the caller.
 */
const char *ff_last_error_message(void);

/**
 * Release a string allocated by this library.
 *
 * # Safety
 * `s` must have come from a `ff_*` call that allocates a string, and
 * must not be used afterwards.
 */
void ff_string_free(char *s);

/**
 * Build a model from a CSV file and a schema JSON document. When
 * `impute` is true, missing cells are mode-imputed after quantization.
 *
 * # Safety
 * `csv_path` and `schema_json` must be NUL-terminated strings; `out`
 * must be a valid pointer. On success `*out` owns the model and must be
 * released with [`ff_model_free`].
 */
enum FfStatus ff_model_from_csv(const char *csv_path,
                                const char *schema_json,
                                bool impute,
                                struct FfModel **out);

/**
 * Deserialize a model from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FfStatus ff_model_from_json(const char *json, struct FfModel **out);

/**
 * Serialize the model to JSON. The returned string is released with
 * [`ff_string_free`].
 *
 * # Safety
 * `model` must be a live handle and `out_json` a valid pointer.
 */
enum FfStatus ff_model_to_json(const struct FfModel *model, char **out_json);

/**
 * # Safety
 * `model` must have come from a model constructor; no use afterwards.
 */
void ff_model_free(struct FfModel *model);

/**
 * Number of protected groups (zero for a null handle).
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t ff_model_groups(const struct FfModel *model);

/**
 * Number of labels (zero for a null handle).
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t ff_model_labels(const struct FfModel *model);

/**
 * Feature support size (zero for a null handle).
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t ff_model_support_size(const struct FfModel *model);

/**
 * Accuracy of the unconstrained Bayes-optimal classifier.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum FfStatus ff_bayes_accuracy(const struct FfModel *model, double *out);

/**
 * Defaults: all metrics deactivated, 6 pieces, 20
 * iterations, 16 restarts, seed 0.
 */
struct FfFrontierOptions ff_frontier_options_default(void);

/**
 * Upper-bound the frontier. On success `*out` owns the result and must
 * be released with [`ff_frontier_result_free`].
 *
 * # Safety
 * `model` must be a live handle; `options` and `out` must be valid
 * pointers.
 */
enum FfStatus ff_frontier_approximate(const struct FfModel *model,
                                      const struct FfFrontierOptions *options,
                                      struct FfFrontierResult **out);

/**
 * Frontier upper bound (NaN for a null handle).
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double ff_frontier_value(const struct FfFrontierResult *result);

/**
 * Outer iterations used (zero for a null handle).
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t ff_frontier_iterations(const struct FfFrontierResult *result);

/**
 * Cuts accumulated (zero for a null handle).
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t ff_frontier_pool_size(const struct FfFrontierResult *result);

/**
 * True when the loop stopped because no violated cut remained.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
bool ff_frontier_converged(const struct FfFrontierResult *result);

/**
 * Largest equalized-odds gap of the returned channel (NaN for null).
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double ff_frontier_max_eo(const struct FfFrontierResult *result);

/**
 * Number of per-iteration trace entries.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t ff_frontier_trace_len(const struct FfFrontierResult *result);

/**
 * Copy the per-iteration master values into `buffer`.
 *
 * # Safety
 * `result` must be a live handle; `buffer` must point to at least `len`
 * doubles, with `len` matching [`ff_frontier_trace_len`].
 */
enum FfStatus ff_frontier_trace(const struct FfFrontierResult *result, double *buffer, size_t len);

/**
 * Copy the returned channel row-major (`A*C` rows by `C` columns).
 *
 * # Safety
 * `result` must be a live handle; `buffer` must point to at least `len`
 * doubles, with `len == A*C*C`.
 */
enum FfStatus ff_frontier_transition(const struct FfFrontierResult *result,
                                     double *buffer,
                                     size_t len);

/**
 * # Safety
 * `result` must have come from [`ff_frontier_approximate`]; no use
 * afterwards.
 */
void ff_frontier_result_free(struct FfFrontierResult *result);

/**
 * Solve the exact frontier (finite supports). `var_cap` of zero uses
 * the default cap. On success `*out` owns the result and must be
 * released with [`ff_oracle_result_free`].
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum FfStatus ff_oracle_exact(const struct FfModel *model,
                              double alpha_sp,
                              double alpha_eo,
                              double alpha_oae,
                              size_t var_cap,
                              struct FfOracleResult **out);

/**
 * Exact frontier value (NaN for a null handle).
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double ff_oracle_value(const struct FfOracleResult *result);

/**
 * Copy the achieving classifier row-major (`D` rows by `C` columns).
 *
 * # Safety
 * `result` must be a live handle; `buffer` must point to at least `len`
 * doubles, with `len == D*C`.
 */
enum FfStatus ff_oracle_classifier(const struct FfOracleResult *result, double *buffer, size_t len);

/**
 * Copy the induced channel row-major (`A*C` rows by `C` columns).
 *
 * # Safety
 * `result` must be a live handle; `buffer` must point to at least `len`
 * doubles, with `len == A*C*C`.
 */
enum FfStatus ff_oracle_transition(const struct FfOracleResult *result, double *buffer, size_t len);

/**
 * # Safety
 * `result` must have come from [`ff_oracle_exact`]; no use afterwards.
 */
void ff_oracle_result_free(struct FfOracleResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FAIRFRONT_H */
