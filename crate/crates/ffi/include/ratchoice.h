#ifndef RATCHOICE_H
#define RATCHOICE_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of dyad features expected by the risk functions, in the order
 * allies, contiguity, distance, major_power, democracy, dependency,
 * capability.
 */
#define RC_N_FEATURES 7

typedef enum RcStatus {
  RC_STATUS_OK = 0,
  /**
   * A required pointer was null or a string was not UTF-8.
   */
  RC_STATUS_NULL_ARGUMENT = 1,
  /**
   * Input or configuration rejected.
   */
  RC_STATUS_INVALID_INPUT = 2,
  /**
   * A computation produced a non-finite value.
   */
  RC_STATUS_NUMERICAL = 3,
  /**
   * A file could not be read.
   */
  RC_STATUS_IO = 4,
  /**
   * Internal panic; the library state is unchanged.
   */
  RC_STATUS_PANIC = 5,
} RcStatus;

typedef enum RcVariable {
  RC_VARIABLE_DEMOCRACY = 0,
  RC_VARIABLE_ALLIES = 1,
  RC_VARIABLE_CAPABILITY = 2,
  RC_VARIABLE_DEPENDENCY = 3,
} RcVariable;

/**
 * Trained risk model together with its feature scaling.
 */
typedef struct RcModel RcModel;

/**
 * Objective for [`rc_golden_section`]; `ctx` is passed through untouched.
 */
typedef double (*RcObjective)(double x, void *ctx);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null after a
 * success. The pointer stays valid until the next call into the library on
 * the same thread.
 */
const char *rc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rc_version(void);

/**
 * Utility `1 / cost` of a positive, finite cost.
 *
 * # Safety
 * `utility_out` must be null or point to writable memory for one `double`.
 */
enum RcStatus rc_inverse_cost_utility(double cost, double *utility_out);

/**
 * Ranks `n` alternatives by inverse-cost utility, best first. Ties keep the
 * lower index first. `order_out[k]` receives the index of the k-th ranked
 * alternative and `utility_out[k]` its utility.
 *
 * # Safety
 * `n` must be at least 1; `costs` must point to `n` readable doubles and
 * `order_out` and `utility_out` to `n` writable elements each.
 */
enum RcStatus rc_rank_by_cost(const double *costs,
                              size_t n,
                              size_t *order_out,
                              double *utility_out);

/**
 * Golden section search for a minimum of `f` on `[lo, hi]`.
 *
 * # Safety
 * `f` must be safe to call with `ctx` from this thread. `x_out` and
 * `value_out` must point to writable doubles.
 */
enum RcStatus rc_golden_section(RcObjective f,
                                void *ctx,
                                double lo,
                                double hi,
                                double tol,
                                size_t max_iter,
                                double *x_out,
                                double *value_out);

/**
 * Loads a model file and its scaling file written by `ratchoice train`.
 * The handle must be released with [`rc_model_free`].
 *
 * # Safety
 * Paths must be null or NUL-terminated strings; `model_out` must point to a
 * writable pointer.
 */
enum RcStatus rc_model_load(const char *model_path,
                            const char *norm_path,
                            struct RcModel **model_out);

/**
 * Releases a handle from [`rc_model_load`]. Null is ignored.
 *
 * # Safety
 * `model` must be null or a live handle that is not used afterwards.
 */
void rc_model_free(struct RcModel *model);

/**
 * Predicted conflict risk of a dyad given as `RC_N_FEATURES` raw values.
 *
 * # Safety
 * `model` must be a live handle, `features` must point to `RC_N_FEATURES`
 * readable doubles and `risk_out` to a writable double.
 */
enum RcStatus rc_model_risk(const struct RcModel *model, const double *features, double *risk_out);

/**
 * Tunes one controllable variable of a conflict dyad to lower its risk.
 * Writes the controlled features (unchanged when no improvement exists)
 * and the risk before and after.
 *
 * # Safety
 * `model` must be a live handle; `features` must point to `RC_N_FEATURES`
 * readable doubles and `features_out` to as many writable ones (the two
 * may alias); `risk_before_out` and `risk_after_out` must be writable.
 */
enum RcStatus rc_control_single(const struct RcModel *model,
                                const double *features,
                                enum RcVariable variable,
                                double *features_out,
                                double *risk_before_out,
                                double *risk_after_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RATCHOICE_H */
