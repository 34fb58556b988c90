#ifndef ADA2MS_H
#define ADA2MS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum Ada2msStatus {
  ADA2MS_STATUS_OK = 0,
  ADA2MS_STATUS_NULL_POINTER = 1,
  ADA2MS_STATUS_INVALID_ARGUMENT = 2,
  ADA2MS_STATUS_SHAPE_MISMATCH = 3,
  /**
   * A gradient contained NaN or infinity; nothing was updated.
   */
  ADA2MS_STATUS_NON_FINITE = 4,
  /**
   * The call is not allowed in the optimizer's current state.
   */
  ADA2MS_STATUS_STATE_ERROR = 5,
  ADA2MS_STATUS_PANIC = 6,
} Ada2msStatus;

typedef enum Ada2msOptimizerKind {
  ADA2MS_OPTIMIZER_KIND_SGDM = 0,
  ADA2MS_OPTIMIZER_KIND_ADAMW = 1,
  ADA2MS_OPTIMIZER_KIND_ADA2MS = 2,
} Ada2msOptimizerKind;

typedef enum Ada2msLrKind {
  ADA2MS_LR_KIND_WSDS = 0,
  ADA2MS_LR_KIND_WSD = 1,
} Ada2msLrKind;

/**
 * Opaque optimizer handle.
 */
typedef struct Ada2msOptimizer Ada2msOptimizer;

/**
 * Mirror of the optimizer hyperparameters. `lambda` is the weight-decay
 * rate, applied to tensors of rank two or more.
 */
typedef struct Ada2msHyperParams {
  double beta1;
  double beta2;
  double epsilon;
  double lambda;
} Ada2msHyperParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the buffer size needed for the
 * whole message including the terminator; `buf` may be null to query it.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes of writes.
 */
size_t ada2ms_last_error_message(char *buf, size_t len);

/**
 * Write the default hyperparameters into `out`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum Ada2msStatus ada2ms_hyperparams_default(struct Ada2msHyperParams *out);

/**
 * Create an optimizer. `hp` may be null for the defaults. On success
 * `*out` receives a handle to release with `ada2ms_optimizer_free`.
 *
 * # Safety
 * `hp` must be null or point to a valid struct; `out` must be valid for
 * writes.
 */
enum Ada2msStatus ada2ms_optimizer_new(enum Ada2msOptimizerKind kind,
                                       const struct Ada2msHyperParams *hp,
                                       struct Ada2msOptimizer **out);

/**
 * Release an optimizer. Null is ignored.
 *
 * # Safety
 * `opt` must be null or a handle from `ada2ms_optimizer_new` not yet freed.
 */
void ada2ms_optimizer_free(struct Ada2msOptimizer *opt);

/**
 * Register a parameter tensor with initial values. `rank` may be 0 for a
 * scalar, in which case `shape` may be null and `len` must be 1.
 *
 * # Safety
 * `opt` must be a live handle, `name` a NUL-terminated string, `shape`
 * valid for `rank` reads and `values` for `len` reads.
 */
enum Ada2msStatus ada2ms_optimizer_add_tensor(struct Ada2msOptimizer *opt,
                                              const char *name,
                                              const size_t *shape,
                                              size_t rank,
                                              const double *values,
                                              size_t len);

/**
 * Apply one optimizer step. `grads` holds `len` values: every tensor's
 * gradient, concatenated in registration order. `alpha` is the switching
 * exponent and is ignored by SGDM and AdamW. On error nothing changes.
 *
 * # Safety
 * `opt` must be a live handle and `grads` valid for `len` reads.
 */
enum Ada2msStatus ada2ms_optimizer_step(struct Ada2msOptimizer *opt,
                                        const double *grads,
                                        size_t len,
                                        double lr,
                                        double alpha);

/**
 * Number of registered tensors.
 *
 * # Safety
 * `opt` must be a live handle and `out` valid for writes.
 */
enum Ada2msStatus ada2ms_optimizer_tensor_count(const struct Ada2msOptimizer *opt, size_t *out);

/**
 * Number of steps taken so far.
 *
 * # Safety
 * `opt` must be a live handle and `out` valid for writes.
 */
enum Ada2msStatus ada2ms_optimizer_step_count(const struct Ada2msOptimizer *opt, uint64_t *out);

/**
 * Copy the current values of tensor `index` into `out`, which must hold
 * exactly the tensor's element count `len`.
 *
 * # Safety
 * `opt` must be a live handle and `out` valid for `len` writes.
 */
enum Ada2msStatus ada2ms_optimizer_get_values(const struct Ada2msOptimizer *opt,
                                              size_t index,
                                              double *out,
                                              size_t len);

/**
 * Learning rate at step `t` of a `total_steps` schedule with the default
 * breakpoints, initial rate and floor.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum Ada2msStatus ada2ms_lr_at(enum Ada2msLrKind kind,
                               double peak,
                               uint64_t total_steps,
                               uint64_t t,
                               double *out);

/**
 * Switching exponent at step `t` of a `total_steps` run switching at
 * fraction `switch_frac`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum Ada2msStatus ada2ms_alpha_at(uint64_t total_steps,
                                  double switch_frac,
                                  uint64_t t,
                                  double *out);

/**
 * Transfer a learning rate and weight decay from an optimizer with mean
 * update norm `norm1` to one with `norm2`, keeping their product.
 *
 * # Safety
 * `eta2` and `lambda2` must be valid for writes.
 */
enum Ada2msStatus ada2ms_align(double eta1,
                               double lambda1,
                               double norm1,
                               double norm2,
                               double *eta2,
                               double *lambda2);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADA2MS_H */
