#ifndef CRACK_H
#define CRACK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CrackIndicator {
  CRACK_INDICATOR_DELTA = 0,
  CRACK_INDICATOR_NCI = 1,
} CrackIndicator;

typedef enum CrackMarginal {
  CRACK_MARGINAL_DOMAIN = 0,
  CRACK_MARGINAL_RES = 1,
  CRACK_MARGINAL_TREE = 2,
} CrackMarginal;

typedef enum CrackStatus {
  CRACK_STATUS_OK = 0,
  CRACK_STATUS_NULL_POINTER = 1,
  CRACK_STATUS_INVALID_ARGUMENT = 2,
  CRACK_STATUS_INVALID_DATA = 3,
  CRACK_STATUS_INVALID_CONFIG = 4,
  CRACK_STATUS_DEGENERATE = 5,
  CRACK_STATUS_INTERNAL = 6,
} CrackStatus;

typedef enum CrackSide {
  CRACK_SIDE_X = 0,
  CRACK_SIDE_Y = 1,
} CrackSide;

typedef enum CrackDirection {
  CRACK_DIRECTION_X_TO_Y = 0,
  CRACK_DIRECTION_Y_TO_X = 1,
  CRACK_DIRECTION_INCONCLUSIVE = 2,
} CrackDirection;

/**
 * Attributes collected so far, each tagged with its side.
 */
typedef struct CrackDataset CrackDataset;

typedef struct CrackVerdict CrackVerdict;

/**
 * Inference settings. Obtain defaults from [`crack_options_default`].
 */
typedef struct CrackOptions {
  enum CrackIndicator indicator;
  enum CrackMarginal marginal;
  double epsilon;
  /**
   * Precision of encoded regression parameters.
   */
  double precision;
  /**
   * Non-zero enables linear and quadratic regression nodes.
   */
  int32_t regression;
} CrackOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *crack_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *crack_version(void);

struct CrackOptions crack_options_default(void);

/**
 * Creates an empty dataset. Never returns NULL.
 */
struct CrackDataset *crack_dataset_new(void);

/**
 * # Safety
 * `dataset` must be NULL or a pointer from [`crack_dataset_new`] that has
 * not been freed.
 */
void crack_dataset_free(struct CrackDataset *dataset);

/**
 * Number of attributes added so far, or 0 for NULL.
 *
 * # Safety
 * `dataset` must be NULL or a live dataset handle.
 */
uintptr_t crack_dataset_attribute_count(const struct CrackDataset *dataset);

/**
 * Appends a numeric attribute of `len` values; the recording resolution
 * is estimated from the values.
 *
 * # Safety
 * `dataset` must be a live handle, `name` a NUL-terminated string and
 * `values` must point to `len` readable doubles.
 */
enum CrackStatus crack_dataset_add_numeric(struct CrackDataset *dataset,
                                           const char *name,
                                           const double *values,
                                           uintptr_t len,
                                           enum CrackSide side);

/**
 * Appends a nominal attribute whose `len` codes lie in
 * `0..category_count`.
 *
 * # Safety
 * `dataset` must be a live handle, `name` a NUL-terminated string and
 * `codes` must point to `len` readable integers.
 */
enum CrackStatus crack_dataset_add_nominal(struct CrackDataset *dataset,
                                           const char *name,
                                           const uint32_t *codes,
                                           uintptr_t len,
                                           uint32_t category_count,
                                           enum CrackSide side);

/**
 * Infers the causal direction between the X and Y attributes. `options`
 * may be NULL for defaults. On success `*out` receives a verdict to be
 * released with [`crack_verdict_free`]; on failure it is set to NULL.
 *
 * # Safety
 * `dataset` must be a live handle, `options` NULL or readable, and `out`
 * a writable pointer.
 */
enum CrackStatus crack_infer(const struct CrackDataset *dataset,
                             const struct CrackOptions *options,
                             struct CrackVerdict **out);

/**
 * # Safety
 * `verdict` must be NULL or a pointer from [`crack_infer`] that has not
 * been freed.
 */
void crack_verdict_free(struct CrackVerdict *verdict);

/**
 * Inferred direction; inconclusive for NULL.
 *
 * # Safety
 * `verdict` must be NULL or a live verdict handle.
 */
enum CrackDirection crack_verdict_direction(const struct CrackVerdict *verdict);

/**
 * Absolute score gap; NaN for NULL.
 *
 * # Safety
 * `verdict` must be NULL or a live verdict handle.
 */
double crack_verdict_confidence(const struct CrackVerdict *verdict);

/**
 * Score of the X->Y hypothesis; NaN for NULL.
 *
 * # Safety
 * `verdict` must be NULL or a live verdict handle.
 */
double crack_verdict_score_xy(const struct CrackVerdict *verdict);

/**
 * Score of the Y->X hypothesis; NaN for NULL.
 *
 * # Safety
 * `verdict` must be NULL or a live verdict handle.
 */
double crack_verdict_score_yx(const struct CrackVerdict *verdict);

/**
 * Wall-clock inference time in milliseconds; NaN for NULL.
 *
 * # Safety
 * `verdict` must be NULL or a live verdict handle.
 */
double crack_verdict_runtime_ms(const struct CrackVerdict *verdict);

/**
 * NML regret in bits of a `k`-category multinomial over `n` rows.
 */
double crack_nml_regret(uintptr_t n, uintptr_t k);

/**
 * Universal code length in bits of the positive integer `z`; NaN for 0.
 */
double crack_universal_int(uint64_t z);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRACK_H */
