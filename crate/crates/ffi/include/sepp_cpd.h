#ifndef SEPP_CPD_H
#define SEPP_CPD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SeppStatus {
  SEPP_STATUS_OK = 0,
  SEPP_STATUS_NULL_POINTER = 1,
  SEPP_STATUS_INVALID_INPUT = 2,
  SEPP_STATUS_PARSE = 3,
  SEPP_STATUS_NUMERICAL = 4,
  SEPP_STATUS_IO = 5,
  SEPP_STATUS_PANIC = 6,
} SeppStatus;

/**
 * Opaque detection result.
 */
typedef struct SeppReport SeppReport;

/**
 * Opaque count series.
 */
typedef struct SeppSeries SeppSeries;

/**
 * Intercept `v` and clipping threshold of the model.
 */
typedef struct SeppModel {
  double intercept;
  double clip;
} SeppModel;

typedef struct SeppDetectParams {
  double lambda;
  double gamma;
  size_t min_segment;
  size_t grid;
  bool warm_start;
  double tol;
  size_t max_iter;
} SeppDetectParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *sepp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sepp_version(void);

/**
 * Builds a series from `dim * len` time-major counts.
 *
 * # Safety
 * `counts` must point to `dim * len` readable values and `out` must be
 * writable.
 */
enum SeppStatus sepp_series_new(const uint32_t *counts,
                                size_t dim,
                                size_t len,
                                struct SeppSeries **out);

/**
 * Reads a counts CSV with header `t,x1,...,xM`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` must be writable.
 */
enum SeppStatus sepp_series_read_csv(const char *path, struct SeppSeries **out);

/**
 * # Safety
 * `series` must be null or a live handle.
 */
size_t sepp_series_dim(const struct SeppSeries *series);

/**
 * # Safety
 * `series` must be null or a live handle.
 */
size_t sepp_series_len(const struct SeppSeries *series);

/**
 * Copies `X_m(t)` (1-based `m` and `t`) into `out`.
 *
 * # Safety
 * `series` must be a live handle and `out` writable.
 */
enum SeppStatus sepp_series_count(const struct SeppSeries *series,
                                  size_t m,
                                  size_t t,
                                  uint32_t *out);

/**
 * # Safety
 * `series` must be null or a handle not yet freed.
 */
void sepp_series_free(struct SeppSeries *series);

/**
 * Simulates benchmark setting `'a'` (parameter rho), `'b'` (T) or `'c'`
 * (M). Writes the model constants and up to `truth_cap` true change
 * points; `truth_len` receives their total number.
 *
 * # Safety
 * `out_series`, `out_model` and `truth_len` must be writable; `truth` must
 * hold `truth_cap` values or be null with `truth_cap == 0`.
 */
enum SeppStatus sepp_simulate_setting(char setting,
                                      double parameter,
                                      uint64_t seed,
                                      struct SeppSeries **out_series,
                                      struct SeppModel *out_model,
                                      size_t *truth,
                                      size_t truth_cap,
                                      size_t *truth_len);

/**
 * Default parameters for a `len x dim` series: `lambda = 90 ln(T M)` and
 * `gamma = ln(M)^2 / 2`.
 */
struct SeppDetectParams sepp_detect_params_default(size_t len, size_t dim);

/**
 * Runs the dynamic program. `params` may be null for the defaults.
 *
 * # Safety
 * `series` must be a live handle, `params` null or readable, `out`
 * writable.
 */
enum SeppStatus sepp_detect(const struct SeppSeries *series,
                            struct SeppModel model,
                            const struct SeppDetectParams *params,
                            struct SeppReport **out);

/**
 * # Safety
 * `report` must be null or a live handle.
 */
size_t sepp_report_num_change_points(const struct SeppReport *report);

/**
 * Copies up to `cap` change points into `buf` and returns their total
 * number.
 *
 * # Safety
 * `report` must be null or a live handle; `buf` must hold `cap` values.
 */
size_t sepp_report_change_points(const struct SeppReport *report, size_t *buf, size_t cap);

/**
 * Objective of the reported partition, or NaN for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
double sepp_report_objective(const struct SeppReport *report);

/**
 * The report as JSON; release with [`sepp_string_free`]. Null on failure.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
char *sepp_report_to_json(const struct SeppReport *report);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void sepp_string_free(char *s);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void sepp_report_free(struct SeppReport *report);

/**
 * Hausdorff distance between two change-point sets on `[1, len]`. One
 * empty set gives `len` with `flag` set; two empty sets give 0.
 *
 * # Safety
 * `a` and `b` must hold `na` and `nb` values (either may be null when its
 * length is 0); `value` and `flag` must be writable.
 */
enum SeppStatus sepp_hausdorff(const size_t *a,
                               size_t na,
                               const size_t *b,
                               size_t nb,
                               size_t len,
                               uint64_t *value,
                               bool *flag);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SEPP_CPD_H */
