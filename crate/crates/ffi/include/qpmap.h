#ifndef QPMAP_H
#define QPMAP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Class of a grid cell. `Error` marks a cell whose evaluation failed.
typedef enum QpmapClass {
  QPMAP_CLASS_ERROR = -1,
  QPMAP_CLASS_DIVERGED = 0,
  QPMAP_CLASS_CHAOTIC = 1,
  QPMAP_CLASS_NON_REDUCIBLE_CURVE = 2,
  QPMAP_CLASS_REDUCIBLE_CURVE = 3,
  QPMAP_CLASS_ZERO_LYAPUNOV = 4,
} QpmapClass;

typedef enum QpmapStatus {
  QPMAP_STATUS_OK = 0,
  QPMAP_STATUS_NULL_POINTER = 1,
  QPMAP_STATUS_INVALID_ARGUMENT = 2,
  QPMAP_STATUS_CONFIG = 3,
  QPMAP_STATUS_DIVERGED = 4,
  QPMAP_STATUS_NO_CONVERGENCE = 5,
  QPMAP_STATUS_DOMAIN = 6,
  QPMAP_STATUS_IO = 7,
  QPMAP_STATUS_PANIC = 8,
  QPMAP_STATUS_OTHER = 9,
} QpmapStatus;

// Opaque scan configuration.
typedef struct QpmapConfig QpmapConfig;

// Opaque result of a scan.
typedef struct QpmapGrid QpmapGrid;

typedef struct QpmapCell {
  double x;
  double y;
  enum QpmapClass label;
  double lyapunov;
  // Power of two, 0 when undetected.
  uint32_t period;
  double min_abs_dxf;
} QpmapCell;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static nul-terminated string.
const char *qpmap_version(void);

// Message of the last failure on this thread; empty if none. Valid until
// the next failing call on the same thread.
const char *qpmap_last_error(void);

// Default configuration, or a named window when `preset` is non-null.
//
// # Safety
// `preset` is null or a nul-terminated string; `out` is a valid pointer.
enum QpmapStatus qpmap_config_new(const char *preset, struct QpmapConfig **out);

// Configuration parsed from sectioned `key = value` text.
//
// # Safety
// `text` is a nul-terminated string; `out` is a valid pointer.
enum QpmapStatus qpmap_config_parse(const char *text, struct QpmapConfig **out);

// Set one field by key, e.g. `x_steps` or `orders`.
//
// # Safety
// `cfg` is a live handle; `key` and `value` are nul-terminated strings.
enum QpmapStatus qpmap_config_set(struct QpmapConfig *cfg, const char *key, const char *value);

// Rendered configuration text. Free with [`qpmap_string_free`].
//
// # Safety
// `cfg` is a live handle; `out` is a valid pointer.
enum QpmapStatus qpmap_config_render(const struct QpmapConfig *cfg, char **out);

// # Safety
// `cfg` is null or a handle from this library not yet freed.
void qpmap_config_free(struct QpmapConfig *cfg);

// # Safety
// `s` is null or a string returned by this library not yet freed.
void qpmap_string_free(char *s);

// Classify every cell of the configured grid. Per-cell failures are
// recorded in the cells and do not fail the call.
//
// # Safety
// `cfg` is a live handle; `out` is a valid pointer.
enum QpmapStatus qpmap_scan_run(const struct QpmapConfig *cfg, struct QpmapGrid **out);

// Grid dimensions and number of errored cells.
//
// # Safety
// `grid` is a live handle; the out-pointers are valid.
enum QpmapStatus qpmap_grid_shape(const struct QpmapGrid *grid,
                                  uintptr_t *x_steps,
                                  uintptr_t *y_steps,
                                  uintptr_t *errored);

// # Safety
// `grid` is a live handle; `cell` is a valid pointer.
enum QpmapStatus qpmap_grid_cell(const struct QpmapGrid *grid,
                                 uintptr_t ix,
                                 uintptr_t iy,
                                 struct QpmapCell *cell);

// Write the grid CSV to `path`.
//
// # Safety
// `grid` is a live handle; `path` is a nul-terminated string.
enum QpmapStatus qpmap_grid_write_csv(const struct QpmapGrid *grid, const char *path);

// # Safety
// `grid` is null or a handle from this library not yet freed.
void qpmap_grid_free(struct QpmapGrid *grid);

// Classify the forced logistic map attractor at one parameter point with
// default diagnostics, seeded at `(0, 1/2)`.
//
// # Safety
// `cell` is a valid pointer.
enum QpmapStatus qpmap_flm_classify(double alpha, double epsilon, struct QpmapCell *cell);

// Lyapunov exponent of the forced logistic map along the orbit of
// `(theta, x)` after `transient` iterates.
//
// # Safety
// `out_value` is a valid pointer.
enum QpmapStatus qpmap_flm_lyapunov(double alpha,
                                    double epsilon,
                                    double theta,
                                    double x,
                                    uint64_t transient,
                                    double *out_value);

// `1 − 2/α`, defined for `α > 2`.
//
// # Safety
// `out_value` is a valid pointer.
enum QpmapStatus qpmap_first_bound(double alpha, double *out_value);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* QPMAP_H */
