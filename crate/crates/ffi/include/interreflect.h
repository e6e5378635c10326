#ifndef INTERREFLECT_H
#define INTERREFLECT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IrMethod {
  IR_METHOD_PURE = 0,
  IR_METHOD_GM = 1,
  IR_METHOD_LS = 2,
} IrMethod;

/**
 * Result codes.
 */
typedef enum IrStatus {
  IR_STATUS_OK = 0,
  IR_STATUS_NULL_POINTER = 1,
  IR_STATUS_INVALID_ARGUMENT = 2,
  IR_STATUS_DARK_CHANNEL = 3,
  IR_STATUS_DEGENERATE_LINE = 4,
  IR_STATUS_PARALLEL_LINES = 5,
  IR_STATUS_UNPHYSICAL = 6,
  IR_STATUS_INSUFFICIENT_DATA = 7,
  IR_STATUS_IO = 8,
  IR_STATUS_INVALID_IMAGE = 9,
  IR_STATUS_INVALID_ANNOTATION = 10,
  IR_STATUS_PATCH_UNUSABLE = 11,
  IR_STATUS_NOT_AVAILABLE = 12,
  IR_STATUS_PANIC = 99,
} IrStatus;

/**
 * Estimation settings: method, tolerances and solver options.
 */
typedef struct IrEstimator IrEstimator;

/**
 * Result of a color-line or scene estimate.
 */
typedef struct IrReport IrReport;

typedef struct IrTolerances {
  double channel;
  double points;
  double parallel;
  double condition_warn;
  double condition_error;
} IrTolerances;

typedef struct IrRgb {
  double r;
  double g;
  double b;
} IrRgb;

/**
 * Two direct measurements and the mixed measurement of one interreflection.
 */
typedef struct IrObservation {
  struct IrRgb direct_r1;
  struct IrRgb direct_r2;
  struct IrRgb mixed;
} IrObservation;

/**
 * Summary statistics of angular errors in degrees.
 */
typedef struct IrStats {
  double mean;
  double median;
  double trimean;
  double best25;
  double worst25;
  double p95;
  double max;
  double min;
} IrStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ir_last_error_message(void);

/**
 * Creates an estimator with default tolerances and solver options.
 */
struct IrEstimator *ir_estimator_new(enum IrMethod method);

/**
 * # Safety
 * `est` must be null or come from [`ir_estimator_new`] and not be used afterwards.
 */
void ir_estimator_free(struct IrEstimator *est);

/**
 * Default tolerances.
 */
struct IrTolerances ir_tolerances_default(void);

/**
 * # Safety
 * `est` must be a live estimator handle.
 */
enum IrStatus ir_estimator_set_tolerances(struct IrEstimator *est, struct IrTolerances tol);

/**
 * # Safety
 * `est` must be a live estimator handle.
 */
enum IrStatus ir_estimator_set_solver(struct IrEstimator *est,
                                      double epsilon_irls,
                                      double step_tolerance,
                                      size_t max_iterations);

/**
 * Unit illuminant from a pure interreflection `c12` between surfaces seen
 * directly as `c1` and `c2`. `est` may be null for default tolerances.
 *
 * # Safety
 * `est` must be null or live; `out` must be writable.
 */
enum IrStatus ir_estimate_pure(const struct IrEstimator *est,
                               struct IrRgb c1,
                               struct IrRgb c2,
                               struct IrRgb c12,
                               struct IrRgb *out);

/**
 * Intersects the color lines of `count` observations with the estimator's
 * method (gm or ls). `est` may be null for geometric median with defaults.
 *
 * # Safety
 * `observations` must point to `count` readable elements; `out` must be writable.
 */
enum IrStatus ir_estimate_observations(const struct IrEstimator *est,
                                       const struct IrObservation *observations,
                                       size_t count,
                                       struct IrReport **out);

/**
 * Estimates the illuminant of an annotated image. `image_path` may be null to
 * use the image named in the annotation.
 *
 * # Safety
 * Paths must be null or NUL-terminated UTF-8; `out` must be writable.
 */
enum IrStatus ir_estimate_scene_files(const struct IrEstimator *est,
                                      const char *annotation_path,
                                      const char *image_path,
                                      struct IrReport **out);

/**
 * # Safety
 * `report` must be null or come from an estimate call and not be used afterwards.
 */
void ir_report_free(struct IrReport *report);

/**
 * # Safety
 * `report` must be live; `out` must be writable.
 */
enum IrStatus ir_report_illuminant(const struct IrReport *report, struct IrRgb *out);

/**
 * Intersection point `(r, g)` in the chromaticity chart.
 *
 * # Safety
 * `report` must be live; `r` and `g` must be writable.
 */
enum IrStatus ir_report_intersection(const struct IrReport *report, double *r, double *g);

/**
 * Number of color lines, which is also the residual count. Zero for null.
 *
 * # Safety
 * `report` must be null or live.
 */
size_t ir_report_line_count(const struct IrReport *report);

/**
 * Copies up to `len` per-line residuals into `buf`.
 *
 * # Safety
 * `report` must be live; `buf` must hold `len` doubles.
 */
enum IrStatus ir_report_residuals(const struct IrReport *report, double *buf, size_t len);

/**
 * Solver iterations; zero for null.
 *
 * # Safety
 * `report` must be null or live.
 */
size_t ir_report_iterations(const struct IrReport *report);

/**
 * Number of warnings attached to the estimate.
 *
 * # Safety
 * `report` must be null or live.
 */
size_t ir_report_warning_count(const struct IrReport *report);

/**
 * Angular error against the gray card, for scene reports that have one.
 *
 * # Safety
 * `report` must be live; `out` must be writable.
 */
enum IrStatus ir_report_angular_error(const struct IrReport *report, double *out);

/**
 * The report as JSON. Release the string with [`ir_string_free`]. Null on failure.
 *
 * # Safety
 * `report` must be null or live.
 */
char *ir_report_to_json(const struct IrReport *report);

/**
 * # Safety
 * `s` must be null or come from this library and not be used afterwards.
 */
void ir_string_free(char *s);

/**
 * Angle in degrees between two RGB directions.
 *
 * # Safety
 * `out` must be writable.
 */
enum IrStatus ir_angular_error(struct IrRgb a, struct IrRgb b, double *out);

/**
 * Summary statistics of `count` angular errors.
 *
 * # Safety
 * `errors` must point to `count` readable doubles; `out` must be writable.
 */
enum IrStatus ir_summarize_errors(const double *errors, size_t count, struct IrStats *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INTERREFLECT_H */
