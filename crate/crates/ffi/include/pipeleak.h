#ifndef PIPELEAK_H
#define PIPELEAK_H

/* Generated by cbindgen. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Number of raw feature columns expected by [`pl_model_predict`]: inlet
 * pressure, outlet pressure, inlet temperature, outlet temperature.
 */
#define PL_FEATURES 4

typedef enum PlStatus {
  PL_STATUS_OK = 0,
  PL_STATUS_NULL_POINTER = 1,
  PL_STATUS_INVALID_ARGUMENT = 2,
  PL_STATUS_DOMAIN = 3,
  PL_STATUS_INSUFFICIENT_DATA = 4,
  PL_STATUS_IO = 5,
  PL_STATUS_FORMAT = 6,
  PL_STATUS_PANIC = 7,
} PlStatus;

/**
 * Streaming detector with its configuration.
 */
typedef struct PlDetector PlDetector;

/**
 * Trained flow observer.
 */
typedef struct PlModel PlModel;

typedef struct PlDetectorConfig {
  double threshold;
  size_t window;
  double index_trip;
  size_t persistence;
  size_t onset_index;
  double cadence_minutes;
  size_t accounting_offset;
} PlDetectorConfig;

/**
 * Result of one detector step.
 */
typedef struct PlStep {
  /**
   * 0 when the sample was skipped as non-finite; the other fields are then zero.
   */
  int processed;
  double residual;
  int flag;
  double index;
  size_t counter;
  /**
   * 1 on the step that raises the alarm.
   */
  int alarm;
} PlStep;

/**
 * Alarm details. `location` is NaN when no inlet channel was supplied.
 */
typedef struct PlAlarm {
  size_t ordinal;
  size_t alarm_ordinal;
  double minutes_to_detect;
  double leak_index;
  double leak_percent;
  double inlet_pressure;
  double outlet_pressure;
  double location;
} PlAlarm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pl_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *pl_last_error(void);

/**
 * Standing pseudo-critical temperature (°R) and pressure (psia).
 *
 * # Safety
 * `t_pc` and `p_pc` must be valid for writes.
 */
enum PlStatus pl_pseudo_critical(double sg, double *t_pc, double *p_pc);

/**
 * Compressibility factor at `pressure` (psia), `temperature_f` (°F) and gas
 * specific gravity `sg`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum PlStatus pl_z_factor(double pressure, double temperature_f, double sg, double *out);

/**
 * Gas viscosity (cp) at the given field conditions.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum PlStatus pl_gas_viscosity(double pressure, double temperature_f, double sg, double *out);

/**
 * Rounded leak flow factor for leak size `q_ld` (fraction of flow) at
 * relative position `l_ld` from the inlet.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum PlStatus pl_leak_factor(double q_ld, double l_ld, double *out);

/**
 * Leak index for `a` (window exceedances plus one).
 */
double pl_leak_index(double a);

/**
 * Loads a model file written by `pipeleak train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum PlStatus pl_model_load(const char *path, struct PlModel **out);

/**
 * Parses a model from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum PlStatus pl_model_from_json(const char *json, struct PlModel **out);

/**
 * Releases a model. NULL is ignored.
 *
 * # Safety
 * `model` must come from a `pl_model_*` constructor and not be freed twice.
 */
void pl_model_free(struct PlModel *model);

/**
 * Test-set mean absolute error recorded at training time.
 *
 * # Safety
 * `model` must be a live handle; `out` must be valid for writes.
 */
enum PlStatus pl_model_mae(const struct PlModel *model, double *out);

/**
 * Predicts flow for `n_rows` row-major rows of [`PL_FEATURES`] values each.
 *
 * # Safety
 * `rows` must hold `n_rows * PL_FEATURES` doubles and `out` room for `n_rows`.
 */
enum PlStatus pl_model_predict(const struct PlModel *model,
                               const double *rows,
                               size_t n_rows,
                               double *out);

/**
 * Default detector configuration for an observer with the given MAE.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum PlStatus pl_detector_config_default(double mae, struct PlDetectorConfig *out);

/**
 * Creates a detector from a configuration.
 *
 * # Safety
 * `cfg` must point to a valid configuration; `out` must be valid for writes.
 */
enum PlStatus pl_detector_new(const struct PlDetectorConfig *cfg, struct PlDetector **out);

/**
 * Releases a detector. NULL is ignored.
 *
 * # Safety
 * `det` must come from [`pl_detector_new`] and not be freed twice.
 */
void pl_detector_free(struct PlDetector *det);

/**
 * Feeds one sample. Pass NaN for both inlet values when the inlet channel is
 * not monitored.
 *
 * # Safety
 * `det` must be a live handle; `step` must be valid for writes.
 */
enum PlStatus pl_detector_step(struct PlDetector *det,
                               size_t ordinal,
                               double observed,
                               double predicted,
                               double inlet_pressure,
                               double outlet_pressure,
                               double inlet_observed,
                               double inlet_predicted,
                               struct PlStep *step);

/**
 * Copies the latched alarm into `out` and sets `*raised` to 1, or sets
 * `*raised` to 0 when no alarm has fired.
 *
 * # Safety
 * `det` must be a live handle; `raised` and `out` must be valid for writes.
 */
enum PlStatus pl_detector_alarm(const struct PlDetector *det, int *raised, struct PlAlarm *out);

/**
 * Clears the detector state, keeping its configuration.
 *
 * # Safety
 * `det` must be a live handle.
 */
enum PlStatus pl_detector_reset(struct PlDetector *det);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PIPELEAK_H */
