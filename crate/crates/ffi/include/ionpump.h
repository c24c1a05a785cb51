#ifndef IONPUMP_H
#define IONPUMP_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IonpumpStatus {
  IONPUMP_STATUS_OK = 0,
  IONPUMP_STATUS_NULL_POINTER = 1,
  IONPUMP_STATUS_INVALID_ARGUMENT = 2,
  IONPUMP_STATUS_NUMERICAL = 3,
  IONPUMP_STATUS_PANIC = 4,
} IonpumpStatus;

typedef enum IonpumpModel {
  IONPUMP_MODEL_FULL = 0,
  IONPUMP_MODEL_ELIMINATED = 1,
} IonpumpModel;

typedef enum IonpumpLevel {
  IONPUMP_LEVEL_GROUND = 0,
  IONPUMP_LEVEL_EXCITED = 1,
} IonpumpLevel;

/**
 * Columns of a recorded time series.
 */
typedef enum IonpumpColumn {
  IONPUMP_COLUMN_TIME = 0,
  IONPUMP_COLUMN_FIDELITY = 1,
  IONPUMP_COLUMN_TRACE = 2,
  IONPUMP_COLUMN_MEAN_PHONON = 3,
  IONPUMP_COLUMN_TOP_LEVEL_POPULATION = 4,
} IonpumpColumn;

typedef struct IonpumpGenerator IonpumpGenerator;

typedef struct IonpumpSeries IonpumpSeries;

typedef struct IonpumpState IonpumpState;

/**
 * Rates in 1/s, couplings in rad/s.
 */
typedef struct IonpumpParams {
  double omega;
  double omega_r;
  double omega_rp;
  double gamma_s;
  double gamma_sp;
  double h_r;
  double xi;
} IonpumpParams;

/**
 * `dt <= 0` selects the generator's default step.
 */
typedef struct IonpumpSteadyOptions {
  double slope_threshold;
  double hold_time;
  double time_cap;
  double check_interval;
  double dt;
} IonpumpSteadyOptions;

typedef struct IonpumpSteadyResult {
  double fidelity;
  double time;
  double max_top_population;
  bool converged;
  bool truncation_violated;
} IonpumpSteadyResult;

typedef struct IonpumpConditionalResult {
  double fidelity;
  double reach_time;
  double survival_at_reach;
  bool converged;
} IonpumpConditionalResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ionpump_version(void);

/**
 * Message for the last failed call on this thread, or NULL. The pointer stays
 * valid until the next library call on the same thread.
 */
const char *ionpump_last_error_message(void);

struct IonpumpParams ionpump_params_default(void);

struct IonpumpSteadyOptions ionpump_steady_options_default(void);

/**
 * # Safety
 * `params` must point to a valid `IonpumpParams`; `out` must be writable.
 */
enum IonpumpStatus ionpump_generator_new(enum IonpumpModel model,
                                         const struct IonpumpParams *params,
                                         size_t n_motional,
                                         struct IonpumpGenerator **out);

/**
 * Hilbert-space dimension, or 0 for a null handle.
 *
 * # Safety
 * `gen` is null or a live generator handle.
 */
size_t ionpump_generator_dim(const struct IonpumpGenerator *gen);

/**
 * # Safety
 * `gen` is null or a handle from `ionpump_generator_new` not yet freed.
 */
void ionpump_generator_free(struct IonpumpGenerator *gen);

/**
 * `|ion1 ion2⟩ ⊗ |0⟩` on the generator's space.
 *
 * # Safety
 * `gen` must be a live generator handle; `out` must be writable.
 */
enum IonpumpStatus ionpump_state_product(const struct IonpumpGenerator *gen,
                                         enum IonpumpLevel ion1,
                                         enum IonpumpLevel ion2,
                                         struct IonpumpState **out);

/**
 * # Safety
 * `state` is null or a live state handle.
 */
void ionpump_state_free(struct IonpumpState *state);

/**
 * # Safety
 * `state` must be a live state handle; `out` must be writable.
 */
enum IonpumpStatus ionpump_state_fidelity(const struct IonpumpState *state, double *out);

/**
 * # Safety
 * `state` must be a live state handle; `out` must be writable.
 */
enum IonpumpStatus ionpump_state_trace(const struct IonpumpState *state, double *out);

/**
 * Runs to the steady state. `opts` may be NULL for defaults; `out_state` may
 * be NULL when the final state is not needed.
 *
 * # Safety
 * Handles must be live; `result` must be writable; `out_state` is null or
 * writable.
 */
enum IonpumpStatus ionpump_steady_state(const struct IonpumpGenerator *gen,
                                        const struct IonpumpState *rho0,
                                        const struct IonpumpSteadyOptions *opts,
                                        struct IonpumpSteadyResult *result,
                                        struct IonpumpState **out_state);

/**
 * Settled click-free fidelity after a detection from `steady`.
 *
 * # Safety
 * Handles must be live; `result` must be writable; `opts` is null or valid.
 */
enum IonpumpStatus ionpump_conditional_asymptote(const struct IonpumpGenerator *gen,
                                                 const struct IonpumpState *steady,
                                                 const struct IonpumpSteadyOptions *opts,
                                                 double reach_tolerance,
                                                 struct IonpumpConditionalResult *result);

/**
 * Master-equation run over `[0, t_max]`; `dt <= 0` uses the default step.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum IonpumpStatus ionpump_integrate(const struct IonpumpGenerator *gen,
                                     const struct IonpumpState *rho0,
                                     double t_max,
                                     double dt,
                                     size_t stride,
                                     struct IonpumpSeries **out);

/**
 * One detection-conditioned trajectory.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum IonpumpStatus ionpump_trajectory(const struct IonpumpGenerator *gen,
                                      const struct IonpumpState *rho0,
                                      double t_max,
                                      double dt,
                                      size_t stride,
                                      uint64_t seed,
                                      struct IonpumpSeries **out);

/**
 * Number of recorded samples, or 0 for a null handle.
 *
 * # Safety
 * `series` is null or a live series handle.
 */
size_t ionpump_series_len(const struct IonpumpSeries *series);

/**
 * Number of detection events, or 0 for a null handle or master-equation run.
 *
 * # Safety
 * `series` is null or a live series handle.
 */
size_t ionpump_series_event_count(const struct IonpumpSeries *series);

/**
 * Copies one column into `buf`, which must hold `ionpump_series_len` values.
 *
 * # Safety
 * `series` must be live; `buf` must be valid for `len` writes.
 */
enum IonpumpStatus ionpump_series_column(const struct IonpumpSeries *series,
                                         enum IonpumpColumn column,
                                         double *buf,
                                         size_t len);

/**
 * Copies detection times into `buf`, which must hold
 * `ionpump_series_event_count` values.
 *
 * # Safety
 * `series` must be live; `buf` must be valid for `len` writes.
 */
enum IonpumpStatus ionpump_series_event_times(const struct IonpumpSeries *series,
                                              double *buf,
                                              size_t len);

/**
 * # Safety
 * `series` is null or a live series handle.
 */
void ionpump_series_free(struct IonpumpSeries *series);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IONPUMP_H */
