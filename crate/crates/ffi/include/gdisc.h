#ifndef GDISC_H
#define GDISC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GdiscStatus {
  GDISC_STATUS_OK = 0,
  GDISC_STATUS_NULL_POINTER = 1,
  GDISC_STATUS_INVALID_ARGUMENT = 2,
  GDISC_STATUS_INVALID_PLAN = 3,
  GDISC_STATUS_DEGENERATE = 4,
  GDISC_STATUS_NUMERICAL = 5,
  GDISC_STATUS_CONFIG = 6,
  GDISC_STATUS_IO = 7,
  GDISC_STATUS_PANIC = 8,
} GdiscStatus;

/**
 * Model parameters (drift, diffusion, initial law, horizon).
 */
typedef struct GdiscModel GdiscModel;

/**
 * Trajectory panel of `units × (steps + 1)` `(Y, W)` pairs.
 */
typedef struct GdiscPanel GdiscPanel;

/**
 * Deterministic treatment plan on `[0, T]`.
 */
typedef struct GdiscPlan GdiscPlan;

/**
 * Result of [`gdisc_zeta`]. `zeta_defined` is false when the interval
 * excludes 0 but the full- and half-grid estimates coincide exactly; `zeta`
 * is then NaN.
 */
typedef struct GdiscZetaReport {
  size_t steps;
  double tau_hat;
  double tau_hat_half;
  double ci_lower;
  double ci_upper;
  double zeta;
  bool zeta_defined;
  double alpha;
  size_t bootstrap;
  size_t failed_bootstrap;
  uint64_t seed;
} GdiscZetaReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a success.
 * Valid until the next `gdisc_*` call on the same thread.
 */
const char *gdisc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gdisc_version(void);

/**
 * Creates a model. Matrices are row-major `[a11, a12, a21, a22]`;
 * `init_mean` is `[E Y0, E W0]`.
 *
 * # Safety
 * Matrix pointers must reference 4 doubles, `init_mean` 2 doubles, and
 * `out` a writable handle slot.
 */
enum GdiscStatus gdisc_model_new(const double *beta,
                                 const double *sigma,
                                 const double *init_mean,
                                 const double *init_cov,
                                 double horizon,
                                 struct GdiscModel **out);

/**
 * Reference model with the given instantaneous-effect parameter `beta12`.
 *
 * # Safety
 * `out` must be a writable handle slot.
 */
enum GdiscStatus gdisc_model_reference(double beta12, struct GdiscModel **out);

/**
 * # Safety
 * `model` must be NULL or a handle from this library not yet freed.
 */
void gdisc_model_free(struct GdiscModel *model);

/**
 * # Safety
 * `out` must be a writable handle slot.
 */
enum GdiscStatus gdisc_plan_constant(double value, struct GdiscPlan **out);

/**
 * Step plan taking `values[i]` on `[breakpoints[i], breakpoints[i+1])`.
 *
 * # Safety
 * Both arrays must hold `len` doubles; `out` must be a writable handle slot.
 */
enum GdiscStatus gdisc_plan_piecewise(const double *breakpoints,
                                      const double *values,
                                      size_t len,
                                      struct GdiscPlan **out);

/**
 * Plan tabulated at `times`, held constant between knots.
 *
 * # Safety
 * Both arrays must hold `len` doubles; `out` must be a writable handle slot.
 */
enum GdiscStatus gdisc_plan_tabulated(const double *times,
                                      const double *values,
                                      size_t len,
                                      struct GdiscPlan **out);

/**
 * # Safety
 * `plan` must be NULL or a handle from this library not yet freed.
 */
void gdisc_plan_free(struct GdiscPlan *plan);

/**
 * `e^{t m}` for a row-major 2×2 matrix.
 *
 * # Safety
 * `m` and `out` must each reference 4 doubles.
 */
enum GdiscStatus gdisc_matexp(const double *m, double t, double *out);

/**
 * True counterfactual mean `E[Y_T]` under the plan.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum GdiscStatus gdisc_true_eta(const struct GdiscModel *model,
                                const struct GdiscPlan *plan,
                                double *out);

/**
 * Discrete-time g-formula functional on a grid of `steps` intervals.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum GdiscStatus gdisc_theta_g(const struct GdiscModel *model,
                               const struct GdiscPlan *plan,
                               size_t steps,
                               double *out);

/**
 * Identification bias `θ^g_J − η`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum GdiscStatus gdisc_identification_bias(const struct GdiscModel *model,
                                           const struct GdiscPlan *plan,
                                           size_t steps,
                                           double *out);

/**
 * Naive-adjustment estimand at `steps >= 2` and its limit as steps grow.
 *
 * # Safety
 * Handles must be live; output pointers must be writable.
 */
enum GdiscStatus gdisc_theta_naive(const struct GdiscModel *model,
                                   const struct GdiscPlan *plan,
                                   size_t steps,
                                   double *out_finite,
                                   double *out_limit);

/**
 * Exact observational panel of `n` units on `steps` intervals over `[0, T]`.
 *
 * # Safety
 * `model` must be live; `out` must be a writable handle slot.
 */
enum GdiscStatus gdisc_simulate_panel(const struct GdiscModel *model,
                                      size_t steps,
                                      size_t n,
                                      uint64_t seed,
                                      struct GdiscPanel **out);

/**
 * Counterfactual panel under `plan`; the W column holds plan values.
 *
 * # Safety
 * Handles must be live; `out` must be a writable handle slot.
 */
enum GdiscStatus gdisc_simulate_counterfactual(const struct GdiscModel *model,
                                               const struct GdiscPlan *plan,
                                               size_t steps,
                                               size_t n,
                                               uint64_t seed,
                                               struct GdiscPanel **out);

/**
 * Number of units, or 0 for NULL.
 *
 * # Safety
 * `panel` must be NULL or live.
 */
size_t gdisc_panel_units(const struct GdiscPanel *panel);

/**
 * Number of grid intervals `J`, or 0 for NULL.
 *
 * # Safety
 * `panel` must be NULL or live.
 */
size_t gdisc_panel_steps(const struct GdiscPanel *panel);

/**
 * Copies values unit-major as `[Y0, W0, Y1, W1, ...]`; `len` must equal
 * `units * (steps + 1) * 2`.
 *
 * # Safety
 * `panel` must be live; `buf` must hold `len` doubles.
 */
enum GdiscStatus gdisc_panel_copy_values(const struct GdiscPanel *panel, double *buf, size_t len);

/**
 * Writes the panel as `unit,k,t,Y,W` CSV.
 *
 * # Safety
 * `panel` must be live; `path` must be a NUL-terminated UTF-8 string.
 */
enum GdiscStatus gdisc_panel_write_csv(const struct GdiscPanel *panel, const char *path);

/**
 * # Safety
 * `panel` must be NULL or a handle from this library not yet freed.
 */
void gdisc_panel_free(struct GdiscPanel *panel);

/**
 * Plug-in g-formula contrast between two plans.
 *
 * # Safety
 * Handles must be live; `out_tau` must be writable.
 */
enum GdiscStatus gdisc_estimate_contrast(const struct GdiscPanel *panel,
                                         const struct GdiscPlan *plan_star,
                                         const struct GdiscPlan *plan_base,
                                         double *out_tau);

/**
 * Discretization sensitivity on a panel with an even number of steps.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum GdiscStatus gdisc_zeta(const struct GdiscPanel *panel,
                            const struct GdiscPlan *plan_star,
                            const struct GdiscPlan *plan_base,
                            size_t replicates,
                            double alpha,
                            uint64_t seed,
                            struct GdiscZetaReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GDISC_H */
