#ifndef GEOGATE_H
#define GEOGATE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum GgStatus {
  GG_STATUS_OK = 0,
  /**
   * A required pointer was null.
   */
  GG_STATUS_NULL_POINTER = 1,
  /**
   * Bad argument or configuration (exit code 1 on the command line).
   */
  GG_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Solver or physics failure (exit code 2 on the command line).
   */
  GG_STATUS_PHYSICS_FAILURE = 3,
  GG_STATUS_IO = 4,
  /**
   * An index was outside the object.
   */
  GG_STATUS_OUT_OF_BOUNDS = 5,
  GG_STATUS_PANIC = 6,
} GgStatus;

/**
 * Two-dimensional fidelity sweep.
 */
typedef struct GgGrid GgGrid;

/**
 * Sampled control pulse.
 */
typedef struct GgPulse GgPulse;

/**
 * Condition-(i), (ii) or (iii) recipe for a single-qubit gate.
 */
typedef struct GgRecipe GgRecipe;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gg_version(void);

/**
 * Length in bytes of the last error message on this thread, without the
 * terminating NUL; 0 when the last call succeeded.
 */
size_t gg_last_error_length(void);

/**
 * Copy the last error message into `buf` (NUL-terminated, truncated to
 * `len - 1` bytes). Returns the number of bytes written without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t gg_last_error_message(char *buf, size_t len);

/**
 * Bessel function `J_k(x)` for `|k| <= 64`, `|x| <= 50`.
 *
 * # Safety
 * `value` must be null or writable.
 */
enum GgStatus gg_bessel_j(int32_t k, double x, double *value);

/**
 * Condition-(i) recipe with start latitude `chi0` and intermediate
 * latitudes `chi1`, `chi2` (radians). `gate` uses the notation `h`,
 * `rx:pi`, `rz:pi/4`.
 *
 * # Safety
 * `gate` must be a NUL-terminated string; `recipe` must be writable.
 */
enum GgStatus gg_recipe_condition_i(const char *gate,
                                    double chi0,
                                    double chi1,
                                    double chi2,
                                    struct GgRecipe **recipe);

/**
 * Condition-(ii) recipe found by the built-in solver.
 *
 * # Safety
 * As [`gg_recipe_condition_i`].
 */
enum GgStatus gg_recipe_condition_ii(const char *gate, struct GgRecipe **recipe);

/**
 * Condition-(iii) recipe starting at latitude `chi0`.
 *
 * # Safety
 * As [`gg_recipe_condition_i`].
 */
enum GgStatus gg_recipe_condition_iii(const char *gate, double chi0, struct GgRecipe **recipe);

/**
 * Infidelity of the recipe's ideal boundary operator against its target.
 *
 * # Safety
 * `recipe` must come from a `gg_recipe_*` constructor; `value` writable.
 */
enum GgStatus gg_recipe_infidelity(const struct GgRecipe *recipe, double *value);

/**
 * Release a recipe; null is ignored.
 *
 * # Safety
 * `recipe` must be null or an unreleased handle.
 */
void gg_recipe_free(struct GgRecipe *recipe);

/**
 * Synthesize the pulse of a recipe. `omega_max` is in rad/µs,
 * `detuning_ratio >= 1` bounds the latitude detuning.
 *
 * # Safety
 * `recipe` must be a live handle; `pulse` writable.
 */
enum GgStatus gg_recipe_synthesize(const struct GgRecipe *recipe,
                                   double omega_max,
                                   size_t samples_per_segment,
                                   double detuning_ratio,
                                   struct GgPulse **pulse);

/**
 * Number of samples and sample spacing (µs) of a pulse.
 *
 * # Safety
 * `pulse` must be a live handle; `n` and `dt` writable.
 */
enum GgStatus gg_pulse_shape(const struct GgPulse *pulse, size_t *n, double *dt);

/**
 * Copy the `(omega, phi, delta)` samples into caller arrays of length `len`,
 * which must equal the pulse length. Any array may be null to skip it.
 *
 * # Safety
 * Non-null arrays must hold `len` writable doubles.
 */
enum GgStatus gg_pulse_samples(const struct GgPulse *pulse,
                               double *omega,
                               double *phi,
                               double *delta,
                               size_t len);

/**
 * Propagate a pulse on a two-level system and compare with `gate`.
 *
 * # Safety
 * `pulse` must be a live handle, `gate` a NUL-terminated string, `value`
 * writable.
 */
enum GgStatus gg_pulse_gate_infidelity(const struct GgPulse *pulse,
                                       const char *gate,
                                       double *value);

/**
 * Write a pulse as JSON.
 *
 * # Safety
 * `pulse` must be a live handle, `path` a NUL-terminated string.
 */
enum GgStatus gg_pulse_write_json(const struct GgPulse *pulse, const char *path);

/**
 * Release a pulse; null is ignored.
 *
 * # Safety
 * `pulse` must be null or an unreleased handle.
 */
void gg_pulse_free(struct GgPulse *pulse);

/**
 * Fidelity over the intermediate latitudes of condition-(i) recipes for
 * `gate` under systematic and ZZ errors of relative `strength`.
 *
 * # Safety
 * `gate` must be a NUL-terminated string; `grid` writable.
 */
enum GgStatus gg_sweep_intermediate(const char *gate,
                                    size_t grid_n,
                                    double strength,
                                    uint64_t seed,
                                    double omega_max,
                                    size_t samples_per_segment,
                                    double detuning_ratio,
                                    struct GgGrid **grid);

/**
 * Read a grid from its CSV file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `grid` writable.
 */
enum GgStatus gg_grid_read_csv(const char *path, struct GgGrid **grid);

/**
 * Number of points on each axis.
 *
 * # Safety
 * `grid` must be a live handle; `n1`, `n2` writable.
 */
enum GgStatus gg_grid_shape(const struct GgGrid *grid, size_t *n1, size_t *n2);

/**
 * Axis coordinates and fidelity of cell `(i, j)`.
 *
 * # Safety
 * `grid` must be a live handle; output pointers writable or null.
 */
enum GgStatus gg_grid_cell(const struct GgGrid *grid,
                           size_t i,
                           size_t j,
                           double *a1,
                           double *a2,
                           double *fidelity);

/**
 * Best cell of the grid.
 *
 * # Safety
 * `grid` must be a live handle; output pointers writable or null.
 */
enum GgStatus gg_grid_argmax(const struct GgGrid *grid, size_t *i, size_t *j, double *fidelity);

/**
 * Write the grid as CSV next to its JSON manifest.
 *
 * # Safety
 * `grid` must be a live handle, `path` a NUL-terminated string.
 */
enum GgStatus gg_grid_write_csv(const struct GgGrid *grid, const char *path);

/**
 * Release a grid; null is ignored.
 *
 * # Safety
 * `grid` must be null or an unreleased handle.
 */
void gg_grid_free(struct GgGrid *grid);

/**
 * iSWAP fidelity of the default two-transmon device at qubit splitting
 * `delta1` (rad/µs) and peak modulation depth `beta`. Dissipative runs are
 * scored over product states, closed runs by the trace fidelity; both allow
 * local Z corrections.
 *
 * # Safety
 * `fidelity` and `leakage` must be writable or null.
 */
enum GgStatus gg_iswap_fidelity(double delta1,
                                double beta,
                                bool with_decoherence,
                                double *fidelity,
                                double *leakage);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEOGATE_H */
