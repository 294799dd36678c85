#ifndef TFCH_H
#define TFCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Source term selector for [`tfch_solver_new`].
 */
typedef enum TfchForcing {
  TFCH_FORCING_NONE = 0,
  TFCH_FORCING_MANUFACTURED = 1,
} TfchForcing;

/**
 * Time discretisation selector for [`tfch_solver_new`].
 */
typedef enum TfchScheme {
  TFCH_SCHEME_FBDF2 = 0,
  TFCH_SCHEME_BDF2 = 1,
} TfchScheme;

/**
 * Status codes returned by every fallible function.
 */
typedef enum TfchStatus {
  TFCH_STATUS_OK = 0,
  TFCH_STATUS_NULL_POINTER = 1,
  TFCH_STATUS_INVALID_ARGUMENT = 2,
  TFCH_STATUS_DOMAIN = 3,
  TFCH_STATUS_MESH = 4,
  TFCH_STATUS_FIXED_POINT = 5,
  TFCH_STATUS_NO_CONVERGENCE = 6,
  TFCH_STATUS_BUFFER_TOO_SMALL = 7,
  TFCH_STATUS_IO = 8,
  TFCH_STATUS_PANIC = 9,
} TfchStatus;

/**
 * Opaque time mesh.
 */
typedef struct TfchMesh TfchMesh;

/**
 * Opaque solver state.
 */
typedef struct TfchSolver TfchSolver;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the last error message of this thread (without the
 * terminating NUL); 0 when the last call succeeded.
 */
size_t tfch_last_error_length(void);

/**
 * Copies the last error message of this thread into `buf` as a
 * NUL-terminated string, truncating to `len - 1` bytes. Returns the full
 * message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t tfch_last_error_message(char *buf, size_t len);

/**
 * Lower ratio bound `R_* ~ 0.4753`.
 */
double tfch_ratio_lower_bound(void);

/**
 * Upper ratio bound `r*(alpha)`, `alpha in (0, 1]`.
 *
 * # Safety
 * `out` must be null or point to a writable `double`.
 */
enum TfchStatus tfch_r_star(double alpha, double *out);

/**
 * Largest admissible grading exponent `gamma_max(alpha)`.
 *
 * # Safety
 * `out` must be null or point to a writable `double`.
 */
enum TfchStatus tfch_gamma_max(double alpha, double *out);

/**
 * Mesh from `n` positive steps.
 *
 * # Safety
 * `steps` must point to `n` doubles; `out` to a writable handle slot.
 */
enum TfchStatus tfch_mesh_from_steps(const double *steps, size_t n, struct TfchMesh **out);

/**
 * Graded mesh `t_k = t_end (k/n)^gamma`.
 *
 * # Safety
 * `out` must point to a writable handle slot.
 */
enum TfchStatus tfch_mesh_graded(double t_end, size_t n, double gamma, struct TfchMesh **out);

/**
 * Releases a mesh; null is ignored.
 *
 * # Safety
 * `mesh` must come from a mesh constructor and not be used afterwards.
 */
void tfch_mesh_free(struct TfchMesh *mesh);

/**
 * Number of steps; 0 for a null handle.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t tfch_mesh_num_steps(const struct TfchMesh *mesh);

/**
 * Writes the compact FBDF2 row `B^{(n)}_0 .. B^{(n)}_{n-1}` (lag-indexed)
 * into `out`, which must hold at least `n` values.
 *
 * # Safety
 * `mesh` must be a live handle; `out` must point to `len` writable doubles.
 */
enum TfchStatus tfch_mesh_kernel_row(const struct TfchMesh *mesh,
                                     double alpha,
                                     size_t n,
                                     double *out,
                                     size_t len);

/**
 * FBDF2 approximation of the Caputo derivative at level `n` of the
 * values `v^0 .. v^N` (`len = N + 1`).
 *
 * # Safety
 * `mesh` must be a live handle; `values` must point to `len` doubles and
 * `out` to a writable double.
 */
enum TfchStatus tfch_caputo(const struct TfchMesh *mesh,
                            double alpha,
                            const double *values,
                            size_t len,
                            size_t n,
                            double *out);

/**
 * Creates a solver on an `mx x my` periodic grid of size `lx x ly` with
 * initial data `phi0` (row-major, `mx * my` values). Fixed-point
 * tolerance 1e-12, at most 500 iterations, automatic stabilisation.
 * `scheme` takes a [`TfchScheme`] value and `forcing` a [`TfchForcing`]
 * value; anything else is rejected with `TFCH_STATUS_INVALID_ARGUMENT`.
 *
 * # Safety
 * `phi0` must point to `len` doubles; `out` to a writable handle slot.
 */
enum TfchStatus tfch_solver_new(double alpha,
                                double kappa,
                                double eps,
                                size_t mx,
                                size_t my,
                                double lx,
                                double ly,
                                const double *phi0,
                                size_t len,
                                int32_t scheme,
                                int32_t forcing,
                                struct TfchSolver **out);

/**
 * Releases a solver; null is ignored.
 *
 * # Safety
 * `solver` must come from [`tfch_solver_new`] and not be used afterwards.
 */
void tfch_solver_free(struct TfchSolver *solver);

/**
 * Advances one level with step `tau`. On failure the solver is unchanged.
 *
 * # Safety
 * `solver` must be a live handle.
 */
enum TfchStatus tfch_solver_step(struct TfchSolver *solver, double tau);

/**
 * Current level `n`; 0 for a null handle.
 *
 * # Safety
 * `solver` must be null or a live handle.
 */
size_t tfch_solver_level(const struct TfchSolver *solver);

/**
 * Current time `t_n`; 0 for a null handle.
 *
 * # Safety
 * `solver` must be null or a live handle.
 */
double tfch_solver_time(const struct TfchSolver *solver);

/**
 * Copies the current field (row-major, `mx * my` values) into `out`.
 *
 * # Safety
 * `solver` must be a live handle; `out` must point to `len` writable doubles.
 */
enum TfchStatus tfch_solver_field(const struct TfchSolver *solver, double *out, size_t len);

/**
 * Ginzburg-Landau energy, mean (volume) and, when already known, the
 * modified energy of the current level. `e_alpha` receives NaN while it
 * is pending (it needs the next step ratio).
 *
 * # Safety
 * `solver` must be a live handle; the out-pointers must be writable.
 */
enum TfchStatus tfch_solver_diagnostics(const struct TfchSolver *solver,
                                        double *energy,
                                        double *volume,
                                        double *e_alpha);

/**
 * Modified energy of the previous level `n - 1` (known once level `n`
 * exists); NaN when unavailable.
 *
 * # Safety
 * `solver` must be a live handle; `out` must be writable.
 */
enum TfchStatus tfch_solver_previous_e_alpha(const struct TfchSolver *solver, double *out);

/**
 * Runs the randomized kernel/bridging/DGS suites; `all_passed` receives
 * 1 when every suite passed and 0 otherwise.
 *
 * # Safety
 * `all_passed` must be writable.
 */
enum TfchStatus tfch_verify(uint64_t seed, size_t trials, size_t max_n, int32_t *all_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TFCH_H */
