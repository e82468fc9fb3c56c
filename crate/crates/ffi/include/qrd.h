#ifndef QRD_H
#define QRD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Return code of every fallible entry point.
typedef enum QrdStatus {
  QRD_STATUS_OK = 0,
  QRD_STATUS_NULL_POINTER = 1,
  QRD_STATUS_INVALID_ARGUMENT = 2,
  QRD_STATUS_NOT_HERMITIAN = 3,
  QRD_STATUS_NOT_DENSITY = 4,
  QRD_STATUS_DIMENSION_MISMATCH = 5,
  QRD_STATUS_INFEASIBLE = 6,
  QRD_STATUS_NUMERICAL = 7,
  QRD_STATUS_BUFFER_TOO_SMALL = 8,
  QRD_STATUS_PANIC = 9,
} QrdStatus;

typedef enum QrdPath {
  QRD_PATH_DENSE = 0,
  QRD_PATH_SYMMETRIC = 1,
  QRD_PATH_DENSE_FALLBACK = 2,
} QrdPath;

// Termination state of a solve.
typedef enum QrdSolveStatus {
  QRD_SOLVE_STATUS_CONVERGED = 0,
  QRD_SOLVE_STATUS_MAX_ITER_REACHED = 1,
  QRD_SOLVE_STATUS_RATE_ZERO_SHORTCUT = 2,
} QrdSolveStatus;

// Opaque problem instance.
typedef struct QrdInstance QrdInstance;

// Opaque solver result.
typedef struct QrdResult QrdResult;

// Solver settings; obtain defaults from [`qrd_config_default`].
typedef struct QrdConfig {
  size_t max_iter;
  double tol;
  double alpha;
  double newton_tol;
  size_t newton_max;
} QrdConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static, NUL-terminated version string.
const char *qrd_version(void);

// Message of the last failed call on this thread. The pointer stays valid
// until the next failing call on the same thread.
const char *qrd_last_error_message(void);

struct QrdConfig qrd_config_default(void);

// Closed-form rate in nats of the maximally mixed source.
double qrd_analytic_uniform_rd(size_t n, double d);

// Maximally mixed source of dimension `n` with the entanglement-fidelity
// distortion.
//
// # Safety
// `out` must be valid for writing one pointer.
enum QrdStatus qrd_instance_new_uniform(size_t n, double d, struct QrdInstance **out);

// Hilbert-Schmidt random source with the entanglement-fidelity distortion.
//
// # Safety
// `out` must be valid for writing one pointer.
enum QrdStatus qrd_instance_new_random(size_t n, uint64_t seed, double d, struct QrdInstance **out);

// Source given as an `n × n` density matrix. A null `delta_re` selects the
// entanglement-fidelity distortion; otherwise `delta_*` hold an
// `(n·m) × (n·m)` distortion matrix.
//
// # Safety
// `rho_re` points to `n*n` doubles and `rho_im` is null or does too;
// `delta_re`/`delta_im` likewise for `(n*m)^2`; `out` is writable.
enum QrdStatus qrd_instance_new(size_t n,
                                const double *rho_re,
                                const double *rho_im,
                                size_t m,
                                const double *delta_re,
                                const double *delta_im,
                                double d,
                                struct QrdInstance **out);

// # Safety
// `inst` is null or a handle from a `qrd_instance_new*` call, freed once.
void qrd_instance_free(struct QrdInstance *inst);

// # Safety
// `inst` is a valid instance handle.
enum QrdStatus qrd_instance_dims(const struct QrdInstance *inst, size_t *n, size_t *m);

// Solves `inst` on the requested path. A null `config` uses the defaults.
// Non-convergence is not an error: inspect [`qrd_result_status`].
//
// # Safety
// `inst` is a valid instance handle, `config` is null or valid, `out` is
// writable.
enum QrdStatus qrd_solve(const struct QrdInstance *inst,
                         const struct QrdConfig *config,
                         enum QrdPath path,
                         struct QrdResult **out);

// # Safety
// `res` is null or a handle from [`qrd_solve`], freed once.
void qrd_result_free(struct QrdResult *res);

// Rate in nats, or NaN for a null handle.
//
// # Safety
// `res` is null or a valid result handle.
double qrd_result_rate(const struct QrdResult *res);

// Final multiplier β (`+inf` at `D = 0`), or NaN for a null handle.
//
// # Safety
// `res` is null or a valid result handle.
double qrd_result_beta(const struct QrdResult *res);

// # Safety
// `res` is null or a valid result handle.
double qrd_result_final_e_opt(const struct QrdResult *res);

// # Safety
// `res` is null or a valid result handle.
size_t qrd_result_iterations(const struct QrdResult *res);

// # Safety
// `res` is a valid result handle; `out` is writable.
enum QrdStatus qrd_result_status(const struct QrdResult *res, enum QrdSolveStatus *out);

// # Safety
// `res` is a valid result handle; `out` is writable.
enum QrdStatus qrd_result_path(const struct QrdResult *res, enum QrdPath *out);

// Copies the `m × m` output state `σ_B` in row-major order.
//
// # Safety
// `res` is valid; `re` and `im` point to at least `len` doubles.
enum QrdStatus qrd_result_sigma_b(const struct QrdResult *res, double *re, double *im, size_t len);

// Copies the `n × n` multiplier `exp(-Λ_R)`.
//
// # Safety
// `res` is valid; `re` and `im` point to at least `len` doubles.
enum QrdStatus qrd_result_exp_neg_lambda(const struct QrdResult *res,
                                         double *re,
                                         double *im,
                                         size_t len);

// Copies the `(n·m) × (n·m)` joint state. Symmetric-path results are
// expanded to dense form, which costs `O(n⁶)` memory traffic.
//
// # Safety
// `res` is valid; `re` and `im` point to at least `len` doubles.
enum QrdStatus qrd_result_rho_rb(const struct QrdResult *res, double *re, double *im, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QRD_H */
