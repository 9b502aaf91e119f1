#ifndef POVAR_H
#define POVAR_H

/* Generated by cbindgen from the povar-capi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Opaque calibrated-solver handle.
 */
typedef struct PovarSolver PovarSolver;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *povar_version(void);

/**
 * Message describing the most recent failure on this thread ("" if none).
 * The pointer stays valid until the next povar call on the same thread.
 */
const char *povar_last_error(void);

/**
 * Error class of the most recent failure on this thread (0 if none).
 */
int povar_last_error_code(void);

/**
 * Calibrate a solver from a JSON run configuration. Returns NULL on
 * failure; inspect `povar_last_error`/`povar_last_error_code`.
 *
 * # Safety
 * `config_json` must be a valid NUL-terminated UTF-8 string.
 */
struct PovarSolver *povar_solver_new_json(const char *config_json);

/**
 * Destroy a handle obtained from `povar_solver_new_json`. NULL is a no-op.
 *
 * # Safety
 * `solver` must be NULL or a pointer previously returned by
 * `povar_solver_new_json` that has not been freed yet.
 */
void povar_solver_free(struct PovarSolver *solver);

/**
 * Budget multiplier λ₁. NaN on NULL.
 *
 * # Safety
 * `solver` must be NULL or a live handle.
 */
double povar_solver_lambda1(const struct PovarSolver *solver);

/**
 * Lower threshold ξ̲ = U′(L)/λ₁ (+∞ when the floor is zero). NaN on NULL.
 *
 * # Safety
 * `solver` must be NULL or a live handle.
 */
double povar_solver_xi_lower(const struct PovarSolver *solver);

/**
 * Upper threshold ξ̄; NaN when the solution has none (or on NULL).
 *
 * # Safety
 * `solver` must be NULL or a live handle.
 */
double povar_solver_xi_upper(const struct PovarSolver *solver);

/**
 * Residual of the budget identity at the calibrated multiplier. NaN on NULL.
 *
 * # Safety
 * `solver` must be NULL or a live handle.
 */
double povar_solver_budget_residual(const struct PovarSolver *solver);

/**
 * Regime of the calibrated solution: 0 Merton, 1 constrained, 2 insurance;
 * -1 on NULL.
 *
 * # Safety
 * `solver` must be NULL or a live handle.
 */
int povar_solver_regime(const struct PovarSolver *solver);

/**
 * Number of per-belief constraint probabilities available.
 *
 * # Safety
 * `solver` must be NULL or a live handle.
 */
int povar_solver_constraint_count(const struct PovarSolver *solver);

/**
 * P̃ᵢ(X*_T ≥ L) for belief index `index`; NaN when out of range or NULL.
 *
 * # Safety
 * `solver` must be NULL or a live handle.
 */
double povar_solver_constraint_prob(const struct PovarSolver *solver, int index);

/**
 * Optimal terminal wealth X*(ξ) at state price `xi`.
 *
 * # Safety
 * `solver` must be NULL or a live handle; `out` must be NULL or valid for
 * one f64 write.
 */
int povar_terminal_wealth(const struct PovarSolver *solver, double xi, double *out);

/**
 * Wealth h(t, y) of the optimal strategy (power utility only).
 *
 * # Safety
 * `solver` must be NULL or a live handle; `out` must be NULL or valid for
 * one f64 write.
 */
int povar_wealth(const struct PovarSolver *solver, double t, double y, double *out);

/**
 * Optimal invested amount π*(t, y) (power utility only; refuses t closer to
 * the horizon than 1e-6).
 *
 * # Safety
 * `solver` must be NULL or a live handle; `out` must be NULL or valid for
 * one f64 write.
 */
int povar_pi_star(const struct PovarSolver *solver, double t, double y, double *out);

/**
 * Invested fraction π*(t, y)/h(t, y) (power utility only).
 *
 * # Safety
 * `solver` must be NULL or a live handle; `out` must be NULL or valid for
 * one f64 write.
 */
int povar_pi_fraction(const struct PovarSolver *solver, double t, double y, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POVAR_H */
