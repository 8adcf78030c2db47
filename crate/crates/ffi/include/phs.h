#ifndef PHS_H
#define PHS_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of the C interface.
 */
typedef enum PhsStatus {
  /**
   * Success.
   */
  PhsStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  PhsStatus_NullPointer = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  PhsStatus_InvalidUtf8 = 2,
  /**
   * The model or its configuration is invalid.
   */
  PhsStatus_InvalidModel = 3,
  /**
   * A dissipativity or passivity hypothesis fails.
   */
  PhsStatus_NotDissipative = 4,
  /**
   * A numerical routine failed.
   */
  PhsStatus_NumericalFailure = 5,
  /**
   * An argument is out of range.
   */
  PhsStatus_InvalidArgument = 6,
  /**
   * An internal panic was caught.
   */
  PhsStatus_Panic = 7,
} PhsStatus;

/**
 * Opaque model handle.
 */
typedef struct PhsModel PhsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null if none occurred.
 *
 * # Safety
 * The returned pointer stays valid until the next failing call on the same thread.
 */
const char *phs_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *phs_version(void);

/**
 * Parses a JSON model document into a new handle.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer. On success the
 * caller owns `*out` and must release it with `phs_model_free`.
 */
enum PhsStatus phs_model_from_json(const char *json, struct PhsModel **out);

/**
 * Builds a preset. `params_json` may be null or a JSON object such as `{"k": 2}`.
 *
 * # Safety
 * `name` must be a NUL-terminated string, `params_json` null or NUL-terminated, and
 * `out` a valid pointer. The caller owns `*out` on success.
 */
enum PhsStatus phs_model_from_preset(const char *name,
                                     const char *params_json,
                                     struct PhsModel **out);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle returned by this library that was not freed before.
 */
void phs_model_free(struct PhsModel *model);

/**
 * Writes the order `N` and the state dimension `d`.
 *
 * # Safety
 * `model` must be a live handle; `n` and `d` valid pointers.
 */
enum PhsStatus phs_model_dims(const struct PhsModel *model, size_t *n, size_t *d);

/**
 * Generation certificate and stability class.
 *
 * `*contraction` is 1 when the boundary condition generates a contraction semigroup,
 * else 0. `*classification` is 0 (inconclusive), 1 (asymptotic), 2 (exponential),
 * or −1 when there is no contraction.
 *
 * # Safety
 * `model` must be a live handle; the output pointers must be valid.
 */
enum PhsStatus phs_certify(const struct PhsModel *model,
                           int32_t *contraction,
                           int32_t *classification);

/**
 * JSON certification report. Free the string with `phs_string_free`.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum PhsStatus phs_certify_report(const struct PhsModel *model, char **out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string returned by this library that was not freed before.
 */
void phs_string_free(char *s);

/**
 * Boundary dissipation coefficient for a trace set such as `"0:0,0:1"`.
 *
 * # Safety
 * `model` must be a live handle, `traces` NUL-terminated and `out` valid.
 */
enum PhsStatus phs_kappa(const struct PhsModel *model, const char *traces, double *out);

/**
 * Spectral abscissa of the collocation generator of degree `grid_n`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid.
 */
enum PhsStatus phs_spectral_abscissa(const struct PhsModel *model, size_t grid_n, double *out);

/**
 * Resolvent norm at `iω` of the collocation generator; `+∞` when `iω` is a discrete eigenvalue.
 *
 * # Safety
 * `model` must be a live handle and `out` valid.
 */
enum PhsStatus phs_resolvent_norm(const struct PhsModel *model,
                                  size_t grid_n,
                                  double omega,
                                  double *out);

/**
 * Closed-form Schrödinger resolvent `x = (iβ − A)^{−1} 𝟙` at `ζ`.
 *
 * # Safety
 * `re` and `im` must be valid pointers.
 */
enum PhsStatus phs_schrodinger_oracle(double beta,
                                      double k,
                                      double alpha,
                                      double zeta,
                                      double *re,
                                      double *im);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHS_H */
