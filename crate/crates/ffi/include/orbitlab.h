#ifndef ORBITLAB_H
#define ORBITLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OrbitlabStatus {
  ORBITLAB_STATUS_OK = 0,
  ORBITLAB_STATUS_NULL_POINTER = 1,
  ORBITLAB_STATUS_INVALID_UTF8 = 2,
  ORBITLAB_STATUS_PARSE = 3,
  ORBITLAB_STATUS_SCHEMA = 4,
  ORBITLAB_STATUS_INVALID_INPUT = 5,
  ORBITLAB_STATUS_SINGULAR = 6,
  ORBITLAB_STATUS_BUDGET_EXCEEDED = 7,
  ORBITLAB_STATUS_NOT_P_BOUNDED = 8,
  ORBITLAB_STATUS_NOT_IN_SPAN = 9,
  ORBITLAB_STATUS_EXHAUSTED = 10,
  ORBITLAB_STATUS_NOT_FOUND = 11,
  /**
   * Any other documented failure of the core library.
   */
  ORBITLAB_STATUS_FAILED = 12,
  ORBITLAB_STATUS_PANIC = 13,
} OrbitlabStatus;

/**
 * Opaque handle to a finite-rank operator `base + Σ f⊗v` over exact rationals.
 */
typedef struct OrbitlabOperator OrbitlabOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread; do not free.
 */
const char *orbitlab_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *orbitlab_version(void);

/**
 * Parses `{"base": "identity"|"zero", "terms": [{"f": [...], "v": [...]}]}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum OrbitlabStatus orbitlab_operator_from_json(const char *json, struct OrbitlabOperator **out);

/**
 * # Safety
 * `op` must be a live handle; `out` must be writable. Free the result with
 * [`orbitlab_string_free`].
 */
enum OrbitlabStatus orbitlab_operator_to_json(const struct OrbitlabOperator *op, char **out);

/**
 * Applies the operator to a vector given as a JSON list of `"index:value"` pairs;
 * the image comes back in the same format.
 *
 * # Safety
 * `op` must be a live handle, `vector_json` NUL-terminated, `out` writable.
 */
enum OrbitlabStatus orbitlab_operator_apply(const struct OrbitlabOperator *op,
                                            const char *vector_json,
                                            char **out);

/**
 * Exact inverse of an identity-based operator.
 *
 * # Safety
 * `op` must be a live handle; `out` must be writable.
 */
enum OrbitlabStatus orbitlab_operator_invert(const struct OrbitlabOperator *op,
                                             struct OrbitlabOperator **out);

/**
 * `a ∘ b`.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be writable.
 */
enum OrbitlabStatus orbitlab_operator_compose(const struct OrbitlabOperator *a,
                                              const struct OrbitlabOperator *b,
                                              struct OrbitlabOperator **out);

/**
 * # Safety
 * `op` must be NULL or a handle not yet freed.
 */
void orbitlab_operator_free(struct OrbitlabOperator *op);

/**
 * Runs one scenario document and writes the JSON report to `out`. `passed`,
 * when not NULL, receives whether every check of the report passed; a failing
 * check is not an error status.
 *
 * # Safety
 * `scenario_json` must be NUL-terminated, `out` writable, `passed` NULL or writable.
 */
enum OrbitlabStatus orbitlab_run_scenario(const char *scenario_json, char **out, bool *passed);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void orbitlab_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ORBITLAB_H */
