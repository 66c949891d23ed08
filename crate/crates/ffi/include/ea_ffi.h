#ifndef EA_FFI_H
#define EA_FFI_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EaStatus {
  EA_STATUS_OK = 0,
  EA_STATUS_NULL_POINTER = 1,
  EA_STATUS_INVALID_UTF8 = 2,
  EA_STATUS_PARSE_ERROR = 3,
  EA_STATUS_INVALID_INPUT = 4,
  EA_STATUS_DUPLICATE_ID = 5,
  EA_STATUS_UNKNOWN_ID = 6,
  EA_STATUS_DUPLICATE_EDGE = 7,
  EA_STATUS_CYCLE_INTRODUCED = 8,
  EA_STATUS_ILLEGAL_ATTACHMENT = 9,
  EA_STATUS_ALREADY_TERMINATED = 10,
  EA_STATUS_PRECONDITION_VIOLATED = 11,
  EA_STATUS_STATS_ERROR = 12,
  EA_STATUS_PANIC = 99,
} EaStatus;

/**
 * Opaque argument graph.
 */
typedef struct EaArgumentHandle EaArgumentHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the last failure on this thread, or NULL after a success.
 * The pointer stays valid until the next `ea_*` call on the same thread.
 */
const char *ea_last_error_message(void);

/**
 * Releases a string returned through an `out` parameter. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void ea_string_free(char *s);

/**
 * New empty argument. Never NULL.
 */
struct EaArgumentHandle *ea_argument_new(void);

/**
 * Parses ea-text into a new handle stored in `*out`.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum EaStatus ea_argument_parse(const char *text, struct EaArgumentHandle **out);

/**
 * Releases a handle. NULL is ignored.
 *
 * # Safety
 * `h` must come from this library and not have been freed already.
 */
void ea_argument_free(struct EaArgumentHandle *h);

/**
 * Number of elements; 0 for NULL.
 *
 * # Safety
 * `h` must be NULL or a live handle.
 */
size_t ea_argument_element_count(const struct EaArgumentHandle *h);

/**
 * Adds an element. `kind` is a full kind name (`Claim`, `RebuttingDefeater`, ...)
 * or a short one (`Rebutting`, ...).
 *
 * # Safety
 * `h` must be a live handle; string arguments must be NUL-terminated.
 */
enum EaStatus ea_argument_add_element(struct EaArgumentHandle *h,
                                      const char *id,
                                      const char *kind,
                                      const char *text);

/**
 * Adds the edge `parent -> child`.
 *
 * # Safety
 * `h` must be a live handle; string arguments must be NUL-terminated.
 */
enum EaStatus ea_argument_connect(struct EaArgumentHandle *h,
                                  const char *parent,
                                  const char *child);

/**
 * Attaches `AssumedOK` or `IsOK` to an element.
 *
 * # Safety
 * `h` must be a live handle; string arguments must be NUL-terminated.
 */
enum EaStatus ea_argument_attach_terminator(struct EaArgumentHandle *h,
                                            const char *id,
                                            const char *terminator);

/**
 * Canonical ea-text.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum EaStatus ea_argument_serialize(const struct EaArgumentHandle *h, char **out);

/**
 * Diagnostics as a JSON array.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum EaStatus ea_argument_validate_json(const struct EaArgumentHandle *h, char **out);

/**
 * Coverage report as a JSON object. Fails with `EA_STATUS_PRECONDITION_VIOLATED`
 * while structural errors remain.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum EaStatus ea_argument_coverage_json(const struct EaArgumentHandle *h, char **out);

/**
 * Text-pattern findings for one element text, as a JSON array.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum EaStatus ea_check_text(const char *kind, const char *text, char **out);

/**
 * Kendall tau-b of two paired score vectors of length `n`.
 *
 * # Safety
 * `x` and `y` must point to `n` readable values; `out` must be writable.
 */
enum EaStatus ea_kendall_tau_b(const int64_t *x, const int64_t *y, size_t n, double *out);

/**
 * Two-sided normal-approximation interval for tau, clamped to [-1, 1].
 *
 * # Safety
 * `low` and `high` must be writable.
 */
enum EaStatus ea_tau_confidence_interval(double tau,
                                         size_t n,
                                         double level,
                                         double *low,
                                         double *high);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EA_FFI_H */
