#ifndef SONC_H
#define SONC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SONC_OK 0

#define SONC_ERR_NULL 1

#define SONC_ERR_PARSE 2

#define SONC_ERR_INVALID 3

#define SONC_ERR_DIMENSION 4

/**
 * The output buffer is too small; the required size is still reported.
 */
#define SONC_ERR_BUFFER 5

#define SONC_ERR_NUMERICAL 6

#define SONC_ERR_PANIC 7

#define SONC_METHOD_SONC 0

#define SONC_METHOD_SAGE 1

#define SONC_METHOD_FORK 2

#define SONC_METHOD_BNB 3

#define SONC_STRATEGY_WORST 0

#define SONC_STRATEGY_DFS 1

#define SONC_STATUS_OPTIMAL 0

#define SONC_STATUS_INFEASIBLE 1

#define SONC_STATUS_UNBOUNDED 2

#define SONC_STATUS_NUMERICAL_FAILURE 3

/**
 * Opaque polynomial handle.
 */
typedef struct SoncPolynomial SoncPolynomial;

typedef struct SoncBoundOptions {
  /**
   * One of the `SONC_METHOD_*` constants.
   */
  int32_t method;
  /**
   * One of the `SONC_STRATEGY_*` constants (branch-and-bound only).
   */
  int32_t strategy;
  bool sparse;
  double eps;
  /**
   * Seconds; zero or negative disables the limit.
   */
  double timeout;
} SoncBoundOptions;

typedef struct SoncBoundResult {
  /**
   * `-INFINITY` when no bound could be certified.
   */
  double lower_bound;
  /**
   * Best value found by branch-and-bound, `INFINITY` for other methods.
   */
  double best_value;
  /**
   * One of the `SONC_STATUS_*` constants.
   */
  int32_t status;
  size_t nodes_expanded;
} SoncBoundResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *sonc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sonc_version(void);

/**
 * Parses the text grammar or the JSON form.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a writable pointer.
 */
int32_t sonc_polynomial_parse(const char *text, struct SoncPolynomial **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `p` must be null or a live handle; it must not be used afterwards.
 */
void sonc_polynomial_free(struct SoncPolynomial *p);

/**
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
int32_t sonc_polynomial_nvars(const struct SoncPolynomial *p, size_t *out);

/**
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
int32_t sonc_polynomial_num_terms(const struct SoncPolynomial *p, size_t *out);

/**
 * Evaluates at `x[0..n]`.
 *
 * # Safety
 * `x` must point to `n` doubles and `out` be writable.
 */
int32_t sonc_polynomial_eval(const struct SoncPolynomial *p,
                             const double *x,
                             size_t n,
                             double *out);

/**
 * Text form of the polynomial into `buf`. `len` receives the byte count
 * without the terminator; when `cap` is too small nothing is written and
 * `SONC_ERR_BUFFER` is returned.
 *
 * # Safety
 * `buf` must be writable for `cap` bytes (or null with `cap == 0`) and
 * `len` writable.
 */
int32_t sonc_polynomial_to_string(const struct SoncPolynomial *p,
                                  char *buf,
                                  size_t cap,
                                  size_t *len);

/**
 * Defaults: SONC, worst-first, dense tree, `eps = 2^-23`, no time limit.
 */
struct SoncBoundOptions sonc_bound_options_default(void);

/**
 * Certified lower bound. Null `opts` uses the defaults. A `-INFINITY`
 * bound is a result, not an error.
 *
 * # Safety
 * `p` must be a live handle, `opts` null or readable, `out` writable.
 */
int32_t sonc_lower_bound(const struct SoncPolynomial *p,
                         const struct SoncBoundOptions *opts,
                         struct SoncBoundResult *out);

/**
 * Candidate minimizer from the circuit heuristic; `x` receives `n`
 * coordinates, which must equal the variable count.
 *
 * # Safety
 * `x` must be writable for `n` doubles and `value` writable.
 */
int32_t sonc_local_min(const struct SoncPolynomial *p, double *x, size_t n, double *value);

/**
 * Minimal orthants as rows of `n` signs (`+1`/`-1`) in `signs`. `count`
 * receives the number of orthants; when `cap < count * n` nothing is
 * written and `SONC_ERR_BUFFER` is returned.
 *
 * # Safety
 * `signs` must be writable for `cap` bytes (or null with `cap == 0`) and
 * `count` writable.
 */
int32_t sonc_minimal_orthants(const struct SoncPolynomial *p,
                              int8_t *signs,
                              size_t cap,
                              size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SONC_H */
