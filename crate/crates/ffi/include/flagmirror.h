#ifndef FLAGMIRROR_H
#define FLAGMIRROR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. `FM_CHECK_FAILED` is not an error: the call completed and
// some verified claim did not hold.
typedef enum FmStatus {
  FM_OK = 0,
  FM_CHECK_FAILED = 1,
  FM_INVALID_ARGUMENT = 2,
  FM_NULL_POINTER = 3,
  FM_NON_GENERIC = 4,
  FM_NUMERICAL = 5,
  FM_TAIL_TOO_LARGE = 6,
  FM_PARSE = 7,
  FM_PANIC = 8,
} FmStatus;

typedef enum FmNormalization {
  FM_RAW = 0,
  FM_STAB = 1,
  FM_S = 2,
  FM_BOLD = 3,
  FM_A = 4,
  FM_OVERLINE = 5,
} FmNormalization;

// Opaque square matrix indexed by the fixed points in the total order.
typedef struct FmMatrix FmMatrix;

// Opaque parameter point (float backend).
typedef struct FmParams FmParams;

// Opaque truncated power series in `z_1..z_{n-1}`.
typedef struct FmSeries FmSeries;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or NULL. Valid until
// the next failing call on the same thread.
const char *fm_last_error(void);

// Deterministic generic parameters for rank `n` from `seed`.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum FmStatus fm_params_sample(size_t n,
                               uint64_t seed,
                               size_t theta_terms,
                               size_t max_degree,
                               uint32_t precision_digits,
                               struct FmParams **out);

// Parameters from a TOML document in the serialized `ParamSpec` format.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` writable.
enum FmStatus fm_params_from_toml(const char *toml, struct FmParams **out);

// # Safety
// `p` must come from an `fm_params_*` constructor, or be NULL.
void fm_params_free(struct FmParams *p);

// # Safety
// `p` must be a live handle.
size_t fm_params_n(const struct FmParams *p);

// Relative tolerance used by the checks at these parameters.
//
// # Safety
// `p` must be a live handle.
double fm_params_tolerance(const struct FmParams *p);

// Vertex function of the fixed point `perm[0..len]` (one-line notation,
// entries 1..n). With `limit` nonzero, its closed form at `a = 0`.
//
// # Safety
// `p` must be a live handle, `perm` must point to `len` values and `out`
// must be writable.
enum FmStatus fm_vertex_series(const struct FmParams *p,
                               const uint32_t *perm,
                               size_t len,
                               int32_t limit,
                               struct FmSeries **out);

// # Safety
// `s` must come from [`fm_vertex_series`], or be NULL.
void fm_series_free(struct FmSeries *s);

// Number of stored coefficients, `(bound + 1)^nvars`.
//
// # Safety
// `s` must be a live handle.
size_t fm_series_len(const struct FmSeries *s);

// # Safety
// `s` must be a live handle.
size_t fm_series_nvars(const struct FmSeries *s);

// # Safety
// `s` must be a live handle.
size_t fm_series_bound(const struct FmSeries *s);

// Coefficient of `z^degree`, `degree` holding `nvars` entries.
//
// # Safety
// `s` must be a live handle, `degree` must point to `nvars` values and
// `out` must be writable.
enum FmStatus fm_series_coefficient(const struct FmSeries *s,
                                    const uint32_t *degree,
                                    size_t nvars,
                                    double *out);

// Sum of the series at the parameters' own `z`.
//
// # Safety
// Both handles must be live and `out` writable.
enum FmStatus fm_series_eval(const struct FmSeries *s, const struct FmParams *p, double *out);

// Restriction matrix of the elliptic stable envelope in the requested
// normalization.
//
// # Safety
// `p` must be a live handle and `out` writable.
enum FmStatus fm_stab_matrix(const struct FmParams *p,
                             enum FmNormalization normalization,
                             struct FmMatrix **out);

// # Safety
// `m` must come from [`fm_stab_matrix`], or be NULL.
void fm_matrix_free(struct FmMatrix *m);

// # Safety
// `m` must be a live handle.
size_t fm_matrix_size(const struct FmMatrix *m);

// Entry `(row, col)`, both 0-based in the total order of fixed points.
//
// # Safety
// `m` must be a live handle and `out` writable.
enum FmStatus fm_matrix_get(const struct FmMatrix *m, size_t row, size_t col, double *out);

// Fixed point labelling row `index`, written as `n` values to `perm`.
//
// # Safety
// `m` must be a live handle and `perm` must have room for `n` values.
enum FmStatus fm_matrix_fixed_point(const struct FmMatrix *m,
                                    size_t index,
                                    uint32_t *perm,
                                    size_t n);

// Run the named verification suite (`"triangularity"`, ..., `"all"`) and
// write the JSON report to `*report_json` (free with [`fm_string_free`]).
// Returns `FM_OK` when every claim passes and `FM_CHECK_FAILED` otherwise.
//
// # Safety
// `suite` must be a NUL-terminated string and `report_json` writable.
enum FmStatus fm_verify(const char *suite, size_t n, uint64_t seed, char **report_json);

// # Safety
// `s` must come from this library, or be NULL.
void fm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLAGMIRROR_H */
