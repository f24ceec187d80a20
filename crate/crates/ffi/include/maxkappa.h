/* C interface to the maxkappa library. */

#ifndef MAXKAPPA_H
#define MAXKAPPA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum MkStatus {
  MK_STATUS_OK = 0,
  MK_STATUS_NULL_POINTER,
  MK_STATUS_DIMENSION_MISMATCH,
  MK_STATUS_INVALID_ARGUMENT,
  MK_STATUS_INVALID_SCHEME,
  MK_STATUS_EMPTY_TABLE,
  MK_STATUS_KAPPA_UNDEFINED,
  MK_STATUS_MOVE_REJECTED,
  MK_STATUS_FIBER_TOO_LARGE,
  MK_STATUS_PARSE,
  MK_STATUS_IO,
  MK_STATUS_PANIC,
} MkStatus;

// Annealing result handle.
typedef struct MkAnnealResult MkAnnealResult;

// Disagreement scheme handle.
typedef struct MkScheme MkScheme;

// Contingency table handle.
typedef struct MkTable MkTable;

// Annealing parameters; obtain defaults from [`mk_anneal_config_default`].
typedef struct MkAnnealConfig {
  double tau0;
  double decay;
  // Stagnation window; 0 selects the default for the basis.
  uint64_t stop_c;
  uint64_t max_steps;
  uint64_t seed;
} MkAnnealConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *mk_last_error_message(void);

// Library version as a static string.
const char *mk_version(void);

// Creates a table from `len = levels^raters` counts, first rater slowest.
//
// # Safety
// `counts` must point to `len` readable values; `out` must be writable.
enum MkStatus mk_table_new(size_t raters,
                           size_t levels,
                           const uint64_t *counts,
                           size_t len,
                           struct MkTable **out_table);

// Releases a table; null is ignored.
//
// # Safety
// `table` must come from this library and not be used afterwards.
void mk_table_free(struct MkTable *table);

// Sample size of a table, or 0 for null.
//
// # Safety
// `table` must be null or a live handle.
uint64_t mk_table_total(const struct MkTable *table);

// Number of cells, `levels^raters`, or 0 for null.
//
// # Safety
// `table` must be null or a live handle.
size_t mk_table_num_cells(const struct MkTable *table);

// Copies the counts into `buf`, which must hold exactly the number of cells.
//
// # Safety
// `buf` must point to `len` writable values.
enum MkStatus mk_table_counts(const struct MkTable *table, uint64_t *buf, size_t len);

// Builtin scheme by name: `quadratic`, `linear`, `sqrt` or `identity`.
//
// # Safety
// `name` must be a nul-terminated string; `out_scheme` must be writable.
enum MkStatus mk_scheme_builtin(const char *name, size_t levels, struct MkScheme **out_scheme);

// Custom scheme from a row-major `levels x levels` disagreement matrix.
//
// # Safety
// `u` must point to `levels * levels` readable values.
enum MkStatus mk_scheme_custom(const double *u, size_t levels, struct MkScheme **out_scheme);

// Releases a scheme; null is ignored.
//
// # Safety
// `scheme` must come from this library and not be used afterwards.
void mk_scheme_free(struct MkScheme *scheme);

// Weighted kappa (Conger's form for more than two raters).
//
// # Safety
// Handles must be live; `out_kappa` must be writable.
enum MkStatus mk_weighted_kappa(const struct MkTable *table,
                                const struct MkScheme *scheme,
                                double *out_kappa);

// Default annealing parameters with the given seed.
struct MkAnnealConfig mk_anneal_config_default(uint64_t seed);

// Searches the fiber of `table` for maximum kappa. `config` may be null
// for defaults with seed 0; `restarts` of 0 is treated as 1.
//
// # Safety
// Handles must be live; `config` null or readable; `out_result` writable.
enum MkStatus mk_anneal(const struct MkTable *table,
                        const struct MkScheme *scheme,
                        const struct MkAnnealConfig *config,
                        size_t restarts,
                        struct MkAnnealResult **out_result);

// Releases an annealing result; null is ignored.
//
// # Safety
// `result` must come from this library and not be used afterwards.
void mk_anneal_result_free(struct MkAnnealResult *result);

// Best kappa found, or NaN for null.
//
// # Safety
// `result` must be null or a live handle.
double mk_anneal_result_kappa(const struct MkAnnealResult *result);

// Kappa of the input table, or NaN for null.
//
// # Safety
// `result` must be null or a live handle.
double mk_anneal_result_input_kappa(const struct MkAnnealResult *result);

// Steps executed by the winning walk, or 0 for null.
//
// # Safety
// `result` must be null or a live handle.
uint64_t mk_anneal_result_steps(const struct MkAnnealResult *result);

// Copies the best table into a new handle owned by the caller.
//
// # Safety
// `result` must be live; `out_table` writable.
enum MkStatus mk_anneal_result_table(const struct MkAnnealResult *result,
                                     struct MkTable **out_table);

// Number of tables sharing `table`'s margins; `budget` of 0 uses the default.
//
// # Safety
// `table` must be live; `out_size` writable.
enum MkStatus mk_fiber_size(const struct MkTable *table, uint64_t budget, uint64_t *out_size);

// Number of fiber tables with the same kappa as `table`, and the fiber size.
//
// # Safety
// Handles must be live; outputs writable (`out_fiber_size` may be null).
enum MkStatus mk_level_set_count(const struct MkTable *table,
                                 const struct MkScheme *scheme,
                                 uint64_t budget,
                                 uint64_t *out_count,
                                 uint64_t *out_fiber_size);

// Cardinality of the basis of basic moves for the given dimensions.
//
// # Safety
// `out_size` must be writable.
enum MkStatus mk_basis_size(size_t raters, size_t levels, size_t *out_size);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAXKAPPA_H */
