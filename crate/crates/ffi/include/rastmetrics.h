/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef RASTMETRICS_H
#define RASTMETRICS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  RM_STATUS_OK = 0,
  RM_STATUS_NULL_ARGUMENT = 1,
  RM_STATUS_INVALID_UTF8 = 2,
  RM_STATUS_INVALID_CONFIG = 3,
  RM_STATUS_INVALID_SELECTION = 4,
  RM_STATUS_IO = 5,
  RM_STATUS_OUT_OF_RANGE = 6,
  RM_STATUS_PANIC = 7,
} RmStatus;

/**
 * A parsed source tree with its selected variations. Opaque to C.
 */
typedef struct RmAnalysis RmAnalysis;

/**
 * Run options. Null strings and zero counts select the defaults.
 */
typedef struct {
  /**
   * Regex selecting feature macros.
   */
  const char *feature_regex;
  /**
   * Comma-separated variation ids or globs.
   */
  const char *metrics;
  /**
   * Comma-separated file extensions.
   */
  const char *extensions;
  /**
   * Worker threads for parsing and computing; 0 means one per CPU.
   */
  uint32_t threads;
  uint32_t queue_bound;
  /**
   * Keep parsing files with unbalanced directives instead of skipping them.
   */
  bool best_effort;
} RmOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default options: every variation, `CONFIG_` features, `.c` and `.h` files.
 */
RmOptions rm_options_default(void);

/**
 * Message of the last failed call on this thread, or an empty string.
 * Valid until the next library call on the same thread.
 */
const char *rm_last_error(void);

/**
 * Library version as a static string.
 */
const char *rm_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void rm_string_free(char *s);

/**
 * Parses and analyses the tree under `src`. On success `*out` owns a
 * handle to release with [`rm_analysis_free`].
 *
 * # Safety
 * `src` must be a NUL-terminated string, `options` null or valid, `out` writable.
 */
RmStatus rm_analysis_open(const char *src, const RmOptions *options, RmAnalysis **out);

/**
 * Releases an analysis handle. Null is ignored.
 *
 * # Safety
 * `h` must come from [`rm_analysis_open`] and not have been freed already.
 */
void rm_analysis_free(RmAnalysis *h);

/**
 * Number of functions (rows).
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
RmStatus rm_analysis_function_count(const RmAnalysis *h, size_t *out);

/**
 * Number of selected variations (columns after the key columns).
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
RmStatus rm_analysis_variation_count(const RmAnalysis *h, size_t *out);

/**
 * Number of files skipped because they could not be parsed.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
RmStatus rm_analysis_skipped_count(const RmAnalysis *h, size_t *out);

/**
 * `path:name:start_line` of function `index`. The string is owned by the
 * handle and lives as long as it does.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
RmStatus rm_analysis_function_key(const RmAnalysis *h, size_t index, const char **out);

/**
 * Id of variation `index`. The string is owned by the handle.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
RmStatus rm_analysis_variation_id(const RmAnalysis *h, size_t index, const char **out);

/**
 * Computes the row of function `index` into `values`, which must hold at
 * least the variation count.
 *
 * # Safety
 * `h` must be a live handle and `values` valid for `len` writes.
 */
RmStatus rm_analysis_row(const RmAnalysis *h, size_t index, double *values, size_t len);

/**
 * Writes the CSV of all rows to `path`.
 *
 * # Safety
 * `h` must be a live handle and `path` a NUL-terminated string.
 */
RmStatus rm_analysis_write_csv(const RmAnalysis *h, const char *path);

/**
 * Full run: analyses `src` and writes the CSV to `out_path`. When `report`
 * is non-null it receives the run report as JSON, to release with
 * [`rm_string_free`].
 *
 * # Safety
 * String arguments must be NUL-terminated, `options` null or valid.
 */
RmStatus rm_run(const char *src, const char *out_path, const RmOptions *options, char **report);

/**
 * Parses one source text and returns the debug dump of its tree, to
 * release with [`rm_string_free`]. A file that cannot be parsed still
 * succeeds; its dump records the skip reason.
 *
 * # Safety
 * `path` and `text` must be NUL-terminated strings, `out` writable.
 */
RmStatus rm_parse_dump(const char *path, const char *text, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RASTMETRICS_H */
