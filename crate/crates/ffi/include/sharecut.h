#ifndef SHARECUT_H
#define SHARECUT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call. Values 2 to 4 match the CLI exit codes.
 */
typedef enum ScStatus {
  SC_STATUS_OK = 0,
  /**
   * Null pointer, bad UTF-8 or an index out of range.
   */
  SC_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Bad configuration or workload text.
   */
  SC_STATUS_CONFIG = 2,
  /**
   * Bad data or I/O failure.
   */
  SC_STATUS_DATA = 3,
  /**
   * Execution failure or broken internal invariant.
   */
  SC_STATUS_EXECUTION = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  SC_STATUS_PANIC = 5,
} ScStatus;

/**
 * Opaque engine handle.
 */
typedef struct ScEngine ScEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses `workload` (workload file text) and generates its database with
 * `seed`. On success stores a new handle in `*out`.
 *
 * # Safety
 * `workload` must be a nul-terminated string; `out` must be writable.
 */
enum ScStatus sc_engine_new(const char *workload, uint64_t seed, struct ScEngine **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `engine` must come from `sc_engine_new` and not be used afterwards.
 */
void sc_engine_free(struct ScEngine *engine);

/**
 * Sets an engine option. Keys: psmin, sample_rate, block_min, threads,
 * skipping, partitioning, seed, solver (gr|isk), reuse
 * (off|naive|optimized). Layout options apply from the next tune,
 * execution options from the next run.
 *
 * # Safety
 * `engine` must be a live handle; `key` and `value` nul-terminated.
 */
enum ScStatus sc_engine_set(struct ScEngine *engine, const char *key, const char *value);

/**
 * Partitions the data and materializes views for the tuning batches.
 * `budget` is a byte count or a percentage of full coverage ("40%").
 *
 * # Safety
 * `engine` must be a live handle; `budget` nul-terminated.
 */
enum ScStatus sc_engine_tune(struct ScEngine *engine, const char *budget);

/**
 * Number of runtime batches in the workload.
 *
 * # Safety
 * `engine` must be a live handle or null (returns 0).
 */
size_t sc_engine_batch_count(const struct ScEngine *engine);

/**
 * Executes runtime batch `batch`. Results and metrics replace those of the
 * previous run.
 *
 * # Safety
 * `engine` must be a live handle.
 */
enum ScStatus sc_engine_run(struct ScEngine *engine, size_t batch);

/**
 * Number of queries answered by the last run.
 *
 * # Safety
 * `engine` must be a live handle or null (returns 0).
 */
size_t sc_engine_query_count(const struct ScEngine *engine);

/**
 * Number of groups of query `query` in the last run (1 when ungrouped).
 *
 * # Safety
 * `engine` must be a live handle or null (returns 0).
 */
size_t sc_engine_group_count(const struct ScEngine *engine, size_t query);

/**
 * Writes the sum for group `group` of query `query` into `*out`.
 *
 * # Safety
 * `engine` must be a live handle; `out` must be writable.
 */
enum ScStatus sc_engine_result(const struct ScEngine *engine,
                               size_t query,
                               size_t group,
                               int64_t *out);

/**
 * Metrics of the last run as JSON, or null before the first run. The
 * string is owned by the engine.
 *
 * # Safety
 * `engine` must be a live handle.
 */
const char *sc_engine_metrics_json(struct ScEngine *engine);

/**
 * Message of the last failed call on this thread; empty if none. Valid until
 * the next failing call on the same thread.
 */
const char *sc_last_error(void);

/**
 * Library version, static.
 */
const char *sc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHARECUT_H */
