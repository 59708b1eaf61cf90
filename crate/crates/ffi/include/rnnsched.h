#ifndef RNNSCHED_H
#define RNNSCHED_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RnnschedCell {
  RNNSCHED_CELL_LSTM = 0,
  RNNSCHED_CELL_GRU = 1,
} RnnschedCell;

typedef enum RnnschedSchedule {
  RNNSCHED_SCHEDULE_A = 0,
  RNNSCHED_SCHEDULE_A_PLUS = 1,
} RnnschedSchedule;

typedef enum RnnschedStatus {
  RNNSCHED_STATUS_OK = 0,
  RNNSCHED_STATUS_NULL_POINTER = 1,
  RNNSCHED_STATUS_INVALID_UTF8 = 2,
  RNNSCHED_STATUS_INVALID_ARGUMENT = 3,
  RNNSCHED_STATUS_UNKNOWN_BENCHMARK = 4,
  RNNSCHED_STATUS_INTERNAL = 5,
} RnnschedStatus;

/**
 * Opaque network handle.
 */
typedef struct RnnschedNetwork RnnschedNetwork;

/**
 * Cache and accounting options. Start from [`rnnsched_cache_options_default`].
 */
typedef struct RnnschedCacheOptions {
  uint64_t capacity_bytes;
  uint64_t line_bytes;
  /**
   * 0 for fully associative.
   */
  uint32_t ways;
  /**
   * 0 for a single cold run.
   */
  uint32_t warm_runs;
  bool weights_only;
  bool writeback_flush;
  bool write_fill;
  /**
   * 0 for half the capacity.
   */
  uint64_t block_bytes;
  uint64_t seed;
} RnnschedCacheOptions;

typedef struct RnnschedReport {
  uint64_t working_set_bytes;
  uint64_t mem_read_bytes;
  uint64_t mem_write_bytes;
  double avg_rw_bytes;
  double dre;
} RnnschedReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Owned by the
 * library; valid until the next call on the same thread.
 */
const char *rnnsched_last_error(void);

struct RnnschedCacheOptions rnnsched_cache_options_default(void);

/**
 * Network with uniform layer widths and the default element size.
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum RnnschedStatus rnnsched_network_new(enum RnnschedCell cell,
                                         size_t hidden_size,
                                         size_t num_layers,
                                         size_t input_length,
                                         size_t vocab_size,
                                         struct RnnschedNetwork **out);

/**
 * Network from a config JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for writing
 * one pointer.
 */
enum RnnschedStatus rnnsched_network_from_json(const char *json, struct RnnschedNetwork **out);

/**
 * Network from the built-in catalog, e.g. `lm-t100`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be valid for writing
 * one pointer.
 */
enum RnnschedStatus rnnsched_network_from_catalog(const char *name, struct RnnschedNetwork **out);

/**
 * # Safety
 * `network` must be null or a handle from one of the constructors, not
 * already freed.
 */
void rnnsched_network_free(struct RnnschedNetwork *network);

/**
 * Config JSON of a network; release with [`rnnsched_string_free`].
 *
 * # Safety
 * `network` must be a live handle; `out` must be valid for writing one
 * pointer.
 */
enum RnnschedStatus rnnsched_network_to_json(const struct RnnschedNetwork *network, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not already freed.
 */
void rnnsched_string_free(char *s);

/**
 * # Safety
 * `network` must be a live handle; `out` must be valid for writing.
 */
enum RnnschedStatus rnnsched_working_set_bytes(const struct RnnschedNetwork *network,
                                               enum RnnschedSchedule schedule,
                                               uint64_t *out);

/**
 * Simulates one schedule. A null `options` uses the defaults.
 *
 * # Safety
 * `network` must be a live handle; `options` null or valid; `out` valid for
 * writing.
 */
enum RnnschedStatus rnnsched_run(const struct RnnschedNetwork *network,
                                 enum RnnschedSchedule schedule,
                                 const struct RnnschedCacheOptions *options,
                                 struct RnnschedReport *out);

/**
 * Traffic under schedule A divided by traffic under A+.
 *
 * # Safety
 * `network` must be a live handle; `options` null or valid; `ratio` valid
 * for writing.
 */
enum RnnschedStatus rnnsched_compare(const struct RnnschedNetwork *network,
                                     const struct RnnschedCacheOptions *options,
                                     double *ratio);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RNNSCHED_H */
