#ifndef SPECSCHED_H
#define SPECSCHED_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpecschedStatus {
  SPECSCHED_STATUS_OK = 0,
  SPECSCHED_STATUS_NULL_POINTER = 1,
  SPECSCHED_STATUS_INVALID_UTF8 = 2,
  SPECSCHED_STATUS_INVALID_ARGUMENT = 3,
  SPECSCHED_STATUS_CONFIG = 4,
  SPECSCHED_STATUS_TRACE = 5,
  SPECSCHED_STATUS_SIMULATION = 6,
  SPECSCHED_STATUS_PANIC = 7,
} SpecschedStatus;

/**
 * The result of one simulation.
 */
typedef struct SpecschedReport SpecschedReport;

/**
 * A list of requests, loaded, generated or taken from a built-in trace.
 */
typedef struct SpecschedWorkload SpecschedWorkload;

typedef struct SpecschedSummary {
  size_t num_requests;
  double avg_latency_us;
  uint64_t p50_us;
  uint64_t p95_us;
  uint64_t max_us;
  uint64_t preemptions;
  uint64_t switch_count;
  uint64_t switch_overhead_us;
  uint64_t busy_us;
  uint64_t makespan_us;
} SpecschedSummary;

/**
 * Per-request outcome. Optional estimates are negative when absent.
 */
typedef struct SpecschedRequestRecord {
  uint64_t id;
  uint64_t arrival_us;
  uint64_t first_service_us;
  uint64_t completion_us;
  uint64_t latency_us;
  uint64_t rounds;
  uint64_t tokens_proposed;
  uint64_t tokens_accepted;
  uint32_t preemptions;
  uint64_t service_us;
  double predicted_accept_rate;
  int64_t estimated_total_us;
} SpecschedRequestRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next call on the same thread.
 */
const char *specsched_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *specsched_version(void);

/**
 * Loads a JSON Lines trace file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a writable pointer.
 */
enum SpecschedStatus specsched_workload_load(const char *path, struct SpecschedWorkload **out);

/**
 * Takes a built-in trace by name, with or without the `builtin:` prefix.
 * Its cost model, if any, is used by [`specsched_simulate`] beneath the
 * caller's config.
 *
 * # Safety
 * `name` must be a valid NUL-terminated string and `out` a writable pointer.
 */
enum SpecschedStatus specsched_workload_builtin(const char *name, struct SpecschedWorkload **out);

/**
 * Generates a workload from a TOML config (NULL for the defaults).
 *
 * # Safety
 * `config_toml` must be NULL or a valid NUL-terminated string and `out` a
 * writable pointer.
 */
enum SpecschedStatus specsched_workload_generate(const char *config_toml,
                                                 uint64_t seed,
                                                 struct SpecschedWorkload **out);

/**
 * Writes the workload as a JSON Lines trace.
 *
 * # Safety
 * `workload` must come from this library and `path` must be a valid
 * NUL-terminated string.
 */
enum SpecschedStatus specsched_workload_save(const struct SpecschedWorkload *workload,
                                             const char *path);

/**
 * Number of requests, or 0 for NULL.
 *
 * # Safety
 * `workload` must be NULL or come from this library.
 */
size_t specsched_workload_len(const struct SpecschedWorkload *workload);

/**
 * # Safety
 * `workload` must be NULL or come from this library, and not be used again.
 */
void specsched_workload_free(struct SpecschedWorkload *workload);

/**
 * Simulates `policy` (`fcfs`, `lp-sjf`, `las` or `laps-sd`) on the workload.
 * `config_toml` may be NULL for the defaults.
 *
 * # Safety
 * `workload` must come from this library, `policy` must be a valid
 * NUL-terminated string, `config_toml` NULL or a valid string, and `out` a
 * writable pointer.
 */
enum SpecschedStatus specsched_simulate(const struct SpecschedWorkload *workload,
                                        const char *policy,
                                        const char *config_toml,
                                        uint64_t seed,
                                        struct SpecschedReport **out);

/**
 * # Safety
 * `report` must come from this library and `out` be a writable pointer.
 */
enum SpecschedStatus specsched_report_summary(const struct SpecschedReport *report,
                                              struct SpecschedSummary *out);

/**
 * Number of request records, or 0 for NULL.
 *
 * # Safety
 * `report` must be NULL or come from this library.
 */
size_t specsched_report_len(const struct SpecschedReport *report);

/**
 * Record `index`, ordered by request id.
 *
 * # Safety
 * `report` must come from this library and `out` be a writable pointer.
 */
enum SpecschedStatus specsched_report_request(const struct SpecschedReport *report,
                                              size_t index,
                                              struct SpecschedRequestRecord *out);

/**
 * The report as JSON. Release the string with [`specsched_string_free`].
 *
 * # Safety
 * `report` must come from this library and `out` be a writable pointer.
 */
enum SpecschedStatus specsched_report_to_json(const struct SpecschedReport *report, char **out);

/**
 * # Safety
 * `report` must be NULL or come from this library, and not be used again.
 */
void specsched_report_free(struct SpecschedReport *report);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, and not be used
 * again.
 */
void specsched_string_free(char *s);

/**
 * Estimated execution time in microseconds for `length` tokens at draft
 * acceptance rate `accept_rate`.
 */
uint64_t specsched_estimate_execution_time_us(uint64_t length,
                                              double accept_rate,
                                              uint32_t spec_len,
                                              uint64_t t_ssm_per_token_us,
                                              uint64_t t_llm_verify_us);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECSCHED_H */
