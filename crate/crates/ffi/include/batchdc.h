#ifndef BATCHDC_H
#define BATCHDC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every entry point.
typedef enum BatchdcStatus {
  BATCHDC_STATUS_OK = 0,
  BATCHDC_STATUS_NULL_POINTER = 1,
  BATCHDC_STATUS_INVALID_UTF8 = 2,
  BATCHDC_STATUS_IO = 3,
  BATCHDC_STATUS_INVALID_GRID = 4,
  BATCHDC_STATUS_INVALID_CONFIG = 5,
  BATCHDC_STATUS_SHAPE_MISMATCH = 6,
  BATCHDC_STATUS_INVALID_TASK = 7,
  BATCHDC_STATUS_SOLVER = 8,
  BATCHDC_STATUS_PANIC = 9,
} BatchdcStatus;

// Opaque session handle.
typedef struct BatchdcSession BatchdcSession;

// Dimensions of a session's buffer layout.
typedef struct BatchdcSessionInfo {
  size_t nodes;
  size_t branches;
  size_t contingencies;
  size_t substations;
  size_t monitored;
  // Bits per task in the dense branch assignment buffer.
  size_t branch_slots;
  // Bits per injection assignment.
  size_t injection_slots;
} BatchdcSessionInfo;

// Input buffers of one batch. All arrays are contiguous and row-major.
//
// - `branch_bits`: `tasks * branch_slots` bytes, nonzero = busbar B.
// - `disconnection_offsets`: `tasks + 1` ascending offsets into
//   `disconnections` (branch indices). Both may be null when no task
//   disconnects anything.
// - `injection_offsets`: `tasks + 1` ascending offsets counting injection
//   assignments; `injection_bits` holds `injection_offsets[tasks] *
//   injection_slots` bytes. A task with zero assignments gets one all-A
//   assignment.
typedef struct BatchdcBatch {
  size_t tasks;
  const uint8_t *branch_bits;
  const size_t *disconnection_offsets;
  const size_t *disconnections;
  const size_t *injection_offsets;
  const uint8_t *injection_bits;
} BatchdcBatch;

// Output buffers, each of length `tasks`. `reports_json` receives a
// newline-separated JSON Lines string identical to `batchdc solve` output,
// to be released with [`batchdc_string_free`]; pass null to skip it.
typedef struct BatchdcOutput {
  // Best metric per task; NaN for infeasible tasks.
  double *metrics;
  // Index of the best injection assignment, -1 for infeasible tasks.
  int64_t *best_injection;
  // 1 when the task is feasible.
  uint8_t *feasible;
  char **reports_json;
} BatchdcOutput;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Opens a session from a native JSON grid file.
//
// `config_json` may be null for defaults. It accepts the solver settings
// (`mode`, `topk_per_case`, `topk_global`, `islanding_policy`, `penalty`,
// `max_batch`, `multi_outage_method`, `scheduler`, `parallel_tree`,
// `workers`) plus `disconnectable`, the branch ids tasks may open.
//
// # Safety
// `path` and `config_json` must be null or valid nul-terminated strings;
// `out` must be valid for writes.
enum BatchdcStatus batchdc_session_open(const char *path,
                                        const char *config_json,
                                        struct BatchdcSession **out);

// Opens a session from an in-memory native JSON grid description.
//
// # Safety
// Same contract as [`batchdc_session_open`].
enum BatchdcStatus batchdc_session_open_json(const char *grid_json,
                                             const char *config_json,
                                             struct BatchdcSession **out);

// # Safety
// `session` must come from a successful open and not be freed; `out`
// must be valid for writes.
enum BatchdcStatus batchdc_session_info(const struct BatchdcSession *session,
                                        struct BatchdcSessionInfo *out);

// Solves one batch. Per-task failures are reported inline (NaN metric,
// -1 best injection, feasible 0, diagnostics in the JSON report); only
// malformed input or configuration errors fail the call.
//
// # Safety
// `session` must be a live session; the buffers described by `batch`
// must be valid for reads of the documented lengths, and the non-null
// buffers of `out` valid for writes of `batch.tasks` elements.
enum BatchdcStatus batchdc_solve_batch(const struct BatchdcSession *session,
                                       const struct BatchdcBatch *batch,
                                       const struct BatchdcOutput *out);

// Message of the last failed call on this thread, or null. Valid until
// the next failing call on the same thread.
const char *batchdc_last_error(void);

// # Safety
// `session` must be null or come from a successful open, and be freed once.
void batchdc_session_free(struct BatchdcSession *session);

// # Safety
// `s` must be null or a string returned by this library, freed once.
void batchdc_string_free(char *s);

// Library version, static storage.
const char *batchdc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BATCHDC_H */
