#ifndef TELEHUB_H
#define TELEHUB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum TelehubStatus {
  TELEHUB_STATUS_OK = 0,
  TELEHUB_STATUS_NULL_ARGUMENT = 1,
  TELEHUB_STATUS_INVALID_UTF8 = 2,
  TELEHUB_STATUS_INVALID_JSON = 3,
  TELEHUB_STATUS_UNKNOWN_SCHEMA = 4,
  TELEHUB_STATUS_PAYLOAD_INVALID = 5,
  TELEHUB_STATUS_INVALID_GRAPH = 6,
  TELEHUB_STATUS_UNBOUND_INPUT = 7,
  TELEHUB_STATUS_WRONG_STATE = 8,
  TELEHUB_STATUS_INVALID_FLAG = 9,
  TELEHUB_STATUS_PARSE_ERROR = 10,
  TELEHUB_STATUS_NOT_FOUND = 11,
  TELEHUB_STATUS_INTERNAL = 12,
  TELEHUB_STATUS_PANIC = 13,
} TelehubStatus;

typedef enum TelehubRunStatus {
  TELEHUB_RUN_STATUS_PENDING = 0,
  TELEHUB_RUN_STATUS_RUNNING = 1,
  TELEHUB_RUN_STATUS_AWAITING_APPROVAL = 2,
  TELEHUB_RUN_STATUS_SUCCEEDED = 3,
  TELEHUB_RUN_STATUS_FAILED = 4,
  TELEHUB_RUN_STATUS_CANCELLED = 5,
} TelehubRunStatus;

/**
 * Engine with mock agents.
 */
typedef struct TelehubEngine TelehubEngine;

/**
 * An immutable context object.
 */
typedef struct TelehubObject TelehubObject;

typedef struct TelehubRun TelehubRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Owned by the
 * library; valid until the next call on this thread.
 */
const char *telehub_last_error(void);

/**
 * Static version string.
 */
const char *telehub_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void telehub_string_free(char *s);

/**
 * Builds and validates a context object.
 *
 * # Safety
 * String arguments must be valid NUL-terminated strings; `out` must be
 * writable.
 */
enum TelehubStatus telehub_object_new(const char *schema,
                                      const char *payload_json,
                                      const char *source_node_id,
                                      const char *run_id,
                                      int64_t created_at_us,
                                      struct TelehubObject **out);

/**
 * Parses canonical bytes back into an object.
 *
 * # Safety
 * `bytes` must point to `len` readable bytes; `out` must be writable.
 */
enum TelehubStatus telehub_object_decode(const uint8_t *bytes,
                                         size_t len,
                                         struct TelehubObject **out);

/**
 * Canonical serialization of the whole object.
 *
 * # Safety
 * `object` must be a live handle; `out` must be writable.
 */
enum TelehubStatus telehub_object_canonical(const struct TelehubObject *object, char **out);

/**
 * Hex SHA-256 content hash.
 *
 * # Safety
 * `object` must be a live handle; `out` must be writable.
 */
enum TelehubStatus telehub_object_hash(const struct TelehubObject *object, char **out);

/**
 * Projection onto `paths_json`, a JSON array of dotted field paths.
 *
 * # Safety
 * `object` must be a live handle, `paths_json` a valid string; `out` must
 * be writable.
 */
enum TelehubStatus telehub_object_project(const struct TelehubObject *object,
                                          const char *paths_json,
                                          struct TelehubObject **out);

/**
 * # Safety
 * `object` must be null or a live handle.
 */
void telehub_object_free(struct TelehubObject *object);

/**
 * Validates a payload against a schema. Writes the violations as a JSON
 * array, empty when the payload is valid.
 *
 * # Safety
 * String arguments must be valid; `out` must be writable.
 */
enum TelehubStatus telehub_validate_payload(const char *schema,
                                            const char *payload_json,
                                            char **out);

/**
 * Graph diagnostics as a JSON array. A document that does not parse is
 * `InvalidGraph` with the parse errors in the last error message.
 *
 * # Safety
 * `graph_json` must be valid; `out` must be writable.
 */
enum TelehubStatus telehub_graph_validate(const char *graph_json, char **out);

/**
 * Node ids in execution order, as a JSON array.
 *
 * # Safety
 * `graph_json` must be valid; `out` must be writable.
 */
enum TelehubStatus telehub_graph_topo_order(const char *graph_json, char **out);

/**
 * Bundled graph document for `id`.
 *
 * # Safety
 * `id` must be valid; `out` must be writable.
 */
enum TelehubStatus telehub_prebuilt_graph(const char *id, char **out);

/**
 * Decoded-trace lines for a pcap capture.
 *
 * # Safety
 * `bytes` must point to `len` readable bytes; `out` must be writable.
 */
enum TelehubStatus telehub_pcap_to_trace(const uint8_t *bytes, size_t len, char **out);

/**
 * Decoded-trace lines for the Tx/Rx lines of an srsRAN log.
 *
 * # Safety
 * `text` must be valid; `out` must be writable.
 */
enum TelehubStatus telehub_srsran_to_trace(const char *text, bool ue_side, char **out);

/**
 * Engine answering every agent with the bundled mocks. File bindings are
 * read relative to `artifact_dir` when it is not null.
 *
 * # Safety
 * `artifact_dir` must be null or valid; `out` must be writable.
 */
enum TelehubStatus telehub_engine_new_mock(const char *artifact_dir, struct TelehubEngine **out);

/**
 * # Safety
 * `engine` must be null or a live handle with no live runs still in use.
 */
void telehub_engine_free(struct TelehubEngine *engine);

/**
 * Starts a run. `bindings_json` maps input node ids to artifact
 * references and may be null when the graph has no inputs.
 *
 * # Safety
 * `engine` must be a live handle, strings valid; `out` must be writable.
 */
enum TelehubStatus telehub_run_start(const struct TelehubEngine *engine,
                                     const char *graph_json,
                                     const char *bindings_json,
                                     struct TelehubRun **out);

/**
 * Executes until the run finishes or pauses for approval.
 *
 * # Safety
 * Handles must be live; `out_status` must be writable.
 */
enum TelehubStatus telehub_run_execute(const struct TelehubEngine *engine,
                                       const struct TelehubRun *run,
                                       enum TelehubRunStatus *out_status);

/**
 * Resolves a pending approval, then executes on.
 *
 * # Safety
 * Handles must be live, strings valid (`comment` may be null);
 * `out_status` must be writable.
 */
enum TelehubStatus telehub_run_approve(const struct TelehubEngine *engine,
                                       const struct TelehubRun *run,
                                       bool approved,
                                       const char *reviewer,
                                       const char *comment,
                                       enum TelehubRunStatus *out_status);

/**
 * # Safety
 * `run` must be a live handle.
 */
enum TelehubRunStatus telehub_run_status(const struct TelehubRun *run);

/**
 * Events with `seq > since` as a JSON array.
 *
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum TelehubStatus telehub_run_events(const struct TelehubRun *run, uint64_t since, char **out);

/**
 * Report of a finished run: Markdown when `markdown` is true, JSON
 * otherwise.
 *
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum TelehubStatus telehub_run_report(const struct TelehubRun *run, bool markdown, char **out);

/**
 * # Safety
 * `run` must be null or a live handle.
 */
void telehub_run_free(struct TelehubRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TELEHUB_H */
