#ifndef KAV_H
#define KAV_H

/* Generated by cbindgen from the kav-ffi crate; regenerate with `cargo build -p kav-ffi`. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call in this API.
 */
typedef enum kav_status {
  KAV_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  KAV_STATUS_NULL_ARGUMENT = 1,
  /**
   * Input bytes were not valid UTF-8.
   */
  KAV_STATUS_INVALID_UTF8 = 2,
  /**
   * The trace did not parse; see stderr of the caller for detail.
   */
  KAV_STATUS_PARSE_ERROR = 3,
  /**
   * The requested register key does not appear in the trace.
   */
  KAV_STATUS_KEY_NOT_FOUND = 4,
  /**
   * The history failed validation (anomalies present).
   */
  KAV_STATUS_HISTORY_ANOMALOUS = 5,
  /**
   * The algorithm cannot decide the requested k.
   */
  KAV_STATUS_UNSUPPORTED_K = 6,
  /**
   * The history exceeds the exhaustive-search cap.
   */
  KAV_STATUS_CAP_EXCEEDED = 7,
  /**
   * An internal invariant failed; the operation was aborted.
   */
  KAV_STATUS_INTERNAL = 8,
} kav_status;

/**
 * Verifier selection for `kav_history_check`.
 */
typedef enum kav_algorithm {
  /**
   * Zone conditions for k=1, chunk decomposition for k=2, exhaustive
   * search otherwise.
   */
  KAV_ALGORITHM_AUTO = 0,
  /**
   * Zone conditions; requires k=1.
   */
  KAV_ALGORITHM_GK = 1,
  /**
   * Limited backtracking; requires k=2.
   */
  KAV_ALGORITHM_LBT = 2,
  /**
   * Chunk decomposition; requires k=2.
   */
  KAV_ALGORITHM_FZF = 3,
  /**
   * Exhaustive search at any k, limited by the cap.
   */
  KAV_ALGORITHM_BRUTE = 4,
} kav_algorithm;

/**
 * A validated, normalized single-register history. Opaque.
 */
typedef struct kav_history kav_history;

/**
 * A parsed multi-register trace. Opaque.
 */
typedef struct kav_trace kav_trace;

/**
 * A verification result with optional witness and certificate. Opaque.
 */
typedef struct kav_verdict kav_verdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a JSON-lines trace from a byte buffer and partitions it by key.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be a valid pointer.
 */
enum kav_status kav_trace_parse(const uint8_t *data,
                                size_t len,
                                struct kav_trace **out);

/**
 * Number of register keys in the trace.
 */
size_t kav_trace_key_count(const struct kav_trace *trace);

/**
 * Returns the key at `index` (keys are sorted). Release with
 * `kav_string_free`.
 *
 * # Safety
 * `trace` must come from `kav_trace_parse`; `out_key` must be valid.
 */
enum kav_status kav_trace_key_at(const struct kav_trace *trace,
                                 size_t index,
                                 char **out_key);

/**
 * Extracts, validates and normalizes one register's history.
 *
 * # Safety
 * `trace` must come from `kav_trace_parse`; `key` must be a NUL-terminated
 * string; `out` must be valid.
 */
enum kav_status kav_trace_history(const struct kav_trace *trace,
                                  const char *key,
                                  struct kav_history **out);

/**
 * Number of operations in the history.
 */
size_t kav_history_op_count(const struct kav_history *history);

/**
 * Decides k-atomicity of the history.
 *
 * `brute_cap` bounds the exhaustive search (operations); pass 0 for the
 * default cap.
 *
 * # Safety
 * `history` must come from `kav_trace_history`; `out` must be valid.
 */
enum kav_status kav_history_check(const struct kav_history *history,
                                  uint32_t k,
                                  enum kav_algorithm algorithm,
                                  size_t brute_cap,
                                  struct kav_verdict **out);

/**
 * Smallest k for which the history is k-atomic.
 *
 * On `KAV_STATUS_OK`, `*out_k` holds the answer and `*out_exact` is 1; when
 * the history is too large for the exhaustive scan, `*out_k` holds a lower
 * bound and `*out_exact` is 0.
 *
 * # Safety
 * `history` must come from `kav_trace_history`; out pointers must be valid.
 */
enum kav_status kav_history_min_k(const struct kav_history *history,
                                  size_t brute_cap,
                                  uint32_t *out_k,
                                  int *out_exact);

/**
 * 1 when the verdict is YES, 0 otherwise (including null).
 */
int kav_verdict_is_yes(const struct kav_verdict *verdict);

/**
 * Deterministic work counter of the verification run.
 */
uint64_t kav_verdict_steps(const struct kav_verdict *verdict);

/**
 * Witness order as JSON (a YES verdict from lbt/fzf/brute), or null when
 * the verdict carries none. Release with `kav_string_free`.
 *
 * # Safety
 * `verdict` must come from `kav_history_check`; `out_json` must be valid.
 */
enum kav_status kav_verdict_witness_json(const struct kav_verdict *verdict,
                                         char **out_json);

/**
 * NO certificate as JSON, or null for YES verdicts. Release with
 * `kav_string_free`.
 *
 * # Safety
 * `verdict` must come from `kav_history_check`; `out_json` must be valid.
 */
enum kav_status kav_verdict_certificate_json(const struct kav_verdict *verdict,
                                             char **out_json);

/**
 * Static description of a status code.
 */
const char *kav_status_message(enum kav_status status);

/**
 * Releases a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must have been returned by this library and not freed before.
 */
void kav_string_free(char *s);

/**
 * Releases a trace handle. Null is a no-op.
 *
 * # Safety
 * `trace` must come from `kav_trace_parse` and not be freed twice.
 */
void kav_trace_free(struct kav_trace *trace);

/**
 * Releases a history handle. Null is a no-op.
 *
 * # Safety
 * `history` must come from `kav_trace_history` and not be freed twice.
 */
void kav_history_free(struct kav_history *history);

/**
 * Releases a verdict handle. Null is a no-op.
 *
 * # Safety
 * `verdict` must come from `kav_history_check` and not be freed twice.
 */
void kav_verdict_free(struct kav_verdict *verdict);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KAV_H */
