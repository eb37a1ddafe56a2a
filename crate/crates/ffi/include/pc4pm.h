#ifndef PC4PM_H
#define PC4PM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Status codes. Zero is success.
typedef enum Pc4pmStatus {
  PC4PM_STATUS_OK = 0,
  PC4PM_STATUS_NULL_POINTER = 1,
  PC4PM_STATUS_INVALID_UTF8 = 2,
  PC4PM_STATUS_PARSE = 3,
  PC4PM_STATUS_INVALID_ARGUMENT = 4,
  PC4PM_STATUS_UNKNOWN_ATTRIBUTE = 5,
  PC4PM_STATUS_TYPE_MISMATCH = 6,
  PC4PM_STATUS_INVALID_KEY = 7,
  PC4PM_STATUS_CRYPTO = 8,
  PC4PM_STATUS_EMPTY_RESULT = 9,
  PC4PM_STATUS_INVALID_EPSILON = 10,
  PC4PM_STATUS_UNRESOLVED = 11,
  PC4PM_STATUS_NO_RESOURCES = 12,
  PC4PM_STATUS_IO = 13,
  PC4PM_STATUS_PANIC = 99,
} Pc4pmStatus;

// Opaque event-log abstraction.
typedef struct Pc4pmAbstraction Pc4pmAbstraction;

// Opaque event log.
typedef struct Pc4pmLog Pc4pmLog;

// Rust-owned bytes. Release with `pc4pm_buffer_free`.
typedef struct Pc4pmBuffer {
  uint8_t *data;
  uintptr_t len;
} Pc4pmBuffer;

typedef struct Pc4pmRisk {
  double uniqueness_rate;
  double avg_reid_probability;
} Pc4pmRisk;

typedef struct Pc4pmUtility {
  double variant_preservation;
  double df_distance;
  double event_count_ratio;
} Pc4pmUtility;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *pc4pm_last_error(void);

// Library version as a static NUL-terminated string.
const char *pc4pm_version(void);

// # Safety
// `buffer` must be NULL or point to a buffer filled by this library that has
// not been freed.
void pc4pm_buffer_free(struct Pc4pmBuffer *buffer);

// Parses XES bytes into a new log handle.
//
// # Safety
// `data` must point to `len` readable bytes; `out` must be writable.
enum Pc4pmStatus pc4pm_log_parse(const uint8_t *data, uintptr_t len, struct Pc4pmLog **out);

// # Safety
// `log` must be NULL or a handle from this library that has not been freed.
void pc4pm_log_free(struct Pc4pmLog *log);

// Canonical XES serialization.
//
// # Safety
// `log` must be a live handle; `out` must be writable.
enum Pc4pmStatus pc4pm_log_write(const struct Pc4pmLog *log, struct Pc4pmBuffer *out);

// # Safety
// `log` must be NULL or a live handle.
uintptr_t pc4pm_log_trace_count(const struct Pc4pmLog *log);

// # Safety
// `log` must be NULL or a live handle.
uintptr_t pc4pm_log_event_count(const struct Pc4pmLog *log);

// # Safety
// `log` must be NULL or a live handle.
uintptr_t pc4pm_log_metadata_count(const struct Pc4pmLog *log);

// Suppression with a JSON selector such as
// `{"level":"event","atoms":[{"key":"concept:name","op":"=","value":"d"}]}`.
// `attributes_json` is NULL to remove whole matches, or a JSON array of
// attribute keys to strip from them.
//
// # Safety
// Pointers must be live handles or NUL-terminated strings; `out` writable.
enum Pc4pmStatus pc4pm_suppress(const struct Pc4pmLog *log,
                                const char *selector_json,
                                const char *attributes_json,
                                struct Pc4pmLog **out);

// Group-privacy enforcement without timestamp generalization or a
// sensitive attribute. `kind` is "set", "multiset" or "subsequence".
//
// # Safety
// Pointers must be live handles or NUL-terminated strings; `out` writable.
enum Pc4pmStatus pc4pm_tlkc(const struct Pc4pmLog *log,
                            uintptr_t l,
                            uintptr_t k,
                            const char *kind,
                            struct Pc4pmLog **out);

// Differentially private publication with default pruning and variant length.
//
// # Safety
// `log` must be a live handle; `out` writable.
enum Pc4pmStatus pc4pm_dp_publish(const struct Pc4pmLog *log,
                                  double epsilon,
                                  uint64_t seed,
                                  struct Pc4pmLog **out);

// # Safety
// Pointers must be live handles or NUL-terminated strings; `out` writable.
enum Pc4pmStatus pc4pm_risk(const struct Pc4pmLog *log,
                            const char *kind,
                            uintptr_t l,
                            struct Pc4pmRisk *out);

// # Safety
// `original` and `anonymized` must be live handles; `out` writable.
enum Pc4pmStatus pc4pm_utility(const struct Pc4pmLog *original,
                               const struct Pc4pmLog *anonymized,
                               struct Pc4pmUtility *out);

// Encodes the directly-follows graph of `log` under the given key.
//
// # Safety
// `log` must be a live handle, `key_ref` NUL-terminated, `secret` readable
// for `secret_len` bytes, `out` writable.
enum Pc4pmStatus pc4pm_connector_encode(const struct Pc4pmLog *log,
                                        const char *key_ref,
                                        const uint8_t *secret,
                                        uintptr_t secret_len,
                                        struct Pc4pmAbstraction **out);

// Decodes a connector abstraction using the activity labels of
// `dictionary` as candidates. Writes the graph as JSON.
//
// # Safety
// Handles must be live, `key_ref` NUL-terminated, `secret` readable for
// `secret_len` bytes, `out` writable.
enum Pc4pmStatus pc4pm_connector_decode(const struct Pc4pmAbstraction *abstraction,
                                        const char *key_ref,
                                        const uint8_t *secret,
                                        uintptr_t secret_len,
                                        const struct Pc4pmLog *dictionary,
                                        struct Pc4pmBuffer *out);

// # Safety
// `data` must point to `len` readable bytes; `out` must be writable.
enum Pc4pmStatus pc4pm_abstraction_parse(const uint8_t *data,
                                         uintptr_t len,
                                         struct Pc4pmAbstraction **out);

// # Safety
// `abstraction` must be a live handle; `out` must be writable.
enum Pc4pmStatus pc4pm_abstraction_write(const struct Pc4pmAbstraction *abstraction,
                                         struct Pc4pmBuffer *out);

// # Safety
// `abstraction` must be NULL or a handle that has not been freed.
void pc4pm_abstraction_free(struct Pc4pmAbstraction *abstraction);

// Technique ids matching a JSON guide query such as `{"prac":"PPDP"}`.
// NULL or `{}` matches everything. Writes a JSON array.
//
// # Safety
// `query_json` must be NULL or NUL-terminated; `out` writable.
enum Pc4pmStatus pc4pm_guide(const char *query_json, struct Pc4pmBuffer *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PC4PM_H */
