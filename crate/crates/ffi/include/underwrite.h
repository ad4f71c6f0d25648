#ifndef UNDERWRITE_H
#define UNDERWRITE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * No divergence: the chain verified clean.
 */
#define UW_NO_DIVERGENCE UINT64_MAX

typedef enum UwStatus {
  UW_STATUS_OK = 0,
  UW_STATUS_NULL_ARGUMENT = 1,
  UW_STATUS_INVALID_UTF8 = 2,
  UW_STATUS_INVALID_ARGUMENT = 3,
  UW_STATUS_IO = 4,
  UW_STATUS_LEDGER_CORRUPT = 5,
  UW_STATUS_RESERVED_KIND = 6,
  UW_STATUS_SCHEMA_VIOLATION = 7,
  UW_STATUS_PANIC = 8,
} UwStatus;

/**
 * Opaque ledger handle.
 */
typedef struct UwLedger UwLedger;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the last failure on this thread, or null. The pointer stays
 * valid until the next call into this library on the same thread.
 */
const char *uw_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *uw_version(void);

/**
 * Wilson score interval for `successes` of `n` at quantile `z`.
 *
 * # Safety
 * `lower` and `upper` must be valid for writes.
 */
enum UwStatus uw_wilson_interval(uint64_t successes,
                                 uint64_t n,
                                 double z,
                                 double *lower,
                                 double *upper);

/**
 * Two-sided exact McNemar p-value from the discordant counts.
 *
 * # Safety
 * `p` must be valid for writes.
 */
enum UwStatus uw_mcnemar_exact(uint64_t b, uint64_t c, double *p);

/**
 * Two-sided Fisher exact p-value for the table `[[a, b], [c, d]]`.
 *
 * # Safety
 * `p` must be valid for writes.
 */
enum UwStatus uw_fisher_exact(uint64_t a, uint64_t b, uint64_t c, uint64_t d, double *p);

/**
 * Validates one agent output document (draft or critique). On a violation
 * the reason is available from [`uw_last_error`].
 *
 * # Safety
 * `json` must be a NUL-terminated string. `is_critique` must be null or
 * valid for writes.
 */
enum UwStatus uw_validate_output(const char *json, bool *is_critique);

/**
 * In-memory ledger on the system clock.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum UwStatus uw_ledger_in_memory(struct UwLedger **out);

/**
 * Opens or creates a JSONL ledger file. An existing file whose chain is
 * broken is refused with `LedgerCorrupt`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum UwStatus uw_ledger_open(const char *path, bool fsync, struct UwLedger **out);

/**
 * # Safety
 * `ledger` must be null or a handle from this library not yet freed.
 */
void uw_ledger_free(struct UwLedger *ledger);

/**
 * Appends one event. `kind` is a snake_case event kind such as
 * `"agent_output"`; `human_decision` and `recorded` are refused with
 * `ReservedKind`. `payload_json` must be a JSON document.
 *
 * # Safety
 * `ledger` must be a live handle; the strings must be NUL-terminated;
 * `seq` must be null or valid for writes.
 */
enum UwStatus uw_ledger_append(const struct UwLedger *ledger,
                               const char *case_id,
                               const char *kind,
                               const char *payload_json,
                               uint64_t *seq);

/**
 * Number of records, header excluded.
 *
 * # Safety
 * `ledger` must be a live handle; `len` must be valid for writes.
 */
enum UwStatus uw_ledger_len(const struct UwLedger *ledger, uint64_t *len);

/**
 * Recomputes the chain of a live ledger. `divergence_seq` receives the
 * first failing seq, or [`UW_NO_DIVERGENCE`].
 *
 * # Safety
 * `ledger` must be a live handle; `divergence_seq` must be valid for writes.
 */
enum UwStatus uw_ledger_verify(const struct UwLedger *ledger, uint64_t *divergence_seq);

/**
 * Verifies a ledger file on disk without opening it for append.
 *
 * # Safety
 * `path` must be NUL-terminated; `records_checked` may be null;
 * `divergence_seq` must be valid for writes.
 */
enum UwStatus uw_verify_file(const char *path, uint64_t *records_checked, uint64_t *divergence_seq);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UNDERWRITE_H */
