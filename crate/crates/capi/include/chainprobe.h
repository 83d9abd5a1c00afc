#ifndef CHAINPROBE_H
#define CHAINPROBE_H

/* Generated by cbindgen from crates/capi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a C API call.
 */
typedef enum CpStatus {
  CP_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  CP_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  CP_STATUS_INVALID_UTF8 = 2,
  /**
   * The WebAssembly binary could not be decoded or failed validation.
   */
  CP_STATUS_INVALID_MODULE = 3,
  /**
   * The ABI JSON could not be parsed or does not match the contract.
   */
  CP_STATUS_INVALID_ABI = 4,
  /**
   * An argument value is out of range or unknown.
   */
  CP_STATUS_INVALID_ARGUMENT = 5,
  /**
   * The analyzer panicked. The handles passed in remain valid.
   */
  CP_STATUS_INTERNAL = 6,
} CpStatus;

/**
 * Analysis settings. Starts from the command-line defaults.
 */
typedef struct CpConfig CpConfig;

/**
 * A decoded contract together with its ABI.
 */
typedef struct CpContract CpContract;

/**
 * Outcome of one analysis.
 */
typedef struct CpReport CpReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or an empty string.
 * Valid until the next C API call on the same thread.
 */
const char *cp_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cp_version(void);

/**
 * Decodes a contract from `wasm_len` bytes at `wasm` and an ABI JSON
 * string. On success `*out` receives a handle for [`cp_contract_free`].
 *
 * # Safety
 * `wasm` must point to `wasm_len` readable bytes, `abi_json` must be a
 * NUL-terminated string and `out` must be writable.
 */
enum CpStatus cp_contract_load(const uint8_t *wasm,
                               size_t wasm_len,
                               const char *abi_json,
                               struct CpContract **out);

/**
 * Releases a contract. Null is ignored.
 *
 * # Safety
 * `contract` must come from [`cp_contract_load`] and not be used afterwards.
 */
void cp_contract_free(struct CpContract *contract);

/**
 * New configuration with default settings. Never null.
 */
struct CpConfig *cp_config_new(void);

/**
 * Releases a configuration. Null is ignored.
 *
 * # Safety
 * `config` must come from [`cp_config_new`] and not be used afterwards.
 */
void cp_config_free(struct CpConfig *config);

/**
 * # Safety
 * `config` must be a live handle from [`cp_config_new`].
 */
enum CpStatus cp_config_set_max_rounds(struct CpConfig *config, uint32_t rounds);

/**
 * Total wall-clock budget in seconds; must be at least 1.
 *
 * # Safety
 * `config` must be a live handle from [`cp_config_new`].
 */
enum CpStatus cp_config_set_budget_secs(struct CpConfig *config, uint64_t secs);

/**
 * # Safety
 * `config` must be a live handle from [`cp_config_new`].
 */
enum CpStatus cp_config_set_seed(struct CpConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must be a live handle from [`cp_config_new`].
 */
enum CpStatus cp_config_set_loop_bound(struct CpConfig *config, uint32_t bound);

/**
 * # Safety
 * `config` must be a live handle from [`cp_config_new`].
 */
enum CpStatus cp_config_set_max_states(struct CpConfig *config, size_t states);

/**
 * Restricts the run to a comma-separated detector list such as
 * `"rollback,auth"`.
 *
 * # Safety
 * `config` must be a live handle and `list` a NUL-terminated string.
 */
enum CpStatus cp_config_set_detectors(struct CpConfig *config, const char *list);

/**
 * # Safety
 * `config` must be a live handle from [`cp_config_new`].
 */
enum CpStatus cp_config_set_strict_sensitive(struct CpConfig *config, bool on);

/**
 * Analyzes `contract`. `config` may be null for defaults. On success
 * `*out` receives a report for [`cp_report_free`].
 *
 * # Safety
 * `contract` and a non-null `config` must be live handles; `out` must be
 * writable.
 */
enum CpStatus cp_analyze(const struct CpContract *contract,
                         const struct CpConfig *config,
                         struct CpReport **out);

/**
 * The report as JSON. Owned by `report`; null if `report` is null.
 *
 * # Safety
 * `report` must be null or a live handle from [`cp_analyze`].
 */
const char *cp_report_json(const struct CpReport *report);

/**
 * The report as plain text. Owned by `report`; null if `report` is null.
 *
 * # Safety
 * `report` must be null or a live handle from [`cp_analyze`].
 */
const char *cp_report_text(const struct CpReport *report);

/**
 * Number of findings, 0 for a null report.
 *
 * # Safety
 * `report` must be null or a live handle from [`cp_analyze`].
 */
size_t cp_report_finding_count(const struct CpReport *report);

/**
 * Number of analysis rounds run, 0 for a null report.
 *
 * # Safety
 * `report` must be null or a live handle from [`cp_analyze`].
 */
size_t cp_report_round_count(const struct CpReport *report);

/**
 * Releases a report. Null is ignored.
 *
 * # Safety
 * `report` must come from [`cp_analyze`] and not be used afterwards.
 */
void cp_report_free(struct CpReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHAINPROBE_H */
