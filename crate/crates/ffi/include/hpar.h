#ifndef HPAR_H
#define HPAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HparStatus {
  HPAR_STATUS_OK = 0,
  HPAR_STATUS_NULL_POINTER = 1,
  HPAR_STATUS_INVALID_UTF8 = 2,
  HPAR_STATUS_CONFIG = 3,
  HPAR_STATUS_PARAMETER = 4,
  HPAR_STATUS_SIMULATION = 5,
  HPAR_STATUS_PANIC = 6,
} HparStatus;

/**
 * A parsed, validated scenario.
 */
typedef struct HparConfig HparConfig;

/**
 * The outputs of one completed run.
 */
typedef struct HparRun HparRun;

/**
 * Headline metrics of a run. Rates and means that are undefined for the
 * run (no traffic, nothing delivered) are NaN.
 */
typedef struct HparMetrics {
  uint64_t seed;
  uint64_t packets_sent;
  uint64_t packets_delivered;
  uint64_t packets_failed;
  double delivery_rate;
  double mean_latency_s;
  uint64_t transmissions;
  uint64_t hello_transmissions;
  uint64_t participating_nodes;
  double anonymity_set_mean;
  double src_ident_rate;
  double dst_ident_rate;
  uint64_t drops_ttl;
  uint64_t drops_unreachable;
  uint64_t drops_loss;
} HparMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or NULL.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *hpar_last_error(void);

/**
 * Parses a `key = value` scenario config.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HparStatus hpar_config_parse(const char *text, struct HparConfig **out);

/**
 * # Safety
 * `config` must be NULL or a handle from [`hpar_config_parse`] not yet freed.
 */
void hpar_config_free(struct HparConfig *config);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum HparStatus hpar_config_set_seed(struct HparConfig *config, uint64_t seed);

/**
 * Writes the canonical text form of `config`, every default spelled out.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
enum HparStatus hpar_config_emit(const struct HparConfig *config, char **out);

/**
 * Runs the scenario to completion. When `trace` is false the event trace is
 * left empty.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
enum HparStatus hpar_run(const struct HparConfig *config, bool trace, struct HparRun **out);

/**
 * # Safety
 * `run` must be NULL or a handle from [`hpar_run`] not yet freed.
 */
void hpar_run_free(struct HparRun *run);

/**
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum HparStatus hpar_run_metrics(const struct HparRun *run, struct HparMetrics *out);

/**
 * Event trace as JSON lines.
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum HparStatus hpar_run_trace_jsonl(const struct HparRun *run, char **out);

/**
 * The eavesdropper's observation log as JSON lines.
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum HparStatus hpar_run_observations_jsonl(const struct HparRun *run, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void hpar_string_free(char *s);

/**
 * Number of zone partitions for density `rho` (nodes per square meter),
 * area `area` and anonymity target `k`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HparStatus hpar_compute_h(double rho, double area, uint32_t k, uint32_t *out);

/**
 * Writes the 20-byte pseudonym of the node with 48-bit address `mac` at
 * `timestamp` seconds.
 *
 * # Safety
 * `out` must point to 20 writable bytes.
 */
enum HparStatus hpar_make_pseudonym(uint64_t mac, double timestamp, uint8_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HPAR_H */
