/* SPDX-License-Identifier: Apache-2.0 */

#ifndef SWARM_CONSENSUS_H
#define SWARM_CONSENSUS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit by hand. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum SwarmStatus {
  SWARM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SWARM_STATUS_NULL_POINTER = 1,
  /**
   * An argument was malformed or out of range.
   */
  SWARM_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A string argument was not valid UTF-8.
   */
  SWARM_STATUS_INVALID_UTF8 = 3,
  /**
   * A configuration document failed to parse or validate.
   */
  SWARM_STATUS_INVALID_CONFIG = 4,
  /**
   * A reveal key did not match its commitment.
   */
  SWARM_STATUS_BINDING_FAILURE = 5,
  /**
   * Fewer agents than the operation needs.
   */
  SWARM_STATUS_TOO_FEW_AGENTS = 6,
  /**
   * A round had no scores to aggregate.
   */
  SWARM_STATUS_EMPTY_ROUND = 7,
  /**
   * An agent could not cover its deposit.
   */
  SWARM_STATUS_INSUFFICIENT_BALANCE = 8,
  /**
   * A caller-supplied buffer is too small; the required length was written.
   */
  SWARM_STATUS_BUFFER_TOO_SMALL = 9,
  /**
   * Internal invariant violated.
   */
  SWARM_STATUS_INTERNAL = 10,
  /**
   * A panic was caught at the boundary.
   */
  SWARM_STATUS_PANIC = 11,
} SwarmStatus;

/**
 * Opaque handle to a running scenario.
 */
typedef struct SwarmSimulation SwarmSimulation;

/**
 * Per-phase latency in milliseconds.
 */
typedef struct SwarmLatency {
  double generation;
  double commit;
  double reveal;
  double ranking;
  double aggregation;
  double total;
} SwarmLatency;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf`.
 *
 * Returns the message length including the terminating NUL, or 0 when there
 * is no error. When `buf` is null or `len` is too small nothing is written
 * beyond a truncated, NUL-terminated prefix; call again with a larger buffer.
 */
size_t swarm_last_error_message(char *buf, size_t len);

/**
 * Releases a string returned by this library. Null is ignored.
 */
void swarm_string_free(char *s);

/**
 * Creates a simulation from a JSON scenario document.
 */
enum SwarmStatus swarm_simulation_new(const char *config_json, struct SwarmSimulation **out);

/**
 * Destroys a simulation. Null is ignored.
 */
void swarm_simulation_free(struct SwarmSimulation *sim);

/**
 * Runs the next round. When `out_transcript_json` is non-null it receives
 * the round transcript as JSON, to be freed with [`swarm_string_free`].
 */
enum SwarmStatus swarm_simulation_step(struct SwarmSimulation *sim, char **out_transcript_json);

/**
 * Id of the next round to run, i.e. the number of rounds completed.
 */
enum SwarmStatus swarm_simulation_next_round(const struct SwarmSimulation *sim, uint64_t *out);

/**
 * Current rating of `agent` in [0, 1].
 */
enum SwarmStatus swarm_simulation_rating(const struct SwarmSimulation *sim,
                                         uint64_t agent,
                                         double *out);

/**
 * Current free token balance of `agent`.
 */
enum SwarmStatus swarm_simulation_balance(const struct SwarmSimulation *sim,
                                          uint64_t agent,
                                          double *out);

/**
 * Encrypts a response under `key` (32 bytes) and returns the commitment as
 * JSON `{"ciphertext": hex, "binding_tag": hex}`.
 */
enum SwarmStatus swarm_commit(const uint8_t *content,
                              size_t content_len,
                              double latent_quality,
                              const uint8_t *key,
                              char **out_commitment_json);

/**
 * Opens a commitment produced by [`swarm_commit`]. Returns
 * `SWARM_STATUS_BINDING_FAILURE` when `key` does not match. On success the
 * payload JSON `{"content": hex, "latent_quality": f64}` is returned.
 */
enum SwarmStatus swarm_reveal(const char *commitment_json,
                              const uint8_t *key,
                              char **out_payload_json);

/**
 * Number of rankers assigned to each response in a swarm of `n` agents.
 */
size_t swarm_rankers_per_response(size_t n);

/**
 * Builds the ranking assignment for `agents` from a 32-byte block hash.
 *
 * Edges are written as flat `(ranker, rankee)` pairs into `out_pairs`, which
 * holds `capacity` u64 values. `out_len` always receives the number of u64
 * values needed (twice the edge count); when it exceeds `capacity` the call
 * returns `SWARM_STATUS_BUFFER_TOO_SMALL` and writes nothing else.
 */
enum SwarmStatus swarm_build_assignment(const uint8_t *block_hash,
                                        const uint64_t *agents,
                                        size_t n_agents,
                                        uint64_t round_id,
                                        uint64_t *out_pairs,
                                        size_t capacity,
                                        size_t *out_len);

/**
 * Weighted-argmax winner selection.
 *
 * Scores arrive as three parallel arrays of length `n_scores`; weights as two
 * parallel arrays of length `n_weights`. Every ranker needs a weight. Ties go
 * to the smallest agent id.
 */
enum SwarmStatus swarm_select_winner(const uint64_t *rankers,
                                     const uint64_t *rankees,
                                     const double *scores,
                                     size_t n_scores,
                                     const uint64_t *weight_agents,
                                     const double *weights,
                                     size_t n_weights,
                                     uint64_t *out_winner);

/**
 * Evaluates the round latency model for `n_agents` agents.
 *
 * `params_json` may be null for the illustrative defaults; otherwise it is a
 * JSON object with any of `t_gen`, `t_commit`, `t_reveal`, `t_rank_token`,
 * `t_agg`, `k`. `seed` drives stochastic generation times.
 */
enum SwarmStatus swarm_latency(const char *params_json,
                               size_t n_agents,
                               uint64_t seed,
                               struct SwarmLatency *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SWARM_CONSENSUS_H */
