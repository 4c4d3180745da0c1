/* C interface to the pivotbench metrics and latch simulator. */

#ifndef PIVOTBENCH_H
#define PIVOTBENCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define PB_OK 0

#define PB_ERR_NULL_ARG 1

#define PB_ERR_UTF8 2

#define PB_ERR_JSON 3

#define PB_ERR_COMPUTE 4

#define PB_ERR_PANIC 5

// Opaque simulator handle.
typedef struct PbSimulator PbSimulator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread; empty string when no
// failure has occurred yet.
const char *pb_last_error(void);

// Library version as a static NUL-terminated string. Do not free.
const char *pb_version(void);

// Releases a string produced by this library.
//
// # Safety
//
// `s` must be null or a pointer previously returned through an `out`
// parameter of this library, not yet freed.
void pb_string_free(char *s);

// Amendment-passing accuracy: `successes / n_scored`.
//
// # Safety
//
// `out` must be null or valid for writing one `f64`.
int32_t pb_apa(uint64_t successes, uint64_t n_scored, double *out);

// Resilience lift `(apa_strategy - apa_vanilla) / apa_vanilla`; rejects a
// zero baseline.
//
// # Safety
//
// `out` must be null or valid for writing one `f64`.
int32_t pb_resilience_lift(double apa_strategy, double apa_vanilla, double *out);

// Quadratic attention curve `clamp(alpha * (x - 0.5)^2 + gamma, 0, 1)`.
//
// # Safety
//
// `out` must be null or valid for writing one `f64`.
int32_t pb_retrieval_prob(double alpha, double gamma, double x, double *out);

// Joint success of a fact list: the product of per-fact probabilities.
//
// # Safety
//
// `probs` must be null or valid for reading `len` `f64`s; `out` must be
// null or valid for writing one `f64`.
int32_t pb_predicted_joint_success(const double *probs, uintptr_t len, double *out);

// Least-squares fit of `y = alpha * (x - 0.5)^2 + gamma`. `out_sse` may be
// null when the residual is not needed.
//
// # Safety
//
// `xs` and `ys` must be null or valid for reading `len` `f64`s each; each
// non-null `out_*` pointer must be valid for writing one `f64`.
int32_t pb_fit_attention_curve(const double *xs,
                               const double *ys,
                               uintptr_t len,
                               double *out_alpha,
                               double *out_gamma,
                               double *out_sse);

// Paired significance over two 0/1 outcome arrays of equal length:
// two-sided paired t and exact McNemar. `out_t_statistic` may be null; when
// the t statistic is undefined (degenerate differences) it is set to NaN.
//
// # Safety
//
// `a` and `b` must be null or valid for reading `len` bytes each; each
// non-null `out_*` pointer must be valid for writing one `f64`.
int32_t pb_paired_significance(const uint8_t *a,
                               const uint8_t *b,
                               uintptr_t len,
                               double *out_t_p,
                               double *out_mcnemar_p,
                               double *out_t_statistic);

// Exact two-sided McNemar p-value from discordant counts.
//
// # Safety
//
// `out` must be null or valid for writing one `f64`.
int32_t pb_mcnemar_exact(uint64_t b, uint64_t c, double *out);

// Creates a simulator from a JSON parameter object (same schema as the
// `[simulator]` config section; missing fields take their defaults; pass
// `"{}"` for all defaults). Returns null on error; consult
// [`pb_last_error`].
//
// # Safety
//
// `params_json` must be null or a valid NUL-terminated string.
struct PbSimulator *pb_simulator_new(const char *params_json);

// Releases a simulator handle. Null is a no-op.
//
// # Safety
//
// `sim` must be null or a handle from [`pb_simulator_new`], not yet freed;
// no other thread may be using it.
void pb_simulator_free(struct PbSimulator *sim);

// Simulates one completion for a probe trajectory described as JSON
// (`{"token_count": .., "fact_positions": [..], "chained": bool,
// "update_position": x|null, "seed": n}`). `draw_seed` drives the draw
// stream; `protocol_steps` of 0 means no protocol. On success `*out` holds
// a JSON object `{"trajectory_id", "expected_signal", "response"}` owned by
// the caller (release with [`pb_string_free`]).
//
// # Safety
//
// `sim` must be null or a live handle from [`pb_simulator_new`];
// `probe_json` must be null or a valid NUL-terminated string; `out` must be
// null or valid for writing one pointer.
int32_t pb_simulator_respond(const struct PbSimulator *sim,
                             const char *probe_json,
                             uint64_t draw_seed,
                             uint32_t protocol_steps,
                             char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PIVOTBENCH_H */
