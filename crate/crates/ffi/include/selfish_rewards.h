#ifndef SELFISH_REWARDS_H
#define SELFISH_REWARDS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Bit for the block-reward component in an objective mask.
#define SR_OBJECTIVE_BLOCK 1

// Bit for the linear fee component in an objective mask.
#define SR_OBJECTIVE_LINEAR 2

// Bit for the Bernoulli bonus component in an objective mask.
#define SR_OBJECTIVE_BERNOULLI 4

// All components.
#define SR_OBJECTIVE_TOTAL 7

// Result code of every call.
typedef enum {
  SR_STATUS_OK = 0,
  SR_STATUS_NULL_POINTER = 1,
  SR_STATUS_INVALID_ARGUMENT = 2,
  SR_STATUS_NON_CONVERGENCE = 3,
  SR_STATUS_PARSE_ERROR = 4,
  SR_STATUS_NOT_FOUND = 5,
  SR_STATUS_PANIC = 6,
} SrStatus;

// Opaque reward specification.
typedef struct SrRewardSpec SrRewardSpec;

// Self-consistent orphan rate and the stationary distribution behind it.
typedef struct {
  double lambda;
  // Probability that a fresh attacker block in state 0 is withheld.
  double hide_probability;
  double p0;
  double p0_prime;
  double p0_dprime;
  double p1;
  // Ratio between consecutive lead states beyond 1.
  double tail_ratio;
  uint32_t iterations;
} SrEquilibrium;

// Reward rates split by source.
typedef struct {
  double block;
  double linear;
  double bernoulli;
  double total;
} SrBreakdown;

typedef struct {
  double beta_star;
  double objective_value;
  double honest_value;
  double lambda;
  // Every component at `beta_star`, per unit time.
  SrBreakdown breakdown;
} SrOptimization;

typedef struct {
  SrBreakdown attacker;
  SrBreakdown attacker_se;
  SrBreakdown honest;
  SrBreakdown honest_se;
  double orphan_rate;
  double orphan_rate_se;
  double growth_rate;
  double growth_rate_se;
  double lambda_used;
  uint64_t events;
  double elapsed_time;
} SrSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Builds the reward `C + a·t + Bernoulli(p)·E`. Pass zero to drop a
// component.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
SrStatus sr_spec_standard(double c, double a, double p, double e, SrRewardSpec **out);

// Parses a reward specification from JSON, for example
// `{"constant": 1, "linear": 0.5, "bernoulli": {"p": 0.25, "e": 4}}`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer to
// writable storage for one handle.
SrStatus sr_spec_from_json(const char *json, SrRewardSpec **out);

// Serializes a spec to JSON. Release the string with [`sr_string_free`].
//
// # Safety
// `spec` must come from this library and `out` must be writable.
SrStatus sr_spec_to_json(const SrRewardSpec *spec, char **out);

// Frees a spec handle. Null is a no-op.
//
// # Safety
// `spec` must be null or a handle from this library not yet freed.
void sr_spec_free(SrRewardSpec *spec);

// Frees a string returned by this library. Null is a no-op.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void sr_string_free(char *s);

// Solves for the equilibrium orphan rate. Use `INFINITY` for `beta` to
// always withhold.
//
// # Safety
// `spec` must come from this library and `out` must be writable.
SrStatus sr_solve_equilibrium(const SrRewardSpec *spec,
                              double alpha,
                              double gamma,
                              double beta,
                              SrEquilibrium *out);

// Attacker reward per unit time at the equilibrium.
//
// # Safety
// `spec` must come from this library and `out` must be writable.
SrStatus sr_attacker_reward(const SrRewardSpec *spec,
                            double alpha,
                            double gamma,
                            double beta,
                            SrBreakdown *out);

// Reward per unit time of an honest miner with hashrate `alpha`.
//
// # Safety
// `spec` must come from this library and `out` must be writable.
SrStatus sr_honest_benchmark(const SrRewardSpec *spec, double alpha, SrBreakdown *out);

// Finds the cutoff maximizing the components selected by `objective_mask`.
//
// # Safety
// `spec` must come from this library and `out` must be writable.
SrStatus sr_optimize_beta(const SrRewardSpec *spec,
                          double alpha,
                          double gamma,
                          uint32_t objective_mask,
                          SrOptimization *out);

// Smallest hashrate at which the best cutoff beats honest mining.
// Returns `SR_STATUS_NOT_FOUND` when no hashrate below one half is
// profitable.
//
// # Safety
// `spec` must come from this library and `out_alpha` must be writable.
SrStatus sr_profitability_threshold(const SrRewardSpec *spec,
                                    double gamma,
                                    uint32_t objective_mask,
                                    double *out_alpha);

// Monte Carlo run with `replicas` independent streams of `events` block
// events each. `mode` is one of the [`SrLambdaMode`] values; `fixed_lambda`
// is read only for `SR_LAMBDA_MODE_FIXED`.
//
// # Safety
// `spec` must come from this library and `out` must be writable.
SrStatus sr_simulate(const SrRewardSpec *spec,
                     double alpha,
                     double gamma,
                     double beta,
                     uint64_t events,
                     uint32_t replicas,
                     uint64_t seed,
                     uint32_t mode,
                     double fixed_lambda,
                     SrSimulation *out);

// Message for the last failed call on this thread, or null if the last
// call succeeded. The pointer stays valid until the next call into this
// library on the same thread.
const char *sr_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *sr_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SELFISH_REWARDS_H */
