#ifndef SOCIAL_INVERSE_H
#define SOCIAL_INVERSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible entry point. Values 2 to 5 match the CLI exit codes.
 */
typedef enum SiStatus {
  SI_STATUS_OK = 0,
  SI_STATUS_NULL_POINTER = 1,
  SI_STATUS_CONFIG = 2,
  SI_STATUS_DATA = 3,
  SI_STATUS_NUMERICAL = 4,
  SI_STATUS_GENERATION = 5,
  SI_STATUS_BUFFER_SIZE = 6,
  SI_STATUS_PANIC = 7,
} SiStatus;

typedef struct SiGraph SiGraph;

typedef struct SiInverse SiInverse;

typedef struct SiModels SiModels;

typedef struct SiSimulation SiSimulation;

/*
 Message of the last failed call on this thread, or NULL. The pointer stays valid
 until the next failing call on the same thread.
 */
const char *si_last_error_message(void);

/*
 Static, NUL-terminated name of a status code.
 */
const char *si_status_name(enum SiStatus status);

/*
 Erdős–Rényi graph with self-loops and averaging-rule weights.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum SiStatus si_graph_erdos_renyi(size_t n, double p, uint64_t seed, struct SiGraph **out);

/*
 Combination matrix from `n × n` row-major weights; columns must sum to one.

 # Safety
 `weights` must point to `len` readable doubles and `out` to writable storage.
 */
enum SiStatus si_graph_from_weights(size_t n,
                                    const double *weights,
                                    size_t len,
                                    struct SiGraph **out);

/*
 Number of agents, or 0 for a NULL handle.

 # Safety
 `graph` must be NULL or a live handle.
 */
size_t si_graph_n_agents(const struct SiGraph *graph);

/*
 Copies the `n × n` weights in row-major order.

 # Safety
 `graph` must be a live handle and `out` must point to `len` writable doubles.
 */
enum SiStatus si_graph_weights(const struct SiGraph *graph, double *out, size_t len);

/*
 Perron vector of the graph, normalized to sum to one.

 # Safety
 `graph` must be a live handle and `out` must point to `len` writable doubles.
 */
enum SiStatus si_graph_perron_vector(const struct SiGraph *graph,
                                     double tol,
                                     double *out,
                                     size_t len);

/*
 Highest-degree agent.

 # Safety
 `graph` must be a live handle and `out` a writable pointer.
 */
enum SiStatus si_graph_most_central(const struct SiGraph *graph, size_t *out);

/*
 # Safety
 `graph` must be NULL or a handle not yet freed.
 */
void si_graph_free(struct SiGraph *graph);

/*
 Models from a JSON model specification (the same format the CLI reads).

 # Safety
 `json` must be a NUL-terminated string and `out` writable storage for one handle.
 */
enum SiStatus si_models_from_json(const char *json, struct SiModels **out);

/*
 `n_agents` agents sharing one categorical family; `pmfs` is `n_hypotheses × alphabet`
 row-major.

 # Safety
 `pmfs` must point to `len` readable doubles and `out` to writable storage.
 */
enum SiStatus si_models_categorical(size_t n_agents,
                                    size_t n_hypotheses,
                                    size_t alphabet,
                                    const double *pmfs,
                                    size_t len,
                                    struct SiModels **out);

/*
 # Safety
 `models` must be NULL or a live handle.
 */
size_t si_models_n_agents(const struct SiModels *models);

/*
 # Safety
 `models` must be NULL or a live handle.
 */
size_t si_models_n_hypotheses(const struct SiModels *models);

/*
 Leading term of the wrong-hypothesis bound for `agent` and hypothesis `wrong`.

 # Safety
 `models` must be a live handle and `out` a writable pointer.
 */
enum SiStatus si_error_bound(const struct SiModels *models,
                             size_t agent,
                             size_t true_state,
                             size_t wrong,
                             size_t batch_m,
                             double trace_r,
                             double *out);

/*
 # Safety
 `models` must be NULL or a handle not yet freed.
 */
void si_models_free(struct SiModels *models);

/*
 Simulation from uniform beliefs. The graph and models are copied, so both handles
 may be freed afterwards.

 # Safety
 `graph` and `models` must be live handles, `truths` must point to `n_truths`
 readable values and `out` to writable storage.
 */
enum SiStatus si_simulation_new(const struct SiGraph *graph,
                                const struct SiModels *models,
                                const size_t *truths,
                                size_t n_truths,
                                double delta,
                                uint64_t seed,
                                struct SiSimulation **out);

/*
 Runs one adapt/combine iteration. `public_out` receives the `n × H` public beliefs
 and, when not NULL, `lambda_out` the `n × (H−1)` log-ratios `log ψ_0 − log ψ_j`.

 # Safety
 `sim` must be a live handle; the output pointers must reference the stated number of
 writable doubles (`lambda_out` may be NULL).
 */
enum SiStatus si_simulation_step(struct SiSimulation *sim,
                                 double *public_out,
                                 size_t public_len,
                                 double *lambda_out,
                                 size_t lambda_len);

/*
 Number of completed iterations.

 # Safety
 `sim` must be NULL or a live handle.
 */
size_t si_simulation_iteration(const struct SiSimulation *sim);

/*
 # Safety
 `sim` must be NULL or a handle not yet freed.
 */
void si_simulation_free(struct SiSimulation *sim);

/*
 Streaming estimator for a network of `n` agents over `h` hypotheses, starting from
 uniform weights and zero log-likelihood ratios. `max_iter` of 0 means no cap.

 # Safety
 `out` must be writable storage for one handle.
 */
enum SiStatus si_inverse_new(size_t n,
                             size_t h,
                             double step_mu,
                             double delta,
                             size_t batch_m,
                             double tol,
                             size_t max_iter,
                             struct SiInverse **out);

/*
 Feeds one `n × H` row-major matrix of public beliefs. `updated` (optional) tells
 whether the estimates moved; `a_change` (optional) receives `‖Â_i − Â_{i−1}‖_F`, or
 NaN while warming up.

 # Safety
 `est` must be a live handle and `beliefs` must point to `len` readable doubles.
 `updated` and `a_change` may be NULL.
 */
enum SiStatus si_inverse_push_public(struct SiInverse *est,
                                     const double *beliefs,
                                     size_t len,
                                     bool *updated,
                                     double *a_change);

/*
 Feeds one `n × (H−1)` row-major log-ratio matrix `Λ_i` directly.

 # Safety
 As for [`si_inverse_push_public`].
 */
enum SiStatus si_inverse_push_lambda(struct SiInverse *est,
                                     const double *lambda,
                                     size_t len,
                                     bool *updated,
                                     double *a_change);

/*
 Number of estimator updates performed so far.

 # Safety
 `est` must be NULL or a live handle.
 */
size_t si_inverse_updates(const struct SiInverse *est);

/*
 Copies `Â` (`n × n`, row-major).

 # Safety
 `est` must be a live handle and `out` must point to `len` writable doubles.
 */
enum SiStatus si_inverse_a_est(const struct SiInverse *est, double *out, size_t len);

/*
 Copies `𝓛̂` (`n × (H−1)`, row-major).

 # Safety
 `est` must be a live handle and `out` must point to `len` writable doubles.
 */
enum SiStatus si_inverse_l_est(const struct SiInverse *est, double *out, size_t len);

/*
 Estimated hypothesis sets from the current `𝓛̂`. `set_mask` (`n × H`, row-major)
 receives 1 where a hypothesis belongs to the agent's set, `malicious` (length `n`)
 receives 1 for flagged agents. `reference` lists the states flags are relative to;
 pass NULL to use the hypothesis found in the most sets.

 # Safety
 `est` must be a live handle, `reference` NULL or `n_reference` readable values, and
 both outputs must hold the stated number of writable bytes.
 */
enum SiStatus si_inverse_hypotheses(const struct SiInverse *est,
                                    const size_t *reference,
                                    size_t n_reference,
                                    uint8_t *set_mask,
                                    size_t set_mask_len,
                                    uint8_t *malicious,
                                    size_t malicious_len);

/*
 # Safety
 `est` must be NULL or a handle not yet freed.
 */
void si_inverse_free(struct SiInverse *est);

#endif  /* SOCIAL_INVERSE_H */
