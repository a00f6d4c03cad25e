/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef RMAB_H
#define RMAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RmabStatus {
  RMAB_STATUS_OK = 0,
  RMAB_STATUS_NULL_POINTER = 1,
  RMAB_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The index bisection could not bracket a sign change.
   */
  RMAB_STATUS_BRACKET_FAILURE = 3,
  RMAB_STATUS_NOT_CONVERGED = 4,
  RMAB_STATUS_INTERNAL = 5,
  RMAB_STATUS_PANIC = 6,
} RmabStatus;

typedef enum RmabPolicy {
  RMAB_POLICY_WHITTLE = 0,
  RMAB_POLICY_RANDOM = 1,
  RMAB_POLICY_ROUND_ROBIN = 2,
  RMAB_POLICY_CSOC = 3,
} RmabPolicy;

/**
 * A generated cohort.
 */
typedef struct RmabCohort RmabCohort;

/**
 * Ordered arm ids.
 */
typedef struct RmabRanking RmabRanking;

/**
 * A study advanced one week at a time.
 */
typedef struct RmabStudy RmabStudy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread; empty after success.
 *
 * The pointer stays valid until the next rmab call on this thread.
 */
const char *rmab_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rmab_version(void);

/**
 * Whittle index of `state` for the model `pSA = P(S, A -> 1)`.
 *
 * A non-positive `tol` selects the default tolerance.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum RmabStatus rmab_whittle_index(double p00,
                                   double p10,
                                   double p01,
                                   double p11,
                                   double beta,
                                   uint8_t state,
                                   double tol,
                                   double *out);

/**
 * Q-values under passive subsidy `lambda`, written as `out[2 * state + action]`.
 *
 * # Safety
 * `out` must be valid for writing four doubles.
 */
enum RmabStatus rmab_q_values(double p00,
                              double p10,
                              double p01,
                              double p11,
                              double beta,
                              double lambda,
                              double *out);

/**
 * Expected top-k footrule error of a uniformly random order.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum RmabStatus rmab_expected_random_error(size_t n, size_t k, double *out);

/**
 * Standard-deviation bound of the random error and whether it is proven for `(n, k)`.
 *
 * # Safety
 * `bound` and `valid` must be valid for writes.
 */
enum RmabStatus rmab_random_error_std_bound(size_t n, size_t k, double *bound, bool *valid);

/**
 * `(expected - observed) / bound`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum RmabStatus rmab_sigma_multiple(double expected, double bound, double observed, double *out);

/**
 * Monte Carlo mean and sample standard deviation of the random error.
 *
 * # Safety
 * `mean` and `std_dev` must be valid for writes.
 */
enum RmabStatus rmab_monte_carlo_random_error(size_t n,
                                              size_t k,
                                              size_t trials,
                                              uint64_t seed,
                                              double *mean,
                                              double *std_dev);

/**
 * Ranking from an explicit order of distinct ids.
 *
 * # Safety
 * `ids` must point to `len` values; `out` must be valid for writes.
 */
enum RmabStatus rmab_ranking_new(const uint64_t *ids, size_t len, struct RmabRanking **out);

/**
 * Ranking by descending index, ties by ascending id.
 *
 * # Safety
 * `ids` and `indices` must point to `len` values; `out` must be valid for writes.
 */
enum RmabStatus rmab_ranking_from_indices(const uint64_t *ids,
                                          const double *indices,
                                          size_t len,
                                          struct RmabRanking **out);

/**
 * # Safety
 * `ranking` must be a live handle; `out` must be valid for writes.
 */
enum RmabStatus rmab_ranking_len(const struct RmabRanking *ranking, size_t *out);

/**
 * 1-based position of `id`.
 *
 * # Safety
 * `ranking` must be a live handle; `out` must be valid for writes.
 */
enum RmabStatus rmab_ranking_rank(const struct RmabRanking *ranking, uint64_t id, size_t *out);

/**
 * Copies the first `min(cap, len)` ids into `buf`.
 *
 * # Safety
 * `ranking` must be a live handle; `buf` must hold `cap` values.
 */
enum RmabStatus rmab_ranking_ids(const struct RmabRanking *ranking, uint64_t *buf, size_t cap);

/**
 * # Safety
 * `ranking` must be null or a handle not yet freed.
 */
void rmab_ranking_free(struct RmabRanking *ranking);

/**
 * Top-k Spearman footrule error of `predicted` against `observed`.
 *
 * # Safety
 * Both handles must be live; `out` must be valid for writes.
 */
enum RmabStatus rmab_spearman_topk(const struct RmabRanking *predicted,
                                   const struct RmabRanking *observed,
                                   size_t k,
                                   double *out);

/**
 * Top-k Kendall error of `predicted` against `observed`.
 *
 * # Safety
 * Both handles must be live; `out` must be valid for writes.
 */
enum RmabStatus rmab_kendall_topk(const struct RmabRanking *predicted,
                                  const struct RmabRanking *observed,
                                  size_t k,
                                  double *out);

/**
 * The built-in three-group synthetic cohort of `n` arms.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum RmabStatus rmab_cohort_synthetic(size_t n,
                                      double prediction_noise,
                                      uint64_t seed,
                                      struct RmabCohort **out);

/**
 * # Safety
 * `cohort` must be a live handle; `out` must be valid for writes.
 */
enum RmabStatus rmab_cohort_len(const struct RmabCohort *cohort, size_t *out);

/**
 * # Safety
 * `cohort` must be null or a handle not yet freed.
 */
void rmab_cohort_free(struct RmabCohort *cohort);

/**
 * Starts a study on a copy of `cohort`.
 *
 * # Safety
 * `cohort` must be a live handle; `out` must be valid for writes.
 */
enum RmabStatus rmab_study_new(const struct RmabCohort *cohort,
                               enum RmabPolicy policy,
                               size_t budget_k,
                               double beta,
                               uint64_t seed,
                               struct RmabStudy **out);

/**
 * Runs one week; writes the number of engaging arms afterwards.
 *
 * # Safety
 * `study` must be a live handle; `engaging` must be valid for writes.
 */
enum RmabStatus rmab_study_step(struct RmabStudy *study, size_t *engaging);

/**
 * Arms acted on in the most recent week, in selection order.
 *
 * Writes the full count to `len` and copies at most `cap` ids into `buf`.
 *
 * # Safety
 * `study` must be a live handle; `buf` must hold `cap` values; `len` must be valid for writes.
 */
enum RmabStatus rmab_study_last_selection(const struct RmabStudy *study,
                                          uint64_t *buf,
                                          size_t cap,
                                          size_t *len);

/**
 * Engaging-to-non-engaging transitions so far.
 *
 * # Safety
 * `study` must be a live handle; `out` must be valid for writes.
 */
enum RmabStatus rmab_study_drops(const struct RmabStudy *study, size_t *out);

/**
 * # Safety
 * `study` must be null or a handle not yet freed.
 */
void rmab_study_free(struct RmabStudy *study);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RMAB_H */
