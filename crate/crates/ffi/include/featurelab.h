#ifndef FEATURELAB_H
#define FEATURELAB_H

#include <stddef.h>
#include <stdint.h>

/*
 Result codes.
 */
typedef enum FlStatus {
  FL_STATUS_OK = 0,
  FL_STATUS_NULL_POINTER = 1,
  /*
   Malformed text or an argument outside the model's domain.
   */
  FL_STATUS_INVALID_ARGUMENT = 2,
  /*
   Quadrature did not converge or a posterior degenerated.
   */
  FL_STATUS_NUMERIC_FAILURE = 3,
  /*
   The operation does not apply to this kind of model.
   */
  FL_STATUS_WRONG_MODEL_KIND = 4,
  FL_STATUS_RECURSION_VIOLATED = 5,
  /*
   An output buffer is shorter than required.
   */
  FL_STATUS_BUFFER_TOO_SMALL = 6,
  FL_STATUS_PANIC = 7,
} FlStatus;

/*
 Kinds reported by `fl_model_kind`.
 */
typedef enum FlModelKind {
  FL_MODEL_KIND_CRM = 0,
  FL_MODEL_KIND_SCALED_PROCESS = 1,
  FL_MODEL_KIND_SPECIES = 2,
} FlModelKind;

/*
 A feature allocation (or, for species models, a partition stored as one
 feature per customer).
 */
typedef struct FlAllocation FlAllocation;

/*
 A parsed model together with its numerical settings.
 */
typedef struct FlModel FlModel;

/*
 A tabulated posterior density of the scale.
 */
typedef struct FlPosterior FlPosterior;

/*
 A seeded ChaCha20 generator.
 */
typedef struct FlRng FlRng;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. Valid until the
 next call into the library from the same thread.
 */
const char *fl_last_error_message(void);

/*
 Parses a model from JSON or shorthand text, with numerical settings from
 `config_json` (null for defaults).

 # Safety
 `text` and a non-null `config_json` must be NUL-terminated strings; `out`
 must be a valid pointer.
 */
enum FlStatus fl_model_parse(const char *text, const char *config_json, struct FlModel **out);

/*
 # Safety
 `model` must come from `fl_model_parse` and not be used afterwards.
 */
void fl_model_free(struct FlModel *model);

/*
 # Safety
 `model` must be a live handle; `out` a valid pointer.
 */
enum FlStatus fl_model_kind(const struct FlModel *model, enum FlModelKind *out);

/*
 # Safety
 `out` must be a valid pointer.
 */
enum FlStatus fl_rng_new(uint64_t seed, struct FlRng **out);

/*
 # Safety
 `rng` must come from `fl_rng_new` and not be used afterwards.
 */
void fl_rng_free(struct FlRng *rng);

/*
 Predictive law of a CRM model, or of a scaled process conditioned on
 `psi` (ignored for CRM models). `known_probs` receives `k` values.

 # Safety
 `m` points to `k` counts; `known_probs` to room for `k` values.
 */
enum FlStatus fl_predictive(const struct FlModel *model,
                            size_t n,
                            const size_t *m,
                            size_t k,
                            double psi,
                            double *new_rate,
                            double *known_probs);

/*
 Marginal new-feature pmf of a scaled process on `0..=y_max`, the mass
 beyond `y_max`, and the marginal inclusion probabilities of the `k`
 known features.

 # Safety
 `m` points to `k` counts, `pmf` to `y_max + 1` values, `known_means` to
 `k` values.
 */
enum FlStatus fl_marginal_predictive(const struct FlModel *model,
                                     size_t n,
                                     const size_t *m,
                                     size_t k,
                                     size_t y_max,
                                     double *pmf,
                                     double *tail_mass,
                                     double *known_means);

/*
 Species predictive given block sizes: `p_new` and one probability per
 block in `p_old`.

 # Safety
 `blocks` and `p_old` point to `k` values.
 */
enum FlStatus fl_species_predictive(const struct FlModel *model,
                                    const size_t *blocks,
                                    size_t k,
                                    double *p_new,
                                    double *p_old);

/*
 Posterior of the scale of a scaled-process model.

 # Safety
 `m` points to `k` counts; `out` must be a valid pointer.
 */
enum FlStatus fl_psi_posterior(const struct FlModel *model,
                               size_t n,
                               const size_t *m,
                               size_t k,
                               struct FlPosterior **out);

/*
 Number of grid nodes in a posterior.

 # Safety
 `post` must be a live handle; `len` a valid pointer.
 */
enum FlStatus fl_posterior_len(const struct FlPosterior *post, size_t *len);

/*
 Copies abscissae, density and cdf values. Any output pointer may be null
 to skip it; the others need `len` entries.

 # Safety
 Non-null outputs must have room for `len` values.
 */
enum FlStatus fl_posterior_values(const struct FlPosterior *post,
                                  size_t len,
                                  double *a,
                                  double *density,
                                  double *cdf);

/*
 Inverse-CDF draw from a posterior.

 # Safety
 Handles must be live; `out` a valid pointer.
 */
enum FlStatus fl_posterior_sample(const struct FlPosterior *post, struct FlRng *rng, double *out);

/*
 # Safety
 `post` must come from `fl_psi_posterior` and not be used afterwards.
 */
void fl_posterior_free(struct FlPosterior *post);

/*
 Draws `n` customers. Species models give one feature per block.

 # Safety
 Handles must be live; `out` a valid pointer.
 */
enum FlStatus fl_sample(const struct FlModel *model,
                        struct FlRng *rng,
                        size_t n,
                        struct FlAllocation **out);

/*
 Parses an allocation from JSON lines, one array of feature ids per
 customer.

 # Safety
 `jsonl` must be a NUL-terminated string; `out` a valid pointer.
 */
enum FlStatus fl_allocation_parse(const char *jsonl, struct FlAllocation **out);

/*
 Number of customers and features.

 # Safety
 `alloc` must be live; non-null outputs must be valid pointers.
 */
enum FlStatus fl_allocation_shape(const struct FlAllocation *alloc, size_t *n, size_t *k);

/*
 Feature frequencies `m_i`, one per feature.

 # Safety
 `m` must have room for `len` values.
 */
enum FlStatus fl_allocation_counts(const struct FlAllocation *alloc, size_t *m, size_t len);

/*
 The allocation as JSON lines in a new string released with
 `fl_string_free`.

 # Safety
 `alloc` must be live; `out` a valid pointer.
 */
enum FlStatus fl_allocation_to_jsonl(const struct FlAllocation *alloc, char **out);

/*
 Log probability of an allocation under a CRM or scaled-process model.

 # Safety
 Handles must be live; `out` a valid pointer.
 */
enum FlStatus fl_allocation_log_prob(const struct FlModel *model,
                                     const struct FlAllocation *alloc,
                                     double *out);

/*
 # Safety
 `alloc` must come from this library and not be used afterwards.
 */
void fl_allocation_free(struct FlAllocation *alloc);

/*
 Log probability of a label sequence under a species model.

 # Safety
 `labels` points to `n` values; `out` is a valid pointer.
 */
enum FlStatus fl_eppf_log_prob(const struct FlModel *model,
                               const size_t *labels,
                               size_t n,
                               double *out);

/*
 # Safety
 `s` must come from this library and not be used afterwards.
 */
void fl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEATURELAB_H */
