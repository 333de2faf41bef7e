#ifndef MISCLASS_MISCLASS_H
#define MISCLASS_MISCLASS_H

#include <stddef.h>
#include <stdint.h>

#if defined(MISCLASS_BUILDING_LIBRARY)
#define MC_API __attribute__((visibility("default")))
#else
#define MC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mc_status {
  MC_OK = 0,
  MC_ERR_DOMAIN = 1,
  MC_ERR_INPUT = 2,
  MC_ERR_NUMERICAL = 3,
  MC_ERR_DEGENERATE_SUPPORT = 4,
  MC_ERR_ELICITATION_INFEASIBLE = 5,
  MC_ERR_SITE_DEGENERATE = 6,
  MC_ERR_DIAGNOSTIC_UNDEFINED = 7,
  MC_ERR_NULL_ARGUMENT = 8,
  MC_ERR_BUFFER_TOO_SMALL = 9,
  MC_ERR_INTERNAL = 10
} mc_status;

/* Message of the last failure on the calling thread ("" after success). */
MC_API const char* mc_last_error(void);
MC_API const char* mc_status_name(mc_status status);
/* Process exit code for a status: 0 ok, 2 input/domain, 3 numerical, 1 internal. */
MC_API int mc_exit_code(mc_status status);
MC_API const char* mc_version(void);

/* Random streams */
typedef struct mc_rng mc_rng;
MC_API mc_status mc_rng_create(uint64_t seed, uint64_t stream_id, mc_rng** out);
MC_API void mc_rng_destroy(mc_rng* rng);
MC_API mc_status mc_rng_uniform(mc_rng* rng, double* out);

/* Distributions */
MC_API mc_status mc_polya_gamma_draw(mc_rng* rng, int64_t shape, double tilt, double* out);
MC_API mc_status mc_polya_gamma_moments(int64_t shape, double tilt, double* mean, double* variance);
MC_API mc_status mc_ibeta(double x, double shape1, double shape2, double* out);
MC_API mc_status mc_ibeta_inv(double u, double shape1, double shape2, double* out);
MC_API mc_status mc_truncated_beta_cdf(double shape1, double shape2, double lower, double upper,
                                       double x, double* out);
MC_API mc_status mc_truncated_beta_draw(mc_rng* rng, double shape1, double shape2, double lower,
                                        double upper, double* out);

/* Elicitation */
typedef struct mc_elicitation_spec {
  double mode;
  double lower;
  double upper;
  double p_low;
  double kappa_low;
  double p_high;
  double kappa_high;
} mc_elicitation_spec;

typedef struct mc_elicited_prior {
  double shape1;
  double shape2;
  double lower;
  double upper;
  double mode;
  double residual;
  int at_search_boundary;
  int warning_count;
} mc_elicited_prior;

MC_API mc_status mc_elicit(const mc_elicitation_spec* spec, mc_elicited_prior* out);
/* Writes count + 1 probabilities; `capacity` is the length of `pmf`. */
MC_API mc_status mc_induced_delta_pmf(const mc_elicited_prior* prior, int64_t count, double* pmf,
                                      size_t capacity);

/* Count correction */
typedef struct mc_rates {
  double outcome;
  double eligibility_unvaccinated;
  double eligibility_vaccinated;
} mc_rates;

typedef struct mc_corrected_counts {
  int64_t n_eligible;
  int64_t eligible_vaccinated;
  int64_t n_vaccinated;
  double kappa;
  int64_t delta_outcome;
  int64_t delta_eligibility_unvaccinated;
  int64_t delta_eligibility_vaccinated;
} mc_corrected_counts;

MC_API mc_status mc_apply_correction(int64_t n, int64_t y, const mc_rates* rates,
                                     mc_corrected_counts* out);

/* Workflow helpers */
MC_API mc_status mc_compute_rho_hat(double q1, double q2, double r, double* out);
MC_API mc_status mc_true_or(double obs_rate_ctrl, double obs_rate_trt, double outcome_rate_trt,
                            double outcome_rate_ctrl, double* out);
MC_API mc_status mc_expected_omega(int64_t n, double eligibility_rate, double linear_predictor,
                                   double* out);

/* Run configuration */
typedef struct mc_config mc_config;
MC_API mc_status mc_config_create(mc_config** out);
MC_API mc_status mc_config_load(const char* path, mc_config** out);
MC_API mc_status mc_config_parse(const char* text, mc_config** out);
MC_API mc_status mc_config_set(mc_config* config, const char* key, const char* value);
/* Copies the canonical text (NUL terminated) when it fits; `needed` receives
   the required size including the terminator. */
MC_API mc_status mc_config_serialize(const mc_config* config, char* buffer, size_t capacity,
                                     size_t* needed);
/* Writes 16 hex digits and a terminator; `buffer` must hold 17 bytes. */
MC_API mc_status mc_config_hash(const mc_config* config, char* buffer);
MC_API void mc_config_destroy(mc_config* config);

/* mode: "analyze", "simulate", "elicit-only" or "validate". */
MC_API mc_status mc_run(const mc_config* config, const char* mode);

#ifdef __cplusplus
}
#endif

#endif
