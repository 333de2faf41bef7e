#include "misclass/misclass.h"

#include <cstring>
#include <new>
#include <string>

#include "misclass/distributions.hpp"
#include "misclass/elicit.hpp"
#include "misclass/error.hpp"
#include "misclass/simgen.hpp"
#include "misclass/workflow.hpp"

struct mc_rng {
  misclass::RandomStream stream;
};

struct mc_config {
  misclass::RunConfig config;
};

namespace {

thread_local std::string last_error;

mc_status fail(mc_status status, const char* message) {
  last_error = message;
  return status;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
mc_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return MC_OK;
  } catch (const misclass::ElicitationInfeasibleError& e) {
    return fail(MC_ERR_ELICITATION_INFEASIBLE, e.what());
  } catch (const misclass::InputError& e) {
    return fail(MC_ERR_INPUT, e.what());
  } catch (const misclass::DiagnosticUndefinedError& e) {
    return fail(MC_ERR_DIAGNOSTIC_UNDEFINED, e.what());
  } catch (const misclass::DomainError& e) {
    return fail(MC_ERR_DOMAIN, e.what());
  } catch (const misclass::DegenerateSupportError& e) {
    return fail(MC_ERR_DEGENERATE_SUPPORT, e.what());
  } catch (const misclass::SiteDegenerateError& e) {
    return fail(MC_ERR_SITE_DEGENERATE, (std::string(e.what()) + " [site " + e.site_id() + "]").c_str());
  } catch (const misclass::NumericalError& e) {
    return fail(MC_ERR_NUMERICAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MC_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MC_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MC_ERR_INTERNAL, "unknown failure");
  }
}

misclass::ElicitedPrior to_prior(const mc_elicited_prior& p) {
  misclass::ElicitedPrior out;
  out.shape1 = p.shape1;
  out.shape2 = p.shape2;
  out.lower = p.lower;
  out.upper = p.upper;
  out.mode = p.mode;
  out.residual = p.residual;
  out.at_search_boundary = p.at_search_boundary != 0;
  return out;
}

#define MC_REQUIRE(ptr) \
  if (!(ptr)) return fail(MC_ERR_NULL_ARGUMENT, #ptr " is null")

}  // namespace

extern "C" {

const char* mc_last_error(void) { return last_error.c_str(); }

const char* mc_status_name(mc_status status) {
  switch (status) {
    case MC_OK: return "ok";
    case MC_ERR_DOMAIN: return "domain_error";
    case MC_ERR_INPUT: return "input_error";
    case MC_ERR_NUMERICAL: return "numerical_error";
    case MC_ERR_DEGENERATE_SUPPORT: return "degenerate_support";
    case MC_ERR_ELICITATION_INFEASIBLE: return "elicitation_infeasible";
    case MC_ERR_SITE_DEGENERATE: return "site_degenerate";
    case MC_ERR_DIAGNOSTIC_UNDEFINED: return "diagnostic_undefined";
    case MC_ERR_NULL_ARGUMENT: return "null_argument";
    case MC_ERR_BUFFER_TOO_SMALL: return "buffer_too_small";
    case MC_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

int mc_exit_code(mc_status status) {
  switch (status) {
    case MC_OK: return 0;
    case MC_ERR_DOMAIN:
    case MC_ERR_INPUT:
    case MC_ERR_ELICITATION_INFEASIBLE:
    case MC_ERR_DIAGNOSTIC_UNDEFINED:
    case MC_ERR_NULL_ARGUMENT:
    case MC_ERR_BUFFER_TOO_SMALL: return 2;
    case MC_ERR_NUMERICAL:
    case MC_ERR_DEGENERATE_SUPPORT:
    case MC_ERR_SITE_DEGENERATE: return 3;
    case MC_ERR_INTERNAL: return 1;
  }
  return 1;
}

const char* mc_version(void) { return "1.0.0"; }

mc_status mc_rng_create(uint64_t seed, uint64_t stream_id, mc_rng** out) {
  MC_REQUIRE(out);
  return guarded([&] { *out = new mc_rng{misclass::RandomStream(seed, stream_id)}; });
}

void mc_rng_destroy(mc_rng* rng) { delete rng; }

mc_status mc_rng_uniform(mc_rng* rng, double* out) {
  MC_REQUIRE(rng);
  MC_REQUIRE(out);
  return guarded([&] { *out = rng->stream.uniform(); });
}

mc_status mc_polya_gamma_draw(mc_rng* rng, int64_t shape, double tilt, double* out) {
  MC_REQUIRE(rng);
  MC_REQUIRE(out);
  return guarded([&] { *out = misclass::draw_polya_gamma({shape, tilt}, rng->stream); });
}

mc_status mc_polya_gamma_moments(int64_t shape, double tilt, double* mean, double* variance) {
  MC_REQUIRE(mean);
  MC_REQUIRE(variance);
  return guarded([&] {
    *mean = misclass::polya_gamma_mean({shape, tilt});
    *variance = misclass::polya_gamma_variance({shape, tilt});
  });
}

mc_status mc_ibeta(double x, double shape1, double shape2, double* out) {
  MC_REQUIRE(out);
  return guarded([&] { *out = misclass::regularized_incomplete_beta(x, shape1, shape2); });
}

mc_status mc_ibeta_inv(double u, double shape1, double shape2, double* out) {
  MC_REQUIRE(out);
  return guarded([&] { *out = misclass::inverse_regularized_incomplete_beta(u, shape1, shape2); });
}

mc_status mc_truncated_beta_cdf(double shape1, double shape2, double lower, double upper, double x,
                                double* out) {
  MC_REQUIRE(out);
  return guarded([&] { *out = misclass::TruncatedBeta(shape1, shape2, lower, upper).cdf(x); });
}

mc_status mc_truncated_beta_draw(mc_rng* rng, double shape1, double shape2, double lower, double upper,
                                 double* out) {
  MC_REQUIRE(rng);
  MC_REQUIRE(out);
  return guarded(
      [&] { *out = misclass::draw_truncated_beta(shape1, shape2, lower, upper, rng->stream); });
}

mc_status mc_elicit(const mc_elicitation_spec* spec, mc_elicited_prior* out) {
  MC_REQUIRE(spec);
  MC_REQUIRE(out);
  return guarded([&] {
    misclass::ElicitationSpec s;
    s.mode = spec->mode;
    s.lower = spec->lower;
    s.upper = spec->upper;
    s.low = {spec->p_low, spec->kappa_low};
    s.high = {spec->p_high, spec->kappa_high};
    const misclass::ElicitedPrior p = misclass::elicit_prior(s);
    *out = {p.shape1, p.shape2, p.lower, p.upper, p.mode, p.residual, p.at_search_boundary ? 1 : 0,
            static_cast<int>(p.warnings.size())};
  });
}

mc_status mc_induced_delta_pmf(const mc_elicited_prior* prior, int64_t count, double* pmf,
                               size_t capacity) {
  MC_REQUIRE(prior);
  MC_REQUIRE(pmf);
  if (count < 0) return fail(MC_ERR_DOMAIN, "count must be nonnegative");
  if (capacity < static_cast<size_t>(count) + 1)
    return fail(MC_ERR_BUFFER_TOO_SMALL, "pmf buffer needs count + 1 entries");
  return guarded([&] {
    const auto values = misclass::induced_delta_pmf(to_prior(*prior), count);
    std::memcpy(pmf, values.data(), values.size() * sizeof(double));
  });
}

mc_status mc_apply_correction(int64_t n, int64_t y, const mc_rates* rates, mc_corrected_counts* out) {
  MC_REQUIRE(rates);
  MC_REQUIRE(out);
  return guarded([&] {
    const auto c = misclass::apply_correction(
        n, y, {rates->outcome, rates->eligibility_unvaccinated, rates->eligibility_vaccinated});
    *out = {c.n_eligible,    c.eligible_vaccinated, c.n_vaccinated, c.kappa, c.delta_outcome,
            c.delta_eligibility_unvaccinated, c.delta_eligibility_vaccinated};
  });
}

mc_status mc_compute_rho_hat(double q1, double q2, double r, double* out) {
  MC_REQUIRE(out);
  return guarded([&] { *out = misclass::compute_rho_hat(q1, q2, r); });
}

mc_status mc_true_or(double obs_rate_ctrl, double obs_rate_trt, double outcome_rate_trt,
                     double outcome_rate_ctrl, double* out) {
  MC_REQUIRE(out);
  return guarded([&] {
    *out = misclass::true_or(obs_rate_ctrl, obs_rate_trt, outcome_rate_trt, outcome_rate_ctrl);
  });
}

mc_status mc_expected_omega(int64_t n, double eligibility_rate, double linear_predictor, double* out) {
  MC_REQUIRE(out);
  return guarded([&] { *out = misclass::expected_omega(n, eligibility_rate, linear_predictor); });
}

mc_status mc_config_create(mc_config** out) {
  MC_REQUIRE(out);
  return guarded([&] { *out = new mc_config{}; });
}

mc_status mc_config_load(const char* path, mc_config** out) {
  MC_REQUIRE(path);
  MC_REQUIRE(out);
  return guarded([&] { *out = new mc_config{misclass::load_run_config(path)}; });
}

mc_status mc_config_parse(const char* text, mc_config** out) {
  MC_REQUIRE(text);
  MC_REQUIRE(out);
  return guarded([&] { *out = new mc_config{misclass::parse_run_config(text)}; });
}

mc_status mc_config_set(mc_config* config, const char* key, const char* value) {
  MC_REQUIRE(config);
  MC_REQUIRE(key);
  MC_REQUIRE(value);
  return guarded([&] {
    misclass::RunConfig updated = config->config;
    misclass::set_run_config_value(updated, key, value);
    updated.validate();
    config->config = std::move(updated);
  });
}

mc_status mc_config_serialize(const mc_config* config, char* buffer, size_t capacity, size_t* needed) {
  MC_REQUIRE(config);
  std::string text;
  const mc_status st = guarded([&] { text = misclass::serialize_run_config(config->config); });
  if (st != MC_OK) return st;
  if (needed) *needed = text.size() + 1;
  if (!buffer || capacity < text.size() + 1)
    return fail(MC_ERR_BUFFER_TOO_SMALL, "serialization buffer too small");
  std::memcpy(buffer, text.c_str(), text.size() + 1);
  return MC_OK;
}

mc_status mc_config_hash(const mc_config* config, char* buffer) {
  MC_REQUIRE(config);
  MC_REQUIRE(buffer);
  return guarded([&] {
    const std::string h = misclass::config_hash(config->config);
    std::memcpy(buffer, h.c_str(), h.size() + 1);
  });
}

void mc_config_destroy(mc_config* config) { delete config; }

mc_status mc_run(const mc_config* config, const char* mode) {
  MC_REQUIRE(config);
  MC_REQUIRE(mode);
  return guarded([&] { misclass::run(config->config, misclass::parse_run_mode(mode)); });
}

}  // extern "C"
