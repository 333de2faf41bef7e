#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "misclass/misclass.h"

namespace {

const std::string kData = MISCLASS_TEST_DATA;

}  // namespace

TEST_SUITE("capi") {

TEST_CASE("status names and exit codes") {
  CHECK(std::string(mc_version()).size() > 0);
  CHECK(std::string(mc_status_name(MC_OK)).size() > 0);
  CHECK(mc_exit_code(MC_OK) == 0);
  CHECK(mc_exit_code(MC_ERR_INPUT) == 2);
  CHECK(mc_exit_code(MC_ERR_DOMAIN) == 2);
  CHECK(mc_exit_code(MC_ERR_NUMERICAL) == 3);
  CHECK(mc_exit_code(MC_ERR_SITE_DEGENERATE) == 3);
  CHECK(mc_exit_code(MC_ERR_INTERNAL) == 1);
}

TEST_CASE("null arguments are reported, not dereferenced") {
  CHECK(mc_rng_create(1, 0, nullptr) == MC_ERR_NULL_ARGUMENT);
  CHECK(std::string(mc_last_error()).find("null") != std::string::npos);
  double x = 0.0;
  CHECK(mc_rng_uniform(nullptr, &x) == MC_ERR_NULL_ARGUMENT);
  CHECK(mc_elicit(nullptr, nullptr) == MC_ERR_NULL_ARGUMENT);
  CHECK(mc_run(nullptr, "validate") == MC_ERR_NULL_ARGUMENT);
  mc_rng_destroy(nullptr);
  mc_config_destroy(nullptr);
}

TEST_CASE("random streams and draws") {
  mc_rng* a = nullptr;
  mc_rng* b = nullptr;
  REQUIRE(mc_rng_create(42, 3, &a) == MC_OK);
  REQUIRE(mc_rng_create(42, 3, &b) == MC_OK);
  CHECK(std::string(mc_last_error()).empty());
  for (int i = 0; i < 10; ++i) {
    double u = 0.0, v = 0.0;
    REQUIRE(mc_rng_uniform(a, &u) == MC_OK);
    REQUIRE(mc_rng_uniform(b, &v) == MC_OK);
    CHECK(u == v);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
  double mean = 0.0, variance = 0.0;
  REQUIRE(mc_polya_gamma_moments(1, 0.0, &mean, &variance) == MC_OK);
  CHECK(mean == doctest::Approx(0.25));
  CHECK(variance == doctest::Approx(1.0 / 24.0));
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    double w = 0.0;
    REQUIRE(mc_polya_gamma_draw(a, 1, 0.0, &w) == MC_OK);
    sum += w;
  }
  CHECK(sum / 20000 == doctest::Approx(0.25).epsilon(0.02));
  double w = 1.0;
  CHECK(mc_polya_gamma_draw(a, 0, 0.7, &w) == MC_OK);
  CHECK(w == 0.0);
  CHECK(mc_polya_gamma_draw(a, -1, 0.0, &w) == MC_ERR_DOMAIN);

  double t = 0.0;
  REQUIRE(mc_truncated_beta_draw(a, 2.0, 5.0, 0.1, 0.3, &t) == MC_OK);
  CHECK(t >= 0.1);
  CHECK(t <= 0.3);
  mc_rng_destroy(a);
  mc_rng_destroy(b);
}

TEST_CASE("special functions") {
  double v = 0.0;
  REQUIRE(mc_ibeta(0.3, 1.0, 1.0, &v) == MC_OK);
  CHECK(v == doctest::Approx(0.3));
  // I_x(2, 1) = x^2.
  REQUIRE(mc_ibeta(0.4, 2.0, 1.0, &v) == MC_OK);
  CHECK(v == doctest::Approx(0.16));
  double x = 0.0;
  REQUIRE(mc_ibeta_inv(0.16, 2.0, 1.0, &x) == MC_OK);
  CHECK(x == doctest::Approx(0.4));
  REQUIRE(mc_truncated_beta_cdf(1.0, 1.0, 0.2, 0.6, 0.4, &v) == MC_OK);
  CHECK(v == doctest::Approx(0.5));
  CHECK(mc_ibeta(1.5, 1.0, 1.0, &v) == MC_ERR_DOMAIN);
}

TEST_CASE("elicitation and the induced delta distribution") {
  const mc_elicitation_spec spec{0.05, 0.02, 0.20, 0.05, 0.03, 0.95, 0.15};
  mc_elicited_prior prior{};
  REQUIRE(mc_elicit(&spec, &prior) == MC_OK);
  CHECK((prior.shape1 - 1) / (prior.shape1 + prior.shape2 - 2) == doctest::Approx(0.05));
  CHECK(std::abs(prior.residual) < 1e-6);
  CHECK(prior.at_search_boundary == 0);
  CHECK(prior.warning_count == 0);

  std::vector<double> pmf(5654);
  CHECK(mc_induced_delta_pmf(&prior, 5653, pmf.data(), 100) == MC_ERR_BUFFER_TOO_SMALL);
  REQUIRE(mc_induced_delta_pmf(&prior, 5653, pmf.data(), pmf.size()) == MC_OK);
  double total = 0.0;
  std::size_t mode = 0;
  for (std::size_t d = 0; d < pmf.size(); ++d) {
    total += pmf[d];
    if (pmf[d] > pmf[mode]) mode = d;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(mode == 283);

  const mc_elicitation_spec infeasible{0.5, 0.0, 1.0, 0.05, 0.02, 0.95, 0.98};
  CHECK(mc_elicit(&infeasible, &prior) == MC_ERR_ELICITATION_INFEASIBLE);
  CHECK(mc_exit_code(MC_ERR_ELICITATION_INFEASIBLE) == 2);
}

TEST_CASE("count correction") {
  const mc_rates rates{0.1, 0.1, 0.1};
  mc_corrected_counts c{};
  REQUIRE(mc_apply_correction(100, 30, &rates, &c) == MC_OK);
  CHECK(c.n_eligible == 90);
  CHECK(c.eligible_vaccinated == 27);
  CHECK(c.n_vaccinated == 34);
  CHECK(c.kappa == -11.0);
  const mc_rates all_out{0.0, 1.0, 1.0};
  CHECK(mc_apply_correction(10, 3, &all_out, &c) == MC_ERR_SITE_DEGENERATE);
  CHECK(std::string(mc_last_error()).size() > 0);
}

TEST_CASE("workflow helpers") {
  double v = 0.0;
  REQUIRE(mc_compute_rho_hat(0.061, 0.120, 0.25, &v) == MC_OK);
  CHECK(v == doctest::Approx(0.091));
  CHECK(mc_compute_rho_hat(0.6, 0.9, 0.5, &v) == MC_ERR_DOMAIN);
  REQUIRE(mc_true_or(0.30, 0.33, 0.13, 0.07, &v) == MC_OK);
  CHECK(std::abs(v - 1.335) <= 0.001);
  REQUIRE(mc_expected_omega(100, 0.0, 0.0, &v) == MC_OK);
  CHECK(v == doctest::Approx(25.0));
}

TEST_CASE("configuration handles") {
  mc_config* c = nullptr;
  REQUIRE(mc_config_parse("iterations = 400\nburn_in = 100\nseed = 5\n", &c) == MC_OK);
  REQUIRE(mc_config_set(c, "chains", "2") == MC_OK);
  CHECK(mc_config_set(c, "colour", "blue") == MC_ERR_INPUT);
  CHECK(std::string(mc_last_error()).find("colour") != std::string::npos);

  std::size_t needed = 0;
  CHECK(mc_config_serialize(c, nullptr, 0, &needed) == MC_ERR_BUFFER_TOO_SMALL);
  REQUIRE(needed > 1);
  std::string text(needed, '\0');
  REQUIRE(mc_config_serialize(c, text.data(), text.size(), &needed) == MC_OK);
  CHECK(std::strlen(text.c_str()) == needed - 1);
  CHECK(std::string(text.c_str()).find("chains = 2") != std::string::npos);

  mc_config* again = nullptr;
  REQUIRE(mc_config_parse(text.c_str(), &again) == MC_OK);
  char h1[17];
  char h2[17];
  REQUIRE(mc_config_hash(c, h1) == MC_OK);
  REQUIRE(mc_config_hash(again, h2) == MC_OK);
  CHECK(std::string(h1) == std::string(h2));
  CHECK(std::strlen(h1) == 16);
  mc_config_destroy(again);
  mc_config_destroy(c);

  mc_config* bad = nullptr;
  CHECK(mc_config_parse("iterations = 10\nburn_in = 20\n", &bad) == MC_ERR_INPUT);
  CHECK(bad == nullptr);
  CHECK(mc_config_load((kData + "/bad.cfg").c_str(), &bad) == MC_ERR_INPUT);
  CHECK(mc_config_load((kData + "/absent.cfg").c_str(), &bad) == MC_ERR_INPUT);
}

TEST_CASE("validate run through the handle") {
  mc_config* c = nullptr;
  REQUIRE(mc_config_load((kData + "/analyze.cfg").c_str(), &c) == MC_OK);
  CHECK(mc_run(c, "validate") == MC_OK);
  CHECK(mc_run(c, "plot") == MC_ERR_INPUT);
  REQUIRE(mc_config_set(c, "registry_file", "") == MC_OK);
  CHECK(mc_run(c, "validate") == MC_ERR_INPUT);
  mc_config_destroy(c);
}

}  // TEST_SUITE
