#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "misclass/correct.hpp"
#include "misclass/model.hpp"
#include "misclass/rng.hpp"

namespace misclass {

// Truth for a synthetic cluster-randomized trial.
struct ScenarioSpec {
  std::string name;
  std::vector<std::size_t> sites_per_group;  // u_v
  std::vector<int> group_arm;                // arm of each group
  std::vector<std::int64_t> n_obs;           // observed eligible count per site
  double intercept = 0.0;                    // alpha_1
  double arm_effect = 0.0;                   // alpha_2
  double site_variance = 0.25;
  double group_variance = 0.07;
  std::array<MisclassRates, 2> true_rates;   // by arm
  std::array<double, 2> observed_rates{};    // baseline vaccination probability by arm

  std::size_t num_sites() const noexcept { return n_obs.size(); }
  std::size_t num_groups() const noexcept { return sites_per_group.size(); }
  void validate() const;
};

// Built-in scenarios "I", "II", "III": 90 sites in 10 systems of 9, control
// systems first, observed rates 30% / 33%, eligibility misclassification 0.04
// in both arms. Per-site sizes are uniform integers in [150, 400] drawn from
// `n_obs_seed`.
ScenarioSpec builtin_scenario(std::string_view name, std::uint64_t n_obs_seed);

struct GeneratedSite {
  std::string site_id;
  std::string group_id;
  int arm = 0;
  double baseline_prob = 0.0;
  std::int64_t n_obs = 0;
  std::int64_t y_obs = 0;
  std::int64_t n_eligible = 0;    // true N*
  std::int64_t n_vaccinated = 0;  // true Y*
};

struct GeneratedData {
  std::vector<GeneratedSite> sites;
  std::vector<double> site_effects;
  std::vector<double> group_effects;

  std::vector<SiteRecord> observed_records() const;
  std::vector<SiteRecord> corrected_records() const;
};

GeneratedData generate_site_data(const ScenarioSpec& spec, RandomStream& rng);

// Odds ratio of the corrected rates p + rho1 (1 - p) between arms.
double true_or(double obs_rate_ctrl, double obs_rate_trt, double outcome_rate_trt,
               double outcome_rate_ctrl);

// E[omega | rho2, beta] for a site of observed size n and linear predictor z.
double expected_omega(std::int64_t n, double eligibility_rate, double linear_predictor);

// Mode and 5% / 95% percentiles of one assumed rate, with hard bounds.
struct RateAssumption {
  double mode = 0.0;
  double kappa05 = 0.0;
  double kappa95 = 0.0;
  double lower = 0.0;
  double upper = 1.0;
};

enum class FitKind { misclassification, naive_observed, naive_corrected };

struct ModelSpec {
  std::string label;
  FitKind kind = FitKind::misclassification;
  std::array<RatePriorTriple, 2> arm_priors;  // by arm
};

ModelSpec misclassification_spec(std::string label, const RateAssumption& outcome_ctrl,
                                 const RateAssumption& outcome_trt,
                                 const RateAssumption& eligibility);
ModelSpec naive_spec(FitKind kind);

// Set 1 (S1:A1..C3), Set 2 (S2:A1..C3) and the two naive fits.
std::vector<ModelSpec> builtin_model_specs();
ModelSpec find_model_spec(std::string_view label);

struct ReplicationResult {
  bool ok = false;
  double bias_log_or = 0.0;
  bool covered = false;
  double half_width = 0.0;
  std::array<double, 2> rate_bias{};
  std::string message;
};

struct MCMetrics {
  std::string label;
  double true_log_or = 0.0;
  double mean_bias_log_or = 0.0;
  double coverage_95 = 0.0;
  double mean_half_width = 0.0;
  std::array<double, 2> rate_bias{};
  std::size_t successes = 0;
  std::size_t failures = 0;
  std::vector<ReplicationResult> replications;
};

struct MonteCarloConfig {
  std::size_t replications = 20;
  int iterations = 2500;
  int burn_in = 500;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

// Fits every model spec to each replicated dataset; results are independent
// of the thread count.
std::vector<MCMetrics> run_monte_carlo(const ScenarioSpec& spec,
                                       std::span<const ModelSpec> model_specs,
                                       const MonteCarloConfig& config);

}  // namespace misclass
