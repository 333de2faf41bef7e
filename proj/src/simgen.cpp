#include "misclass/simgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include "misclass/distributions.hpp"
#include "misclass/elicit.hpp"
#include "misclass/error.hpp"
#include "misclass/posterior.hpp"

namespace misclass {

namespace {

constexpr std::uint64_t kSiteSizeStream = 0x5175u;

double logit(double p) { return std::log(p / (1.0 - p)); }
double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

RatePrior prior_from(const RateAssumption& a) {
  ElicitationSpec spec;
  spec.mode = a.mode;
  spec.lower = a.lower;
  spec.upper = a.upper;
  spec.low = {0.05, a.kappa05};
  spec.high = {0.95, a.kappa95};
  return RatePrior::elicited(elicit_prior(spec));
}

RateAssumption symmetric(double mode, double half_range) {
  return {mode, mode - 0.01, mode + 0.01, mode - half_range, mode + half_range};
}

ReplicationResult fit_one(const GeneratedData& data, const ModelSpec& model,
                          double true_log_or, const std::array<double, 2>& true_rates,
                          const MonteCarloConfig& config, const RandomStream& stream) {
  ReplicationResult result;
  try {
    const std::vector<SiteRecord> records = model.kind == FitKind::naive_corrected
                                                ? data.corrected_records()
                                                : data.observed_records();
    std::vector<RatePriorTriple> priors;
    for (const auto& r : records) priors.push_back(model.arm_priors[static_cast<std::size_t>(r.arm)]);
    ChainConfig chain;
    chain.iterations = config.iterations;
    chain.burn_in = config.burn_in;
    chain.seed = stream.seed();
    chain.stream_id = stream.stream_id();
    chain.sharing = RateSharing::arm;
    chain.bypass_correction = model.kind != FitKind::misclassification;
    chain.keep_site_draws = false;
    DesignSpec design;
    design.group_levels = 1;
    const ChainOutput out = run_chain(records, design, std::move(priors), PriorConfig{}, chain);

    std::vector<double> arm_draws = out.trace(DesignSet::kArmColumn);
    std::sort(arm_draws.begin(), arm_draws.end());
    const double median = quantile_sorted(arm_draws, 0.5);
    const double lo = quantile_sorted(arm_draws, 0.025);
    const double hi = quantile_sorted(arm_draws, 0.975);
    result.bias_log_or = median - true_log_or;
    result.covered = lo <= true_log_or && true_log_or <= hi;
    result.half_width = 0.5 * (hi - lo);
    std::array<double, 2> rate_sum{};
    for (const auto& d : out.draws) {
      const double a1 = d.coefficients(DesignSet::kInterceptColumn);
      const double a2 = d.coefficients(DesignSet::kArmColumn);
      rate_sum[0] += expit(a1);
      rate_sum[1] += expit(a1 + a2);
    }
    for (std::size_t arm = 0; arm < 2; ++arm)
      result.rate_bias[arm] = rate_sum[arm] / static_cast<double>(out.draws.size()) - true_rates[arm];
    result.ok = true;
  } catch (const std::exception& e) {
    result.ok = false;
    result.message = e.what();
  }
  return result;
}

}  // namespace

void ScenarioSpec::validate() const {
  if (sites_per_group.empty()) throw InputError("scenario needs at least one group");
  if (group_arm.size() != sites_per_group.size())
    throw InputError("scenario needs one arm per group");
  const std::size_t total = std::accumulate(sites_per_group.begin(), sites_per_group.end(), std::size_t{0});
  if (total != n_obs.size()) throw InputError("sites per group must sum to the number of sites");
  for (int arm : group_arm)
    if (arm != 0 && arm != 1) throw InputError("group arm outside {0, 1}");
  for (auto n : n_obs)
    if (n < 0) throw InputError("site sizes must be nonnegative");
  if (!(site_variance >= 0.0) || !(group_variance >= 0.0))
    throw InputError("random-effect variances must be nonnegative");
  for (const auto& r : true_rates)
    if (!in_unit(r.outcome) || !in_unit(r.eligibility_unvaccinated) ||
        !in_unit(r.eligibility_vaccinated))
      throw InputError("true misclassification rates must lie in [0, 1]");
  for (double p : observed_rates)
    if (!(p > 0.0 && p < 1.0)) throw InputError("observed rates must lie in (0, 1)");
}

ScenarioSpec builtin_scenario(std::string_view name, std::uint64_t n_obs_seed) {
  double outcome_trt = 0.0;
  if (name == "I") outcome_trt = 0.07;
  else if (name == "II") outcome_trt = 0.13;
  else if (name == "III") outcome_trt = 0.17;
  else throw InputError("unknown scenario '" + std::string(name) + "'");

  ScenarioSpec s;
  s.name = std::string(name);
  s.sites_per_group.assign(10, 9);
  s.group_arm = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  s.observed_rates = {0.30, 0.33};
  s.intercept = logit(s.observed_rates[0]);
  s.arm_effect = logit(s.observed_rates[1]) - logit(s.observed_rates[0]);
  s.true_rates[0] = {0.07, 0.04, 0.04};
  s.true_rates[1] = {outcome_trt, 0.04, 0.04};
  RandomStream rng(n_obs_seed, kSiteSizeStream);
  for (int i = 0; i < 90; ++i)
    s.n_obs.push_back(150 + static_cast<std::int64_t>(rng.next_u64() % 251));
  return s;
}

std::vector<SiteRecord> GeneratedData::observed_records() const {
  std::vector<SiteRecord> out;
  for (const auto& s : sites) out.push_back({s.site_id, {s.group_id}, s.arm, s.n_obs, s.y_obs, {}});
  return out;
}

std::vector<SiteRecord> GeneratedData::corrected_records() const {
  std::vector<SiteRecord> out;
  for (const auto& s : sites)
    out.push_back({s.site_id, {s.group_id}, s.arm, s.n_eligible, s.n_vaccinated, {}});
  return out;
}

GeneratedData generate_site_data(const ScenarioSpec& spec, RandomStream& rng) {
  spec.validate();
  GeneratedData data;
  for (std::size_t v = 0; v < spec.num_groups(); ++v)
    data.group_effects.push_back(draw_normal(0.0, spec.group_variance, rng));
  std::size_t site = 0;
  for (std::size_t v = 0; v < spec.num_groups(); ++v) {
    const int arm = spec.group_arm[v];
    const MisclassRates& truth = spec.true_rates[static_cast<std::size_t>(arm)];
    for (std::size_t k = 0; k < spec.sites_per_group[v]; ++k, ++site) {
      const double tau = draw_normal(0.0, spec.site_variance, rng);
      data.site_effects.push_back(tau);
      GeneratedSite g;
      g.site_id = "s" + std::to_string(site + 1);
      g.group_id = "g" + std::to_string(v + 1);
      g.arm = arm;
      g.baseline_prob = expit(spec.intercept + spec.arm_effect * arm + tau + data.group_effects[v]);
      g.n_obs = spec.n_obs[site];
      g.n_eligible = draw_binomial(g.n_obs, 1.0 - truth.eligibility_unvaccinated, rng);
      const double p0 = g.baseline_prob;
      const double missed = truth.outcome * (1.0 - p0);
      const double rest = 1.0 - p0 - missed;
      if (!in_unit(missed) || !in_unit(rest)) throw DomainError("outcome probabilities outside [0, 1]");
      const std::array<double, 3> h = {p0, missed, rest};
      const auto m = draw_multinomial(g.n_eligible, h, rng);
      g.n_vaccinated = m[0] + m[1];
      g.y_obs = m[0] + draw_binomial(g.n_obs - g.n_eligible, p0, rng);
      data.sites.push_back(std::move(g));
    }
  }
  return data;
}

double true_or(double obs_rate_ctrl, double obs_rate_trt, double outcome_rate_trt,
               double outcome_rate_ctrl) {
  for (double v : {obs_rate_ctrl, obs_rate_trt, outcome_rate_trt, outcome_rate_ctrl})
    if (!in_unit(v)) throw DomainError("rates must lie in [0, 1]");
  const double r_trt = obs_rate_trt + outcome_rate_trt * (1.0 - obs_rate_trt);
  const double r_ctrl = obs_rate_ctrl + outcome_rate_ctrl * (1.0 - obs_rate_ctrl);
  if (r_trt >= 1.0 || r_ctrl >= 1.0) throw DomainError("corrected rate of 1 has infinite odds");
  if (r_ctrl <= 0.0) throw DomainError("control corrected rate of 0 has zero odds");
  return (r_trt / (1.0 - r_trt)) / (r_ctrl / (1.0 - r_ctrl));
}

double expected_omega(std::int64_t n, double eligibility_rate, double linear_predictor) {
  if (n < 0) throw DomainError("site size must be nonnegative");
  if (!in_unit(eligibility_rate)) throw DomainError("eligibility rate outside [0, 1]");
  const double eligible = static_cast<double>(n) * (1.0 - eligibility_rate);
  const double half = 0.5 * linear_predictor;
  // tanh(x) / x -> 1 as x -> 0.
  const double ratio = std::abs(linear_predictor) < 1e-6 ? 1.0 : std::tanh(half) / half;
  return eligible * ratio / 4.0;
}

ModelSpec misclassification_spec(std::string label, const RateAssumption& outcome_ctrl,
                                 const RateAssumption& outcome_trt,
                                 const RateAssumption& eligibility) {
  ModelSpec m;
  m.label = std::move(label);
  m.kind = FitKind::misclassification;
  const RatePrior elig = prior_from(eligibility);
  m.arm_priors[0] = {prior_from(outcome_ctrl), elig, elig};
  m.arm_priors[1] = {prior_from(outcome_trt), elig, elig};
  return m;
}

ModelSpec naive_spec(FitKind kind) {
  ModelSpec m;
  m.kind = kind;
  m.label = kind == FitKind::naive_corrected ? "NM:corrected" : "NM:observed";
  return m;
}

std::vector<ModelSpec> builtin_model_specs() {
  std::vector<ModelSpec> specs;
  const std::array<char, 3> letters = {'A', 'B', 'C'};
  // Set 1: letter = shared eligibility rate, digit = shared outcome rate.
  const std::array<double, 3> s1_elig = {0.04, 0.07, 0.10};
  const std::array<double, 3> s1_outcome = {0.07, 0.13, 0.17};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const RateAssumption outcome = symmetric(s1_outcome[j], 0.02);
      specs.push_back(misclassification_spec(
          std::string("S1:") + letters[i] + std::to_string(j + 1), outcome, outcome,
          symmetric(s1_elig[i], 0.02)));
    }
  // Set 2: letter = intervention outcome rate, digit = control outcome rate.
  const std::array<double, 3> s2_trt = {0.09, 0.13, 0.17};
  const std::array<double, 3> s2_ctrl = {0.04, 0.07, 0.10};
  const RateAssumption s2_elig{0.04, 0.035, 0.045, 0.03, 0.05};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      specs.push_back(misclassification_spec(
          std::string("S2:") + letters[i] + std::to_string(j + 1), symmetric(s2_ctrl[j], 0.02),
          symmetric(s2_trt[i], 0.02), s2_elig));
  specs.push_back(naive_spec(FitKind::naive_observed));
  specs.push_back(naive_spec(FitKind::naive_corrected));
  return specs;
}

ModelSpec find_model_spec(std::string_view label) {
  if (label == "NM:observed") return naive_spec(FitKind::naive_observed);
  if (label == "NM:corrected") return naive_spec(FitKind::naive_corrected);
  for (auto& m : builtin_model_specs())
    if (m.label == label) return m;
  throw InputError("unknown model spec '" + std::string(label) + "'");
}

std::vector<MCMetrics> run_monte_carlo(const ScenarioSpec& spec,
                                       std::span<const ModelSpec> model_specs,
                                       const MonteCarloConfig& config) {
  spec.validate();
  if (config.replications < 1) throw InputError("Monte Carlo needs at least one replication");
  if (config.burn_in < 0 || config.iterations <= config.burn_in)
    throw InputError("chain requires iterations > burn_in >= 0");

  const MisclassRates& ctrl = spec.true_rates[0];
  const MisclassRates& trt = spec.true_rates[1];
  const double truth = std::log(
      true_or(spec.observed_rates[0], spec.observed_rates[1], trt.outcome, ctrl.outcome));
  const std::array<double, 2> true_rates = {
      spec.observed_rates[0] + ctrl.outcome * (1.0 - spec.observed_rates[0]),
      spec.observed_rates[1] + trt.outcome * (1.0 - spec.observed_rates[1])};

  const std::size_t reps = config.replications;
  std::vector<std::vector<ReplicationResult>> results(
      reps, std::vector<ReplicationResult>(model_specs.size()));
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t r = next++; r < reps; r = next++) {
      const RandomStream base(config.seed, r);
      RandomStream data_rng = base.split(0);
      try {
        const GeneratedData data = generate_site_data(spec, data_rng);
        for (std::size_t j = 0; j < model_specs.size(); ++j)
          results[r][j] = fit_one(data, model_specs[j], truth, true_rates, config, base.split(1 + j));
      } catch (const std::exception& e) {
        for (auto& res : results[r]) res.message = std::string("data generation failed: ") + e.what();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(reps)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  std::vector<MCMetrics> metrics;
  for (std::size_t j = 0; j < model_specs.size(); ++j) {
    MCMetrics m;
    m.label = model_specs[j].label;
    m.true_log_or = truth;
    for (std::size_t r = 0; r < reps; ++r) {
      const ReplicationResult& res = results[r][j];
      m.replications.push_back(res);
      if (!res.ok) {
        ++m.failures;
        continue;
      }
      ++m.successes;
      m.mean_bias_log_or += res.bias_log_or;
      m.coverage_95 += res.covered ? 1.0 : 0.0;
      m.mean_half_width += res.half_width;
      m.rate_bias[0] += res.rate_bias[0];
      m.rate_bias[1] += res.rate_bias[1];
    }
    if (m.successes > 0) {
      const double n = static_cast<double>(m.successes);
      m.mean_bias_log_or /= n;
      m.coverage_95 /= n;
      m.mean_half_width /= n;
      m.rate_bias[0] /= n;
      m.rate_bias[1] /= n;
    } else {
      m.mean_bias_log_or = m.coverage_95 = m.mean_half_width = std::nan("");
      m.rate_bias = {std::nan(""), std::nan("")};
    }
    metrics.push_back(std::move(m));
  }
  return metrics;
}

}  // namespace misclass
