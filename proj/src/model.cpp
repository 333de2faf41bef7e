#include "misclass/model.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "misclass/distributions.hpp"
#include "misclass/error.hpp"

namespace misclass {

namespace {

// Numeric labels compare as numbers so "10" sorts after "9".
bool label_less(const std::string& a, const std::string& b) {
  long long x = 0;
  long long y = 0;
  const auto rx = std::from_chars(a.data(), a.data() + a.size(), x);
  const auto ry = std::from_chars(b.data(), b.data() + b.size(), y);
  const bool a_num = rx.ec == std::errc() && rx.ptr == a.data() + a.size();
  const bool b_num = ry.ec == std::errc() && ry.ptr == b.data() + b.size();
  if (a_num && b_num && x != y) return x < y;
  return a < b;
}

bool path_less(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), label_less);
}

std::string group_key(const SiteRecord& site, std::size_t level) {
  std::string key;
  for (std::size_t i = 0; i <= level; ++i) {
    if (i) key += '/';
    key += site.group_path[i];
  }
  return key;
}

}  // namespace

std::vector<double> ChainOutput::trace(Eigen::Index coefficient) const {
  std::vector<double> out;
  out.reserve(draws.size());
  for (const auto& d : draws) out.push_back(d.coefficients(coefficient));
  return out;
}

DesignSet build_design(std::span<const SiteRecord> sites, const DesignSpec& spec) {
  if (sites.empty()) throw InputError("design requires at least one site");
  const std::size_t num_cov = sites.front().covariates.size();
  std::set<std::string> seen;
  std::map<std::string, int> top_group_min_arm;
  for (const auto& site : sites) {
    if (site.site_id.empty()) throw InputError("site with empty site_id");
    if (!seen.insert(site.site_id).second)
      throw InputError("duplicate site_id '" + site.site_id + "'");
    if (site.arm != 0 && site.arm != 1)
      throw InputError("site '" + site.site_id + "' has arm outside {0, 1}");
    if (site.n_obs < 0 || site.y_obs < 0 || site.y_obs > site.n_obs)
      throw InputError("site '" + site.site_id + "' violates 0 <= y_obs <= n_obs");
    if (site.covariates.size() != num_cov)
      throw InputError("site '" + site.site_id + "' has a different covariate count");
    if (site.group_path.size() < spec.group_levels)
      throw InputError("site '" + site.site_id + "' lacks a group label for a declared level");
    for (std::size_t k = 0; k < spec.group_levels; ++k)
      if (site.group_path[k].empty())
        throw InputError("site '" + site.site_id + "' has an empty group label");
    if (!site.group_path.empty()) {
      auto [it, inserted] = top_group_min_arm.emplace(site.group_path.front(), site.arm);
      if (!inserted) it->second = std::min(it->second, site.arm);
    }
  }
  if (!spec.covariate_names.empty() && spec.covariate_names.size() != num_cov)
    throw InputError("covariate name count does not match site covariates");

  const auto group_arm = [&](const SiteRecord& s) {
    return s.group_path.empty() ? s.arm : top_group_min_arm.at(s.group_path.front());
  };
  std::vector<std::size_t> order(sites.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const SiteRecord& a = sites[i];
    const SiteRecord& b = sites[j];
    if (group_arm(a) != group_arm(b)) return group_arm(a) < group_arm(b);
    if (path_less(a.group_path, b.group_path)) return true;
    if (path_less(b.group_path, a.group_path)) return false;
    if (a.arm != b.arm) return a.arm < b.arm;
    return label_less(a.site_id, b.site_id);
  });

  const auto num_sites = static_cast<Eigen::Index>(sites.size());
  const Eigen::Index p = 2 + static_cast<Eigen::Index>(num_cov);
  DesignSet d;
  d.input_index = order;
  d.fixed = Eigen::MatrixXd::Zero(num_sites, p);
  d.coefficient_names = {"intercept", "arm"};
  for (std::size_t c = 0; c < num_cov; ++c)
    d.coefficient_names.push_back(spec.covariate_names.empty()
                                      ? "cov" + std::to_string(c + 1)
                                      : spec.covariate_names[c]);
  for (Eigen::Index r = 0; r < num_sites; ++r) {
    const SiteRecord& s = sites[order[static_cast<std::size_t>(r)]];
    d.site_ids.push_back(s.site_id);
    d.arms.push_back(s.arm);
    d.fixed(r, DesignSet::kInterceptColumn) = 1.0;
    d.fixed(r, DesignSet::kArmColumn) = s.arm;
    for (std::size_t c = 0; c < num_cov; ++c) d.fixed(r, 2 + static_cast<Eigen::Index>(c)) = s.covariates[c];
  }

  // Site-level block: identity.
  Eigen::Index offset = p;
  std::vector<std::vector<Eigen::Index>> random_cols(sites.size());
  {
    RandomEffectBlock block{"site", offset, num_sites, d.site_ids};
    d.random.push_back(Eigen::MatrixXd::Identity(num_sites, num_sites));
    for (Eigen::Index r = 0; r < num_sites; ++r) random_cols[static_cast<std::size_t>(r)].push_back(offset + r);
    offset += num_sites;
    d.blocks.push_back(std::move(block));
  }
  for (std::size_t level = 0; level < spec.group_levels; ++level) {
    RandomEffectBlock block;
    block.name = "group" + std::to_string(level + 1);
    block.offset = offset;
    std::map<std::string, Eigen::Index> index_of;
    std::vector<Eigen::Index> member(sites.size());
    for (Eigen::Index r = 0; r < num_sites; ++r) {
      const std::string key = group_key(sites[order[static_cast<std::size_t>(r)]], level);
      auto [it, inserted] = index_of.emplace(key, static_cast<Eigen::Index>(block.labels.size()));
      if (inserted) block.labels.push_back(key);
      member[static_cast<std::size_t>(r)] = it->second;
    }
    block.size = static_cast<Eigen::Index>(block.labels.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(num_sites, block.size);
    for (Eigen::Index r = 0; r < num_sites; ++r) {
      a(r, member[static_cast<std::size_t>(r)]) = 1.0;
      random_cols[static_cast<std::size_t>(r)].push_back(offset + member[static_cast<std::size_t>(r)]);
    }
    d.random.push_back(std::move(a));
    offset += block.size;
    d.blocks.push_back(std::move(block));
  }

  d.z = Eigen::MatrixXd::Zero(num_sites, offset);
  d.z.leftCols(p) = d.fixed;
  for (std::size_t b = 0; b < d.blocks.size(); ++b)
    d.z.middleCols(d.blocks[b].offset, d.blocks[b].size) = d.random[b];
  for (const auto& block : d.blocks)
    for (const auto& label : block.labels)
      d.coefficient_names.push_back(block.name + "[" + label + "]");

  d.row_entries.resize(sites.size());
  for (Eigen::Index r = 0; r < num_sites; ++r) {
    auto& entries = d.row_entries[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < p; ++c)
      if (d.fixed(r, c) != 0.0) entries.emplace_back(c, d.fixed(r, c));
    for (Eigen::Index c : random_cols[static_cast<std::size_t>(r)]) entries.emplace_back(c, 1.0);
  }
  return d;
}

GibbsSampler::GibbsSampler(std::span<const SiteRecord> sites, const DesignSpec& design_spec,
                           std::vector<RatePriorTriple> site_priors, PriorConfig priors,
                           ChainConfig config)
    : design_(build_design(sites, design_spec)), prior_config_(priors), config_(config) {
  if (site_priors.size() != sites.size())
    throw InputError("one rate prior triple is required per site");
  if (!(priors.fixed_effect_variance > 0.0) || !(priors.variance_shape > 0.0) ||
      !(priors.variance_rate > 0.0))
    throw InputError("prior variance settings must be positive");
  for (std::size_t idx : design_.input_index) {
    n_obs_.push_back(sites[idx].n_obs);
    y_obs_.push_back(sites[idx].y_obs);
    priors_.push_back(std::move(site_priors[idx]));
  }
  if (config_.sharing == RateSharing::arm) {
    for (int arm = 0; arm < 2; ++arm) {
      const RatePriorTriple* first = nullptr;
      for (std::size_t r = 0; r < priors_.size(); ++r) {
        if (design_.arms[r] != arm) continue;
        if (!first) first = &priors_[r];
        else if (!(*first == priors_[r]))
          throw InputError("arm-shared rates require identical rate priors within an arm");
      }
    }
  }
}

std::vector<CorrectedCounts> GibbsSampler::corrected_at(
    const std::vector<MisclassRates>& rates) const {
  std::vector<CorrectedCounts> out(rates.size());
  for (std::size_t r = 0; r < rates.size(); ++r) {
    if (config_.bypass_correction) {
      out[r].n_eligible = n_obs_[r];
      out[r].eligible_vaccinated = y_obs_[r];
      out[r].n_vaccinated = y_obs_[r];
      out[r].kappa = static_cast<double>(y_obs_[r]) - 0.5 * static_cast<double>(n_obs_[r]);
      continue;
    }
    try {
      out[r] = apply_correction(n_obs_[r], y_obs_[r], rates[r]);
    } catch (const SiteDegenerateError& e) {
      throw SiteDegenerateError("site '" + design_.site_ids[r] + "': " + e.what(),
                                design_.site_ids[r]);
    }
  }
  return out;
}

GibbsState GibbsSampler::initial_state() const {
  GibbsState state;
  state.coefficients = Eigen::VectorXd::Zero(design_.width());
  state.variances = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(design_.blocks.size()));
  state.rates.resize(priors_.size());
  if (!config_.bypass_correction)
    for (std::size_t r = 0; r < priors_.size(); ++r) state.rates[r] = priors_[r].modes();
  state.corrected = corrected_at(state.rates);
  state.polya_gamma.resize(static_cast<Eigen::Index>(priors_.size()));
  for (std::size_t r = 0; r < priors_.size(); ++r)
    state.polya_gamma(static_cast<Eigen::Index>(r)) =
        static_cast<double>(state.corrected[r].n_eligible) / 4.0;
  return state;
}

void GibbsSampler::update_corrections(GibbsState& state, RandomStream& rng) const {
  if (config_.bypass_correction) return;
  if (config_.refresh == RateRefresh::once_per_chain && state.sweeps > 0) return;
  if (config_.sharing == RateSharing::arm) {
    for (int arm = 0; arm < 2; ++arm) {
      const auto first = std::find(design_.arms.begin(), design_.arms.end(), arm);
      if (first == design_.arms.end()) continue;
      const auto idx = static_cast<std::size_t>(first - design_.arms.begin());
      const MisclassRates shared = draw_misclass_rates(priors_[idx], rng);
      for (std::size_t r = 0; r < priors_.size(); ++r)
        if (design_.arms[r] == arm) state.rates[r] = shared;
    }
  } else {
    for (std::size_t r = 0; r < priors_.size(); ++r)
      state.rates[r] = draw_misclass_rates(priors_[r], rng);
  }
  state.corrected = corrected_at(state.rates);
}

void GibbsSampler::update_polya_gamma(GibbsState& state, RandomStream& rng) const {
  for (std::size_t r = 0; r < design_.num_sites(); ++r) {
    double eta = 0.0;
    for (const auto& [col, value] : design_.row_entries[r]) eta += value * state.coefficients(col);
    state.polya_gamma(static_cast<Eigen::Index>(r)) =
        draw_polya_gamma({state.corrected[r].n_eligible, eta}, rng);
  }
}

Eigen::MatrixXd GibbsSampler::conditional_precision(const GibbsState& state) const {
  const Eigen::Index w = design_.width();
  Eigen::MatrixXd precision = Eigen::MatrixXd::Zero(w, w);
  for (Eigen::Index c = 0; c < design_.num_fixed(); ++c)
    precision(c, c) = 1.0 / prior_config_.fixed_effect_variance;
  for (std::size_t b = 0; b < design_.blocks.size(); ++b) {
    const auto& block = design_.blocks[b];
    precision.diagonal().segment(block.offset, block.size).setConstant(
        1.0 / state.variances(static_cast<Eigen::Index>(b)));
  }
  for (std::size_t r = 0; r < design_.num_sites(); ++r) {
    const double omega = state.polya_gamma(static_cast<Eigen::Index>(r));
    const auto& entries = design_.row_entries[r];
    for (const auto& [ci, vi] : entries)
      for (const auto& [cj, vj] : entries) precision(ci, cj) += omega * vi * vj;
  }
  return precision;
}

Eigen::VectorXd GibbsSampler::conditional_linear_term(const GibbsState& state) const {
  Eigen::VectorXd linear = Eigen::VectorXd::Zero(design_.width());
  for (std::size_t r = 0; r < design_.num_sites(); ++r)
    for (const auto& [col, value] : design_.row_entries[r])
      linear(col) += value * state.corrected[r].kappa;
  return linear;
}

void GibbsSampler::update_coefficients(GibbsState& state, RandomStream& rng) {
  Eigen::MatrixXd precision = conditional_precision(state);
  const Eigen::VectorXd linear = conditional_linear_term(state);
  try {
    state.coefficients = draw_mvn_from_precision(linear, precision, rng);
  } catch (const NumericalError&) {
    precision.diagonal().array() += 1e-10;
    ++jitter_events_;
    state.coefficients = draw_mvn_from_precision(linear, precision, rng);
  }
}

void GibbsSampler::update_variances(GibbsState& state, RandomStream& rng) const {
  for (std::size_t b = 0; b < design_.blocks.size(); ++b) {
    const auto& block = design_.blocks[b];
    const double ss = state.coefficients.segment(block.offset, block.size).squaredNorm();
    state.variances(static_cast<Eigen::Index>(b)) = draw_inverse_gamma(
        prior_config_.variance_shape + 0.5 * static_cast<double>(block.size),
        prior_config_.variance_rate + 0.5 * ss, rng);
  }
}

void GibbsSampler::step(GibbsState& state, RandomStream& rng) {
  update_corrections(state, rng);
  update_polya_gamma(state, rng);
  update_coefficients(state, rng);
  update_variances(state, rng);
  ++state.sweeps;
}

ChainOutput run_chain(std::span<const SiteRecord> sites, const DesignSpec& design_spec,
                      std::vector<RatePriorTriple> site_priors, const PriorConfig& priors,
                      const ChainConfig& config) {
  if (config.burn_in < 0 || config.iterations <= config.burn_in)
    throw InputError("chain requires iterations > burn_in >= 0");
  GibbsSampler sampler(sites, design_spec, std::move(site_priors), priors, config);
  RandomStream rng(config.seed, config.stream_id);
  GibbsState state = sampler.initial_state();

  ChainOutput out;
  out.iterations = config.iterations;
  out.burn_in = config.burn_in;
  out.seed = config.seed;
  out.stream_id = config.stream_id;
  out.site_ids = sampler.design().site_ids;
  out.coefficient_names = sampler.design().coefficient_names;
  out.draws.reserve(static_cast<std::size_t>(config.iterations - config.burn_in));
  for (int it = 0; it < config.iterations; ++it) {
    sampler.step(state, rng);
    if (it < config.burn_in) continue;
    ChainDraw draw{state.coefficients, state.variances, {}, {}};
    if (config.keep_site_draws) {
      draw.rates = state.rates;
      draw.corrected = state.corrected;
    }
    out.draws.push_back(std::move(draw));
  }
  out.jitter_events = sampler.jitter_events();
  return out;
}

}  // namespace misclass
