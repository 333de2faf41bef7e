#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "misclass/correct.hpp"
#include "misclass/rng.hpp"

namespace misclass {

enum class Arm : int { control = 0, intervention = 1 };

// One cluster's observed counts and labels.
struct SiteRecord {
  std::string site_id;
  // Hierarchy labels from the outermost level inward, e.g. {"system-3"}.
  std::vector<std::string> group_path;
  int arm = 0;
  std::int64_t n_obs = 0;
  std::int64_t y_obs = 0;
  std::vector<double> covariates;
};

// Which random-effect levels to build. A site-level intercept is always
// present; `group_levels` adds one block per leading entry of group_path.
struct DesignSpec {
  std::size_t group_levels = 0;
  std::vector<std::string> covariate_names;
};

struct RandomEffectBlock {
  std::string name;
  Eigen::Index offset = 0;  // first column in Z
  Eigen::Index size = 0;
  std::vector<std::string> labels;
};

struct DesignSet {
  Eigen::MatrixXd fixed;                // S x p: intercept, arm, covariates
  std::vector<Eigen::MatrixXd> random;  // A blocks, S x q_r each
  Eigen::MatrixXd z;                    // S x W
  std::vector<RandomEffectBlock> blocks;
  std::vector<std::string> coefficient_names;
  // Row r of the design corresponds to input site input_index[r].
  std::vector<std::size_t> input_index;
  std::vector<std::string> site_ids;
  std::vector<int> arms;
  // Nonzero (column, value) pairs of each row of Z.
  std::vector<std::vector<std::pair<Eigen::Index, double>>> row_entries;

  static constexpr Eigen::Index kInterceptColumn = 0;
  static constexpr Eigen::Index kArmColumn = 1;

  std::size_t num_sites() const noexcept { return site_ids.size(); }
  Eigen::Index num_fixed() const noexcept { return fixed.cols(); }
  Eigen::Index width() const noexcept { return z.cols(); }
};

// Rows are ordered so that groups are contiguous, control groups first.
DesignSet build_design(std::span<const SiteRecord> sites, const DesignSpec& spec);

struct PriorConfig {
  double fixed_effect_variance = 1.0;
  double variance_shape = 0.01;
  double variance_rate = 0.01;
};

enum class RateSharing { site, arm };
enum class RateRefresh { every_sweep, once_per_chain };

struct ChainConfig {
  int iterations = 2500;
  int burn_in = 500;
  std::uint64_t seed = 1;
  std::uint64_t stream_id = 0;
  RateSharing sharing = RateSharing::site;
  RateRefresh refresh = RateRefresh::every_sweep;
  // Skip the correction step entirely and fit the observed counts.
  bool bypass_correction = false;
  // Keep per-site rates and corrected counts in every stored draw.
  bool keep_site_draws = true;
};

struct GibbsState {
  Eigen::VectorXd coefficients;  // fixed effects, then random effects by block
  Eigen::VectorXd polya_gamma;   // one auxiliary variate per site
  Eigen::VectorXd variances;     // one per random-effect block
  std::vector<MisclassRates> rates;
  std::vector<CorrectedCounts> corrected;
  std::size_t sweeps = 0;
};

struct ChainDraw {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd variances;
  std::vector<MisclassRates> rates;
  std::vector<CorrectedCounts> corrected;
};

struct ChainOutput {
  std::vector<ChainDraw> draws;
  int iterations = 0;
  int burn_in = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::vector<std::string> site_ids;
  std::vector<std::string> coefficient_names;
  std::size_t jitter_events = 0;

  // Retained draws of one coefficient.
  std::vector<double> trace(Eigen::Index coefficient) const;
};

class GibbsSampler {
 public:
  // `site_priors` is indexed like `sites` (input order).
  GibbsSampler(std::span<const SiteRecord> sites, const DesignSpec& design_spec,
               std::vector<RatePriorTriple> site_priors, PriorConfig priors,
               ChainConfig config);

  const DesignSet& design() const noexcept { return design_; }
  const ChainConfig& config() const noexcept { return config_; }
  std::size_t jitter_events() const noexcept { return jitter_events_; }

  GibbsState initial_state() const;

  // One full sweep: corrections, Polya-Gamma variates, coefficients, variances.
  void step(GibbsState& state, RandomStream& rng);

  void update_corrections(GibbsState& state, RandomStream& rng) const;
  void update_polya_gamma(GibbsState& state, RandomStream& rng) const;
  void update_coefficients(GibbsState& state, RandomStream& rng);
  void update_variances(GibbsState& state, RandomStream& rng) const;

  // Conditional posterior of the coefficients given omega and the corrected
  // counts: precision Z'OmegaZ + Lambda0^-1 and linear term Z'kappa.
  Eigen::MatrixXd conditional_precision(const GibbsState& state) const;
  Eigen::VectorXd conditional_linear_term(const GibbsState& state) const;

 private:
  std::vector<CorrectedCounts> corrected_at(const std::vector<MisclassRates>& rates) const;

  DesignSet design_;
  std::vector<std::int64_t> n_obs_;
  std::vector<std::int64_t> y_obs_;
  std::vector<RatePriorTriple> priors_;  // design order
  PriorConfig prior_config_;
  ChainConfig config_;
  std::size_t jitter_events_ = 0;
};

ChainOutput run_chain(std::span<const SiteRecord> sites, const DesignSpec& design_spec,
                      std::vector<RatePriorTriple> site_priors, const PriorConfig& priors,
                      const ChainConfig& config);

}  // namespace misclass
