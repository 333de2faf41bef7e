#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "misclass/correct.hpp"
#include "misclass/elicit.hpp"
#include "misclass/io.hpp"
#include "misclass/model.hpp"

namespace misclass {

enum class RLevel { low, medium, high };

inline constexpr std::array<RLevel, 3> kRLevels = {RLevel::low, RLevel::medium, RLevel::high};

double r_value(RLevel level) noexcept;  // 0.25, 0.50, 0.66
std::string_view r_label(RLevel level) noexcept;
RLevel parse_r_level(std::string_view label);

// Mode of the outcome misclassification rate: q1 + r q2.
double compute_rho_hat(double q1, double q2, double r);

// Registry values of `group` after applying the impute rule.
GroupRegistry resolve_group(const RegistryTable& registry, const std::string& group);

// Per-site outcome-rate elicitation specs (input order) for one grid cell.
// Sites are matched to the registry by their outermost group label.
std::vector<ElicitationSpec> build_grid_priors(const RegistryTable& registry,
                                               std::span<const SiteRecord> sites, RLevel r_ctrl,
                                               RLevel r_trt);

struct GridCell {
  std::string label;  // "Low/High", or "none" for the uncorrected fit
  std::optional<RLevel> r_ctrl;
  std::optional<RLevel> r_trt;
};

// "all" (nine cells, control level major), "none", or "LABEL,LABEL".
std::vector<GridCell> parse_grid(std::string_view text);

// A named elicitation request for elicit-only runs, with an optional count
// for the induced delta distribution.
struct CustomPrior {
  ElicitationSpec spec;
  std::int64_t count = 0;
  bool operator==(const CustomPrior&) const = default;
};

struct RunConfig {
  std::string site_file;
  std::string registry_file;
  std::string output_dir = ".";
  int iterations = 2500;
  int burn_in = 500;
  std::uint64_t seed = 1;
  int chains = 1;
  unsigned threads = 1;
  std::string grid = "all";
  RateSharing rate_sharing = RateSharing::site;
  RateRefresh rate_refresh = RateRefresh::every_sweep;
  std::size_t group_levels = 1;
  double fixed_effect_variance = 1.0;
  double variance_shape = 0.01;
  double variance_rate = 0.01;
  // Second tail-probability threshold, e.g. an external point estimate.
  std::optional<double> reference_or;
  bool dump_draws = false;
  // simulate
  std::vector<std::string> scenarios = {"I"};
  std::string model_specs = "all";
  std::size_t replications = 20;
  std::optional<std::uint64_t> n_obs_seed;
  std::string site_sizes_file;
  // elicit-only
  std::map<std::string, CustomPrior> priors;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_run_config(std::string_view text);
// Relative input paths resolve against the directory of `path`.
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& config);
// Sets one key as if it appeared in the file.
void set_run_config_value(RunConfig& config, std::string_view key, std::string_view value);

// FNV-1a of the canonical serialization, as 16 hex digits.
std::string config_hash(const RunConfig& config);

enum class RunMode { analyze, simulate, elicit_only, validate };
RunMode parse_run_mode(std::string_view text);

// Paths of the files a run wrote, in write order.
struct RunReport {
  std::vector<std::string> files;
};

// Executes one mode. Every output is computed before any file is written.
RunReport run(const RunConfig& config, RunMode mode);

}  // namespace misclass
