#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "misclass/model.hpp"

namespace misclass {

// Odds-ratio summary of one fixed effect. Quantiles are taken on the log
// scale and exponentiated, so the interval and median commute with exp().
struct PosteriorSummary {
  double or_mean = 0.0;
  double or_median = 0.0;
  double cri_lower = 0.0;
  double cri_upper = 0.0;
  // (threshold, P(OR > threshold)) in the order the thresholds were given.
  std::vector<std::pair<double, double>> tail_probs;
  std::size_t draws = 0;
  std::optional<double> ess;
  std::optional<double> psrf;
};

struct ConvergenceDiagnostics {
  double ess = 0.0;
  std::optional<double> psrf;
};

// Sample quantile by linear interpolation between order statistics.
// `sorted` must be ascending and nonempty.
double quantile_sorted(std::span<const double> sorted, double prob);

// Odds-ratio summary of coefficient `coefficient` pooled over `chains`.
PosteriorSummary summarize_or(std::span<const ChainOutput> chains, Eigen::Index coefficient,
                              std::span<const double> thresholds);

// Same summary from raw log-odds-ratio draws.
PosteriorSummary summarize_log_or_draws(std::span<const double> log_or,
                                        std::span<const double> thresholds);

// Autocorrelation-time ESS truncated at the first negative pair sum.
double effective_sample_size(std::span<const double> trace);

// Split-chain potential scale reduction over two or more chains.
double split_psrf(std::span<const std::vector<double>> traces);

// ESS summed over chains, and split PSRF when there are at least two.
ConvergenceDiagnostics diagnostics(std::span<const std::vector<double>> traces);
ConvergenceDiagnostics diagnostics(std::span<const ChainOutput> chains, Eigen::Index coefficient);

}  // namespace misclass
