#include "misclass/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "misclass/error.hpp"

namespace misclass {

namespace {

constexpr std::size_t kMinDiagnosticLength = 100;

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw DomainError("quantile probability outside [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

PosteriorSummary summarize_log_or_draws(std::span<const double> log_or,
                                        std::span<const double> thresholds) {
  if (log_or.empty()) throw InputError("cannot summarize an empty chain");
  std::vector<double> sorted(log_or.begin(), log_or.end());
  std::sort(sorted.begin(), sorted.end());
  PosteriorSummary s;
  s.draws = sorted.size();
  double sum = 0.0;
  for (double x : sorted) sum += std::exp(x);
  s.or_mean = sum / static_cast<double>(sorted.size());
  s.or_median = std::exp(quantile_sorted(sorted, 0.5));
  s.cri_lower = std::exp(quantile_sorted(sorted, 0.025));
  s.cri_upper = std::exp(quantile_sorted(sorted, 0.975));
  for (double t : thresholds) {
    if (!(t > 0.0)) throw DomainError("odds-ratio thresholds must be positive");
    const double cut = std::log(t);
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), cut);
    s.tail_probs.emplace_back(t, static_cast<double>(above) / static_cast<double>(sorted.size()));
  }
  return s;
}

PosteriorSummary summarize_or(std::span<const ChainOutput> chains, Eigen::Index coefficient,
                              std::span<const double> thresholds) {
  std::vector<std::vector<double>> traces;
  std::vector<double> pooled;
  for (const auto& chain : chains) {
    if (chain.draws.empty()) continue;
    if (coefficient < 0 || coefficient >= chain.draws.front().coefficients.size())
      throw DomainError("coefficient index out of range");
    traces.push_back(chain.trace(coefficient));
    pooled.insert(pooled.end(), traces.back().begin(), traces.back().end());
  }
  PosteriorSummary s = summarize_log_or_draws(pooled, thresholds);
  try {
    const ConvergenceDiagnostics d = diagnostics(traces);
    s.ess = d.ess;
    s.psrf = d.psrf;
  } catch (const DomainError&) {
    // Too short or constant: leave diagnostics unset.
  }
  return s;
}

double effective_sample_size(std::span<const double> trace) {
  const std::size_t n = trace.size();
  if (n < kMinDiagnosticLength)
    throw DomainError("diagnostics need at least 100 draws per chain");
  const double mean = mean_of(trace);
  double c0 = 0.0;
  for (double x : trace) c0 += (x - mean) * (x - mean);
  c0 /= static_cast<double>(n);
  if (!(c0 > 0.0)) throw DiagnosticUndefinedError("chain has zero variance");

  const auto autocorr = [&](std::size_t lag) {
    double c = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) c += (trace[i] - mean) * (trace[i + lag] - mean);
    return c / static_cast<double>(n) / c0;
  };
  // Sum pairs (rho_{2k} + rho_{2k+1}) while they stay positive.
  double tau = -1.0;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = autocorr(2 * k) + autocorr(2 * k + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return static_cast<double>(n) / std::max(tau, 1.0 / static_cast<double>(n));
}

double split_psrf(std::span<const std::vector<double>> traces) {
  if (traces.size() < 2) throw DomainError("PSRF needs at least two chains");
  std::vector<std::span<const double>> halves;
  for (const auto& t : traces) {
    if (t.size() < kMinDiagnosticLength)
      throw DomainError("diagnostics need at least 100 draws per chain");
    const std::size_t half = t.size() / 2;
    halves.emplace_back(t.data(), half);
    halves.emplace_back(t.data() + t.size() - half, half);
  }
  std::size_t len = halves.front().size();
  for (const auto& h : halves) len = std::min(len, h.size());
  const double n = static_cast<double>(len);
  const double m = static_cast<double>(halves.size());
  std::vector<double> means;
  double within = 0.0;
  for (const auto& h : halves) {
    const std::span<const double> part(h.data(), len);
    means.push_back(mean_of(part));
    within += variance_of(part, means.back());
  }
  within /= m;
  if (!(within > 0.0)) throw DiagnosticUndefinedError("chains have zero within-chain variance");
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= n / (m - 1.0);
  const double pooled = (n - 1.0) / n * within + between / n;
  return std::sqrt(pooled / within);
}

ConvergenceDiagnostics diagnostics(std::span<const std::vector<double>> traces) {
  if (traces.empty()) throw DomainError("diagnostics need at least one chain");
  ConvergenceDiagnostics d;
  for (const auto& t : traces) d.ess += effective_sample_size(t);
  if (traces.size() >= 2) d.psrf = split_psrf(traces);
  return d;
}

ConvergenceDiagnostics diagnostics(std::span<const ChainOutput> chains, Eigen::Index coefficient) {
  std::vector<std::vector<double>> traces;
  for (const auto& c : chains) traces.push_back(c.trace(coefficient));
  return diagnostics(traces);
}

}  // namespace misclass
