#include "misclass/elicit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "misclass/error.hpp"

namespace misclass {

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

// Validates the spec and clamps anchors into [lower, upper].
ElicitationSpec normalized(const ElicitationSpec& spec,
                           std::vector<std::string>& warnings) {
  if (!in_unit(spec.lower) || !in_unit(spec.upper) || !in_unit(spec.low.value) ||
      !in_unit(spec.high.value))
    throw InputError("elicitation values must lie in [0, 1]");
  if (!(spec.mode > 0.0 && spec.mode < 1.0))
    throw DomainError("elicitation mode must lie strictly inside (0, 1)");
  if (!(spec.lower < spec.upper)) throw InputError("elicitation requires lower < upper");
  if (spec.mode < spec.lower || spec.mode > spec.upper)
    throw InputError("elicitation mode must lie within [lower, upper]");
  if (!(spec.low.probability >= 0.0 && spec.high.probability <= 1.0 &&
        spec.low.probability < spec.high.probability))
    throw InputError("anchor probabilities must satisfy 0 <= p_low < p_high <= 1");

  ElicitationSpec out = spec;
  const auto clamp_anchor = [&](PercentileAnchor& anchor, const char* name) {
    const double clamped = std::clamp(anchor.value, spec.lower, spec.upper);
    if (clamped != anchor.value) {
      std::ostringstream msg;
      msg << name << " anchor " << anchor.value << " clamped to " << clamped
          << " (bounds [" << spec.lower << ", " << spec.upper << "])";
      warnings.push_back(msg.str());
      anchor.value = clamped;
    }
  };
  clamp_anchor(out.low, "low");
  clamp_anchor(out.high, "high");
  if (!(out.low.value < out.high.value))
    throw InputError("anchors must satisfy kappa_low < kappa_high after clamping");
  return out;
}

}  // namespace

double lambda_from_gamma_mode(double shape1, double mode) {
  if (!(mode > 0.0 && mode < 1.0))
    throw DomainError("mode must lie strictly inside (0, 1)");
  if (!(shape1 > 1.0)) throw DomainError("first shape must exceed 1 for an interior mode");
  return (shape1 * (1.0 - mode) + (2.0 * mode - 1.0)) / mode;
}

double anchor_mass_defect(const ElicitationSpec& spec, double shape1) {
  const TruncatedBeta dist(shape1, lambda_from_gamma_mode(shape1, spec.mode),
                           spec.lower, spec.upper);
  return dist.cdf(spec.high.value) - dist.cdf(spec.low.value) -
         (spec.high.probability - spec.low.probability);
}

ElicitedPrior elicit_prior(const ElicitationSpec& raw) {
  ElicitedPrior prior;
  const ElicitationSpec spec = normalized(raw, prior.warnings);
  const auto defect = [&](double shape1) { return anchor_mass_defect(spec, shape1); };

  // Coarse scan, log-spaced in (shape1 - 1), to locate a sign change or the
  // basin of |g|.
  constexpr int kGrid = 300;
  const double log_lo = std::log(kElicitMinShape - 1.0);
  const double log_hi = std::log(kElicitMaxShape - 1.0);
  std::vector<double> grid(kGrid);
  std::vector<double> values(kGrid);
  for (int i = 0; i < kGrid; ++i) {
    grid[i] = 1.0 + std::exp(log_lo + (log_hi - log_lo) * i / (kGrid - 1));
    values[i] = defect(grid[i]);
  }

  double best_shape = grid[0];
  double best_value = values[0];
  bool solved = false;
  for (int i = 0; i + 1 < kGrid && !solved; ++i) {
    if (values[i] == 0.0) {
      best_shape = grid[i];
      best_value = 0.0;
      solved = true;
    } else if ((values[i] < 0.0) != (values[i + 1] < 0.0)) {
      // Bisection on g inside the sign-changing cell.
      double lo = grid[i];
      double hi = grid[i + 1];
      double g_lo = values[i];
      while (hi - lo > 1e-8) {
        const double mid = 0.5 * (lo + hi);
        const double g_mid = defect(mid);
        if ((g_mid < 0.0) == (g_lo < 0.0)) {
          lo = mid;
          g_lo = g_mid;
        } else {
          hi = mid;
        }
      }
      const double g_hi = defect(hi);
      const bool take_lo = std::abs(g_lo) <= std::abs(g_hi);
      best_shape = take_lo ? lo : hi;
      best_value = take_lo ? g_lo : g_hi;
      solved = true;
    }
  }

  if (!solved) {
    // No root: golden-section on g^2 around the best grid point.
    int arg = 0;
    for (int i = 1; i < kGrid; ++i)
      if (std::abs(values[i]) < std::abs(values[arg])) arg = i;
    double lo = grid[std::max(arg - 1, 0)];
    double hi = grid[std::min(arg + 1, kGrid - 1)];
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - ratio * (hi - lo);
    double x2 = lo + ratio * (hi - lo);
    double f1 = std::pow(defect(x1), 2);
    double f2 = std::pow(defect(x2), 2);
    while (hi - lo > 1e-8) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - ratio * (hi - lo);
        f1 = std::pow(defect(x1), 2);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + ratio * (hi - lo);
        f2 = std::pow(defect(x2), 2);
      }
    }
    best_shape = 0.5 * (lo + hi);
    best_value = defect(best_shape);
    for (double candidate : {grid[0], grid[kGrid - 1], grid[arg]}) {
      const double g = defect(candidate);
      if (std::abs(g) < std::abs(best_value)) {
        best_shape = candidate;
        best_value = g;
      }
    }
  }

  const double span = std::log(kElicitMaxShape - 1.0) - std::log(kElicitMinShape - 1.0);
  const double position = std::log(best_shape - 1.0) - std::log(kElicitMinShape - 1.0);
  prior.at_search_boundary = position < 1e-3 * span || position > (1.0 - 1e-3) * span;

  if (std::abs(best_value) >= kElicitInfeasible) {
    std::ostringstream msg;
    msg << "elicitation infeasible: best between-anchor mass defect " << best_value
        << " at shape " << best_shape;
    throw ElicitationInfeasibleError(msg.str(), best_value);
  }

  prior.shape1 = best_shape;
  prior.shape2 = lambda_from_gamma_mode(best_shape, spec.mode);
  prior.lower = spec.lower;
  prior.upper = spec.upper;
  prior.mode = spec.mode;
  prior.residual = best_value;
  if (std::abs(best_value) > kElicitTolerance) {
    std::ostringstream msg;
    msg << "percentile constraint not attained; residual " << best_value;
    prior.warnings.push_back(msg.str());
  }
  if (prior.at_search_boundary) {
    std::ostringstream msg;
    msg << "fitted shape " << best_shape << " lies on the search bracket boundary";
    prior.warnings.push_back(msg.str());
  }
  return prior;
}

std::vector<double> induced_delta_pmf(const ElicitedPrior& prior, std::int64_t count) {
  if (count < 0) throw DomainError("count must be nonnegative");
  if (count == 0) return {1.0};
  const TruncatedBeta dist = prior.distribution();
  const double n = static_cast<double>(count);
  std::vector<double> pmf(static_cast<std::size_t>(count) + 1, 0.0);
  // Only cells intersecting [lower, upper] carry mass.
  const auto first = static_cast<std::int64_t>(std::max(0.0, std::floor(prior.lower * n)));
  const auto last = std::min<std::int64_t>(count, static_cast<std::int64_t>(std::ceil(prior.upper * n)));
  double previous = dist.cdf(static_cast<double>(first) / n);
  pmf[static_cast<std::size_t>(first)] = previous;
  for (std::int64_t d = first + 1; d <= last; ++d) {
    const double current = d == last ? 1.0 : dist.cdf(static_cast<double>(d) / n);
    pmf[static_cast<std::size_t>(d)] = current - previous;
    previous = current;
  }
  return pmf;
}

}  // namespace misclass
