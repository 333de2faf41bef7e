#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "misclass/distributions.hpp"

namespace misclass {

struct PercentileAnchor {
  double probability = 0.0;  // cumulative probability p
  double value = 0.0;        // percentile kappa_p

  bool operator==(const PercentileAnchor&) const = default;
};

// Expert inputs for one misclassification rate: the most likely value, hard
// bounds, and two percentile anchors.
struct ElicitationSpec {
  double mode = 0.0;
  double lower = 0.0;
  double upper = 1.0;
  PercentileAnchor low;
  PercentileAnchor high;

  bool operator==(const ElicitationSpec&) const = default;
};

// Fitted truncated Beta(shape1, shape2) on [lower, upper].
struct ElicitedPrior {
  double shape1 = 1.0;
  double shape2 = 1.0;
  double lower = 0.0;
  double upper = 1.0;
  double mode = 0.5;
  // Between-anchor mass defect at the returned shape.
  double residual = 0.0;
  // The best shape sits on the edge of the search bracket (no interior
  // solution, e.g. a request that is only met by the uniform limit).
  bool at_search_boundary = false;
  std::vector<std::string> warnings;

  TruncatedBeta distribution() const { return {shape1, shape2, lower, upper}; }
  bool operator==(const ElicitedPrior&) const = default;
};

inline constexpr double kElicitMinShape = 1.0 + 1e-6;
// Tight anchors (plus or minus one point around a mode near 0.2) need shapes
// above 1000.
inline constexpr double kElicitMaxShape = 5000.0;
inline constexpr double kElicitTolerance = 1e-6;
inline constexpr double kElicitInfeasible = 0.05;

// Second shape that puts the Beta mode at `mode` given the first shape.
double lambda_from_gamma_mode(double shape1, double mode);

// Signed constraint defect F(kappa_high) - F(kappa_low) - (p_high - p_low)
// of the truncated Beta whose first shape is `shape1` and whose mode is fixed.
double anchor_mass_defect(const ElicitationSpec& spec, double shape1);

// One-parameter fit over shape1 with the mode constraint tying shape2.
ElicitedPrior elicit_prior(const ElicitationSpec& spec);

// Distribution of ceil(rho * count) for rho drawn from the prior.
std::vector<double> induced_delta_pmf(const ElicitedPrior& prior, std::int64_t count);

}  // namespace misclass
