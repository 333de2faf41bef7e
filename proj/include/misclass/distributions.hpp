#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "misclass/rng.hpp"

namespace misclass {

// Shapes up to this value are drawn exactly as sums of PG(1, c) variates;
// larger shapes use a moment-matched normal.
inline constexpr std::int64_t kPolyaGammaExactMaxShape = 170;

struct PolyaGammaParams {
  std::int64_t shape = 1;  // b, a count
  double tilt = 0.0;       // c
};

// Analytic moments of PG(b, c), with series limits near c = 0.
double polya_gamma_mean(const PolyaGammaParams& params);
double polya_gamma_variance(const PolyaGammaParams& params);

// Draw from PG(b, c). PG(0, c) is the point mass at zero.
double draw_polya_gamma(const PolyaGammaParams& params, RandomStream& rng);

// Exact PG(1, c) draw by the alternating-series rejection sampler.
double draw_polya_gamma_unit(double tilt, RandomStream& rng);

// I_x(shape1, shape2) and its complement 1 - I_x.
double regularized_incomplete_beta(double x, double shape1, double shape2);
double regularized_incomplete_beta_complement(double x, double shape1,
                                              double shape2);

// Solves I_x(shape1, shape2) = u for x by a bracketed root search on the CDF.
double inverse_regularized_incomplete_beta(double u, double shape1,
                                           double shape2);

// Beta(shape1, shape2) restricted and renormalized to [lower, upper].
class TruncatedBeta {
 public:
  TruncatedBeta(double shape1, double shape2, double lower, double upper);

  double shape1() const noexcept { return shape1_; }
  double shape2() const noexcept { return shape2_; }
  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  // Untruncated probability of [lower, upper].
  double mass() const noexcept { return mass_; }

  double cdf(double x) const;
  double pdf(double x) const;
  double quantile(double u) const;
  double draw(RandomStream& rng) const;

 private:
  double shape1_, shape2_, lower_, upper_;
  // Works in the upper tail (complement CDF) when the interval sits above the
  // median, which keeps the interval mass from cancelling to zero.
  bool use_complement_;
  double base_lo_, base_hi_;
  double mass_;
};

double draw_truncated_beta(double shape1, double shape2, double lower,
                           double upper, RandomStream& rng);

// Draw from N(precision^-1 linear_term, precision^-1) through a Cholesky
// factor of the precision matrix.
Eigen::VectorXd draw_mvn_from_precision(const Eigen::VectorXd& linear_term,
                                        const Eigen::MatrixXd& precision,
                                        RandomStream& rng);

double draw_standard_normal(RandomStream& rng);
double draw_normal(double mean, double variance, RandomStream& rng);
double draw_exponential(RandomStream& rng);
// Gamma with shape and rate.
double draw_gamma(double shape, double rate, RandomStream& rng);
// Inverse-Gamma with shape and scale (mean scale / (shape - 1)).
double draw_inverse_gamma(double shape, double scale, RandomStream& rng);
std::int64_t draw_binomial(std::int64_t n, double p, RandomStream& rng);
std::vector<std::int64_t> draw_multinomial(std::int64_t n,
                                           std::span<const double> probs,
                                           RandomStream& rng);

}  // namespace misclass
