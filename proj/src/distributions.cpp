#include "misclass/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/tools/roots.hpp>

#include "misclass/error.hpp"

namespace misclass {

namespace {

using std::numbers::pi;

// Split point between the inverse-Gaussian and exponential proposal pieces.
constexpr double kSplit = 0.64;

double log_normal_cdf(double x) { return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2)); }

// n-th coefficient of the alternating series for the J*(1, z) density.
double series_coefficient(int n, double x) {
  const double k = n + 0.5;
  if (x > kSplit) return pi * k * std::exp(-0.5 * k * k * pi * pi * x);
  return pi * k * std::exp(1.5 * std::log(2.0 / (pi * x)) - 2.0 * k * k / x);
}

// IG(1/z, 1) truncated to (0, kSplit).
double draw_truncated_inverse_gaussian(double z, RandomStream& rng) {
  if (z < 1.0 / kSplit) {
    double x = 0.0;
    double accept = 0.0;
    do {
      double e1 = 0.0;
      double e2 = 0.0;
      do {
        e1 = draw_exponential(rng);
        e2 = draw_exponential(rng);
      } while (e1 * e1 > 2.0 * e2 / kSplit);
      const double root = 1.0 + kSplit * e1;
      x = kSplit / (root * root);
      accept = std::exp(-0.5 * z * z * x);
    } while (rng.uniform() > accept);
    return x;
  }
  const double mu = 1.0 / z;
  double x = kSplit + 1.0;
  while (x > kSplit) {
    const double y = std::pow(draw_standard_normal(rng), 2);
    const double muy = mu * y;
    x = mu + 0.5 * mu * muy - 0.5 * mu * std::sqrt(4.0 * muy + muy * muy);
    if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
  }
  return x;
}

void check_shapes(double shape1, double shape2) {
  if (!(shape1 > 0.0) || !(shape2 > 0.0) || !std::isfinite(shape1) ||
      !std::isfinite(shape2))
    throw DomainError("beta shapes must be positive and finite");
}

// Root of f on [lo, hi] given f(lo) <= 0 <= f(hi).
template <typename F>
double bracketed_root(F f, double lo, double hi) {
  const double flo = f(lo);
  const double fhi = f(hi);
  if (flo >= 0.0) return lo;
  if (fhi <= 0.0) return hi;
  std::uintmax_t max_iter = 200;
  const auto tol = [](double a, double b) {
    return std::abs(b - a) <= 1e-12 * std::max(std::abs(a), std::abs(b));
  };
  const auto [a, b] =
      boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, max_iter);
  return 0.5 * (a + b);
}

std::int64_t binomial_inversion(std::int64_t n, double p, RandomStream& rng) {
  const double q = 1.0 - p;
  const double s = p / q;
  const double a = static_cast<double>(n + 1) * s;
  double r = std::pow(q, static_cast<double>(n));
  double u = rng.uniform();
  std::int64_t x = 0;
  while (u > r && x < n) {
    u -= r;
    ++x;
    r *= a / static_cast<double>(x) - s;
  }
  return x;
}

// Hormann's BTRS transformed rejection, valid for n*p >= 10 and p <= 0.5.
std::int64_t binomial_btrs(std::int64_t n, double p, RandomStream& rng) {
  const double nd = static_cast<double>(n);
  const double q = 1.0 - p;
  const double spq = std::sqrt(nd * p * q);
  const double b = 1.15 + 2.53 * spq;
  const double a = -0.0873 + 0.0248 * b + 0.01 * p;
  const double c = nd * p + 0.5;
  const double v_r = 0.92 - 4.2 / b;
  const double alpha = (2.83 + 5.1 / b) * spq;
  const double lpq = std::log(p / q);
  const double m = std::floor((nd + 1.0) * p);
  const double h = std::lgamma(m + 1.0) + std::lgamma(nd - m + 1.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + c);
    if (k < 0.0 || k > nd) continue;
    if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(k);
    v = std::log(v * alpha / (a / (us * us) + b));
    if (v <= h - std::lgamma(k + 1.0) - std::lgamma(nd - k + 1.0) + (k - m) * lpq)
      return static_cast<std::int64_t>(k);
  }
}

}  // namespace

double polya_gamma_mean(const PolyaGammaParams& params) {
  const double b = static_cast<double>(params.shape);
  const double c = std::abs(params.tilt);
  if (c < 1e-6) return b / 4.0;
  return b * std::tanh(0.5 * c) / (2.0 * c);
}

double polya_gamma_variance(const PolyaGammaParams& params) {
  const double b = static_cast<double>(params.shape);
  const double c = std::abs(params.tilt);
  if (c < 1e-2) return b / 4.0 * (1.0 / 6.0 - c * c / 30.0);
  // (sinh c - c) sech^2(c/2) rewritten to avoid overflow for large c.
  const double sech = 1.0 / std::cosh(0.5 * c);
  return b / (4.0 * c * c * c) * (2.0 * std::tanh(0.5 * c) - c * sech * sech);
}

double draw_polya_gamma_unit(double tilt, RandomStream& rng) {
  const double z = 0.5 * std::abs(tilt);
  const double k = pi * pi / 8.0 + 0.5 * z * z;
  const double p = pi / (2.0 * k) * std::exp(-k * kSplit);
  // 2 exp(-z) times the IG(1/z, 1) CDF at kSplit, in log space.
  const double root_t = std::sqrt(kSplit);
  const double ig_cdf_lo = std::exp(-z + log_normal_cdf((kSplit * z - 1.0) / root_t));
  const double ig_cdf_hi = std::exp(z + log_normal_cdf(-(kSplit * z + 1.0) / root_t));
  const double q = 2.0 * (ig_cdf_lo + ig_cdf_hi);
  const double first_piece = p / (p + q);

  for (;;) {
    const double x = rng.uniform() < first_piece
                         ? kSplit + draw_exponential(rng) / k
                         : draw_truncated_inverse_gaussian(z, rng);
    double s = series_coefficient(0, x);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= series_coefficient(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += series_coefficient(n, x);
        if (y > s) break;
      }
    }
  }
}

double draw_polya_gamma(const PolyaGammaParams& params, RandomStream& rng) {
  if (params.shape < 0) throw DomainError("Polya-Gamma shape must be nonnegative");
  if (!std::isfinite(params.tilt)) throw DomainError("Polya-Gamma tilt must be finite");
  if (params.shape == 0) return 0.0;
  if (params.shape <= kPolyaGammaExactMaxShape) {
    double sum = 0.0;
    for (std::int64_t i = 0; i < params.shape; ++i)
      sum += draw_polya_gamma_unit(params.tilt, rng);
    return sum;
  }
  const double mean = polya_gamma_mean(params);
  const double sd = std::sqrt(polya_gamma_variance(params));
  // The mean sits > 10 sd above zero for shapes in this branch.
  for (;;) {
    const double x = mean + sd * draw_standard_normal(rng);
    if (x > 0.0) return x;
  }
}

double regularized_incomplete_beta(double x, double shape1, double shape2) {
  check_shapes(shape1, shape2);
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta argument outside [0, 1]");
  return boost::math::ibeta(shape1, shape2, x);
}

double regularized_incomplete_beta_complement(double x, double shape1,
                                              double shape2) {
  check_shapes(shape1, shape2);
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta argument outside [0, 1]");
  return boost::math::ibetac(shape1, shape2, x);
}

double inverse_regularized_incomplete_beta(double u, double shape1,
                                           double shape2) {
  check_shapes(shape1, shape2);
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("probability outside [0, 1]");
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  if (u > 0.5) {
    const double target = 1.0 - u;
    return bracketed_root(
        [&](double x) { return target - boost::math::ibetac(shape1, shape2, x); },
        0.0, 1.0);
  }
  return bracketed_root(
      [&](double x) { return boost::math::ibeta(shape1, shape2, x) - u; }, 0.0, 1.0);
}

TruncatedBeta::TruncatedBeta(double shape1, double shape2, double lower,
                             double upper)
    : shape1_(shape1), shape2_(shape2), lower_(lower), upper_(upper) {
  check_shapes(shape1, shape2);
  if (!(lower >= 0.0 && upper <= 1.0))
    throw DomainError("truncation bounds must lie in [0, 1]");
  if (!(lower < upper)) throw DomainError("truncation requires lower < upper");
  const double i_lower = boost::math::ibeta(shape1, shape2, lower);
  use_complement_ = i_lower > 0.5;
  if (use_complement_) {
    base_lo_ = boost::math::ibetac(shape1, shape2, lower);
    base_hi_ = boost::math::ibetac(shape1, shape2, upper);
    mass_ = base_lo_ - base_hi_;
  } else {
    base_lo_ = i_lower;
    base_hi_ = boost::math::ibeta(shape1, shape2, upper);
    mass_ = base_hi_ - base_lo_;
  }
  if (!(mass_ >= 1e-14)) {
    std::ostringstream msg;
    msg << "truncated beta has degenerate support: mass " << mass_ << " on ["
        << lower << ", " << upper << "]";
    throw DegenerateSupportError(msg.str(), mass_);
  }
}

double TruncatedBeta::cdf(double x) const {
  if (x <= lower_) return 0.0;
  if (x >= upper_) return 1.0;
  if (use_complement_)
    return (base_lo_ - boost::math::ibetac(shape1_, shape2_, x)) / mass_;
  return (boost::math::ibeta(shape1_, shape2_, x) - base_lo_) / mass_;
}

double TruncatedBeta::pdf(double x) const {
  if (x < lower_ || x > upper_) return 0.0;
  return boost::math::ibeta_derivative(shape1_, shape2_, x) / mass_;
}

double TruncatedBeta::quantile(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("probability outside [0, 1]");
  double x = 0.0;
  if (use_complement_) {
    const double target = base_lo_ - u * mass_;
    x = bracketed_root(
        [&](double v) { return target - boost::math::ibetac(shape1_, shape2_, v); },
        lower_, upper_);
  } else {
    const double target = base_lo_ + u * mass_;
    x = bracketed_root(
        [&](double v) { return boost::math::ibeta(shape1_, shape2_, v) - target; },
        lower_, upper_);
  }
  return std::clamp(x, lower_, upper_);
}

double TruncatedBeta::draw(RandomStream& rng) const { return quantile(rng.uniform()); }

double draw_truncated_beta(double shape1, double shape2, double lower,
                           double upper, RandomStream& rng) {
  return TruncatedBeta(shape1, shape2, lower, upper).draw(rng);
}

Eigen::VectorXd draw_mvn_from_precision(const Eigen::VectorXd& linear_term,
                                        const Eigen::MatrixXd& precision,
                                        RandomStream& rng) {
  const Eigen::Index dim = precision.rows();
  if (precision.cols() != dim || linear_term.size() != dim)
    throw DomainError("precision matrix and linear term dimensions disagree");
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(precision,
                                                       Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    const double condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    std::ostringstream msg;
    msg << "precision matrix is not positive definite (eigenvalues in [" << lo
        << ", " << hi << "], condition " << condition << ")";
    throw NumericalError(msg.str(), condition);
  }
  const auto lower = llt.matrixL();
  Eigen::VectorXd shifted = lower.solve(linear_term);
  for (Eigen::Index i = 0; i < dim; ++i) shifted(i) += draw_standard_normal(rng);
  return lower.transpose().solve(shifted);
}

double draw_standard_normal(RandomStream& rng) {
  const double u1 = rng.uniform_open();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
}

double draw_normal(double mean, double variance, RandomStream& rng) {
  if (!(variance >= 0.0)) throw DomainError("normal variance must be nonnegative");
  return mean + std::sqrt(variance) * draw_standard_normal(rng);
}

double draw_exponential(RandomStream& rng) { return -std::log(rng.uniform_open()); }

double draw_gamma(double shape, double rate, RandomStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw DomainError("gamma shape and rate must be positive");
  if (shape < 1.0) {
    // Boost to shape + 1 and rescale by U^(1/shape).
    const double g = draw_gamma(shape + 1.0, 1.0, rng);
    return g * std::pow(rng.uniform_open(), 1.0 / shape) / rate;
  }
  // Marsaglia and Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = draw_standard_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

double draw_inverse_gamma(double shape, double scale, RandomStream& rng) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw DomainError("inverse-gamma shape and scale must be positive");
  return 1.0 / draw_gamma(shape, scale, rng);
}

std::int64_t draw_binomial(std::int64_t n, double p, RandomStream& rng) {
  if (n < 0) throw DomainError("binomial size must be nonnegative");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binomial probability outside [0, 1]");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  const bool flip = p > 0.5;
  const double pp = flip ? 1.0 - p : p;
  const std::int64_t k = static_cast<double>(n) * pp < 10.0
                             ? binomial_inversion(n, pp, rng)
                             : binomial_btrs(n, pp, rng);
  return flip ? n - k : k;
}

std::vector<std::int64_t> draw_multinomial(std::int64_t n,
                                           std::span<const double> probs,
                                           RandomStream& rng) {
  if (n < 0) throw DomainError("multinomial size must be nonnegative");
  if (probs.empty()) throw DomainError("multinomial needs at least one category");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("multinomial probability outside [0, 1]");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw DomainError("multinomial probabilities must sum to 1");

  std::vector<std::int64_t> counts(probs.size(), 0);
  std::int64_t remaining = n;
  double remaining_mass = 1.0;
  for (std::size_t i = 0; i + 1 < probs.size() && remaining > 0; ++i) {
    const double cond = remaining_mass > 0.0 ? std::clamp(probs[i] / remaining_mass, 0.0, 1.0) : 0.0;
    counts[i] = draw_binomial(remaining, cond, rng);
    remaining -= counts[i];
    remaining_mass -= probs[i];
  }
  counts.back() += remaining;
  return counts;
}

}  // namespace misclass
