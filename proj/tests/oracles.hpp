#pragma once

// Reference computations used by the tests. They avoid the library's special
// functions and solvers: truncated-Beta masses come from Simpson quadrature of
// the density, the elicitation root from a plain grid scan, and corrected
// counts from big-integer arithmetic on exact decimal rates.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <boost/multiprecision/cpp_int.hpp>

#include "misclass/correct.hpp"
#include "misclass/elicit.hpp"

namespace oracle {

// Beta density scaled so its value at `peak` is 1; avoids under/overflow for
// large shapes.
inline double scaled_beta(double x, double a, double b, double peak) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  const double at_peak = (a - 1) * std::log(peak) + (b - 1) * std::log1p(-peak);
  return std::exp((a - 1) * std::log(x) + (b - 1) * std::log1p(-x) - at_peak);
}

inline double simpson(double lo, double hi, int n, auto&& f) {
  if (hi <= lo) return 0.0;
  if (n % 2) ++n;
  const double h = (hi - lo) / n;
  double s = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double beta_mode(double a, double b) { return (a - 1) / (a + b - 2); }

// P(x0 < rho <= x1) under Beta(a, b) truncated to [lo, hi].
inline double truncated_mass(double a, double b, double lo, double hi, double x0, double x1) {
  const double peak = std::clamp(beta_mode(a, b), lo, hi);
  const auto f = [&](double x) { return scaled_beta(x, a, b, peak); };
  const int per_unit = 200000;
  const auto intervals = [&](double u, double v) { return std::max(200, static_cast<int>((v - u) * per_unit)); };
  const double total = simpson(lo, hi, intervals(lo, hi), f);
  const double u = std::max(x0, lo);
  const double v = std::min(x1, hi);
  return v > u ? simpson(u, v, intervals(u, v), f) / total : 0.0;
}

inline double between_anchor_mass(double a, double b, const misclass::ElicitationSpec& s) {
  return truncated_mass(a, b, s.lower, s.upper, std::max(s.low.value, s.lower),
                        std::min(s.high.value, s.upper));
}

inline double defect(double gamma, const misclass::ElicitationSpec& s) {
  const double lambda = (gamma * (1 - s.mode) + 2 * s.mode - 1) / s.mode;
  return between_anchor_mass(gamma, lambda, s) - (s.high.probability - s.low.probability);
}

// First sign change of the defect on a log grid in (gamma - 1), refined by
// bisection.
inline double scan_gamma(const misclass::ElicitationSpec& s) {
  const int n = 300;
  const double lo = std::log(1e-6);
  const double hi = std::log(misclass::kElicitMaxShape - 1.0);
  double prev_x = 1.0 + std::exp(lo);
  double prev_g = defect(prev_x, s);
  for (int i = 1; i < n; ++i) {
    const double x = 1.0 + std::exp(lo + (hi - lo) * i / (n - 1));
    const double g = defect(x, s);
    if ((g < 0) != (prev_g < 0)) {
      double a = prev_x;
      double b = x;
      double ga = prev_g;
      for (int it = 0; it < 80; ++it) {
        const double m = 0.5 * (a + b);
        const double gm = defect(m, s);
        if ((gm < 0) == (ga < 0)) {
          a = m;
          ga = gm;
        } else {
          b = m;
        }
      }
      return 0.5 * (a + b);
    }
    prev_x = x;
    prev_g = g;
  }
  return std::nan("");
}

// Argmax of the truncated density over a 10^4-point grid on [lo, hi].
inline double density_argmax(double a, double b, double lo, double hi) {
  const int n = 10000;
  double best_x = lo;
  double best = -1.0;
  const double peak = std::clamp(beta_mode(a, b), lo, hi);
  for (int i = 0; i <= n; ++i) {
    const double x = lo + (hi - lo) * i / n;
    const double f = scaled_beta(x, a, b, peak);
    if (f > best) {
      best = f;
      best_x = x;
    }
  }
  return best_x;
}

// Exact ceil(num / den * count) in big integers.
inline std::int64_t exact_ceil(std::int64_t num, std::int64_t den, std::int64_t count) {
  using boost::multiprecision::cpp_int;
  const cpp_int p = cpp_int(num) * count;
  cpp_int q = p / den;
  if (q * den != p) q += 1;
  return q.convert_to<std::int64_t>();
}

struct Rational {
  std::int64_t num;
  std::int64_t den;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// The four correction formulas with rates held as exact decimals. Returns
// false when no eligible participants remain.
inline bool oracle_correct(std::int64_t n, std::int64_t y, Rational r1, Rational r2, Rational r3,
                           misclass::CorrectedCounts& out) {
  out.delta_eligibility_unvaccinated = exact_ceil(r2.num, r2.den, n - y);
  out.delta_eligibility_vaccinated = exact_ceil(r3.num, r3.den, y);
  out.n_eligible = n - out.delta_eligibility_unvaccinated - out.delta_eligibility_vaccinated;
  if (out.n_eligible <= 0) return false;
  out.eligible_vaccinated = y - out.delta_eligibility_vaccinated;
  out.delta_outcome = exact_ceil(r1.num, r1.den, out.n_eligible - out.eligible_vaccinated);
  out.n_vaccinated = out.eligible_vaccinated + out.delta_outcome;
  out.kappa = static_cast<double>(out.n_vaccinated) - 0.5 * static_cast<double>(out.n_eligible);
  return true;
}

// PG(b, c) variance from its infinite-convolution representation,
// b / (4 c^3) (sinh c - c) sech^2(c / 2), with the limit b / 24 at c = 0.
inline double polya_gamma_variance(double b, double c) {
  if (std::abs(c) < 1e-4) return b / 24.0 * (1.0 - c * c / 5.0);
  const double sech = 1.0 / std::cosh(c / 2.0);
  return b / (4.0 * c * c * c) * (std::sinh(c) - c) * sech * sech;
}

inline double polya_gamma_mean(double b, double c) {
  return std::abs(c) < 1e-8 ? b / 4.0 : b * std::tanh(c / 2.0) / (2.0 * c);
}

}  // namespace oracle
