#pragma once

#include <cstdint>
#include <variant>

#include "misclass/elicit.hpp"
#include "misclass/rng.hpp"

namespace misclass {

// The three misclassification rates attached to a site.
struct MisclassRates {
  double outcome = 0.0;                    // eligible vaccinated recorded as unvaccinated
  double eligibility_unvaccinated = 0.0;   // ineligible among observed unvaccinated
  double eligibility_vaccinated = 0.0;     // ineligible among observed vaccinated

  bool operator==(const MisclassRates&) const = default;
};

struct CorrectedCounts {
  std::int64_t n_eligible = 0;           // N*
  std::int64_t eligible_vaccinated = 0;  // E
  std::int64_t n_vaccinated = 0;         // Y*
  double kappa = 0.0;                    // Y* - N*/2
  std::int64_t delta_outcome = 0;
  std::int64_t delta_eligibility_unvaccinated = 0;
  std::int64_t delta_eligibility_vaccinated = 0;

  bool operator==(const CorrectedCounts&) const = default;
};

// Prior for one rate: a point mass or an elicited truncated Beta.
class RatePrior {
 public:
  RatePrior() : value_(0.0) {}
  static RatePrior fixed(double rate);
  static RatePrior elicited(ElicitedPrior prior);

  bool is_fixed() const noexcept { return std::holds_alternative<double>(value_); }
  double mode() const;
  double lower() const;
  double upper() const;
  double draw(RandomStream& rng) const;
  const ElicitedPrior* elicited_prior() const noexcept {
    return std::get_if<ElicitedPrior>(&value_);
  }

  bool operator==(const RatePrior&) const = default;

 private:
  explicit RatePrior(std::variant<double, ElicitedPrior> v) : value_(std::move(v)) {}
  std::variant<double, ElicitedPrior> value_;
};

struct RatePriorTriple {
  RatePrior outcome;
  RatePrior eligibility_unvaccinated;
  RatePrior eligibility_vaccinated;

  static RatePriorTriple none() { return {}; }
  MisclassRates modes() const;
  bool operator==(const RatePriorTriple&) const = default;
};

// Independent prior draws of the three rates.
MisclassRates draw_misclass_rates(const RatePriorTriple& priors, RandomStream& rng);

// ceil(rate * count), treating products within rounding noise of an integer as
// that integer so decimal rates behave as written.
std::int64_t ceil_rate_times_count(double rate, std::int64_t count);

// Ordered count correction; throws SiteDegenerateError if N* <= 0.
CorrectedCounts apply_correction(std::int64_t n, std::int64_t y, const MisclassRates& rates);

}  // namespace misclass
