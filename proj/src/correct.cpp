#include "misclass/correct.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "misclass/error.hpp"

namespace misclass {

RatePrior RatePrior::fixed(double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw DomainError("fixed rate outside [0, 1]");
  return RatePrior(rate);
}

RatePrior RatePrior::elicited(ElicitedPrior prior) { return RatePrior(std::move(prior)); }

double RatePrior::mode() const {
  if (const auto* v = std::get_if<double>(&value_)) return *v;
  return std::get<ElicitedPrior>(value_).mode;
}

double RatePrior::lower() const {
  if (const auto* v = std::get_if<double>(&value_)) return *v;
  return std::get<ElicitedPrior>(value_).lower;
}

double RatePrior::upper() const {
  if (const auto* v = std::get_if<double>(&value_)) return *v;
  return std::get<ElicitedPrior>(value_).upper;
}

double RatePrior::draw(RandomStream& rng) const {
  if (const auto* v = std::get_if<double>(&value_)) return *v;
  return std::get<ElicitedPrior>(value_).distribution().draw(rng);
}

MisclassRates RatePriorTriple::modes() const {
  return {outcome.mode(), eligibility_unvaccinated.mode(), eligibility_vaccinated.mode()};
}

MisclassRates draw_misclass_rates(const RatePriorTriple& priors, RandomStream& rng) {
  MisclassRates rates;
  rates.outcome = priors.outcome.draw(rng);
  rates.eligibility_unvaccinated = priors.eligibility_unvaccinated.draw(rng);
  rates.eligibility_vaccinated = priors.eligibility_vaccinated.draw(rng);
  return rates;
}

std::int64_t ceil_rate_times_count(double rate, std::int64_t count) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw DomainError("rate outside [0, 1]");
  if (count < 0) throw DomainError("count must be nonnegative");
  const double product = rate * static_cast<double>(count);
  const double nearest = std::round(product);
  const double tol = std::max(1e-9, 64.0 * std::numeric_limits<double>::epsilon() * product);
  if (std::abs(product - nearest) <= tol) return static_cast<std::int64_t>(nearest);
  return static_cast<std::int64_t>(std::ceil(product));
}

CorrectedCounts apply_correction(std::int64_t n, std::int64_t y, const MisclassRates& rates) {
  if (n < 0 || y < 0 || y > n) throw DomainError("counts must satisfy 0 <= Y <= N");
  CorrectedCounts out;
  out.delta_eligibility_unvaccinated = ceil_rate_times_count(rates.eligibility_unvaccinated, n - y);
  out.delta_eligibility_vaccinated = ceil_rate_times_count(rates.eligibility_vaccinated, y);
  out.n_eligible = n - out.delta_eligibility_unvaccinated - out.delta_eligibility_vaccinated;
  if (out.n_eligible <= 0) {
    std::ostringstream msg;
    msg << "correction leaves no eligible participants (N=" << n << ", Y=" << y
        << ", rates=" << rates.outcome << "/" << rates.eligibility_unvaccinated << "/"
        << rates.eligibility_vaccinated << ")";
    throw SiteDegenerateError(msg.str(), "");
  }
  out.eligible_vaccinated = y - out.delta_eligibility_vaccinated;
  out.delta_outcome = ceil_rate_times_count(rates.outcome, out.n_eligible - out.eligible_vaccinated);
  out.n_vaccinated = out.eligible_vaccinated + out.delta_outcome;
  out.kappa = static_cast<double>(out.n_vaccinated) - 0.5 * static_cast<double>(out.n_eligible);
  return out;
}

}  // namespace misclass
