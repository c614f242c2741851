#pragma once

#include <cmath>
#include <optional>
#include <string_view>
#include <vector>

namespace phibayes {

// Index of the power-divergence family
//
//   phi_gamma(x) = (x^gamma - gamma x + gamma - 1) / (gamma (gamma - 1)),
//
// extended by continuity to gamma = 0 (phi_0(x) = -log x + x - 1, the
// "modified KL" generator) and gamma = 1 (phi_1(x) = x log x - x + 1, KL).
// gamma = 0.5 gives twice the squared Hellinger distance, gamma = 2 gives
// half of Pearson's chi-squared.
struct DivergenceSpec {
  double gamma = 1.0;
};

// Below this distance from 0 or 1 the closed-form limits are used; the
// generic power formula is 0/0 there.
inline constexpr double kGammaLimitTol = 1e-6;

inline bool gamma_is_zero(double gamma) { return std::abs(gamma) < kGammaLimitTol; }
inline bool gamma_is_one(double gamma) { return std::abs(gamma - 1.0) < kGammaLimitTol; }

// phi evaluated from log(x). Formulas are arranged around expm1 so that the
// quadratic behaviour near x = 1 survives cancellation:
//   generic: (expm1(g l) - g expm1(l)) / (g (g-1))
//   g -> 0 : expm1(l) - l
//   g -> 1 : l e^l - expm1(l)
// Non-throwing; may overflow to +inf for extreme arguments.
inline double phi_from_log(double gamma, double log_x) {
  if (gamma_is_zero(gamma)) return std::expm1(log_x) - log_x;
  if (gamma_is_one(gamma)) return log_x * std::exp(log_x) - std::expm1(log_x);
  return (std::expm1(gamma * log_x) - gamma * std::expm1(log_x)) /
         (gamma * (gamma - 1.0));
}

// phi'(x) from log(x): expm1((g-1) l) / (g-1), with limit log x at g = 1.
inline double phi_prime_from_log(double gamma, double log_x) {
  if (gamma_is_one(gamma)) return log_x;
  return std::expm1((gamma - 1.0) * log_x) / (gamma - 1.0);
}

// x phi'(x) - phi(x) from log(x): expm1(g l) / g, with limit log x at g = 0.
// This is the data-side term of the dual criterion.
inline double dual_bracket_from_log(double gamma, double log_x) {
  if (gamma_is_zero(gamma)) return log_x;
  return std::expm1(gamma * log_x) / gamma;
}

// Checked scalar entry points: throw std::domain_error for x outside (0, inf)
// and std::overflow_error if the value is too large for a double.
double phi(const DivergenceSpec& spec, double x);
double phi_prime(const DivergenceSpec& spec, double x);
double phi_second(const DivergenceSpec& spec, double x);

// Named gamma presets; returns nothing for an unknown name.
std::optional<DivergenceSpec> divergence_preset(std::string_view name);

struct GrowthWitness {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
};

struct GrowthCheckResult {
  std::optional<GrowthWitness> witness;
  // Largest violation seen during the scan when no witness exists.
  double worst_c = 1.0;
  double worst_x = 1.0;
  double worst_violation = 0.0;
};

// Searches a small ordered candidate set for constants (c1, c2, c3) with
//   phi(c x) <= c1 phi(x) + c2 |x| + c3   for all c in [1-eta, 1+eta], x in grid.
// Candidates are scanned smallest-sum-first so the returned witness is the
// least aggressive one in the set. eta = 0 degenerates to the single point c = 1.
GrowthCheckResult check_growth_condition(const DivergenceSpec& spec, double eta,
                                         const std::vector<double>& x_grid);

}  // namespace phibayes
