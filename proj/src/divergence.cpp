#include "phibayes/divergence.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <string>

namespace phibayes {

namespace {

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw std::overflow_error(what);
  return v;
}

void require_positive(double x) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw std::domain_error("divergence generator needs x in (0, inf)");
}

}  // namespace

double phi(const DivergenceSpec& spec, double x) {
  require_positive(x);
  return checked(phi_from_log(spec.gamma, std::log(x)), "phi overflow");
}

double phi_prime(const DivergenceSpec& spec, double x) {
  require_positive(x);
  return checked(phi_prime_from_log(spec.gamma, std::log(x)), "phi_prime overflow");
}

double phi_second(const DivergenceSpec& spec, double x) {
  require_positive(x);
  // phi''(x) = x^(gamma - 2)
  return checked(std::exp((spec.gamma - 2.0) * std::log(x)), "phi_second overflow");
}

std::optional<DivergenceSpec> divergence_preset(std::string_view name) {
  std::string k(name);
  for (char& c : k) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (k == "klm") return DivergenceSpec{0.0};
  if (k == "kl") return DivergenceSpec{1.0};
  if (k == "hellinger") return DivergenceSpec{0.5};
  if (k == "chisquared" || k == "chi2") return DivergenceSpec{2.0};
  return std::nullopt;
}

GrowthCheckResult check_growth_condition(const DivergenceSpec& spec, double eta,
                                         const std::vector<double>& x_grid) {
  if (eta < 0.0 || eta >= 1.0)
    throw std::invalid_argument("growth check needs eta in [0, 1)");
  if (x_grid.empty()) throw std::invalid_argument("growth check needs a nonempty grid");

  std::vector<double> cs;
  if (eta == 0.0) {
    cs.push_back(1.0);
  } else {
    const int nc = 21;
    for (int i = 0; i < nc; ++i)
      cs.push_back(1.0 - eta + 2.0 * eta * i / (nc - 1));
  }

  const double c1_set[] = {1.0, 1.25, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0};
  const double c23_set[] = {0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<GrowthWitness> candidates;
  for (double c1 : c1_set)
    for (double c2 : c23_set)
      for (double c3 : c23_set) candidates.push_back({c1, c2, c3});
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const GrowthWitness& a, const GrowthWitness& b) {
                     const double sa = a.c1 + a.c2 + a.c3;
                     const double sb = b.c1 + b.c2 + b.c3;
                     if (sa != sb) return sa < sb;
                     if (a.c1 != b.c1) return a.c1 < b.c1;
                     return a.c2 < b.c2;
                   });

  GrowthCheckResult result;
  for (const auto& cand : candidates) {
    bool ok = true;
    double worst_gap = 0.0, worst_c = 1.0, worst_x = 1.0;
    for (double x : x_grid) {
      if (!(x > 0.0)) throw std::invalid_argument("growth grid must be positive");
      const double px = phi_from_log(spec.gamma, std::log(x));
      const double bound = cand.c1 * px + cand.c2 * std::abs(x) + cand.c3 + 1e-12;
      for (double c : cs) {
        const double pcx = phi_from_log(spec.gamma, std::log(c * x));
        if (pcx > bound) {
          ok = false;
          const double gap = pcx - bound;
          if (gap > worst_gap) {
            worst_gap = gap;
            worst_c = c;
            worst_x = x;
          }
        }
      }
      if (!ok && worst_gap > result.worst_violation) {
        result.worst_violation = worst_gap;
        result.worst_c = worst_c;
        result.worst_x = worst_x;
      }
      if (!ok) break;
    }
    if (ok) {
      result.witness = cand;
      return result;
    }
  }
  return result;
}

}  // namespace phibayes
