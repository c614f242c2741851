#pragma once

#include "phibayes/model.hpp"
#include "phibayes/types.hpp"

#include <functional>
#include <vector>

namespace phibayes {

enum class QuadScheme { Auto, GaussHermite, GaussLegendreMapped, Adaptive };

struct QuadratureConfig {
  QuadScheme scheme = QuadScheme::Auto;
  int order = 64;    // Gauss-Hermite order / Gauss-Legendre order per panel
  int panels = 40;   // panels for the log-mapped Legendre scheme
  double abs_tol = 1e-8;
  double rel_tol = 1e-8;
};

void validate(const QuadratureConfig& cfg);

// Nodes and weights of a plain rule: Hermite is for weight exp(-u^2) on the
// line, Legendre for weight 1 on [-1, 1]. Computed by the Golub-Welsch
// eigendecomposition and cached per order.
struct GaussRule {
  Vector nodes;
  Vector weights;
};
const GaussRule& gauss_hermite(int order);
const GaussRule& gauss_legendre(int order);

// A plan turns expectations under p_theta into weighted sums:
//   E_theta[f(X)] ~= sum_i w_i f(x_i)
// (the density is folded into the weights).
struct QuadPlan {
  Vector x;
  Vector w;
};

// Escalating plans for divergence detection. Level k doubles the effective
// resolution of level k-1; for half-line models it also pushes the truncation
// quantiles further into the tails, so a non-integrable tail cannot hide
// behind a fixed cutoff.
struct ExpectationPlans {
  std::vector<QuadPlan> levels;
};

ExpectationPlans make_expectation_plans(const Model& m, const Vector& theta,
                                        const QuadratureConfig& cfg);

// Evaluates the integrand over successive levels until two agree within the
// configured tolerances. Throws DivergenceInfiniteError if a level is
// non-finite or the sequence fails to settle.
double stabilized_expectation(const ExpectationPlans& plans,
                              const std::function<double(double)>& f,
                              const QuadratureConfig& cfg);

// One-call convenience: builds the plans and stabilizes.
double expect_under(const Model& m, const Vector& theta,
                    const std::function<double(double)>& f,
                    const QuadratureConfig& cfg);

}  // namespace phibayes
