#pragma once

#include "phibayes/divergence.hpp"
#include "phibayes/model.hpp"
#include "phibayes/optim.hpp"
#include "phibayes/quadrature.hpp"
#include "phibayes/types.hpp"

#include <vector>

namespace phibayes {

// Everything needed to evaluate the dual divergence criterion
//
//   h(theta, alpha, x) = E_theta[phi'(p_theta/p_alpha (Y))]
//                        - [r phi'(r) - phi(r)](p_theta/p_alpha (x))
//
// for a fixed escort parameter theta. The escort-side expectation plans and
// the escort log-densities at their nodes are precomputed here because the
// criterion sits inside MCMC and optimizer hot loops.
struct DualCriterion {
  Model model;
  DivergenceSpec divergence;
  Vector escort;
  QuadratureConfig quad;

  ExpectationPlans escort_plans;            // plans under p_escort
  std::vector<Vector> escort_log_p;         // log p_escort(x) per level, per node
};

DualCriterion make_criterion(const Model& model, const DivergenceSpec& divergence,
                             const Vector& escort, const QuadratureConfig& quad = {});

// E_theta[phi'(p_theta/p_alpha)]. Identically 0 at gamma = 0; closed form for
// Gaussian families at gamma = 1; otherwise stabilized quadrature. Throws
// DivergenceInfiniteError outside the finite region.
double inner_integral(const DualCriterion& crit, const Vector& alpha);

// h(theta, alpha, x); x must lie in the model support.
double h_value(const DualCriterion& crit, const Vector& alpha, double x);

// P_n h(theta, alpha) = inner - (1/n) sum_i [r phi'(r) - phi(r)](x_i).
// May return -inf when the data-side terms overflow.
double empirical_criterion(const DualCriterion& crit, const Dataset& data,
                           const Vector& alpha);

// D_phi(P_theta, P_alpha0) evaluated directly as E_alpha0[phi(p_theta/p_alpha0)].
double divergence_direct(const DualCriterion& crit, const Vector& alpha0);

// Population criterion m(alpha) = E_theta0[h(theta, alpha, X)].
double population_criterion(const DualCriterion& crit, const Vector& alpha,
                            const Vector& theta0);

struct DualSupResult {
  double sup = 0.0;        // max_alpha E_theta0[h]
  Vector argmax;
  double direct = 0.0;     // D_phi(P_theta, P_theta0) by direct quadrature
  double gap = 0.0;        // |sup - direct|
  long iterations = 0;
  bool converged = false;
};

// Verifies the dual representation numerically: maximizes the population
// criterion over the parameter box (coarse grid scan, then golden-section or
// Nelder-Mead refinement) and compares against the directly computed
// divergence. Grid points where the integral diverges are skipped.
DualSupResult dual_sup_check(const DualCriterion& crit, const Vector& theta0,
                             const OptimizerConfig& cfg = {});

}  // namespace phibayes
