#pragma once

#include "phibayes/mcmc.hpp"
#include "phibayes/phi_posterior.hpp"

#include <functional>

namespace phibayes {

enum class LossKind { SquaredError, AbsoluteError, Quantile };

struct LossSpec {
  LossKind kind = LossKind::SquaredError;
  double tau = 0.5;  // Quantile only
};

struct EstimateReport {
  Vector point;
  Vector mc_se;  // Monte Carlo standard error of the point estimate
  Vector ess;
  Matrix ci;     // d x 2 central credible interval at level eps (NaN when the
                 // chain is too short to support it)
  double eps = 0.05;
};

// Loss-based point estimate from retained draws: posterior mean for squared
// error, coordinatewise median for absolute error, coordinatewise tau-quantile
// for quantile loss. Mean SEs use sd/sqrt(ESS); quantile SEs use batch means.
EstimateReport estimate(const ChainDraws& chain, const LossSpec& loss,
                        double eps = 0.05);

// Central quantile interval [q_{eps/2}, q_{1-eps/2}] of f(draws); interpolated
// order statistics, at least 1000 retained draws required.
struct CredibleInterval {
  double lo = 0.0;
  double hi = 0.0;
};
CredibleInterval credible_interval(const ChainDraws& chain,
                                   const std::function<double(const Vector&)>& f,
                                   double eps);

struct ModeResult {
  Vector x;
  double value = 0.0;
  long iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;  // finite-difference gradient at the reported mode
};

// Maximizer of P_n h(theta, alpha) + log pi(alpha) (criterion on the
// per-observation scale). Multistart Nelder-Mead over the parameter box:
// escort, prior mean, and three seeded random starts.
ModeResult posterior_mode(const PhiPosterior& post, const OptimizerConfig& cfg = {});

// Maximizer of n P_n h(theta, alpha) + log pi(alpha), i.e. the mode of the
// phi-posterior density itself.
ModeResult posterior_mode_of_phi_posterior(const PhiPosterior& post,
                                           const OptimizerConfig& cfg = {});

// Frequentist minimum-divergence point estimate: argmax of the empirical
// criterion alone.
ModeResult dual_mle(const DualCriterion& crit, const Dataset& data,
                    const OptimizerConfig& cfg = {});

}  // namespace phibayes
