#pragma once

#include "phibayes/dual_criterion.hpp"

#include <atomic>
#include <memory>

namespace phibayes {

enum class PriorKind { Normal, UniformBox };

// Proper priors only: independent normals per coordinate, or a uniform box.
struct PriorSpec {
  PriorKind kind = PriorKind::Normal;
  Vector mean;  // Normal
  Vector sd;
  Vector lo;    // UniformBox
  Vector hi;
};

double log_prior(const PriorSpec& prior, const Vector& alpha);
Vector prior_mean(const PriorSpec& prior);
// Throws ConfigError for dimension mismatches, non-finite bounds, sd <= 0, ...
void validate_prior(const PriorSpec& prior, const Model& model);

// Unnormalized phi-posterior: exp{ temper * n * P_n h(theta, alpha) } pi(alpha).
// temper is a diagnostic dial and stays at 1 in normal use.
struct PhiPosterior {
  DualCriterion crit;
  Dataset data;
  PriorSpec prior;
  double temper = 1.0;
  // How many alpha evaluations were rejected because the divergence integral
  // came back infinite. Shared across copies.
  std::shared_ptr<std::atomic<long>> divergence_rejections;
};

PhiPosterior make_phi_posterior(const DualCriterion& crit, Dataset data,
                                const PriorSpec& prior, double temper = 1.0);

// Log of the unnormalized density. Returns -inf outside the parameter box /
// prior support and for alpha where the divergence integral is infinite.
double log_unnormalized(const PhiPosterior& post, const Vector& alpha);

// Posterior after absorbing additional observations; for gamma = 0 this is
// exactly Bayesian updating, and the escort is deliberately kept fixed.
PhiPosterior sequential_update(const PhiPosterior& post, const Dataset& new_data);

struct GridConfig {
  int panels = 250;  // composite Gauss-Legendre panels over the support
  int order = 8;
};

struct NormalizedPosterior {
  Vector nodes;    // ascending, with quadrature weights attached
  Vector weights;
  Vector density;  // sum_i weights[i] * density[i] = 1
  double log_normalizer = 0.0;
  bool underflow_warning = false;  // peak log-density below -700 before centering
};

// One-dimensional normalization on a quadrature grid over the intersection of
// the parameter box with the prior support. Throws NumericalError if the
// posterior underflows at every node.
NormalizedPosterior normalize_1d(const PhiPosterior& post, const GridConfig& grid = {});

}  // namespace phibayes
