#pragma once

#include "phibayes/types.hpp"

#include <cstdint>
#include <functional>

namespace phibayes {

using Objective = std::function<double(const Vector&)>;

struct OptimizerConfig {
  int grid_points = 101;   // per-dimension coarse scan
  int max_iters = 500;
  int restarts = 2;
  double xtol = 1e-9;
  double ftol = 1e-13;
  std::uint64_t seed = 0;  // for randomized multistarts
};

struct OptimResult {
  Vector x;
  double value = 0.0;
  long iterations = 0;
  bool converged = false;
};

// Box-projected Nelder-Mead ascent. The objective may return -inf (vertices
// there always lose); throws NoFiniteStartError if no finite vertex can be
// built around x0.
OptimResult nelder_mead_max(const Objective& f, const Vector& x0, const Vector& lo,
                            const Vector& hi, const OptimizerConfig& cfg);

// 1-D golden-section ascent on [a, b]; tolerant of -inf plateaus at the edges.
OptimResult golden_section_max(const std::function<double(double)>& f, double a,
                               double b, double xtol, int max_iters = 200);

// Central differences with one Richardson extrapolation step,
// step = rel_step * (1 + |x_j|) per coordinate.
Vector fd_gradient(const Objective& f, const Vector& x, double rel_step = 1e-4);
Matrix fd_hessian(const Objective& f, const Vector& x, double rel_step = 1e-3);

}  // namespace phibayes
