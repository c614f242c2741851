#pragma once

#include "phibayes/types.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace phibayes {

using LogTarget = std::function<double(const Vector&)>;

struct SamplerConfig {
  long steps = 60000;
  long burn_in = 10000;
  long thin = 1;
  Vector proposal_scale;          // per-coordinate base scale, all > 0
  bool adapt = true;              // Robbins-Monro scale adaptation during burn-in
  double target_acceptance = 0.3;
};

void validate(const SamplerConfig& cfg, int dim);

struct ChainDraws {
  Matrix draws;                  // retained draws, one row per kept step
  Vector log_post;               // log target at each retained draw
  std::vector<std::uint8_t> accepted;  // move accepted at the retained step
  Vector scale_trace;            // proposal scale multiplier, one per step
  long burn_in = 0;
  long thin = 1;
  double acceptance_rate = 0.0;  // post burn-in
  std::uint64_t seed = 0;
  bool stuck_warning = false;    // post burn-in acceptance below 1%
};

// Gaussian random-walk Metropolis. The proposal scale multiplier adapts
// toward the target acceptance rate during burn-in only and is frozen
// afterwards, so the retained draws come from a fixed kernel. Same seed and
// inputs give bit-identical output.
ChainDraws run_chain(const LogTarget& target, const Vector& init,
                     const SamplerConfig& cfg, std::uint64_t seed);

struct Diagnostics {
  Vector ess;                // per coordinate
  double acceptance = 0.0;
  bool degenerate = false;   // a coordinate had zero variance
};

// Effective sample size from the autocovariance sequence, truncated at the
// first non-positive Geyer pair sum. Throws TooShortError below 100 draws.
Diagnostics diagnostics(const ChainDraws& chain);

// Split R-hat per coordinate; needs at least two chains of equal length.
Vector split_rhat(const std::vector<ChainDraws>& chains);

}  // namespace phibayes
