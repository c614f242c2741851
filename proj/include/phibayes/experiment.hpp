#pragma once

#include "phibayes/asymptotics.hpp"
#include "phibayes/config.hpp"
#include "phibayes/estimators.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace phibayes {

// Simulated observations for one replication. The draws depend only on
// (master_seed, rep, contamination fraction), never on worker scheduling.
// Contaminated observations are replaced by draws from the configured
// contaminant distribution with the given per-observation probability.
Dataset simulate_replication_data(const ExperimentConfig& cfg, long rep,
                                  double contamination_fraction);

// Escort parameter for a dataset: the configured fixed value, a robust
// plug-in (median-based), or the gamma = 0 dual MLE. Clamped to the box.
Vector resolve_escort(const ExperimentConfig& cfg, const Dataset& data);

// 2.38/sqrt(d) times a crude per-coordinate scale (MAD-based for locations);
// burn-in adaptation does the fine tuning.
Vector default_proposal_scale(const ExperimentConfig& cfg, const Dataset& data,
                              const Vector& escort);

std::uint64_t data_seed(const ExperimentConfig& cfg, long rep);
std::uint64_t chain_seed(const ExperimentConfig& cfg, double gamma, long rep,
                         int chain);

// Point estimates over several chains of equal layout: point and interval
// from the pooled draws, ESS summed per chain.
EstimateReport pooled_estimate(const std::vector<ChainDraws>& chains,
                               const LossSpec& loss, double eps);

struct SingleFitOutput {
  double gamma = 0.0;
  Vector escort;
  Dataset data;
  std::vector<ChainDraws> chains;
  EstimateReport mean_report;
  EstimateReport median_report;
  ModeResult criterion_mode;   // argmax of P_n h + log prior
  ModeResult density_mode;     // argmax of n P_n h + log prior
  ModeResult mle;              // argmax of P_n h alone
  Vector rhat;                 // empty for a single chain
  Matrix s_matrix, v_matrix, sandwich;
  Vector u, delta, standardized;
  NormalityCheck normality;
  long divergence_rejections = 0;
};

SingleFitOutput run_single_fit(const ExperimentConfig& cfg, double gamma);

struct NormalityRep {
  bool failed = false;
  std::string error;
  std::uint64_t seed = 0;
  Vector escort, estimate, standardized, ci_lo, ci_hi;
  std::vector<int> covered;
  double ess_min = 0.0;
  double acceptance = 0.0;
};

// One replication of the sampling-distribution study, reproducible in
// isolation from (cfg, gamma, rep) alone.
NormalityRep run_normality_replication(const ExperimentConfig& cfg, double gamma,
                                       long rep);

struct SweepRep {
  bool failed = false;
  std::string error;
  std::uint64_t seed = 0;
  Vector estimate, err;
};

SweepRep run_sweep_replication(const ExperimentConfig& cfg, double gamma,
                               double contamination_fraction, long rep);

struct StudyResult {
  std::string directory;
  nlohmann::json summary;
  long failures = 0;
  long total = 0;
};

// Runs the configured study and writes rows.csv, summary.json and (for the
// fitting studies) per-chain CSVs under
//   <output_dir>/<study>/<timestamp>_<confighash>/ .
// Output bytes depend only on the configuration, not on wall time or the
// worker count; the timestamp appears in the directory name only.
StudyResult run_study(const ExperimentConfig& cfg);

}  // namespace phibayes
