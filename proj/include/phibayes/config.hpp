#pragma once

#include "phibayes/mcmc.hpp"
#include "phibayes/model.hpp"
#include "phibayes/phi_posterior.hpp"
#include "phibayes/quadrature.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace phibayes {

// Flat "key = value" config files: one pair per line, '#' starts a comment,
// keys are dotted paths. Values keep their raw text until typed access.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const;

  // Keys present in the file but never read by the builder.
  std::vector<std::string> unused_keys() const;
  // Canonical "key=value" serialization, sorted by key.
  std::string canonical_text() const;
  void set(const std::string& key, const std::string& value);

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> accessed_;
};

enum class StudyKind {
  SingleFit,
  DualitySanity,
  MonteCarloNormality,
  RobustnessSweep,
  SequentialUpdate
};

std::string study_name(StudyKind kind);

struct ContaminationSpec {
  double fraction = 0.0;
  Model contaminant;      // defaults to NormalLocation
  Vector contaminant_theta;
  bool configured = false;
};

struct ExperimentConfig {
  StudyKind study = StudyKind::SingleFit;
  Model model;
  Vector theta0;
  std::vector<double> gammas;
  PriorSpec prior;

  std::string escort_mode = "plugin-median";  // fixed | plugin-median | plugin-mle
  Vector escort_value;

  SamplerConfig mcmc;      // proposal_scale may be empty: filled per dataset
  int chains = 2;
  QuadratureConfig quad;

  long n = 100;
  int replications = 50;
  ContaminationSpec contamination;
  std::vector<double> contamination_fractions;  // RobustnessSweep grid
  std::vector<double> duality_thetas;           // flattened d-tuples

  std::uint64_t master_seed = 1;
  std::string output_dir = "out";
  std::string data_path;
  double temper = 1.0;
  double eps = 0.05;
  int jobs = 0;  // 0: resolve from environment / hardware at run time
  bool quiet = false;
  bool gnuplot = false;

  std::uint64_t config_hash = 0;
};

// Builds and validates a run configuration; throws ConfigError with a
// pointed message on any problem, including unknown keys.
ExperimentConfig build_experiment_config(const KeyValueConfig& kv);

void validate_experiment(const ExperimentConfig& cfg);

}  // namespace phibayes
