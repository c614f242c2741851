// Command-line front end: fit a single dataset, run a configured study, or
// check the dual representation numerically. Exit codes: 0 success, 2 config
// error, 3 numerical failure, 4 study finished with failed replications.

#include "phibayes/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <string>

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonFlags {
  std::string config_path;
  std::string output;
  long seed = -1;
  int jobs = -1;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  bool quiet = false;
  bool gnuplot = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required) {
  auto* opt = cmd->add_option("--config", flags.config_path, "key = value config file");
  if (config_required) opt->required();
  cmd->add_option("--seed", flags.seed, "override master_seed");
  cmd->add_option("--jobs", flags.jobs, "worker threads (overrides PHIBAYES_JOBS)");
  cmd->add_option("--output", flags.output, "override output_dir");
  cmd->add_option("--gamma", flags.gamma, "override divergence.gamma");
  cmd->add_flag("--quiet", flags.quiet, "suppress progress output");
  cmd->add_flag("--gnuplot", flags.gnuplot, "emit a gnuplot script next to rows.csv");
}

phibayes::ExperimentConfig load_config(const CommonFlags& flags) {
  auto kv = phibayes::KeyValueConfig::parse_file(flags.config_path);
  if (flags.seed >= 0) kv.set("master_seed", std::to_string(flags.seed));
  if (!flags.output.empty()) kv.set("output_dir", flags.output);
  if (flags.jobs >= 0) kv.set("jobs", std::to_string(flags.jobs));
  if (!std::isnan(flags.gamma)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", flags.gamma);
    kv.set("divergence.gamma", buf);
  }
  auto cfg = phibayes::build_experiment_config(kv);
  cfg.quiet = cfg.quiet || flags.quiet;
  cfg.gnuplot = cfg.gnuplot || flags.gnuplot;
  return cfg;
}

int run_with_study(const CommonFlags& flags,
                   std::optional<phibayes::StudyKind> forced) {
  auto cfg = load_config(flags);
  if (forced) cfg.study = *forced;
  const auto result = phibayes::run_study(cfg);
  if (!cfg.quiet) {
    std::fprintf(stderr, "output: %s\n", result.directory.c_str());
    if (result.failures > 0)
      std::fprintf(stderr, "failed items: %ld of %ld\n", result.failures, result.total);
  }
  if (result.failures >= result.total && result.total > 0) return 3;
  return result.failures > 0 ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual divergence posterior experiments"};
  app.require_subcommand(1);

  CommonFlags fit_flags, study_flags, dual_flags, validate_flags;
  auto* fit = app.add_subcommand("fit", "single dataset fit and report");
  add_common(fit, fit_flags, true);
  auto* study = app.add_subcommand("study", "run the study named in the config");
  add_common(study, study_flags, true);
  auto* dual = app.add_subcommand("duality-check", "numerical check of the dual representation");
  add_common(dual, dual_flags, true);
  auto* validate = app.add_subcommand("validate-config", "parse and validate a config file");
  add_common(validate, validate_flags, true);
  auto* version = app.add_subcommand("version", "print version and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (version->parsed()) {
      std::printf("phibayes %s\n", kVersion);
      return 0;
    }
    if (validate->parsed()) {
      const auto cfg = load_config(validate_flags);
      std::printf("ok: study=%s hash=%016llx\n", phibayes::study_name(cfg.study).c_str(),
                  static_cast<unsigned long long>(cfg.config_hash));
      return 0;
    }
    if (fit->parsed())
      return run_with_study(fit_flags, phibayes::StudyKind::SingleFit);
    if (dual->parsed())
      return run_with_study(dual_flags, phibayes::StudyKind::DualitySanity);
    return run_with_study(study_flags, std::nullopt);
  } catch (const phibayes::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
