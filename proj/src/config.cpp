#include "phibayes/config.hpp"

#include "phibayes/divergence.hpp"
#include "phibayes/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace phibayes {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& raw) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(raw, &pos);
    if (pos != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse number from '" + raw + "'");
  }
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  KeyValueConfig kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + " has no '='");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + " has an empty key");
    if (kv.values_.count(key))
      throw ConfigError("duplicate config key: " + key);
    kv.values_[key] = value;
  }
  return kv;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

bool KeyValueConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
  accessed_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string KeyValueConfig::require_string(const std::string& key) const {
  accessed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required config key: " + key);
  return it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  accessed_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_double(key, it->second);
}

long KeyValueConfig::get_long(const std::string& key, long fallback) const {
  const double v = get_double(key, static_cast<double>(fallback));
  const long l = static_cast<long>(v);
  if (static_cast<double>(l) != v)
    throw ConfigError("config key '" + key + "' must be an integer");
  return l;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  accessed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "' must be a boolean, got '" + v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(
    const std::string& key, const std::vector<double>& fallback) const {
  accessed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_double(key, item));
  }
  if (out.empty()) throw ConfigError("config key '" + key + "' has no values");
  return out;
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (!accessed_.count(k)) out.push_back(k);
  return out;
}

std::string KeyValueConfig::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::string study_name(StudyKind kind) {
  switch (kind) {
    case StudyKind::SingleFit: return "single_fit";
    case StudyKind::DualitySanity: return "duality_sanity";
    case StudyKind::MonteCarloNormality: return "mc_normality";
    case StudyKind::RobustnessSweep: return "robustness_sweep";
    case StudyKind::SequentialUpdate: return "sequential_update";
  }
  return "unknown";
}

namespace {

StudyKind parse_study(const std::string& name) {
  if (name == "single_fit") return StudyKind::SingleFit;
  if (name == "duality_sanity") return StudyKind::DualitySanity;
  if (name == "mc_normality") return StudyKind::MonteCarloNormality;
  if (name == "robustness_sweep") return StudyKind::RobustnessSweep;
  if (name == "sequential_update") return StudyKind::SequentialUpdate;
  throw ConfigError("unknown study: " + name);
}

Model parse_model(const KeyValueConfig& kv, const std::string& prefix) {
  const std::string family = kv.get_string(prefix + ".family", "normal_location");
  Model m;
  if (family == "normal_location")
    m = make_normal_location(kv.get_double(prefix + ".fixed", 1.0));
  else if (family == "normal_location_scale")
    m = make_normal_location_scale();
  else if (family == "exponential")
    m = make_exponential();
  else
    throw ConfigError("unknown model family: " + family);

  const auto lo = kv.get_doubles(prefix + ".theta_lo", {});
  const auto hi = kv.get_doubles(prefix + ".theta_hi", {});
  if (!lo.empty() || !hi.empty()) {
    if (static_cast<int>(lo.size()) != m.param_dim() ||
        static_cast<int>(hi.size()) != m.param_dim())
      throw ConfigError(prefix + ".theta_lo/theta_hi dimension mismatch");
    for (int j = 0; j < m.param_dim(); ++j) {
      if (!(lo[static_cast<std::size_t>(j)] < hi[static_cast<std::size_t>(j)]))
        throw ConfigError(prefix + " parameter box needs lo < hi");
      m.theta_lo[j] = lo[static_cast<std::size_t>(j)];
      m.theta_hi[j] = hi[static_cast<std::size_t>(j)];
    }
  }
  return m;
}

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

std::vector<double> parse_gammas(const KeyValueConfig& kv) {
  const std::string raw = kv.get_string("divergence.gamma", "1");
  std::vector<double> out;
  std::istringstream in(raw);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    if (const auto preset = divergence_preset(item)) {
      out.push_back(preset->gamma);
      continue;
    }
    out.push_back(parse_double("divergence.gamma", item));
  }
  if (out.empty()) throw ConfigError("divergence.gamma has no values");
  return out;
}

}  // namespace

ExperimentConfig build_experiment_config(const KeyValueConfig& kv) {
  ExperimentConfig cfg;
  cfg.study = parse_study(kv.get_string("study", "single_fit"));
  cfg.model = parse_model(kv, "model");
  cfg.theta0 = to_vector(kv.get_doubles("model.theta0", {0.0}));
  cfg.gammas = parse_gammas(kv);

  const std::string prior_kind = kv.get_string("prior.kind", "normal");
  const auto d = cfg.model.param_dim();
  if (prior_kind == "normal") {
    cfg.prior.kind = PriorKind::Normal;
    auto mean = kv.get_doubles("prior.mean", {0.0});
    auto sd = kv.get_doubles("prior.sd", {10.0});
    if (mean.size() == 1) mean.resize(static_cast<std::size_t>(d), mean[0]);
    if (sd.size() == 1) sd.resize(static_cast<std::size_t>(d), sd[0]);
    cfg.prior.mean = to_vector(mean);
    cfg.prior.sd = to_vector(sd);
  } else if (prior_kind == "uniform_box") {
    cfg.prior.kind = PriorKind::UniformBox;
    cfg.prior.lo = to_vector(kv.get_doubles("prior.lo", {-10.0}));
    cfg.prior.hi = to_vector(kv.get_doubles("prior.hi", {10.0}));
  } else {
    throw ConfigError("unknown prior.kind: " + prior_kind +
                      " (only proper priors are supported)");
  }

  cfg.escort_mode = kv.get_string("escort.mode", "plugin-median");
  if (kv.has("escort.value"))
    cfg.escort_value = to_vector(kv.get_doubles("escort.value", {}));

  cfg.mcmc.steps = kv.get_long("mcmc.steps", 60000);
  cfg.mcmc.burn_in = kv.get_long("mcmc.burn_in", 10000);
  cfg.mcmc.thin = kv.get_long("mcmc.thin", 1);
  cfg.mcmc.adapt = kv.get_bool("mcmc.adapt", true);
  cfg.mcmc.target_acceptance = kv.get_double("mcmc.target_acceptance", 0.3);
  if (kv.has("mcmc.proposal_scale"))
    cfg.mcmc.proposal_scale = to_vector(kv.get_doubles("mcmc.proposal_scale", {}));
  cfg.chains = static_cast<int>(kv.get_long("mcmc.chains", 2));

  const std::string scheme = kv.get_string("quadrature.scheme", "auto");
  if (scheme == "auto")
    cfg.quad.scheme = QuadScheme::Auto;
  else if (scheme == "gauss_hermite")
    cfg.quad.scheme = QuadScheme::GaussHermite;
  else if (scheme == "gauss_legendre_mapped")
    cfg.quad.scheme = QuadScheme::GaussLegendreMapped;
  else if (scheme == "adaptive")
    cfg.quad.scheme = QuadScheme::Adaptive;
  else
    throw ConfigError("unknown quadrature.scheme: " + scheme);
  cfg.quad.order = static_cast<int>(kv.get_long("quadrature.order", 64));
  cfg.quad.panels = static_cast<int>(kv.get_long("quadrature.panels", 40));
  cfg.quad.abs_tol = kv.get_double("quadrature.abs_tol", 1e-8);
  cfg.quad.rel_tol = kv.get_double("quadrature.rel_tol", 1e-8);

  cfg.n = kv.get_long("n", 100);
  cfg.replications = static_cast<int>(kv.get_long("replications", 50));

  cfg.contamination.fraction = kv.get_double("contamination.fraction", 0.0);
  cfg.contamination.configured = kv.has("contamination.family");
  if (cfg.contamination.configured) {
    cfg.contamination.contaminant = parse_model(kv, "contamination");
    cfg.contamination.contaminant_theta =
        to_vector(kv.get_doubles("contamination.theta", {0.0}));
  } else {
    cfg.contamination.contaminant = make_normal_location(1.0);
    cfg.contamination.contaminant_theta =
        to_vector(kv.get_doubles("contamination.theta", {10.0}));
  }
  cfg.contamination_fractions =
      kv.get_doubles("contamination.fractions", {cfg.contamination.fraction});

  cfg.duality_thetas = kv.get_doubles("duality.thetas", {});

  cfg.master_seed = static_cast<std::uint64_t>(kv.get_long("master_seed", 1));
  cfg.output_dir = kv.get_string("output_dir", "out");
  cfg.data_path = kv.get_string("data.path", "");
  cfg.temper = kv.get_double("temper", 1.0);
  cfg.eps = kv.get_double("eps", 0.05);
  cfg.jobs = static_cast<int>(kv.get_long("jobs", 0));
  cfg.quiet = kv.get_bool("quiet", false);

  const auto unknown = kv.unused_keys();
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }

  cfg.config_hash = fnv1a64(kv.canonical_text());
  validate_experiment(cfg);
  return cfg;
}

void validate_experiment(const ExperimentConfig& cfg) {
  const Model& m = cfg.model;
  if (cfg.theta0.size() != m.param_dim())
    throw ConfigError("model.theta0 dimension mismatch");
  if (!m.in_param_space(cfg.theta0))
    throw ConfigError("model.theta0 outside the parameter box");
  for (const double g : cfg.gammas)
    if (!std::isfinite(g) || g < -5.0 || g > 5.0)
      throw ConfigError("divergence.gamma outside the supported range [-5, 5]");

  validate_prior(cfg.prior, m);
  if (!std::isfinite(log_prior(cfg.prior, cfg.theta0)) ||
      log_prior(cfg.prior, cfg.theta0) == -std::numeric_limits<double>::infinity())
    throw ConfigError("prior density is zero at model.theta0");

  if (cfg.escort_mode != "fixed" && cfg.escort_mode != "plugin-median" &&
      cfg.escort_mode != "plugin-mle")
    throw ConfigError("escort.mode must be fixed | plugin-median | plugin-mle");
  if (cfg.escort_mode == "fixed") {
    if (cfg.escort_value.size() != m.param_dim())
      throw ConfigError("escort.value dimension mismatch");
    if (!m.in_param_space(cfg.escort_value))
      throw ConfigError("escort.value outside the parameter box");
  }

  if (cfg.mcmc.steps <= cfg.mcmc.burn_in)
    throw ConfigError("mcmc.steps must exceed mcmc.burn_in");
  if (cfg.mcmc.thin < 1) throw ConfigError("mcmc.thin must be >= 1");
  if (cfg.mcmc.proposal_scale.size() != 0 &&
      cfg.mcmc.proposal_scale.size() != m.param_dim())
    throw ConfigError("mcmc.proposal_scale dimension mismatch");
  if (cfg.chains < 1 || cfg.chains > 64) throw ConfigError("mcmc.chains must be in [1, 64]");
  validate(cfg.quad);

  if (cfg.n < 1) throw ConfigError("n must be >= 1");
  if (cfg.replications < 1) throw ConfigError("replications must be >= 1");

  if (!(cfg.contamination.fraction >= 0.0 && cfg.contamination.fraction < 0.5))
    throw ConfigError("contamination.fraction must be in [0, 0.5)");
  for (const double f : cfg.contamination_fractions)
    if (!(f >= 0.0 && f < 0.5))
      throw ConfigError("contamination.fractions must be in [0, 0.5)");
  const bool any_contamination =
      cfg.contamination.fraction > 0.0 ||
      std::any_of(cfg.contamination_fractions.begin(), cfg.contamination_fractions.end(),
                  [](double f) { return f > 0.0; });
  if (any_contamination) {
    const Model& c = cfg.contamination.contaminant;
    if (c.param_dim() != cfg.contamination.contaminant_theta.size())
      throw ConfigError("contamination.theta dimension mismatch");
    if (!c.in_param_space(cfg.contamination.contaminant_theta))
      throw ConfigError("contamination.theta outside the contaminant parameter box");
    if (!m.full_line_support() && c.full_line_support())
      throw ConfigError(
          "contaminant support is wider than the model support; observations "
          "could fall outside [0, inf)");
  }

  if (cfg.study == StudyKind::DualitySanity && !cfg.duality_thetas.empty() &&
      cfg.duality_thetas.size() % static_cast<std::size_t>(m.param_dim()) != 0)
    throw ConfigError("duality.thetas length must be a multiple of the parameter dimension");
  if (cfg.study == StudyKind::SequentialUpdate && m.param_dim() != 1)
    throw ConfigError("sequential_update study supports one-dimensional models only");

  if (!(cfg.temper > 0.0) || !std::isfinite(cfg.temper))
    throw ConfigError("temper must be positive and finite");
  if (!(cfg.eps > 0.0 && cfg.eps <= 0.5)) throw ConfigError("eps must be in (0, 0.5]");
  if (cfg.jobs < 0 || cfg.jobs > 256) throw ConfigError("jobs must be in [0, 256]");
}

}  // namespace phibayes
