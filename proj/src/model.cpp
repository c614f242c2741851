#include "phibayes/model.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace phibayes {

Model make_normal_location(double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("NormalLocation needs sigma > 0");
  Model m;
  m.family = Family::NormalLocation;
  m.fixed_sigma = sigma;
  m.theta_lo = Vector::Constant(1, -10.0);
  m.theta_hi = Vector::Constant(1, 10.0);
  return m;
}

Model make_normal_location_scale() {
  Model m;
  m.family = Family::NormalLocationScale;
  m.theta_lo = Vector(2);
  m.theta_hi = Vector(2);
  m.theta_lo << -10.0, 0.05;
  m.theta_hi << 10.0, 20.0;
  return m;
}

Model make_exponential() {
  Model m;
  m.family = Family::Exponential;
  m.theta_lo = Vector::Constant(1, 0.01);
  m.theta_hi = Vector::Constant(1, 100.0);
  return m;
}

double cdf(const Model& m, const Vector& theta, double x) {
  switch (m.family) {
    case Family::NormalLocation:
      return 0.5 * std::erfc(-(x - theta[0]) / (m.fixed_sigma * std::sqrt(2.0)));
    case Family::NormalLocationScale:
      return 0.5 * std::erfc(-(x - theta[0]) / (theta[1] * std::sqrt(2.0)));
    case Family::Exponential:
      return x <= 0.0 ? 0.0 : -std::expm1(-theta[0] * x);
  }
  return 0.0;
}

double quantile(const Model& m, const Vector& theta, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile level must be in (0,1)");
  if (m.family == Family::Exponential) return -std::log1p(-p) / theta[0];
  // Normal families: bisection on the CDF, accurate enough for tail cutoffs.
  double mu, sigma;
  location_scale(m, theta, mu, sigma);
  double lo = mu - 40.0 * sigma, hi = mu + 40.0 * sigma;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf(m, theta, mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Matrix fisher_information(const Model& m, const Vector& theta) {
  switch (m.family) {
    case Family::NormalLocation: {
      Matrix f(1, 1);
      f(0, 0) = 1.0 / (m.fixed_sigma * m.fixed_sigma);
      return f;
    }
    case Family::NormalLocationScale: {
      Matrix f = Matrix::Zero(2, 2);
      f(0, 0) = 1.0 / (theta[1] * theta[1]);
      f(1, 1) = 2.0 / (theta[1] * theta[1]);
      return f;
    }
    case Family::Exponential: {
      Matrix f(1, 1);
      f(0, 0) = 1.0 / (theta[0] * theta[0]);
      return f;
    }
  }
  throw ConfigError("unknown family");
}

double draw_one(const Model& m, const Vector& theta, RngStream& rng) {
  switch (m.family) {
    case Family::NormalLocation:
      return theta[0] + m.fixed_sigma * rng.normal();
    case Family::NormalLocationScale:
      return theta[0] + theta[1] * rng.normal();
    case Family::Exponential:
      return rng.exponential(theta[0]);
  }
  throw ConfigError("unknown family");
}

Dataset sample(const Model& m, const Vector& theta, long n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample size must be >= 1");
  if (!m.in_param_space(theta)) throw ConfigError("theta outside parameter box");
  RngStream rng(seed);
  Dataset d;
  d.x.resize(static_cast<std::size_t>(n));
  for (auto& v : d.x) v = draw_one(m, theta, rng);
  return d;
}

void validate_dataset(const Model& m, const Dataset& data) {
  if (data.x.empty()) throw ConfigError("dataset is empty");
  for (const double v : data.x)
    if (!m.in_support(v))
      throw ConfigError("observation outside model support: " + std::to_string(v));
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset: " + path);
  Dataset d;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    // Accept an optional single header line.
    if (first) {
      first = false;
      try {
        d.x.push_back(std::stod(line));
        continue;
      } catch (const std::exception&) {
        continue;
      }
    }
    try {
      d.x.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw ConfigError("bad dataset line: " + line);
    }
  }
  if (d.x.empty()) throw ConfigError("dataset is empty: " + path);
  return d;
}

void save_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset: " + path);
  out << "x\n";
  char buf[64];
  for (const double v : data.x) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
  }
}

}  // namespace phibayes
