#pragma once

#include "phibayes/rng.hpp"
#include "phibayes/types.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace phibayes {

enum class Family { NormalLocation, NormalLocationScale, Exponential };

// A parametric family with a box parameter space. Densities are with respect
// to Lebesgue measure on the support (the whole line, or [0, inf) for the
// exponential family).
struct Model {
  Family family = Family::NormalLocation;
  double fixed_sigma = 1.0;  // used by NormalLocation only
  Vector theta_lo;           // parameter box, per coordinate
  Vector theta_hi;

  int param_dim() const {
    return family == Family::NormalLocationScale ? 2 : 1;
  }
  bool full_line_support() const { return family != Family::Exponential; }
  bool in_support(double x) const {
    return std::isfinite(x) && (full_line_support() || x >= 0.0);
  }
  bool in_param_space(const Vector& theta) const {
    if (theta.size() != param_dim()) return false;
    for (int j = 0; j < theta.size(); ++j)
      if (!(theta[j] >= theta_lo[j] && theta[j] <= theta_hi[j])) return false;
    return true;
  }
};

Model make_normal_location(double sigma = 1.0);
Model make_normal_location_scale();
Model make_exponential();

struct Dataset {
  std::vector<double> x;
  long n() const { return static_cast<long>(x.size()); }
};

// Mean/sd of the observation distribution; the Gaussian quadrature plans key
// off these.
inline void location_scale(const Model& m, const Vector& theta, double& mu,
                           double& sigma) {
  switch (m.family) {
    case Family::NormalLocation:
      mu = theta[0];
      sigma = m.fixed_sigma;
      return;
    case Family::NormalLocationScale:
      mu = theta[0];
      sigma = theta[1];
      return;
    case Family::Exponential:
      mu = 1.0 / theta[0];
      sigma = 1.0 / theta[0];
      return;
  }
  mu = 0.0;
  sigma = 1.0;
}

inline double log_density(const Model& m, const Vector& theta, double x) {
  constexpr double kLogSqrt2Pi = 0.9189385332046727;
  switch (m.family) {
    case Family::NormalLocation: {
      const double z = (x - theta[0]) / m.fixed_sigma;
      return -0.5 * z * z - kLogSqrt2Pi - std::log(m.fixed_sigma);
    }
    case Family::NormalLocationScale: {
      const double z = (x - theta[0]) / theta[1];
      return -0.5 * z * z - kLogSqrt2Pi - std::log(theta[1]);
    }
    case Family::Exponential:
      if (x < 0.0) return -std::numeric_limits<double>::infinity();
      return std::log(theta[0]) - theta[0] * x;
  }
  return -std::numeric_limits<double>::infinity();
}

// log p_theta(x) - log p_alpha(x), written so shared constants cancel exactly.
inline double log_density_ratio(const Model& m, const Vector& theta,
                                const Vector& alpha, double x) {
  switch (m.family) {
    case Family::NormalLocation: {
      const double s2 = m.fixed_sigma * m.fixed_sigma;
      const double dt = x - theta[0];
      const double da = x - alpha[0];
      return (da * da - dt * dt) / (2.0 * s2);
    }
    case Family::NormalLocationScale: {
      const double zt = (x - theta[0]) / theta[1];
      const double za = (x - alpha[0]) / alpha[1];
      return 0.5 * (za * za - zt * zt) + std::log(alpha[1] / theta[1]);
    }
    case Family::Exponential:
      return std::log(theta[0] / alpha[0]) - (theta[0] - alpha[0]) * x;
  }
  return 0.0;
}

// Gradient of log p_theta(x) in theta.
inline Vector score(const Model& m, const Vector& theta, double x) {
  Vector s(m.param_dim());
  switch (m.family) {
    case Family::NormalLocation:
      s[0] = (x - theta[0]) / (m.fixed_sigma * m.fixed_sigma);
      break;
    case Family::NormalLocationScale: {
      const double z = (x - theta[0]) / theta[1];
      s[0] = z / theta[1];
      s[1] = (z * z - 1.0) / theta[1];
      break;
    }
    case Family::Exponential:
      s[0] = 1.0 / theta[0] - x;
      break;
  }
  return s;
}

double cdf(const Model& m, const Vector& theta, double x);
// Inverse CDF; implemented in closed form where available, bisection otherwise.
double quantile(const Model& m, const Vector& theta, double p);
Matrix fisher_information(const Model& m, const Vector& theta);

double draw_one(const Model& m, const Vector& theta, RngStream& rng);
Dataset sample(const Model& m, const Vector& theta, long n, std::uint64_t seed);

// Throws ConfigError if an observation lies outside the support or the set is
// empty.
void validate_dataset(const Model& m, const Dataset& data);

Dataset load_dataset_csv(const std::string& path);
void save_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace phibayes
