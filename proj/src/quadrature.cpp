#include "phibayes/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace phibayes {

void validate(const QuadratureConfig& cfg) {
  if (cfg.order < 16) throw ConfigError("quadrature order must be >= 16");
  if (cfg.order > 2048) throw ConfigError("quadrature order too large");
  if (cfg.panels < 1 || cfg.panels > 4096) throw ConfigError("bad panel count");
  if (!(cfg.abs_tol > 0.0 && cfg.abs_tol <= 1e-4))
    throw ConfigError("quadrature abs_tol must be in (0, 1e-4]");
  if (!(cfg.rel_tol > 0.0 && cfg.rel_tol <= 1e-4))
    throw ConfigError("quadrature rel_tol must be in (0, 1e-4]");
}

namespace {

// Golub-Welsch nodes are eigenvalues of the Jacobi matrix. Weights come from
// the orthonormal-polynomial identity w_i = 1 / sum_k ptilde_k(x_i)^2 rather
// than from eigenvector components: the dense solver only delivers absolute
// ~1e-16 accuracy per component, which wrecks the relative accuracy of the
// exponentially small weights at extreme nodes of high-order rules.
GaussRule golub_welsch(const Vector& offdiag, double mu0) {
  const auto n = offdiag.size() + 1;
  Matrix j = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    j(i, i + 1) = offdiag[i];
    j(i + 1, i) = offdiag[i];
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(j, Eigen::EigenvaluesOnly);
  GaussRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights = Vector(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = rule.nodes[i];
    double prev = 0.0;
    double cur = 1.0 / std::sqrt(mu0);
    double sum_sq = cur * cur;
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
      const double next =
          (x * cur - (k > 0 ? offdiag[k - 1] * prev : 0.0)) / offdiag[k];
      prev = cur;
      cur = next;
      sum_sq += cur * cur;
    }
    // a sum overflowing double means the true weight is below the subnormal
    // range; zero is then the correctly rounded value
    rule.weights[i] = std::isfinite(sum_sq) ? 1.0 / sum_sq : 0.0;
  }
  return rule;
}

const GaussRule& cached(std::map<int, GaussRule>& cache, std::mutex& mu, int order,
                        GaussRule (*build)(int)) {
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, build(order)).first;
  return it->second;
}

GaussRule build_hermite(int order) {
  Vector b(order - 1);
  for (int k = 1; k < order; ++k) b[k - 1] = std::sqrt(k / 2.0);
  return golub_welsch(b, std::sqrt(M_PI));
}

GaussRule build_legendre(int order) {
  Vector b(order - 1);
  for (int k = 1; k < order; ++k) b[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  return golub_welsch(b, 2.0);
}

QuadPlan hermite_plan(const Model& m, const Vector& theta, int order) {
  double mu, sigma;
  location_scale(m, theta, mu, sigma);
  const GaussRule& rule = gauss_hermite(order);
  QuadPlan plan;
  plan.x = (mu + std::sqrt(2.0) * sigma * rule.nodes.array()).matrix();
  plan.w = rule.weights / std::sqrt(M_PI);
  return plan;
}

// Tail cutoffs computed from the tail mass itself; going through
// quantile(1 - eps) would collapse for eps below machine precision.
double lower_tail_point(const Model& m, const Vector& theta, double tail) {
  if (m.family == Family::Exponential) return -std::log1p(-tail) / theta[0];
  return quantile(m, theta, tail);
}

double upper_tail_point(const Model& m, const Vector& theta, double tail) {
  if (m.family == Family::Exponential) return -std::log(tail) / theta[0];
  return quantile(m, theta, 1.0 - tail);
}

// Integrates over [q(eps), q(1-eps)] after the substitution x = e^t, panel by
// panel, with the density folded into the weights.
QuadPlan log_mapped_plan(const Model& m, const Vector& theta, int order, int panels,
                         double tail_eps) {
  const double x_lo = lower_tail_point(m, theta, tail_eps);
  const double x_hi = upper_tail_point(m, theta, tail_eps);
  const double t_lo = std::log(std::max(x_lo, 1e-300));
  const double t_hi = std::log(x_hi);
  const GaussRule& rule = gauss_legendre(order);
  const double width = (t_hi - t_lo) / panels;

  QuadPlan plan;
  plan.x = Vector(static_cast<Eigen::Index>(order) * panels);
  plan.w = Vector(plan.x.size());
  Eigen::Index k = 0;
  for (int p = 0; p < panels; ++p) {
    const double a = t_lo + p * width;
    const double c = a + 0.5 * width;
    for (Eigen::Index i = 0; i < rule.nodes.size(); ++i, ++k) {
      const double t = c + 0.5 * width * rule.nodes[i];
      const double x = std::exp(t);
      plan.x[k] = x;
      plan.w[k] = 0.5 * width * rule.weights[i] * std::exp(log_density(m, theta, x)) * x;
    }
  }
  return plan;
}

}  // namespace

const GaussRule& gauss_hermite(int order) {
  static std::map<int, GaussRule> cache;
  static std::mutex mu;
  return cached(cache, mu, order, build_hermite);
}

const GaussRule& gauss_legendre(int order) {
  static std::map<int, GaussRule> cache;
  static std::mutex mu;
  return cached(cache, mu, order, build_legendre);
}

ExpectationPlans make_expectation_plans(const Model& m, const Vector& theta,
                                        const QuadratureConfig& cfg) {
  validate(cfg);
  QuadScheme scheme = cfg.scheme;
  if (scheme == QuadScheme::Auto || scheme == QuadScheme::Adaptive)
    scheme = m.full_line_support() ? QuadScheme::GaussHermite
                                   : QuadScheme::GaussLegendreMapped;
  if (scheme == QuadScheme::GaussHermite && !m.full_line_support())
    throw ConfigError("gauss_hermite requires a full-line observation support");
  if (scheme == QuadScheme::GaussLegendreMapped && m.full_line_support())
    throw ConfigError("gauss_legendre_mapped requires a half-line observation support");
  // The mapped scheme gets one extra level: an integrand decaying much more
  // slowly than the density needs a deep truncation level plus a successor
  // to confirm it.
  int n_levels = scheme == QuadScheme::GaussHermite ? 3 : 4;
  if (cfg.scheme == QuadScheme::Adaptive) n_levels += 2;

  ExpectationPlans plans;
  plans.levels.reserve(static_cast<std::size_t>(n_levels));
  for (int level = 0; level < n_levels; ++level) {
    if (scheme == QuadScheme::GaussHermite) {
      plans.levels.push_back(hermite_plan(m, theta, cfg.order << level));
    } else {
      const double tail_eps = std::pow(10.0, -12.0 * (1 << level));
      plans.levels.push_back(
          log_mapped_plan(m, theta, cfg.order, cfg.panels << level, tail_eps));
    }
  }
  return plans;
}

double stabilized_expectation(const ExpectationPlans& plans,
                              const std::function<double(double)>& f,
                              const QuadratureConfig& cfg) {
  double prev = 0.0;
  for (std::size_t level = 0; level < plans.levels.size(); ++level) {
    const QuadPlan& plan = plans.levels[level];
    double sum = 0.0;
    for (Eigen::Index i = 0; i < plan.x.size(); ++i)
      if (plan.w[i] != 0.0) sum += plan.w[i] * f(plan.x[i]);
    if (!std::isfinite(sum))
      throw DivergenceInfiniteError("integral is non-finite");
    if (level > 0) {
      const double tol =
          std::max(cfg.abs_tol, cfg.rel_tol * std::max(std::abs(sum), std::abs(prev)));
      if (std::abs(sum - prev) <= tol) return sum;
    }
    prev = sum;
  }
  throw DivergenceInfiniteError("integral failed to stabilize under refinement");
}

double expect_under(const Model& m, const Vector& theta,
                    const std::function<double(double)>& f,
                    const QuadratureConfig& cfg) {
  return stabilized_expectation(make_expectation_plans(m, theta, cfg), f, cfg);
}

}  // namespace phibayes
