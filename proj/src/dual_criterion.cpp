#include "phibayes/dual_criterion.hpp"

#include "phibayes/stats.hpp"

#include <cmath>

namespace phibayes {

namespace {

bool gaussian_family(const Model& m) {
  return m.family == Family::NormalLocation || m.family == Family::NormalLocationScale;
}

double gaussian_kl(const Model& m, const Vector& theta, const Vector& alpha) {
  double m1, s1, m2, s2;
  location_scale(m, theta, m1, s1);
  location_scale(m, alpha, m2, s2);
  const double dm = m1 - m2;
  return std::log(s2 / s1) + (s1 * s1 + dm * dm) / (2.0 * s2 * s2) - 0.5;
}

// Precomputed escort log-densities at the nodes of a set of plans.
std::vector<Vector> escort_logs(const Model& m, const Vector& escort,
                                const ExpectationPlans& plans) {
  std::vector<Vector> logs;
  logs.reserve(plans.levels.size());
  for (const auto& plan : plans.levels) {
    Vector l(plan.x.size());
    for (Eigen::Index i = 0; i < plan.x.size(); ++i)
      l[i] = log_density(m, escort, plan.x[i]);
    logs.push_back(std::move(l));
  }
  return logs;
}

// Stabilized sum of w_i * f(x_i, log p_escort(x_i)) over plan levels.
template <typename F>
double stabilized_with_logs(const ExpectationPlans& plans,
                            const std::vector<Vector>& logs, F&& f,
                            const QuadratureConfig& cfg) {
  double prev = 0.0;
  for (std::size_t level = 0; level < plans.levels.size(); ++level) {
    const QuadPlan& plan = plans.levels[level];
    const Vector& lp = logs[level];
    double sum = 0.0;
    for (Eigen::Index i = 0; i < plan.x.size(); ++i)
      if (plan.w[i] != 0.0) sum += plan.w[i] * f(plan.x[i], lp[i]);
    if (!std::isfinite(sum)) throw DivergenceInfiniteError("integral is non-finite");
    if (level > 0) {
      const double tol =
          std::max(cfg.abs_tol, cfg.rel_tol * std::max(std::abs(sum), std::abs(prev)));
      if (std::abs(sum - prev) <= tol) return sum;
    }
    prev = sum;
  }
  throw DivergenceInfiniteError("integral failed to stabilize under refinement");
}

// Expectations under a fixed reference parameter, reused across many alpha.
struct ReferenceContext {
  ExpectationPlans plans;
  std::vector<Vector> log_p_escort;
};

ReferenceContext make_reference(const DualCriterion& crit, const Vector& ref) {
  ReferenceContext ctx;
  ctx.plans = make_expectation_plans(crit.model, ref, crit.quad);
  ctx.log_p_escort = escort_logs(crit.model, crit.escort, ctx.plans);
  return ctx;
}

// m(alpha) = inner(alpha) - E_theta0[bracket(log ratio)], with the
// theta0-side expectation read off a prebuilt context.
double population_criterion_ctx(const DualCriterion& crit, const ReferenceContext& ctx,
                                const Vector& alpha) {
  const double gamma = crit.divergence.gamma;
  const double inner = inner_integral(crit, alpha);
  const double data_side = stabilized_with_logs(
      ctx.plans, ctx.log_p_escort,
      [&](double x, double log_p_theta) {
        return dual_bracket_from_log(gamma,
                                     log_p_theta - log_density(crit.model, alpha, x));
      },
      crit.quad);
  return inner - data_side;
}

}  // namespace

DualCriterion make_criterion(const Model& model, const DivergenceSpec& divergence,
                             const Vector& escort, const QuadratureConfig& quad) {
  if (!model.in_param_space(escort))
    throw ConfigError("escort parameter outside the parameter box");
  validate(quad);
  DualCriterion crit;
  crit.model = model;
  crit.divergence = divergence;
  crit.escort = escort;
  crit.quad = quad;
  crit.escort_plans = make_expectation_plans(model, escort, quad);
  crit.escort_log_p = escort_logs(model, escort, crit.escort_plans);
  return crit;
}

double inner_integral(const DualCriterion& crit, const Vector& alpha) {
  const double gamma = crit.divergence.gamma;
  // gamma = 0: phi'(r) = 1 - 1/r, so E_theta[phi'(p_theta/p_alpha)] =
  // 1 - integral of p_alpha over the support = 0 for every alpha.
  if (gamma_is_zero(gamma)) return 0.0;
  if (gamma_is_one(gamma) && gaussian_family(crit.model))
    return gaussian_kl(crit.model, crit.escort, alpha);
  return stabilized_with_logs(
      crit.escort_plans, crit.escort_log_p,
      [&](double x, double log_p_theta) {
        return phi_prime_from_log(gamma,
                                  log_p_theta - log_density(crit.model, alpha, x));
      },
      crit.quad);
}

double h_value(const DualCriterion& crit, const Vector& alpha, double x) {
  if (!crit.model.in_support(x))
    throw std::domain_error("h evaluated outside the model support");
  const double log_r = log_density_ratio(crit.model, crit.escort, alpha, x);
  return inner_integral(crit, alpha) -
         dual_bracket_from_log(crit.divergence.gamma, log_r);
}

double empirical_criterion(const DualCriterion& crit, const Dataset& data,
                           const Vector& alpha) {
  if (data.x.empty()) throw std::invalid_argument("empirical criterion needs data");
  const double gamma = crit.divergence.gamma;
  const double inner = inner_integral(crit, alpha);
  double sum = 0.0;
  for (const double x : data.x)
    sum += dual_bracket_from_log(gamma,
                                 log_density_ratio(crit.model, crit.escort, alpha, x));
  return inner - sum / static_cast<double>(data.n());
}

double divergence_direct(const DualCriterion& crit, const Vector& alpha0) {
  const double gamma = crit.divergence.gamma;
  const auto plans = make_expectation_plans(crit.model, alpha0, crit.quad);
  const auto logs = escort_logs(crit.model, crit.escort, plans);
  return stabilized_with_logs(
      plans, logs,
      [&](double x, double log_p_theta) {
        return phi_from_log(gamma, log_p_theta - log_density(crit.model, alpha0, x));
      },
      crit.quad);
}

double population_criterion(const DualCriterion& crit, const Vector& alpha,
                            const Vector& theta0) {
  return population_criterion_ctx(crit, make_reference(crit, theta0), alpha);
}

DualSupResult dual_sup_check(const DualCriterion& crit, const Vector& theta0,
                             const OptimizerConfig& cfg) {
  const Model& m = crit.model;
  if (!m.in_param_space(theta0)) throw ConfigError("theta0 outside the parameter box");
  const auto ctx = make_reference(crit, theta0);
  const auto d = m.param_dim();

  auto objective = [&](const Vector& alpha) -> double {
    if (!m.in_param_space(alpha)) return -std::numeric_limits<double>::infinity();
    try {
      return population_criterion_ctx(crit, ctx, alpha);
    } catch (const DivergenceInfiniteError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  // Coarse scan of the box; ties go to the point nearest the box center.
  const Vector center = 0.5 * (m.theta_lo + m.theta_hi);
  Vector best_x;
  double best_f = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> axes;
  for (int j = 0; j < d; ++j)
    axes.push_back(linspace(m.theta_lo[j], m.theta_hi[j], cfg.grid_points));
  std::vector<std::size_t> index(static_cast<std::size_t>(d), 0);
  while (true) {
    Vector alpha(d);
    for (int j = 0; j < d; ++j) alpha[j] = axes[static_cast<std::size_t>(j)][index[static_cast<std::size_t>(j)]];
    const double v = objective(alpha);
    if (v > best_f ||
        (v == best_f && best_x.size() > 0 &&
         (alpha - center).norm() < (best_x - center).norm())) {
      best_f = v;
      best_x = alpha;
    }
    int j = 0;
    for (; j < d; ++j) {
      if (++index[static_cast<std::size_t>(j)] < axes[static_cast<std::size_t>(j)].size()) break;
      index[static_cast<std::size_t>(j)] = 0;
    }
    if (j == d) break;
  }
  if (!std::isfinite(best_f))
    throw NoFiniteStartError("population criterion is -inf on the whole scan grid");

  DualSupResult result;
  if (d == 1) {
    const double step = axes[0][1] - axes[0][0];
    const double a = std::max(m.theta_lo[0], best_x[0] - step);
    const double b = std::min(m.theta_hi[0], best_x[0] + step);
    const auto r = golden_section_max(
        [&](double v) { return objective(Vector::Constant(1, v)); }, a, b, cfg.xtol,
        cfg.max_iters);
    result.argmax = r.x;
    result.sup = r.value;
    result.iterations = r.iterations;
    result.converged = r.converged;
  } else {
    const auto r = nelder_mead_max(objective, best_x, m.theta_lo, m.theta_hi, cfg);
    result.argmax = r.x;
    result.sup = r.value;
    result.iterations = r.iterations;
    result.converged = r.converged;
  }
  result.direct = divergence_direct(crit, theta0);
  result.gap = std::abs(result.sup - result.direct);
  return result;
}

}  // namespace phibayes
