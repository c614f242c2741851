#include "phibayes/estimators.hpp"

#include "phibayes/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace phibayes {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double column_quantile(const Matrix& draws, Eigen::Index j, double q) {
  std::vector<double> v(static_cast<std::size_t>(draws.rows()));
  for (Eigen::Index i = 0; i < draws.rows(); ++i) v[static_cast<std::size_t>(i)] = draws(i, j);
  std::sort(v.begin(), v.end());
  return quantile_type7(v, q);
}

// Batch-means standard error of a per-batch statistic.
double batch_se(const Vector& col, const std::function<double(std::vector<double>)>& stat) {
  const auto n = col.size();
  const auto nb = std::clamp<Eigen::Index>(
      static_cast<Eigen::Index>(std::sqrt(static_cast<double>(n))), 10, 50);
  const auto bsize = n / nb;
  std::vector<double> batch_vals;
  batch_vals.reserve(static_cast<std::size_t>(nb));
  for (Eigen::Index b = 0; b < nb; ++b) {
    std::vector<double> chunk(static_cast<std::size_t>(bsize));
    for (Eigen::Index i = 0; i < bsize; ++i) chunk[static_cast<std::size_t>(i)] = col[b * bsize + i];
    batch_vals.push_back(stat(std::move(chunk)));
  }
  const double mean =
      std::accumulate(batch_vals.begin(), batch_vals.end(), 0.0) / static_cast<double>(nb);
  double ss = 0.0;
  for (const double v : batch_vals) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(nb - 1) / static_cast<double>(nb));
}

}  // namespace

EstimateReport estimate(const ChainDraws& chain, const LossSpec& loss, double eps) {
  const auto diag = diagnostics(chain);  // enforces the length floor
  if (loss.kind == LossKind::Quantile && !(loss.tau > 0.0 && loss.tau < 1.0))
    throw ConfigError("quantile loss needs tau in (0, 1)");
  if (!(eps > 0.0 && eps <= 0.5)) throw ConfigError("eps must be in (0, 0.5]");

  const auto d = chain.draws.cols();
  const auto n = chain.draws.rows();
  EstimateReport rep;
  rep.eps = eps;
  rep.ess = diag.ess;
  rep.point = Vector(d);
  rep.mc_se = Vector(d);

  for (Eigen::Index j = 0; j < d; ++j) {
    const Vector col = chain.draws.col(j);
    switch (loss.kind) {
      case LossKind::SquaredError: {
        rep.point[j] = col.mean();
        const double sd = std::sqrt((col.array() - col.mean()).square().sum() /
                                    static_cast<double>(n - 1));
        rep.mc_se[j] = sd / std::sqrt(diag.ess[j]);
        break;
      }
      case LossKind::AbsoluteError:
      case LossKind::Quantile: {
        const double tau = loss.kind == LossKind::AbsoluteError ? 0.5 : loss.tau;
        rep.point[j] = column_quantile(chain.draws, j, tau);
        rep.mc_se[j] = batch_se(col, [tau](std::vector<double> v) {
          std::sort(v.begin(), v.end());
          return quantile_type7(v, tau);
        });
        break;
      }
    }
  }

  rep.ci = Matrix::Constant(d, 2, std::numeric_limits<double>::quiet_NaN());
  if (n >= 1000) {
    for (Eigen::Index j = 0; j < d; ++j) {
      rep.ci(j, 0) = column_quantile(chain.draws, j, eps / 2.0);
      rep.ci(j, 1) = column_quantile(chain.draws, j, 1.0 - eps / 2.0);
    }
  }
  return rep;
}

CredibleInterval credible_interval(const ChainDraws& chain,
                                   const std::function<double(const Vector&)>& f,
                                   double eps) {
  if (chain.draws.rows() < 1000)
    throw TooShortError("credible interval needs at least 1000 retained draws");
  if (!(eps > 0.0 && eps <= 0.5)) throw ConfigError("eps must be in (0, 0.5]");
  std::vector<double> v(static_cast<std::size_t>(chain.draws.rows()));
  for (Eigen::Index i = 0; i < chain.draws.rows(); ++i)
    v[static_cast<std::size_t>(i)] = f(chain.draws.row(i).transpose());
  std::sort(v.begin(), v.end());
  return {quantile_type7(v, eps / 2.0), quantile_type7(v, 1.0 - eps / 2.0)};
}

namespace {

ModeResult multistart_max(const Objective& f, const Model& model,
                          const std::vector<Vector>& fixed_starts,
                          const OptimizerConfig& cfg) {
  RngStream rng(mix_seed(cfg.seed, 0x6d6f6465));
  std::vector<Vector> starts = fixed_starts;
  for (int k = 0; k < 3; ++k) {
    Vector r(model.param_dim());
    for (Eigen::Index j = 0; j < r.size(); ++j)
      r[j] = model.theta_lo[j] + (model.theta_hi[j] - model.theta_lo[j]) * rng.uniform();
    starts.push_back(r);
  }

  ModeResult best;
  best.value = kNegInf;
  bool any_finite = false;
  for (const auto& s : starts) {
    Vector s_clamped = s;
    for (Eigen::Index j = 0; j < s_clamped.size(); ++j)
      s_clamped[j] = std::clamp(s_clamped[j], model.theta_lo[j], model.theta_hi[j]);
    if (f(s_clamped) == kNegInf) continue;
    any_finite = true;
    OptimResult r;
    try {
      r = nelder_mead_max(f, s_clamped, model.theta_lo, model.theta_hi, cfg);
    } catch (const NoFiniteStartError&) {
      continue;
    }
    if (r.value > best.value) {
      best.x = r.x;
      best.value = r.value;
      best.converged = r.converged;
    }
    best.iterations += r.iterations;
  }
  if (!any_finite || !std::isfinite(best.value))
    throw NoFiniteStartError("objective is -inf at every optimizer start");

  // Post-hoc stationarity check. The tolerance scales with the local
  // curvature: near a sharp peak the representable gradient floor is
  // |f''| * (achievable position error), not an absolute constant.
  const Vector g = fd_gradient(f, best.x, 1e-4);
  best.grad_norm = g.norm();
  double curv_scale = 1.0;
  const Matrix hess = fd_hessian(f, best.x, 1e-3);
  for (Eigen::Index j = 0; j < hess.rows(); ++j)
    curv_scale = std::max(curv_scale, std::abs(hess(j, j)) * 1e-6 * (1.0 + std::abs(best.x[j])));
  best.converged = best.converged && best.grad_norm <= std::max(1e-6, curv_scale);
  return best;
}

}  // namespace

ModeResult posterior_mode(const PhiPosterior& post, const OptimizerConfig& cfg) {
  const Model& model = post.crit.model;
  Objective f = [&](const Vector& a) -> double {
    if (!model.in_param_space(a)) return kNegInf;
    const double lp = log_prior(post.prior, a);
    if (!std::isfinite(lp)) return kNegInf;
    try {
      const double v = empirical_criterion(post.crit, post.data, a) + lp;
      return std::isnan(v) ? kNegInf : v;
    } catch (const DivergenceInfiniteError&) {
      return kNegInf;
    }
  };
  return multistart_max(f, model, {post.crit.escort, prior_mean(post.prior)}, cfg);
}

ModeResult posterior_mode_of_phi_posterior(const PhiPosterior& post,
                                           const OptimizerConfig& cfg) {
  const Model& model = post.crit.model;
  Objective f = [&](const Vector& a) { return log_unnormalized(post, a); };
  return multistart_max(f, model, {post.crit.escort, prior_mean(post.prior)}, cfg);
}

ModeResult dual_mle(const DualCriterion& crit, const Dataset& data,
                    const OptimizerConfig& cfg) {
  validate_dataset(crit.model, data);
  const Model& model = crit.model;
  Objective f = [&](const Vector& a) -> double {
    if (!model.in_param_space(a)) return kNegInf;
    try {
      const double v = empirical_criterion(crit, data, a);
      return std::isnan(v) ? kNegInf : v;
    } catch (const DivergenceInfiniteError&) {
      return kNegInf;
    }
  };

  // Moment-based start alongside the escort.
  Vector moments(model.param_dim());
  switch (model.family) {
    case Family::NormalLocation:
      moments[0] = median(data.x);
      break;
    case Family::NormalLocationScale:
      moments[0] = median(data.x);
      moments[1] = std::max(model.theta_lo[1], mad_sigma(data.x));
      break;
    case Family::Exponential: {
      const double mean =
          std::accumulate(data.x.begin(), data.x.end(), 0.0) / static_cast<double>(data.n());
      moments[0] = mean > 0.0 ? 1.0 / mean : model.theta_hi[0];
      break;
    }
  }
  return multistart_max(f, model, {crit.escort, moments}, cfg);
}

}  // namespace phibayes
