#include "phibayes/phi_posterior.hpp"

#include <cmath>

namespace phibayes {

double log_prior(const PriorSpec& prior, const Vector& alpha) {
  constexpr double kLogSqrt2Pi = 0.9189385332046727;
  if (prior.kind == PriorKind::Normal) {
    double lp = 0.0;
    for (Eigen::Index j = 0; j < alpha.size(); ++j) {
      const double z = (alpha[j] - prior.mean[j]) / prior.sd[j];
      lp += -0.5 * z * z - kLogSqrt2Pi - std::log(prior.sd[j]);
    }
    return lp;
  }
  double lp = 0.0;
  for (Eigen::Index j = 0; j < alpha.size(); ++j) {
    if (alpha[j] < prior.lo[j] || alpha[j] > prior.hi[j])
      return -std::numeric_limits<double>::infinity();
    lp -= std::log(prior.hi[j] - prior.lo[j]);
  }
  return lp;
}

Vector prior_mean(const PriorSpec& prior) {
  if (prior.kind == PriorKind::Normal) return prior.mean;
  return 0.5 * (prior.lo + prior.hi);
}

void validate_prior(const PriorSpec& prior, const Model& model) {
  const auto d = model.param_dim();
  if (prior.kind == PriorKind::Normal) {
    if (prior.mean.size() != d || prior.sd.size() != d)
      throw ConfigError("prior dimension does not match the model");
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!std::isfinite(prior.mean[j])) throw ConfigError("prior mean must be finite");
      if (!(prior.sd[j] > 0.0) || !std::isfinite(prior.sd[j]))
        throw ConfigError("prior sd must be positive and finite");
    }
    return;
  }
  if (prior.lo.size() != d || prior.hi.size() != d)
    throw ConfigError("prior dimension does not match the model");
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!std::isfinite(prior.lo[j]) || !std::isfinite(prior.hi[j]))
      throw ConfigError("uniform prior bounds must be finite (improper priors rejected)");
    if (!(prior.lo[j] < prior.hi[j]))
      throw ConfigError("uniform prior needs lo < hi");
  }
}

PhiPosterior make_phi_posterior(const DualCriterion& crit, Dataset data,
                                const PriorSpec& prior, double temper) {
  validate_prior(prior, crit.model);
  validate_dataset(crit.model, data);
  if (!(temper > 0.0) || !std::isfinite(temper))
    throw ConfigError("temper must be positive and finite");
  PhiPosterior post;
  post.crit = crit;
  post.data = std::move(data);
  post.prior = prior;
  post.temper = temper;
  post.divergence_rejections = std::make_shared<std::atomic<long>>(0);
  return post;
}

double log_unnormalized(const PhiPosterior& post, const Vector& alpha) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (!post.crit.model.in_param_space(alpha)) return kNegInf;
  const double lp = log_prior(post.prior, alpha);
  if (!std::isfinite(lp)) return kNegInf;
  double crit_value;
  try {
    crit_value = empirical_criterion(post.crit, post.data, alpha);
  } catch (const DivergenceInfiniteError&) {
    ++(*post.divergence_rejections);
    return kNegInf;
  }
  const double v =
      post.temper * static_cast<double>(post.data.n()) * crit_value + lp;
  return std::isnan(v) ? kNegInf : v;
}

PhiPosterior sequential_update(const PhiPosterior& post, const Dataset& new_data) {
  for (const double x : new_data.x)
    if (!post.crit.model.in_support(x))
      throw ConfigError("update observation outside model support");
  PhiPosterior updated = post;
  updated.data.x.insert(updated.data.x.end(), new_data.x.begin(), new_data.x.end());
  return updated;
}

namespace {

struct GridEval {
  Vector nodes;
  Vector weights;
  Vector logs;
};

GridEval eval_on_grid(const PhiPosterior& post, const GridConfig& grid, double lo,
                      double hi) {
  const GaussRule& rule = gauss_legendre(grid.order);
  const double width = (hi - lo) / grid.panels;
  const Eigen::Index total = static_cast<Eigen::Index>(grid.panels) * grid.order;
  GridEval g{Vector(total), Vector(total), Vector(total)};
  Eigen::Index k = 0;
  for (int p = 0; p < grid.panels; ++p) {
    const double c = lo + (p + 0.5) * width;
    for (int i = 0; i < grid.order; ++i, ++k) {
      g.nodes[k] = c + 0.5 * width * rule.nodes[i];
      g.weights[k] = 0.5 * width * rule.weights[i];
      g.logs[k] = log_unnormalized(post, Vector::Constant(1, g.nodes[k]));
    }
  }
  return g;
}

}  // namespace

NormalizedPosterior normalize_1d(const PhiPosterior& post, const GridConfig& grid) {
  const Model& m = post.crit.model;
  if (m.param_dim() != 1)
    throw std::invalid_argument("normalize_1d needs a one-dimensional parameter");
  if (grid.panels < 1 || grid.order < 2) throw ConfigError("bad normalization grid");
  double lo = m.theta_lo[0], hi = m.theta_hi[0];
  if (post.prior.kind == PriorKind::UniformBox) {
    lo = std::max(lo, post.prior.lo[0]);
    hi = std::min(hi, post.prior.hi[0]);
  }

  // Coarse pass over the full interval, then zoom onto the region holding
  // essentially all of the mass (within e^-45 of the peak) so the final grid
  // resolves posteriors much tighter than the parameter box.
  GridEval g = eval_on_grid(post, grid, lo, hi);
  double vmax = g.logs.maxCoeff();
  if (!std::isfinite(vmax))
    throw NumericalError("posterior underflows at every normalization node");
  double zoom_lo = hi, zoom_hi = lo;
  for (Eigen::Index k = 0; k < g.nodes.size(); ++k) {
    if (g.logs[k] >= vmax - 45.0) {
      zoom_lo = std::min(zoom_lo, g.nodes[k]);
      zoom_hi = std::max(zoom_hi, g.nodes[k]);
    }
  }
  const double pad = (hi - lo) / grid.panels;
  zoom_lo = std::max(lo, zoom_lo - pad);
  zoom_hi = std::min(hi, zoom_hi + pad);
  if (zoom_hi - zoom_lo < 0.9 * (hi - lo)) {
    g = eval_on_grid(post, grid, zoom_lo, zoom_hi);
    vmax = g.logs.maxCoeff();
    if (!std::isfinite(vmax))
      throw NumericalError("posterior underflows at every normalization node");
  }

  NormalizedPosterior out;
  out.nodes = std::move(g.nodes);
  out.weights = std::move(g.weights);
  out.underflow_warning = vmax < -700.0;
  out.density = (g.logs.array() - vmax).exp().matrix();
  const double z = out.weights.dot(out.density);
  if (!(z > 0.0) || !std::isfinite(z))
    throw NumericalError("posterior normalization failed");
  out.density /= z;
  out.log_normalizer = vmax + std::log(z);
  return out;
}

}  // namespace phibayes
