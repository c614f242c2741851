#include "phibayes/asymptotics.hpp"

#include "phibayes/stats.hpp"

#include <algorithm>
#include <cmath>

namespace phibayes {

Matrix compute_S(const DualCriterion& crit, const Vector& theta0) {
  Objective m = [&](const Vector& alpha) {
    return population_criterion(crit, alpha, theta0);
  };
  return -fd_hessian(m, theta0, 1e-3);
}

Matrix compute_V(const DualCriterion& crit, const Vector& theta0) {
  const Model& model = crit.model;
  const double gamma = crit.divergence.gamma;
  const auto d = model.param_dim();

  // Constant part of the gradient: -E_theta[e^{(gamma-1) l} score_alpha(Y)].
  Vector const_part = Vector::Zero(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const Eigen::Index jj = j;
    const_part[j] = -stabilized_expectation(
        crit.escort_plans,
        [&](double y) {
          const double l = log_density_ratio(model, crit.escort, theta0, y);
          return std::exp((gamma - 1.0) * l) * score(model, theta0, y)[jj];
        },
        crit.quad);
  }

  // Stabilized matrix expectation under theta0.
  const auto plans = make_expectation_plans(model, theta0, crit.quad);
  Matrix prev = Matrix::Zero(d, d);
  Matrix v = Matrix::Zero(d, d);
  bool settled = false;
  for (std::size_t level = 0; level < plans.levels.size() && !settled; ++level) {
    const QuadPlan& plan = plans.levels[level];
    v.setZero();
    for (Eigen::Index i = 0; i < plan.x.size(); ++i) {
      const double x = plan.x[i];
      const double l = log_density_ratio(model, crit.escort, theta0, x);
      const Vector grad = const_part + std::exp(gamma * l) * score(model, theta0, x);
      v += plan.w[i] * (grad * grad.transpose());
    }
    if (!v.allFinite()) throw DivergenceInfiniteError("V integral is non-finite");
    if (level > 0) {
      const double tol = std::max(
          crit.quad.abs_tol, crit.quad.rel_tol * std::max(v.norm(), prev.norm()));
      if ((v - prev).norm() <= tol) settled = true;
    }
    prev = v;
  }
  if (!settled) throw DivergenceInfiniteError("V integral failed to stabilize");

  // Clip tiny negative eigenvalues from roundoff.
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (v + v.transpose()));
  Vector ev = es.eigenvalues();
  for (Eigen::Index j = 0; j < ev.size(); ++j) ev[j] = std::max(ev[j], 0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Vector u_n(const DualCriterion& crit, const Dataset& data, const Vector& theta0) {
  Objective f = [&](const Vector& alpha) {
    return empirical_criterion(crit, data, alpha);
  };
  return fd_gradient(f, theta0, 1e-4);
}

Vector delta_n(const Vector& theta0, const Matrix& s_matrix, const Vector& u) {
  Eigen::FullPivLU<Matrix> lu(s_matrix);
  if (!lu.isInvertible()) throw SingularMatrixError("S is singular");
  return theta0 + lu.solve(u);
}

Matrix matrix_inverse_sqrt(const Matrix& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  Vector ev = es.eigenvalues();
  for (Eigen::Index j = 0; j < ev.size(); ++j) {
    if (ev[j] <= floor)
      throw SingularMatrixError("matrix not positive definite for inverse sqrt");
    ev[j] = 1.0 / std::sqrt(ev[j]);
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Vector standardize(const Vector& estimate, long n, const Matrix& s_matrix,
                   const Matrix& v_matrix, const Vector& theta0) {
  return matrix_inverse_sqrt(v_matrix) * s_matrix *
         (std::sqrt(static_cast<double>(n)) * (estimate - theta0));
}

NormalityCheck posterior_normality_check(const std::vector<ChainDraws>& chains,
                                         long n, const Matrix& s_matrix,
                                         const Vector& delta) {
  if (chains.empty()) throw std::invalid_argument("no chains given");
  const auto d = chains.front().draws.cols();
  Eigen::Index total = 0;
  for (const auto& c : chains) {
    if (c.draws.cols() != d) throw std::invalid_argument("chain dimension mismatch");
    total += c.draws.rows();
  }

  Matrix t(total, d);
  Eigen::Index row = 0;
  const double sqn = std::sqrt(static_cast<double>(n));
  for (const auto& c : chains) {
    for (Eigen::Index i = 0; i < c.draws.rows(); ++i, ++row)
      t.row(row) = sqn * (c.draws.row(i) - delta.transpose());
  }

  NormalityCheck check;
  check.t_cov = row_covariance(t);
  Eigen::FullPivLU<Matrix> lu(s_matrix);
  if (!lu.isInvertible()) throw SingularMatrixError("S is singular");
  check.target = lu.inverse();
  check.cov_rel_err = (check.t_cov - check.target).norm() / check.target.norm();

  check.ess = Vector::Zero(d);
  for (const auto& c : chains) check.ess += diagnostics(c).ess;

  check.ks_stat = Vector(d);
  check.ks_p = Vector(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sd = std::sqrt(check.target(j, j));
    std::vector<double> z(static_cast<std::size_t>(total));
    for (Eigen::Index i = 0; i < total; ++i) z[static_cast<std::size_t>(i)] = t(i, j) / sd;
    std::sort(z.begin(), z.end());
    check.ks_stat[j] = ks_statistic(z, [](double v) { return normal_cdf(v); });
    check.ks_p[j] = ks_pvalue(check.ks_stat[j], check.ess[j]);
  }
  return check;
}

}  // namespace phibayes
