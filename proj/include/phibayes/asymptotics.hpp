#pragma once

#include "phibayes/dual_criterion.hpp"
#include "phibayes/mcmc.hpp"

#include <vector>

namespace phibayes {

// Curvature matrix S = -Hess_alpha E_theta0[h(theta, alpha, X)] at alpha =
// theta0, by Richardson-extrapolated finite differences of the population
// criterion. Symmetrized; positive definiteness is the caller's check.
Matrix compute_S(const DualCriterion& crit, const Vector& theta0);

// Score-covariance matrix V = E_theta0[grad_alpha h grad_alpha h^T] at
// alpha = theta0, using the analytic gradient
//   grad_alpha h = e^{gamma l} score_alpha(x) - E_theta[e^{(gamma-1) l} score_alpha]
// under stabilized quadrature. Negative eigenvalues from roundoff are clipped.
Matrix compute_V(const DualCriterion& crit, const Vector& theta0);

// Empirical criterion gradient U_n = grad_alpha P_n h(theta, alpha)|_{theta0}.
Vector u_n(const DualCriterion& crit, const Dataset& data, const Vector& theta0);

// Random centering point delta_n = theta0 + S^{-1} U_n.
Vector delta_n(const Vector& theta0, const Matrix& s_matrix, const Vector& u);

// Symmetric inverse square root; throws SingularMatrixError when an
// eigenvalue falls below the floor.
Matrix matrix_inverse_sqrt(const Matrix& m, double floor = 1e-12);

// V^{-1/2} S sqrt(n) (estimate - theta0): asymptotically standard normal.
Vector standardize(const Vector& estimate, long n, const Matrix& s_matrix,
                   const Matrix& v_matrix, const Vector& theta0);

struct NormalityCheck {
  Matrix t_cov;          // covariance of t = sqrt(n) (alpha - delta_n)
  Matrix target;         // S^{-1}
  double cov_rel_err = 0.0;  // Frobenius, relative to the target
  Vector ks_stat;        // per coordinate, against N(0, (S^{-1})_jj)
  Vector ks_p;           // ESS-corrected p-values
  Vector ess;            // pooled ESS per coordinate
};

// Compares the sampled posterior of t = sqrt(n) (alpha - delta_n) with its
// Gaussian limit N(0, S^{-1}). KS p-values use the pooled effective sample
// size in place of the raw draw count because MCMC draws are correlated.
NormalityCheck posterior_normality_check(const std::vector<ChainDraws>& chains,
                                         long n, const Matrix& s_matrix,
                                         const Vector& delta);

}  // namespace phibayes
