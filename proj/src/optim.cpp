#include "phibayes/optim.hpp"

#include "phibayes/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace phibayes {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vector clamp_to_box(Vector x, const Vector& lo, const Vector& hi) {
  for (Eigen::Index j = 0; j < x.size(); ++j)
    x[j] = std::min(hi[j], std::max(lo[j], x[j]));
  return x;
}

double safe_eval(const Objective& f, const Vector& x) {
  const double v = f(x);
  return std::isnan(v) ? kNegInf : v;
}

}  // namespace

OptimResult nelder_mead_max(const Objective& f, const Vector& x0, const Vector& lo,
                            const Vector& hi, const OptimizerConfig& cfg) {
  const auto d = x0.size();
  OptimResult best;
  best.x = clamp_to_box(x0, lo, hi);
  best.value = safe_eval(f, best.x);
  long total_iters = 0;

  Vector start = best.x;
  double step_scale = 1.0;
  for (int round = 0; round <= cfg.restarts; ++round) {
    // Initial simplex: start plus a displacement along each axis, sized from
    // the box and shrunk on every restart.
    std::vector<Vector> xs(static_cast<std::size_t>(d) + 1);
    std::vector<double> fs(xs.size());
    xs[0] = start;
    fs[0] = safe_eval(f, xs[0]);
    for (Eigen::Index j = 0; j < d; ++j) {
      Vector v = start;
      double step = 0.05 * (hi[j] - lo[j]) * step_scale;
      if (v[j] + step > hi[j]) step = -step;
      v[j] += step;
      xs[static_cast<std::size_t>(j) + 1] = clamp_to_box(v, lo, hi);
      fs[static_cast<std::size_t>(j) + 1] = safe_eval(f, xs[static_cast<std::size_t>(j) + 1]);
    }
    if (std::all_of(fs.begin(), fs.end(), [](double v) { return v == kNegInf; }))
      throw NoFiniteStartError("all simplex vertices have -inf objective");

    std::vector<std::size_t> idx(xs.size());
    bool converged = false;
    for (int it = 0; it < cfg.max_iters; ++it, ++total_iters) {
      std::iota(idx.begin(), idx.end(), 0u);
      std::sort(idx.begin(), idx.end(),
                [&](std::size_t a, std::size_t b) { return fs[a] > fs[b]; });
      const std::size_t ib = idx.front(), iw = idx.back();

      double diam = 0.0;
      for (std::size_t k = 1; k < idx.size(); ++k)
        diam = std::max(diam, (xs[idx[k]] - xs[ib]).cwiseAbs().maxCoeff());
      const double fspread = std::isfinite(fs[iw]) ? fs[ib] - fs[iw]
                                                   : std::numeric_limits<double>::infinity();
      if (diam < cfg.xtol && fspread < cfg.ftol * (std::abs(fs[ib]) + 1e-12)) {
        converged = true;
        break;
      }

      Vector centroid = Vector::Zero(d);
      for (std::size_t k = 0; k + 1 < idx.size(); ++k) centroid += xs[idx[k]];
      centroid /= static_cast<double>(d);

      const Vector xr = clamp_to_box(centroid + (centroid - xs[iw]), lo, hi);
      const double fr = safe_eval(f, xr);
      if (fr > fs[ib]) {
        const Vector xe = clamp_to_box(centroid + 2.0 * (centroid - xs[iw]), lo, hi);
        const double fe = safe_eval(f, xe);
        if (fe > fr) {
          xs[iw] = xe;
          fs[iw] = fe;
        } else {
          xs[iw] = xr;
          fs[iw] = fr;
        }
        continue;
      }
      const double f_second_worst = fs[idx[idx.size() - 2]];
      if (fr > f_second_worst) {
        xs[iw] = xr;
        fs[iw] = fr;
        continue;
      }
      const Vector xc = clamp_to_box(centroid + 0.5 * (xs[iw] - centroid), lo, hi);
      const double fc = safe_eval(f, xc);
      if (fc > fs[iw]) {
        xs[iw] = xc;
        fs[iw] = fc;
        continue;
      }
      for (std::size_t k = 1; k < idx.size(); ++k) {
        xs[idx[k]] = xs[ib] + 0.5 * (xs[idx[k]] - xs[ib]);
        fs[idx[k]] = safe_eval(f, xs[idx[k]]);
      }
    }

    std::size_t ib = 0;
    for (std::size_t k = 1; k < fs.size(); ++k)
      if (fs[k] > fs[ib]) ib = k;
    if (fs[ib] > best.value || (fs[ib] == best.value && round == 0)) {
      best.x = xs[ib];
      best.value = fs[ib];
    }
    best.converged = converged;
    start = best.x;
    step_scale *= 0.1;
  }
  best.iterations = total_iters;
  return best;
}

OptimResult golden_section_max(const std::function<double(double)>& f, double a,
                               double b, double xtol, int max_iters) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  if (std::isnan(f1)) f1 = kNegInf;
  if (std::isnan(f2)) f2 = kNegInf;
  long iters = 0;
  while (b - a > xtol && iters < max_iters) {
    ++iters;
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
      if (std::isnan(f1)) f1 = kNegInf;
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
      if (std::isnan(f2)) f2 = kNegInf;
    }
  }
  OptimResult r;
  const double xm = 0.5 * (a + b);
  r.x = Vector::Constant(1, xm);
  r.value = f(r.x[0]);
  r.iterations = iters;
  r.converged = (b - a) <= xtol;
  return r;
}

namespace {

// (4 D(h/2) - D(h)) / 3: kills the leading O(h^2) error of the central rule.
double richardson(double coarse, double fine) { return (4.0 * fine - coarse) / 3.0; }

}  // namespace

Vector fd_gradient(const Objective& f, const Vector& x, double rel_step) {
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = rel_step * (1.0 + std::abs(x[j]));
    auto central = [&](double step) {
      xp[j] = x[j] + step;
      const double fp = f(xp);
      xp[j] = x[j] - step;
      const double fm = f(xp);
      xp[j] = x[j];
      return (fp - fm) / (2.0 * step);
    };
    g[j] = richardson(central(h), central(0.5 * h));
  }
  return g;
}

Matrix fd_hessian(const Objective& f, const Vector& x, double rel_step) {
  const auto d = x.size();
  Matrix hess(d, d);
  Vector xp = x;
  const double f0 = f(x);
  auto step_of = [&](Eigen::Index j) { return rel_step * (1.0 + std::abs(x[j])); };

  for (Eigen::Index j = 0; j < d; ++j) {
    auto second = [&](double h) {
      xp[j] = x[j] + h;
      const double fp = f(xp);
      xp[j] = x[j] - h;
      const double fm = f(xp);
      xp[j] = x[j];
      return (fp - 2.0 * f0 + fm) / (h * h);
    };
    const double h = step_of(j);
    hess(j, j) = richardson(second(h), second(0.5 * h));
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = j + 1; k < d; ++k) {
      auto cross = [&](double hj, double hk) {
        xp[j] = x[j] + hj;
        xp[k] = x[k] + hk;
        const double fpp = f(xp);
        xp[k] = x[k] - hk;
        const double fpm = f(xp);
        xp[j] = x[j] - hj;
        const double fmm = f(xp);
        xp[k] = x[k] + hk;
        const double fmp = f(xp);
        xp[j] = x[j];
        xp[k] = x[k];
        return (fpp - fpm - fmp + fmm) / (4.0 * hj * hk);
      };
      const double hj = step_of(j), hk = step_of(k);
      hess(j, k) = hess(k, j) =
          richardson(cross(hj, hk), cross(0.5 * hj, 0.5 * hk));
    }
  }
  return 0.5 * (hess + hess.transpose());
}

}  // namespace phibayes
