#include "phibayes/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace phibayes {

double quantile_type7(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile level outside [0,1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto j = static_cast<std::size_t>(h);
  if (j + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(j);
  return sorted[j] + frac * (sorted[j + 1] - sorted[j]);
}

double quantile_type7(const Vector& sorted, double q) {
  std::vector<double> v(sorted.data(), sorted.data() + sorted.size());
  return quantile_type7(v, q);
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty sample");
  std::sort(values.begin(), values.end());
  return quantile_type7(values, 0.5);
}

double mad_sigma(const std::vector<double>& values) {
  const double m = median(values);
  std::vector<double> dev(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) dev[i] = std::abs(values[i] - m);
  return 1.4826 * median(std::move(dev));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double ks_statistic(const std::vector<double>& sorted,
                    const std::function<double(double)>& cdf) {
  if (sorted.empty()) throw std::invalid_argument("KS statistic of empty sample");
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(f - lo, hi - f));
  }
  return d;
}

double ks_pvalue(double d_stat, double n_eff) {
  if (n_eff <= 0.0) throw std::invalid_argument("KS p-value needs n_eff > 0");
  const double sn = std::sqrt(n_eff);
  const double lambda = (sn + 0.12 + 0.11 / sn) * d_stat;
  if (lambda < 1e-8) return 1.0;
  // Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::min(1.0, std::max(0.0, 2.0 * sum));
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 2) throw std::invalid_argument("linspace needs n >= 2");
  std::vector<double> out(static_cast<std::size_t>(n));
  const double step = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + step * i;
  out.back() = hi;
  return out;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  if (lo <= 0.0 || hi <= lo) throw std::invalid_argument("log_grid needs 0 < lo < hi");
  auto t = linspace(std::log(lo), std::log(hi), n);
  for (auto& v : t) v = std::exp(v);
  return t;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

Vector row_mean(const Matrix& draws) { return draws.colwise().mean(); }

Matrix row_covariance(const Matrix& draws) {
  const auto n = draws.rows();
  if (n < 2) throw std::invalid_argument("covariance needs at least two rows");
  const Matrix centered = draws.rowwise() - draws.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(n - 1);
}

}  // namespace phibayes
