#pragma once

#include "phibayes/types.hpp"

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

namespace phibayes {

// Interpolated order statistic (the "type 7" rule): with sorted values v_0..v_{N-1}
// the q-quantile is v_j + frac * (v_{j+1} - v_j) where j = floor((N-1) q).
double quantile_type7(const std::vector<double>& sorted, double q);
double quantile_type7(const Vector& sorted, double q);

double median(std::vector<double> values);
// Robust sigma estimate: 1.4826 * median(|x - median(x)|).
double mad_sigma(const std::vector<double>& values);

double normal_cdf(double z);

// Two-sided Kolmogorov-Smirnov distance of sorted values against a CDF.
double ks_statistic(const std::vector<double>& sorted,
                    const std::function<double(double)>& cdf);
// Asymptotic KS p-value with the Stephens small-sample correction. n_eff may
// be fractional: for correlated draws pass the effective sample size.
double ks_pvalue(double d_stat, double n_eff);

std::vector<double> linspace(double lo, double hi, int n);
// n points geometrically spaced in [lo, hi]; requires lo > 0.
std::vector<double> log_grid(double lo, double hi, int n);

// FNV-1a 64-bit hash, used for stable config fingerprints.
std::uint64_t fnv1a64(std::string_view text);

// Sample mean / covariance of the rows of a draws matrix.
Vector row_mean(const Matrix& draws);
Matrix row_covariance(const Matrix& draws);

}  // namespace phibayes
