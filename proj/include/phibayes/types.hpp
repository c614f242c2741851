#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace phibayes {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A divergence integral was detected as non-integrable; the requested
// (theta, alpha) pair lies outside the finite-divergence region.
class DivergenceInfiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Not enough retained draws for the requested statistic.
class TooShortError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Chain initialization point has non-finite log target.
class InitInvalidError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every optimizer start evaluated to -inf.
class NoFiniteStartError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid run configuration (bad keys, invalid combinations, improper prior...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical breakdown that is not a configuration problem (e.g. posterior
// underflows everywhere on the normalization grid).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace phibayes
