#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

namespace mise {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double pi = std::numbers::pi;

// Error categories. The CLI maps them onto exit codes 2, 3 and 4.

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Quasimode columns are (numerically) linearly dependent.
class DegenerateStateError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// A jump probability left the range where the first-order jump protocol is valid.
class ProtocolError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// A jump was requested on a state with no weight in the detected mode.
class ZeroProbabilityJumpError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Malformed observable data (densities outside [0,1], too few fit points, ...).
class DataError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// A dense engine was asked for a sector beyond its size guard.
class GuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mise
