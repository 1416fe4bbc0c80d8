#pragma once

#include <algorithm>
#include <cmath>

namespace mise {

inline constexpr double kEntropyClamp = 1e-12;

/// -x ln x - (1-x) ln(1-x), with x clamped into [eps, 1-eps].
template <typename Real>
Real binary_entropy(Real x, Real eps = Real(kEntropyClamp)) {
  using std::log;
  x = std::clamp(x, eps, Real(1) - eps);
  return -x * log(x) - (Real(1) - x) * log(Real(1) - x);
}

}  // namespace mise
