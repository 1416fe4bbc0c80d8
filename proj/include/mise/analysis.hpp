#pragma once

#include <span>
#include <vector>

#include <fmt/format.h>

#include "mise/entropy.hpp"
#include "mise/types.hpp"

namespace mise {

inline constexpr double kDensityRangeTolerance = 1e-9;

/// Shannon entropy (nats) of the site-occupation profile,
/// -sum_i [n_i ln n_i + (1 - n_i) ln(1 - n_i)].
template <typename Derived>
double classical_entropy(const Eigen::DenseBase<Derived>& densities) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < densities.size(); ++i) {
    const double n = static_cast<double>(densities(i));
    if (!(n >= -kDensityRangeTolerance && n <= 1.0 + kDensityRangeTolerance)) {
      throw DataError(fmt::format("density {} at site {} outside [0, 1]", n, i));
    }
    s += binary_entropy(n);
  }
  return s;
}

/// J = integral dk sin(k) n_k, as the Riemann sum (2 pi / L) sum_m sin(k_m) n_{k_m}
/// over k_m = 2 pi m / L. Filling exactly the k in (-pi, 0) gives J = -2.
double current(const RVector& momentum_occupation);

inline constexpr double kSteadySlopeLimit = 1e-4;

struct DriftCheck {
  double slope = 0.0;   // d S_cl / dt over the window
  double window = 0.0;  // time span actually fitted
  int points = 0;
  bool steady = false;  // |slope| < kSteadySlopeLimit
};

/// Least-squares slope of a time series over its last `window` time units.
/// Needs two or more points inside the window.
DriftCheck steady_drift(std::span<const double> times, const RVector& values, double window);

/// Steady-state classical entropy at one parameter point.
struct ScalingPoint {
  double theta = pi;
  double gamma = 0.0;
  int sites = 0;
  double scl = 0.0;
  double scl_err = 0.0;
};

/// S_cl ~ c / gamma at large L for one feedback phase.
struct AsymptoteFit {
  double theta = pi;
  double c = 0.0;
  double c_err = 0.0;
  double residual = 0.0;  // RMS of ln(gamma S_cl) - ln c
  int points = 0;
  int min_sites = 0;      // smallest L kept in the fit
  bool stable = false;    // dropping the next-smallest L moved c by less than c_err
};

/// Least-squares fit of ln S_cl = ln c - ln gamma, one result per theta.
///
/// Smallest system sizes are dropped one level at a time until consecutive
/// estimates of c agree within their errors. Needs at least three distinct
/// gamma values per theta.
std::vector<AsymptoteFit> fit_asymptote(std::span<const ScalingPoint> data);

struct CollapseSeries {
  int sites = 0;
  std::vector<double> x;  // gamma L
  std::vector<double> y;  // S_cl / L
  std::vector<double> y_err;
};

struct CollapseResult {
  std::vector<CollapseSeries> series;
  std::vector<double> grid;
  /// RMS over the common grid of (max_L y - min_L y) / mean_L y.
  double spread = 0.0;
};

/// Collapse S_cl(gamma, L) = L f(gamma L). Points with gamma >= gamma_cutoff are
/// excluded. Curves are compared by linear interpolation on the union of
/// their x nodes inside the overlapping range.
CollapseResult scaling_collapse(std::span<const ScalingPoint> data, double gamma_cutoff = 1.0);

}  // namespace mise
