#include "mise/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

namespace mise {

double current(const RVector& nk) {
  const auto L = nk.size();
  if (L == 0) return 0.0;
  double j = 0.0;
  for (Eigen::Index m = 0; m < L; ++m) {
    j += std::sin(2.0 * pi * static_cast<double>(m) / static_cast<double>(L)) * nk(m);
  }
  return j * 2.0 * pi / static_cast<double>(L);
}

DriftCheck steady_drift(std::span<const double> times, const RVector& values, double window) {
  if (static_cast<Eigen::Index>(times.size()) != values.size() || times.empty()) {
    throw DataError("steady_drift: times and values differ in length");
  }
  const double end = times.back();
  double st = 0.0;
  double sy = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < end - window) continue;
    st += times[i];
    sy += values(static_cast<Eigen::Index>(i));
    ++n;
  }
  if (n < 2) throw DataError("steady_drift: fewer than two points in the window");
  const double tm = st / n;
  const double ym = sy / n;
  double stt = 0.0;
  double sty = 0.0;
  double first = end;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < end - window) continue;
    first = std::min(first, times[i]);
    stt += (times[i] - tm) * (times[i] - tm);
    sty += (times[i] - tm) * (values(static_cast<Eigen::Index>(i)) - ym);
  }
  DriftCheck d;
  d.slope = sty / stt;
  d.window = end - first;
  d.points = n;
  d.steady = std::abs(d.slope) < kSteadySlopeLimit;
  return d;
}

namespace {

AsymptoteFit fit_points(double theta, const std::vector<ScalingPoint>& points) {
  AsymptoteFit fit;
  fit.theta = theta;
  fit.points = static_cast<int>(points.size());
  fit.min_sites = points.front().sites;
  std::vector<double> y;
  double stat = 0.0;
  for (const auto& p : points) {
    if (!(p.scl > 0.0) || !(p.gamma > 0.0)) {
      throw DataError(fmt::format("cannot fit S_cl = {} at gamma = {}", p.scl, p.gamma));
    }
    y.push_back(std::log(p.gamma * p.scl));
    stat += (p.scl_err / p.scl) * (p.scl_err / p.scl);
    fit.min_sites = std::min(fit.min_sites, p.sites);
  }
  const double n = static_cast<double>(y.size());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  fit.residual = std::sqrt(ss / n);
  const double scatter = y.size() > 1 ? ss / (n - 1.0) / n : 0.0;
  const double log_err = std::sqrt(stat / (n * n) + scatter);
  fit.c = std::exp(mean);
  fit.c_err = fit.c * log_err;
  return fit;
}

std::size_t distinct_gammas(const std::vector<ScalingPoint>& points) {
  std::vector<double> g;
  for (const auto& p : points) g.push_back(p.gamma);
  std::sort(g.begin(), g.end());
  return static_cast<std::size_t>(std::unique(g.begin(), g.end()) - g.begin());
}

}  // namespace

std::vector<AsymptoteFit> fit_asymptote(std::span<const ScalingPoint> data) {
  std::map<long long, std::vector<ScalingPoint>> by_theta;
  for (const auto& p : data) by_theta[std::llround(p.theta * 1e9)].push_back(p);
  std::vector<AsymptoteFit> fits;
  for (const auto& [key, points] : by_theta) {
    const double theta = points.front().theta;
    if (distinct_gammas(points) < 3) {
      throw DataError(fmt::format("asymptote fit at theta = {} needs at least 3 gamma values", theta));
    }
    std::vector<int> sizes;
    for (const auto& p : points) sizes.push_back(p.sites);
    std::sort(sizes.begin(), sizes.end());
    sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

    std::optional<AsymptoteFit> previous;
    AsymptoteFit best;
    for (int min_sites : sizes) {
      std::vector<ScalingPoint> kept;
      for (const auto& p : points) {
        if (p.sites >= min_sites) kept.push_back(p);
      }
      if (distinct_gammas(kept) < 3) break;
      AsymptoteFit current_fit = fit_points(theta, kept);
      if (previous) {
        const double tol = std::max(previous->c_err, current_fit.c_err);
        if (std::abs(current_fit.c - previous->c) <= tol) {
          // Keep the larger data set; the smaller one only confirms it.
          best = *previous;
          best.stable = true;
          break;
        }
      }
      best = current_fit;
      previous = current_fit;
    }
    fits.push_back(best);
  }
  return fits;
}

namespace {

double interpolate(const CollapseSeries& s, double x) {
  const auto it = std::lower_bound(s.x.begin(), s.x.end(), x);
  const auto k = static_cast<std::size_t>(it - s.x.begin());
  if (k < s.x.size() && std::abs(s.x[k] - x) <= 1e-12 * std::max(1.0, std::abs(x))) return s.y[k];
  if (k == 0) return s.y.front();
  if (k >= s.x.size()) return s.y.back();
  const double w = (x - s.x[k - 1]) / (s.x[k] - s.x[k - 1]);
  return (1.0 - w) * s.y[k - 1] + w * s.y[k];
}

}  // namespace

CollapseResult scaling_collapse(std::span<const ScalingPoint> data, double gamma_cutoff) {
  std::map<int, std::vector<ScalingPoint>> by_size;
  for (const auto& p : data) {
    if (p.gamma >= gamma_cutoff) continue;
    by_size[p.sites].push_back(p);
  }
  CollapseResult result;
  for (auto& [sites, points] : by_size) {
    std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) { return a.gamma < b.gamma; });
    CollapseSeries s;
    s.sites = sites;
    for (const auto& p : points) {
      const double L = static_cast<double>(sites);
      s.x.push_back(p.gamma * L);
      s.y.push_back(p.scl / L);
      s.y_err.push_back(p.scl_err / L);
    }
    result.series.push_back(std::move(s));
  }
  if (result.series.size() < 2) {
    throw DataError("scaling collapse needs at least two system sizes below the gamma cutoff");
  }
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (const auto& s : result.series) {
    lo = std::max(lo, s.x.front());
    hi = std::min(hi, s.x.back());
  }
  const double slack = 1e-12 * std::max(1.0, std::abs(hi));
  if (lo > hi + slack) throw DataError("scaling collapse undefined: no overlapping gamma L support");
  for (const auto& s : result.series) {
    for (double x : s.x) {
      if (x >= lo - slack && x <= hi + slack) result.grid.push_back(x);
    }
  }
  std::sort(result.grid.begin(), result.grid.end());
  result.grid.erase(std::unique(result.grid.begin(), result.grid.end(),
                                [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }),
                    result.grid.end());
  double sum = 0.0;
  for (double x : result.grid) {
    double ymin = std::numeric_limits<double>::infinity();
    double ymax = -ymin;
    double ymean = 0.0;
    for (const auto& s : result.series) {
      const double y = interpolate(s, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
      ymean += y;
    }
    ymean /= static_cast<double>(result.series.size());
    const double rel = ymean != 0.0 ? (ymax - ymin) / std::abs(ymean) : ymax - ymin;
    sum += rel * rel;
  }
  result.spread = std::sqrt(sum / static_cast<double>(result.grid.size()));
  return result;
}

}  // namespace mise
