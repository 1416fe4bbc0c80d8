#include "mise/trajectory.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "mise/analysis.hpp"
#include "mise/fpenv.hpp"
#include "mise/gaussian.hpp"

namespace mise {

void StepProtocol::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError(fmt::format("dt must be positive, got {}", dt));
  if (!(t_max >= 0.0) || !std::isfinite(t_max)) {
    throw ConfigError(fmt::format("t_max must be non-negative, got {}", t_max));
  }
  if (!std::is_sorted(record_times.begin(), record_times.end())) {
    throw ConfigError("record times must be sorted");
  }
  for (double t : record_times) {
    if (t < 0.0 || t > t_max + 0.5 * dt) {
      throw ConfigError(fmt::format("record time {} outside [0, t_max = {}]", t, t_max));
    }
  }
  if (!(max_jump_probability > 0.0 && max_jump_probability <= 1.0)) {
    throw ConfigError("max_jump_probability must lie in (0, 1]");
  }
}

std::int64_t StepProtocol::step_count() const { return std::llround(t_max / dt); }

StepProtocol StepProtocol::uniform(double dt, double t_max, double record_interval) {
  StepProtocol p;
  p.dt = dt;
  p.t_max = t_max;
  if (!(record_interval > 0.0)) throw ConfigError("record interval must be positive");
  const auto count = static_cast<std::int64_t>(std::floor(t_max / record_interval + 1e-9));
  for (std::int64_t k = 0; k <= count; ++k) p.record_times.push_back(static_cast<double>(k) * record_interval);
  return p;
}

std::vector<std::int64_t> record_steps(const StepProtocol& protocol) {
  std::vector<std::int64_t> steps;
  for (double t : protocol.record_times) steps.push_back(std::llround(t / protocol.dt));
  return steps;
}

std::vector<int> block_cut(int length) {
  std::vector<int> sites(static_cast<std::size_t>(std::max(length, 0)));
  for (int i = 0; i < length; ++i) sites[static_cast<std::size_t>(i)] = i;
  return sites;
}

double TrajectorySetup::steady_from() const {
  return observables.steady_from >= 0.0 ? observables.steady_from : 0.5 * protocol.t_max;
}

std::vector<int> half_filled_left(int sites) { return block_cut(sites / 2); }

std::vector<int> neel_sites(int sites) {
  std::vector<int> out;
  for (int i = 0; i < sites; i += 2) out.push_back(i);
  return out;
}

Snapshot make_snapshot(double time, const CMatrix& correlation, RVector entropies, Boundary bc,
                       std::vector<std::int64_t> jumps) {
  Snapshot snap;
  snap.time = time;
  snap.density = density_profile(correlation);
  snap.entropies = std::move(entropies);
  snap.classical_entropy = classical_entropy(snap.density);
  if (bc == Boundary::periodic) {
    snap.momentum = momentum_occupation(correlation, bc);
    snap.current = current(snap.momentum);
  }
  snap.jumps = std::move(jumps);
  return snap;
}

std::vector<int> select_jumps(const std::vector<double>& probabilities, const StepProtocol& protocol,
                              const JumpDecisionStream& stream, std::int64_t step_index) {
  std::vector<int> selected;
  const auto n = static_cast<std::uint64_t>(step_index);
  for (std::size_t m = 0; m < probabilities.size(); ++m) {
    if (probabilities[m] > protocol.max_jump_probability) {
      throw ProtocolError(fmt::format(
          "jump probability {:.4f} on bond {} exceeds the protocol limit {}; reduce dt",
          probabilities[m], m, protocol.max_jump_probability));
    }
    if (stream.draw(n, static_cast<std::uint32_t>(m)) < probabilities[m]) selected.push_back(static_cast<int>(m));
  }
  if (protocol.jump_order == JumpOrder::random && selected.size() > 1) {
    std::sort(selected.begin(), selected.end(), [&](int a, int b) {
      return stream.draw_order_key(n, static_cast<std::uint32_t>(a)) <
             stream.draw_order_key(n, static_cast<std::uint32_t>(b));
    });
  }
  return selected;
}

StepOutcome step(const CMatrix& state, const std::vector<JumpSpec>& specs, const Propagator& propagator,
                 const StepProtocol& protocol, double gamma, const JumpDecisionStream& stream,
                 std::int64_t step_index) {
  StepOutcome out;
  out.state = evolve_nonunitary(state, propagator);
  out.probabilities.resize(specs.size());
  for (std::size_t m = 0; m < specs.size(); ++m) {
    out.probabilities[m] = jump_probability(out.state, specs[m], gamma, protocol.dt);
  }
  out.jumped = select_jumps(out.probabilities, protocol, stream, step_index);
  for (int m : out.jumped) out.state = apply_jump(out.state, specs[static_cast<std::size_t>(m)]);
  return out;
}

namespace {

TrajectorySetup validated(TrajectorySetup setup) {
  setup.lattice.validate();
  setup.protocol.validate();
  detail::check_sites(setup.initial_sites, setup.lattice.sites);
  for (const auto& cut : setup.observables.cuts) detail::check_sites(cut, setup.lattice.sites);
  return setup;
}

}  // namespace

GaussianTrajectoryRunner::GaussianTrajectoryRunner(TrajectorySetup setup)
    : setup_(validated(std::move(setup))),
      specs_(build_jump_specs(setup_.lattice)),
      propagator_(build_effective_matrix(setup_.lattice), setup_.protocol.dt) {}

TrajectoryRecord GaussianTrajectoryRunner::operator()(std::uint64_t seed) const {
  const FlushSubnormals flush;
  const auto& lattice = setup_.lattice;
  const auto& protocol = setup_.protocol;
  const auto& cuts = setup_.observables.cuts;
  const JumpDecisionStream stream(seed);

  TrajectoryRecord record;
  record.seed = seed;
  CMatrix state = init_product_state(setup_.initial_sites, lattice.sites);
  std::vector<std::int64_t> jumps(specs_.size(), 0);

  auto take_snapshot = [&](double time) {
    const CMatrix c = correlation_matrix(state);
    RVector s(static_cast<Eigen::Index>(cuts.size()));
    for (std::size_t k = 0; k < cuts.size(); ++k) s(static_cast<Eigen::Index>(k)) = entanglement_entropy(c, cuts[k]);
    Snapshot snap = make_snapshot(time, c, std::move(s), lattice.boundary, jumps);
    for (Eigen::Index k = 0; k < snap.entropies.size(); ++k) {
      const double margin = snap.classical_entropy - 2.0 * snap.entropies(k);
      record.min_bound_margin = std::min(record.min_bound_margin, margin);
      if (margin < -kBoundTolerance) ++record.bound_violations;
    }
    record.snapshots.push_back(std::move(snap));
  };

  const auto snapshot_steps = record_steps(protocol);
  std::size_t next = 0;
  while (next < snapshot_steps.size() && snapshot_steps[next] <= 0) {
    take_snapshot(0.0);
    ++next;
  }
  const std::int64_t total = protocol.step_count();
  for (std::int64_t n = 1; n <= total; ++n) {
    StepOutcome out = step(state, specs_, propagator_, protocol, lattice.gamma, stream, n);
    state = std::move(out.state);
    for (int m : out.jumped) ++jumps[static_cast<std::size_t>(m)];
    record.total_jumps += static_cast<std::int64_t>(out.jumped.size());
    for (double p : out.probabilities) record.expected_jumps += p;
    while (next < snapshot_steps.size() && snapshot_steps[next] == n) {
      take_snapshot(static_cast<double>(n) * protocol.dt);
      ++next;
    }
  }
  return record;
}

TrajectoryRecord run_trajectory(const TrajectorySetup& setup, std::uint64_t seed) {
  return GaussianTrajectoryRunner(setup)(seed);
}

void EnsembleAccumulator::accumulate(const std::string& name, const RMatrix& values) {
  auto [it, inserted] = sums_.try_emplace(name);
  if (inserted) {
    it->second.sum = RMatrix::Zero(values.rows(), values.cols());
    it->second.sum_sq = RMatrix::Zero(values.rows(), values.cols());
  }
  it->second.sum += values;
  it->second.sum_sq += values.cwiseAbs2();
}

void EnsembleAccumulator::accumulate_steady(const std::string& name, const RVector& values) {
  auto [it, inserted] = steady_sums_.try_emplace(name);
  if (inserted) {
    it->second.sum = RMatrix::Zero(values.size(), 1);
    it->second.sum_sq = RMatrix::Zero(values.size(), 1);
  }
  it->second.sum += values;
  it->second.sum_sq += values.cwiseAbs2();
}

void EnsembleAccumulator::add(const TrajectoryRecord& record) {
  const auto& snaps = record.snapshots;
  if (count_ == 0) {
    for (const auto& s : snaps) times_.push_back(s.time);
  } else if (snaps.size() != times_.size()) {
    throw DataError("trajectory records disagree on snapshot times");
  }
  ++count_;
  total_jumps_ += record.total_jumps;
  expected_jumps_ += record.expected_jumps;
  min_margin_ = std::min(min_margin_, record.min_bound_margin);
  violations_ += record.bound_violations;
  if (snaps.empty()) return;

  const auto T = static_cast<Eigen::Index>(snaps.size());
  auto table = [&](auto&& row_of) {
    const RVector first = row_of(snaps.front());
    RMatrix m(T, first.size());
    for (Eigen::Index t = 0; t < T; ++t) m.row(t) = row_of(snaps[static_cast<std::size_t>(t)]).transpose();
    return m;
  };
  std::map<std::string, RMatrix> tables;
  tables["density"] = table([](const Snapshot& s) { return RVector(s.density); });
  tables["entropy"] = table([](const Snapshot& s) { return RVector(s.entropies); });
  tables["scl_traj"] = table([](const Snapshot& s) { return RVector::Constant(1, s.classical_entropy); });
  tables["jumps"] = table([](const Snapshot& s) {
    RVector v(static_cast<Eigen::Index>(s.jumps.size()));
    for (std::size_t k = 0; k < s.jumps.size(); ++k) v(static_cast<Eigen::Index>(k)) = static_cast<double>(s.jumps[k]);
    return v;
  });
  if (snaps.front().momentum.size() > 0) {
    tables["momentum"] = table([](const Snapshot& s) { return RVector(s.momentum); });
    tables["current"] = table([](const Snapshot& s) { return RVector::Constant(1, s.current); });
  }

  std::vector<Eigen::Index> window;
  for (Eigen::Index t = 0; t < T; ++t) {
    if (times_[static_cast<std::size_t>(t)] >= steady_from_ - 1e-9) window.push_back(t);
  }
  if (window.empty()) window.push_back(T - 1);

  for (const auto& [name, m] : tables) {
    accumulate(name, m);
    RVector avg = RVector::Zero(m.cols());
    for (Eigen::Index t : window) avg += m.row(t).transpose();
    avg /= static_cast<double>(window.size());
    accumulate_steady(name, avg);
  }
}

EnsembleStats EnsembleAccumulator::finish() const {
  EnsembleStats stats;
  stats.trajectories = count_;
  stats.times = times_;
  stats.steady_from = steady_from_;
  stats.total_jumps = total_jumps_;
  stats.expected_jumps = expected_jumps_;
  stats.min_bound_margin = min_margin_;
  stats.bound_violations = violations_;
  if (count_ == 0) return stats;
  const double M = static_cast<double>(count_);
  auto reduce = [M](const Sums& s) {
    RMatrix mean = s.sum / M;
    RMatrix error = RMatrix::Zero(mean.rows(), mean.cols());
    if (M > 1.0) {
      const RMatrix var = ((s.sum_sq / M - mean.cwiseAbs2()) * (M / (M - 1.0))).cwiseMax(0.0);
      error = (var / M).cwiseSqrt();
    }
    return SeriesStats{std::move(mean), std::move(error)};
  };
  for (const auto& [name, s] : sums_) stats.series[name] = reduce(s);
  for (const auto& [name, s] : steady_sums_) {
    SeriesStats r = reduce(s);
    stats.steady[name] = SteadyStats{r.mean.col(0), r.error.col(0)};
  }
  if (auto it = stats.series.find("density"); it != stats.series.end()) {
    const RMatrix& density = it->second.mean;
    SeriesStats avg{RMatrix(density.rows(), 1), RMatrix::Zero(density.rows(), 1)};
    for (Eigen::Index t = 0; t < density.rows(); ++t) avg.mean(t, 0) = classical_entropy(density.row(t));
    stats.series["scl_avg"] = std::move(avg);
    const RVector& steady_density = stats.steady.at("density").mean;
    stats.steady["scl_avg"] = SteadyStats{RVector::Constant(1, classical_entropy(steady_density)), RVector::Zero(1)};
  }
  return stats;
}

EnsembleStats run_ensemble(const TrajectoryRunner& runner, int count, std::uint64_t base_seed, double steady_from,
                           int threads) {
  if (count < 1) throw ConfigError("ensemble needs at least one trajectory");
  EnsembleAccumulator accumulator(steady_from);
  const int workers = std::clamp(threads, 1, count);

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::mutex mutex;
  std::map<int, TrajectoryRecord> pending;
  int folded = 0;
  std::exception_ptr error;

  auto work = [&] {
    while (!failed.load()) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        TrajectoryRecord record = runner(base_seed + 1 + static_cast<std::uint64_t>(i));
        std::lock_guard lock(mutex);
        pending.emplace(i, std::move(record));
        while (!pending.empty() && pending.begin()->first == folded) {
          accumulator.add(pending.begin()->second);
          pending.erase(pending.begin());
          ++folded;
        }
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!error) error = std::current_exception();
        failed = true;
        return;
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
  return accumulator.finish();
}

EnsembleStats run_ensemble(const TrajectorySetup& setup, int count, std::uint64_t base_seed, int threads) {
  const GaussianTrajectoryRunner runner(setup);
  return run_ensemble([&runner](std::uint64_t seed) { return runner(seed); }, count, base_seed, setup.steady_from(),
                      threads);
}

}  // namespace mise
