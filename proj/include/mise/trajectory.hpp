#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mise/model.hpp"
#include "mise/propagator.hpp"
#include "mise/rng.hpp"
#include "mise/types.hpp"

namespace mise {

enum class JumpOrder { ascending, random };

/// Time discretization of the jump unraveling.
struct StepProtocol {
  double dt = 0.05;
  double t_max = 0.0;
  std::vector<double> record_times;
  JumpOrder jump_order = JumpOrder::ascending;
  /// Any single-bond jump probability above this aborts the run.
  double max_jump_probability = 0.1;

  void validate() const;
  std::int64_t step_count() const;

  /// Snapshots at 0, interval, 2 interval, ..., t_max.
  static StepProtocol uniform(double dt, double t_max, double record_interval);
};

/// Step indices (t = n dt) at which snapshots are taken.
std::vector<std::int64_t> record_steps(const StepProtocol& protocol);

/// Which quantities are recorded at each snapshot.
struct ObservableSpec {
  /// Entanglement subsystems, each a set of zero-based sites.
  std::vector<std::vector<int>> cuts;
  /// Start of the steady-state averaging window; negative means t_max / 2.
  double steady_from = -1.0;
};

/// The sites [0, length) as a cut.
std::vector<int> block_cut(int length);

struct TrajectorySetup {
  LatticeConfig lattice;
  StepProtocol protocol;
  std::vector<int> initial_sites;
  ObservableSpec observables;

  double steady_from() const;
};

/// Left half filled, |1...10...0>.
std::vector<int> half_filled_left(int sites);
/// Every other site, |1010...>.
std::vector<int> neel_sites(int sites);

struct Snapshot {
  double time = 0.0;
  RVector density;
  RVector entropies;  // one entry per cut
  double classical_entropy = 0.0;
  RVector momentum;   // periodic chains only
  double current = 0.0;
  std::vector<std::int64_t> jumps;  // cumulative count per bond
};

struct TrajectoryRecord {
  std::uint64_t seed = 0;
  std::vector<Snapshot> snapshots;
  std::int64_t total_jumps = 0;
  /// Sum of every jump probability that was drawn against.
  double expected_jumps = 0.0;
  /// min over snapshots and cuts of S_cl - 2 S(cut).
  double min_bound_margin = std::numeric_limits<double>::infinity();
  std::int64_t bound_violations = 0;
};

/// Snapshot observables shared by the Gaussian and dense engines; entropies
/// are supplied by the engine.
Snapshot make_snapshot(double time, const CMatrix& correlation, RVector entropies, Boundary bc,
                       std::vector<std::int64_t> jumps);

/// Bonds that jump in this step: those with draw(step, m) < p_m, in the order
/// they are to be applied.
std::vector<int> select_jumps(const std::vector<double>& probabilities, const StepProtocol& protocol,
                              const JumpDecisionStream& stream, std::int64_t step_index);

struct StepOutcome {
  CMatrix state;
  std::vector<int> jumped;
  std::vector<double> probabilities;
};

/// One Trotter step of the Gaussian engine: no-jump propagation with
/// re-orthonormalization, jump probabilities on the propagated state,
/// then the selected jumps.
StepOutcome step(const CMatrix& state, const std::vector<JumpSpec>& specs, const Propagator& propagator,
                 const StepProtocol& protocol, double gamma, const JumpDecisionStream& stream,
                 std::int64_t step_index);

/// Holds the per-run immutable pieces (propagator, jump specs) so they are
/// built once and shared read-only by all trajectories of an ensemble.
class GaussianTrajectoryRunner {
 public:
  explicit GaussianTrajectoryRunner(TrajectorySetup setup);

  TrajectoryRecord operator()(std::uint64_t seed) const;

  const TrajectorySetup& setup() const { return setup_; }
  const Propagator& propagator() const { return propagator_; }

 private:
  TrajectorySetup setup_;
  std::vector<JumpSpec> specs_;
  Propagator propagator_;
};

TrajectoryRecord run_trajectory(const TrajectorySetup& setup, std::uint64_t seed);

struct SeriesStats {
  RMatrix mean;    // rows: record times, cols: site / cut / k / bond index
  RMatrix error;  // standard error of the mean
};

struct SteadyStats {
  RVector mean;
  RVector error;
};

/// Trajectory-averaged observables.
///
/// Series names: density, entropy, scl_traj, scl_avg, jumps, and for
/// periodic chains momentum and current. `scl_traj` averages the classical
/// entropy of each trajectory; `scl_avg` is the classical entropy of the
/// averaged density (reported with zero error). Steady values average each
/// trajectory over t >= steady_from first, then across trajectories.
struct EnsembleStats {
  int trajectories = 0;
  std::vector<double> times;
  double steady_from = 0.0;
  std::map<std::string, SeriesStats> series;
  std::map<std::string, SteadyStats> steady;
  std::int64_t total_jumps = 0;
  double expected_jumps = 0.0;
  double min_bound_margin = std::numeric_limits<double>::infinity();
  std::int64_t bound_violations = 0;  // snapshots with S_cl - 2 S < -1e-9
};

inline constexpr double kBoundTolerance = 1e-9;

/// Folds trajectory records in a fixed order into EnsembleStats.
class EnsembleAccumulator {
 public:
  explicit EnsembleAccumulator(double steady_from) : steady_from_(steady_from) {}

  void add(const TrajectoryRecord& record);
  EnsembleStats finish() const;

 private:
  struct Sums {
    RMatrix sum;
    RMatrix sum_sq;
  };
  void accumulate(const std::string& name, const RMatrix& values);
  void accumulate_steady(const std::string& name, const RVector& values);

  double steady_from_;
  int count_ = 0;
  std::vector<double> times_;
  std::map<std::string, Sums> sums_;
  std::map<std::string, Sums> steady_sums_;
  std::int64_t total_jumps_ = 0;
  double expected_jumps_ = 0.0;
  double min_margin_ = std::numeric_limits<double>::infinity();
  std::int64_t violations_ = 0;
};

using TrajectoryRunner = std::function<TrajectoryRecord(std::uint64_t seed)>;

/// Runs trajectories with seeds base_seed + 1 ... base_seed + count on
/// `threads` workers. Records are folded in seed order, so the result is
/// bit-identical for any thread count.
EnsembleStats run_ensemble(const TrajectoryRunner& runner, int count, std::uint64_t base_seed,
                           double steady_from, int threads = 1);

EnsembleStats run_ensemble(const TrajectorySetup& setup, int count, std::uint64_t base_seed, int threads = 1);

}  // namespace mise
