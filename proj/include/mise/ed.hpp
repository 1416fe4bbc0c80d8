#pragma once

// Exact many-body reference in a fixed particle-number sector.
//
// Basis states are bitstrings (bit i = site i) ordered as increasing
// integers. Fermionic signs follow Jordan-Wigner ordering along the chain:
// |s> = c^dag_{i1} c^dag_{i2} ... |0> with i1 < i2 < ...

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "mise/model.hpp"
#include "mise/trajectory.hpp"
#include "mise/types.hpp"

namespace mise::ed {

using SparseOperator = Eigen::SparseMatrix<Complex>;

inline constexpr std::size_t kDenseSectorLimit = 40000;
inline constexpr std::size_t kLindbladSectorLimit = 400;
inline constexpr std::size_t kAlgebraSquaredLimit = 40000;

std::uint64_t binomial(int n, int k);

/// Throws GuardError naming the guard when binomial(L, N) exceeds `limit`.
void check_sector_guard(int sites, int particles, std::size_t limit, std::string_view what);

class SectorBasis {
 public:
  using State = std::uint64_t;

  SectorBasis(int sites, int particles);

  int sites() const { return sites_; }
  int particles() const { return particles_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(states_.size()); }
  State state(Eigen::Index i) const { return states_[static_cast<std::size_t>(i)]; }
  const std::vector<State>& states() const { return states_; }

  /// Position of `s` in the basis; nullopt when s is not in the sector.
  std::optional<Eigen::Index> find(State s) const;
  Eigen::Index index(State s) const;

  static State from_sites(std::span<const int> occupied);

 private:
  int sites_;
  int particles_;
  std::vector<State> states_;
};

/// sum_ij h_ij c_i^dag c_j restricted to the sector.
SparseOperator bilinear_operator(const SectorBasis& basis, const CMatrix& h);

/// Diagonal operator g sum_bonds n_left n_right.
SparseOperator interaction_operator(const SectorBasis& basis, const LatticeConfig& cfg);

/// Diagonal operator exp(i theta n_right) of a jump spec.
SparseOperator feedback_operator(const SectorBasis& basis, const JumpSpec& spec);

/// All operators of the monitored chain in one sector.
struct SectorOperators {
  LatticeConfig lattice;
  SectorBasis basis;
  SparseOperator hamiltonian;   // hopping + interaction
  SparseOperator interaction;
  SparseOperator effective;     // hamiltonian - (i gamma / 2) sum_m P_m
  std::vector<JumpSpec> specs;
  std::vector<SparseOperator> projectors;
  std::vector<SparseOperator> feedback;
  std::vector<SparseOperator> jumps;  // feedback * projector
};

SectorOperators build_sector_operators(const LatticeConfig& cfg, int particles,
                                       std::size_t max_dimension = kDenseSectorLimit);

/// Slater determinant of the quasimode columns: psi(s) = det B[occupied rows of s].
CVector slater_state(const SectorBasis& basis, const CMatrix& quasimodes);

CVector product_state(const SectorBasis& basis, std::span<const int> occupied);

/// C_ij = <psi| c_i^dag c_j |psi>.
CMatrix correlation_matrix(const SectorBasis& basis, const CVector& psi);

/// Von Neumann entropy (nats) of the reduced density matrix on `sites`.
double entanglement_entropy(const SectorBasis& basis, const CVector& psi, std::span<const int> sites);

/// v -> exp(A) v for a sparse generator, by a truncated Taylor series on
/// enough sub-steps that each has ||A / s||_1 <= 1/2.
class SparseExpAction {
 public:
  explicit SparseExpAction(SparseOperator generator);

  CVector apply(const CVector& v) const;

 private:
  SparseOperator generator_;
  int substeps_ = 1;
};

/// exp(-i H_eff dt) as an action on sector vectors.
SparseExpAction no_jump_propagator(const SectorOperators& ops, double dt);

struct DenseStepOutcome {
  CVector state;
  std::vector<int> jumped;
  std::vector<double> probabilities;
};

/// Same protocol as the Gaussian step, on a many-body state vector.
DenseStepOutcome dense_step(const CVector& psi, const SectorOperators& ops, const SparseExpAction& propagator,
                            const StepProtocol& protocol, const JumpDecisionStream& stream,
                            std::int64_t step_index);

class DenseTrajectoryRunner {
 public:
  DenseTrajectoryRunner(TrajectorySetup setup, std::size_t max_dimension = kDenseSectorLimit);

  TrajectoryRecord operator()(std::uint64_t seed) const;

  const SectorOperators& operators() const { return ops_; }

 private:
  TrajectorySetup setup_;
  SectorOperators ops_;
  SparseExpAction propagator_;
};

TrajectoryRecord run_dense_trajectory(const TrajectorySetup& setup, std::uint64_t seed);

// Lindblad master equation ---------------------------------------------------

CMatrix maximally_mixed(const SectorBasis& basis);
CMatrix pure_density_matrix(const CVector& psi);
RVector site_densities(const SectorBasis& basis, const CMatrix& rho);

/// d rho / dt = -i [H, rho] - (gamma/2) sum {L^dag L, rho} + gamma sum L rho L^dag.
class LindbladGenerator {
 public:
  explicit LindbladGenerator(const SectorOperators& ops);

  CMatrix operator()(const CMatrix& rho) const;

  /// The generator as a D^2 x D^2 matrix acting on column-stacked rho.
  SparseOperator superoperator() const;

  Eigen::Index dimension() const { return effective_.rows(); }

 private:
  double gamma_;
  SparseOperator effective_;
  SparseOperator effective_adjoint_;
  std::vector<SparseOperator> jumps_;
  std::vector<SparseOperator> jumps_adjoint_;
};

struct LindbladSnapshot {
  double time = 0.0;
  CMatrix rho;
};

struct LindbladRun {
  std::vector<LindbladSnapshot> snapshots;
  double dt = 0.0;
  double trace_drift = 0.0;
};

inline constexpr double kTraceDriftLimit = 1e-8;
inline constexpr double kPositivityFloor = -1e-9;

/// Fixed-step RK4 from rho0 with snapshots at `times`. The step defaults to
/// min(0.01, 0.1 / gamma) and is halved until the trace drifts by less than
/// 1e-8. Throws NumericError when a snapshot has an eigenvalue below -1e-9.
LindbladRun integrate_lindblad(const SectorOperators& ops, const CMatrix& rho0, const std::vector<double>& times,
                               std::optional<double> dt = std::nullopt);

/// Stationary state with unit trace, from a sparse LU solve of the generator
/// with one equation replaced by the trace condition.
CMatrix lindblad_steady_state(const SectorOperators& ops);

// Algebra generated by {H, L_m, L_m^dag} --------------------------------------

struct AlgebraReport {
  Eigen::Index dimension = 0;
  Eigen::Index full_dimension = 0;  // D^2
  int rounds = 0;
  bool converged = false;

  bool complete() const { return dimension == full_dimension; }
};

/// Dimension of the (non-unital) algebra generated by H and the jump
/// operators with their adjoints, by repeated left multiplication and
/// Gram-Schmidt against the current span (relative tolerance 1e-9).
AlgebraReport algebra_completeness(const SectorOperators& ops, int max_rounds = 50, double tolerance = 1e-9);

}  // namespace mise::ed
