#include "mise/ed.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <fmt/format.h>

#include "mise/fpenv.hpp"
#include "mise/gaussian.hpp"

namespace mise::ed {

namespace {

using State = SectorBasis::State;

bool occupied(State s, int i) { return ((s >> i) & 1U) != 0; }

// (-1)^(number of occupied sites below i)
double jw_sign(State s, int i) {
  const State below = s & ((State{1} << i) - 1);
  return (std::popcount(below) & 1) != 0 ? -1.0 : 1.0;
}

SparseOperator diagonal_operator(const SectorBasis& basis, auto&& value) {
  std::vector<Eigen::Triplet<Complex>> triplets;
  for (Eigen::Index k = 0; k < basis.size(); ++k) {
    const Complex v = value(basis.state(k));
    if (v != Complex(0.0)) triplets.emplace_back(k, k, v);
  }
  SparseOperator op(basis.size(), basis.size());
  op.setFromTriplets(triplets.begin(), triplets.end());
  return op;
}

}  // namespace

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
    if (r > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(r);
}

void check_sector_guard(int sites, int particles, std::size_t limit, std::string_view what) {
  const auto dim = binomial(sites, particles);
  if (dim > limit) {
    throw GuardError(fmt::format("{}: sector dimension C({}, {}) = {} exceeds the limit {}", what, sites, particles,
                                 dim, limit));
  }
}

SectorBasis::SectorBasis(int sites, int particles) : sites_(sites), particles_(particles) {
  if (sites < 1 || sites > 62) throw ConfigError(fmt::format("sector basis needs 1 <= L <= 62, got {}", sites));
  if (particles < 0 || particles > sites) {
    throw ConfigError(fmt::format("particle number {} outside [0, {}]", particles, sites));
  }
  const std::uint64_t dim = binomial(sites, particles);
  if (dim > (std::uint64_t{1} << 32)) throw GuardError(fmt::format("sector dimension {} is too large", dim));
  states_.reserve(static_cast<std::size_t>(dim));
  if (particles == 0) {
    states_.push_back(0);
    return;
  }
  // Gosper's hack walks the fixed-popcount integers in increasing order.
  State s = (State{1} << particles) - 1;
  const State end = State{1} << sites;
  while (s < end) {
    states_.push_back(s);
    const State c = s & (~s + 1);
    const State r = s + c;
    s = (((r ^ s) >> 2) / c) | r;
  }
}

std::optional<Eigen::Index> SectorBasis::find(State s) const {
  const auto it = std::lower_bound(states_.begin(), states_.end(), s);
  if (it == states_.end() || *it != s) return std::nullopt;
  return static_cast<Eigen::Index>(it - states_.begin());
}

Eigen::Index SectorBasis::index(State s) const {
  if (auto k = find(s)) return *k;
  throw ConfigError(fmt::format("state {:#x} is not in the ({}, {}) sector", s, sites_, particles_));
}

SectorBasis::State SectorBasis::from_sites(std::span<const int> occupied_sites) {
  State s = 0;
  for (int i : occupied_sites) s |= State{1} << i;
  return s;
}

SparseOperator bilinear_operator(const SectorBasis& basis, const CMatrix& h) {
  const int L = basis.sites();
  if (h.rows() != L || h.cols() != L) throw ConfigError("bilinear operator: matrix size does not match the lattice");
  std::vector<Eigen::Triplet<Complex>> triplets;
  for (Eigen::Index col = 0; col < basis.size(); ++col) {
    const State s = basis.state(col);
    for (int j = 0; j < L; ++j) {
      if (!occupied(s, j)) continue;
      const State s1 = s ^ (State{1} << j);
      const double sign_j = jw_sign(s, j);
      for (int i = 0; i < L; ++i) {
        const Complex hij = h(i, j);
        if (hij == Complex(0.0) || occupied(s1, i)) continue;
        const State s2 = s1 | (State{1} << i);
        triplets.emplace_back(basis.index(s2), col, hij * sign_j * jw_sign(s1, i));
      }
    }
  }
  SparseOperator op(basis.size(), basis.size());
  op.setFromTriplets(triplets.begin(), triplets.end());
  return op;
}

SparseOperator interaction_operator(const SectorBasis& basis, const LatticeConfig& cfg) {
  const auto bs = bonds(cfg);
  return diagonal_operator(basis, [&](State s) {
    double e = 0.0;
    for (const Bond& b : bs) e += (occupied(s, b.left) && occupied(s, b.right)) ? 1.0 : 0.0;
    return Complex(cfg.interaction * e);
  });
}

SparseOperator feedback_operator(const SectorBasis& basis, const JumpSpec& spec) {
  return diagonal_operator(
      basis, [&](State s) { return occupied(s, spec.bond.right) ? spec.feedback_factor() : Complex(1.0); });
}

SectorOperators build_sector_operators(const LatticeConfig& cfg, int particles, std::size_t max_dimension) {
  cfg.validate();
  check_sector_guard(cfg.sites, particles, max_dimension, "dense engine");
  SectorOperators ops{cfg, SectorBasis(cfg.sites, particles), {}, {}, {}, {}, {}, {}, {}};
  const auto& basis = ops.basis;
  ops.interaction = interaction_operator(basis, cfg);
  ops.hamiltonian = bilinear_operator(basis, build_hopping_matrix(cfg)) + ops.interaction;
  ops.specs = build_jump_specs(cfg);
  SparseOperator loss(basis.size(), basis.size());
  for (const JumpSpec& spec : ops.specs) {
    const CVector a = spec.mode_vector(cfg.sites);
    SparseOperator p = bilinear_operator(basis, a * a.adjoint());
    SparseOperator u = feedback_operator(basis, spec);
    loss += p;
    ops.jumps.push_back(u * p);
    ops.projectors.push_back(std::move(p));
    ops.feedback.push_back(std::move(u));
  }
  ops.effective = ops.hamiltonian - Complex(0.0, 0.5 * cfg.gamma) * loss;
  return ops;
}

CVector slater_state(const SectorBasis& basis, const CMatrix& quasimodes) {
  const int L = basis.sites();
  const int N = basis.particles();
  if (quasimodes.rows() != L || quasimodes.cols() != N) {
    throw ConfigError(fmt::format("quasimode matrix is {}x{}, sector is L = {}, N = {}", quasimodes.rows(),
                                  quasimodes.cols(), L, N));
  }
  CVector psi(basis.size());
  CMatrix minor(N, N);
  for (Eigen::Index k = 0; k < basis.size(); ++k) {
    const State s = basis.state(k);
    Eigen::Index r = 0;
    for (int i = 0; i < L; ++i) {
      if (occupied(s, i)) minor.row(r++) = quasimodes.row(i);
    }
    psi(k) = N == 0 ? Complex(1.0) : minor.determinant();
  }
  return psi;
}

CVector product_state(const SectorBasis& basis, std::span<const int> occupied_sites) {
  mise::detail::check_sites(occupied_sites, basis.sites());
  if (static_cast<int>(occupied_sites.size()) != basis.particles()) {
    throw ConfigError(fmt::format("{} occupied sites given for an N = {} sector", occupied_sites.size(),
                                  basis.particles()));
  }
  CVector psi = CVector::Zero(basis.size());
  psi(basis.index(SectorBasis::from_sites(occupied_sites))) = 1.0;
  return psi;
}

CMatrix correlation_matrix(const SectorBasis& basis, const CVector& psi) {
  const int L = basis.sites();
  CMatrix c = CMatrix::Zero(L, L);
  for (Eigen::Index k = 0; k < basis.size(); ++k) {
    const Complex amp = psi(k);
    if (amp == Complex(0.0)) continue;
    const State s = basis.state(k);
    for (int j = 0; j < L; ++j) {
      if (!occupied(s, j)) continue;
      const State s1 = s ^ (State{1} << j);
      const double sign_j = jw_sign(s, j);
      for (int i = 0; i < L; ++i) {
        if (occupied(s1, i)) continue;
        const State s2 = s1 | (State{1} << i);
        c(i, j) += std::conj(psi(basis.index(s2))) * amp * sign_j * jw_sign(s1, i);
      }
    }
  }
  return c;
}

double entanglement_entropy(const SectorBasis& basis, const CVector& psi, std::span<const int> sites) {
  mise::detail::check_sites(sites, basis.sites());
  State mask_a = SectorBasis::from_sites(sites);
  std::unordered_map<State, Eigen::Index> rows;
  std::unordered_map<State, Eigen::Index> cols;
  std::vector<std::tuple<Eigen::Index, Eigen::Index, Complex>> entries;
  for (Eigen::Index k = 0; k < basis.size(); ++k) {
    if (psi(k) == Complex(0.0)) continue;
    const State s = basis.state(k);
    const State a = s & mask_a;
    const State b = s & ~mask_a;
    // Moving every A creation operator in front of the B ones passes each
    // occupied B site that lies below it.
    int swaps = 0;
    for (State rest = a; rest != 0; rest &= rest - 1) {
      const int i = std::countr_zero(rest);
      swaps += std::popcount(b & ((State{1} << i) - 1));
    }
    const auto r = rows.try_emplace(a, static_cast<Eigen::Index>(rows.size())).first->second;
    const auto c = cols.try_emplace(b, static_cast<Eigen::Index>(cols.size())).first->second;
    entries.emplace_back(r, c, (swaps & 1) != 0 ? -psi(k) : psi(k));
  }
  CMatrix m = CMatrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (const auto& [r, c, v] : entries) m(r, c) = v;
  const double norm2 = m.squaredNorm();
  if (!(norm2 > 0.0)) throw NumericError("entanglement entropy of a zero state");
  const CMatrix rho = (m * m.adjoint()) / norm2;
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(rho, Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) {
    const double p = solver.eigenvalues()(k);
    if (p > 0.0) s -= p * std::log(p);
  }
  return s;
}

SparseExpAction::SparseExpAction(SparseOperator generator) : generator_(std::move(generator)) {
  double norm1 = 0.0;
  for (Eigen::Index j = 0; j < generator_.outerSize(); ++j) {
    double col = 0.0;
    for (SparseOperator::InnerIterator it(generator_, j); it; ++it) col += std::abs(it.value());
    norm1 = std::max(norm1, col);
  }
  substeps_ = std::max(1, static_cast<int>(std::ceil(norm1 / 0.5)));
}

CVector SparseExpAction::apply(const CVector& v) const {
  CVector out = v;
  const double scale = 1.0 / substeps_;
  for (int s = 0; s < substeps_; ++s) {
    CVector term = out;
    CVector sum = out;
    // ||A / s|| <= 1/2, so terms shrink at least geometrically.
    for (int k = 1; k <= 60; ++k) {
      term = (generator_ * term) * (scale / k);
      sum += term;
      if (term.norm() <= 1e-17 * sum.norm()) break;
    }
    out = std::move(sum);
  }
  return out;
}

SparseExpAction no_jump_propagator(const SectorOperators& ops, double dt) {
  return SparseExpAction(Complex(0.0, -dt) * ops.effective);
}

DenseStepOutcome dense_step(const CVector& psi, const SectorOperators& ops, const SparseExpAction& propagator,
                            const StepProtocol& protocol, const JumpDecisionStream& stream,
                            std::int64_t step_index) {
  DenseStepOutcome out;
  out.state = propagator.apply(psi);
  const double norm = out.state.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw DegenerateStateError("no-jump evolution annihilated the state");
  out.state /= norm;
  const double gamma = ops.lattice.gamma;
  for (const auto& p : ops.projectors) {
    const double prob = gamma * protocol.dt * out.state.dot(p * out.state).real();
    if (prob > 1.0) throw ProtocolError(fmt::format("jump probability {} exceeds 1; reduce dt", prob));
    out.probabilities.push_back(std::max(prob, 0.0));
  }
  out.jumped = select_jumps(out.probabilities, protocol, stream, step_index);
  for (int m : out.jumped) {
    CVector next = ops.jumps[static_cast<std::size_t>(m)] * out.state;
    const double n = next.norm();
    if (!(n >= 1e-12)) {
      throw ZeroProbabilityJumpError(fmt::format("jump on bond {} has zero amplitude in the current state", m));
    }
    out.state = next / n;
  }
  return out;
}

namespace {

TrajectorySetup checked(TrajectorySetup setup) {
  setup.lattice.validate();
  setup.protocol.validate();
  mise::detail::check_sites(setup.initial_sites, setup.lattice.sites);
  for (const auto& cut : setup.observables.cuts) mise::detail::check_sites(cut, setup.lattice.sites);
  return setup;
}

}  // namespace

DenseTrajectoryRunner::DenseTrajectoryRunner(TrajectorySetup setup, std::size_t max_dimension)
    : setup_(checked(std::move(setup))),
      ops_(build_sector_operators(setup_.lattice, static_cast<int>(setup_.initial_sites.size()), max_dimension)),
      propagator_(no_jump_propagator(ops_, setup_.protocol.dt)) {}

TrajectoryRecord DenseTrajectoryRunner::operator()(std::uint64_t seed) const {
  const FlushSubnormals flush;
  const auto& protocol = setup_.protocol;
  const auto& cuts = setup_.observables.cuts;
  const JumpDecisionStream stream(seed);

  TrajectoryRecord record;
  record.seed = seed;
  CVector psi = product_state(ops_.basis, setup_.initial_sites);
  std::vector<std::int64_t> jumps(ops_.specs.size(), 0);

  auto take_snapshot = [&](double time) {
    RVector s(static_cast<Eigen::Index>(cuts.size()));
    for (std::size_t k = 0; k < cuts.size(); ++k) {
      s(static_cast<Eigen::Index>(k)) = entanglement_entropy(ops_.basis, psi, cuts[k]);
    }
    Snapshot snap = make_snapshot(time, correlation_matrix(ops_.basis, psi), std::move(s), setup_.lattice.boundary,
                                  jumps);
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
    DenseStepOutcome out = dense_step(psi, ops_, propagator_, protocol, stream, n);
    psi = std::move(out.state);
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

TrajectoryRecord run_dense_trajectory(const TrajectorySetup& setup, std::uint64_t seed) {
  return DenseTrajectoryRunner(setup)(seed);
}

}  // namespace mise::ed
