#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "mise/ed.hpp"
#include "mise/gaussian.hpp"
#include "support.hpp"

using namespace mise;
using mise::testing::max_abs;
using mise::testing::Rng;

namespace {

LatticeConfig chain(int L, Boundary bc, double gamma, double theta = pi, double g = 0.0) {
  LatticeConfig c;
  c.sites = L;
  c.boundary = bc;
  c.gamma = gamma;
  c.theta = theta;
  c.interaction = g;
  return c;
}

double fidelity(const CVector& a, const CVector& b) { return std::norm(a.dot(b)) / (a.squaredNorm() * b.squaredNorm()); }

}  // namespace

TEST_CASE("sector basis") {
  CHECK(ed::binomial(6, 3) == 20);
  CHECK(ed::binomial(40, 20) == 137846528820ULL);
  CHECK(ed::binomial(3, 5) == 0);
  const ed::SectorBasis basis(5, 2);
  CHECK(basis.size() == 10);
  for (Eigen::Index k = 0; k < basis.size(); ++k) {
    CHECK(std::popcount(basis.state(k)) == 2);
    CHECK(basis.index(basis.state(k)) == k);
    if (k > 0) CHECK(basis.state(k - 1) < basis.state(k));
  }
  CHECK_FALSE(basis.find(0b111).has_value());
  CHECK_THROWS_AS(basis.index(0b111), ConfigError);
  CHECK(ed::SectorBasis(4, 0).size() == 1);
  CHECK(ed::SectorBasis(4, 4).size() == 1);
}

TEST_CASE("single-particle sector reproduces the hopping matrix") {
  for (auto bc : {Boundary::open, Boundary::periodic}) {
    const auto cfg = chain(7, bc, 0.3);
    const auto ops = ed::build_sector_operators(cfg, 1);
    CHECK(max_abs(CMatrix(ops.hamiltonian) - build_hopping_matrix(cfg)) == 0.0);
    CHECK(max_abs(CMatrix(ops.effective) - build_effective_matrix(cfg)) < 1e-15);
  }
}

TEST_CASE("interaction energy of an occupied bond") {
  const auto ops = ed::build_sector_operators(chain(4, Boundary::open, 0.0, pi, 1.7), 2);
  const std::vector<int> pair{0, 1};
  const auto k = ops.basis.index(ed::SectorBasis::from_sites(pair));
  CHECK(CMatrix(ops.interaction)(k, k) == Complex(1.7));
  CHECK(CMatrix(ops.hamiltonian)(k, k) == Complex(1.7));
  const std::vector<int> apart{0, 2};
  const auto j = ops.basis.index(ed::SectorBasis::from_sites(apart));
  CHECK(CMatrix(ops.interaction)(j, j) == Complex(0.0));
}

TEST_CASE("operator algebra") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    auto cfg = mise::testing::random_lattice(rng, 3, 7);
    cfg.interaction = mise::testing::uniform(rng, -1.0, 1.0);
    const int N = mise::testing::uniform_int(rng, 1, cfg.sites - 1);
    CAPTURE(cfg.sites);
    CAPTURE(N);
    const auto ops = ed::build_sector_operators(cfg, N);
    const CMatrix h = ops.hamiltonian;
    CHECK(max_abs(h - h.adjoint()) < 1e-14);
    const auto D = ops.basis.size();
    for (std::size_t m = 0; m < ops.specs.size(); ++m) {
      const CMatrix p = ops.projectors[m];
      CHECK(max_abs(p * p - p) < 1e-13);
      Eigen::SelfAdjointEigenSolver<CMatrix> es(p);
      int rank = 0;
      for (Eigen::Index k = 0; k < D; ++k) {
        const double e = es.eigenvalues()(k);
        CHECK(std::min(std::abs(e), std::abs(e - 1.0)) < 1e-12);
        if (e > 0.5) ++rank;
      }
      // The detected mode plus N - 1 of the L - 1 orthogonal modes.
      CHECK(rank == static_cast<int>(ed::binomial(cfg.sites - 1, N - 1)));
      const CMatrix u = ops.feedback[m];
      CHECK(max_abs(u.adjoint() * u - CMatrix::Identity(D, D)) < 1e-14);
    }
  }
}

TEST_CASE("guards") {
  CHECK_THROWS_AS(ed::build_sector_operators(chain(20, Boundary::open, 0.3), 10), GuardError);
  CHECK_NOTHROW(ed::check_sector_guard(16, 8, ed::kDenseSectorLimit, "dense"));
  CHECK_THROWS_AS(ed::check_sector_guard(12, 6, ed::kLindbladSectorLimit, "lindblad"), GuardError);
}

TEST_CASE("Slater determinants match the Gaussian correlation matrix") {
  Rng rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    const int L = mise::testing::uniform_int(rng, 2, 8);
    const int N = mise::testing::uniform_int(rng, 1, L);
    const ed::SectorBasis basis(L, N);
    const CMatrix B = mise::testing::random_quasimodes(rng, L, N);
    const CVector psi = ed::slater_state(basis, B);
    CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(max_abs(ed::correlation_matrix(basis, psi) - correlation_matrix(B)) < 1e-12);
  }
}

TEST_CASE("quadratic evolution commutes with the Slater map") {
  // exp(-i H t) acting on the many-body state equals the Slater state of
  // exp(-i h t) B: fixes the fermionic signs of the bilinear operators.
  Rng rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const int L = mise::testing::uniform_int(rng, 3, 7);
    const int N = mise::testing::uniform_int(rng, 1, L - 1);
    const ed::SectorBasis basis(L, N);
    CMatrix h = mise::testing::random_complex(rng, L, L);
    h = 0.5 * (h + h.adjoint());
    const CMatrix B = mise::testing::random_quasimodes(rng, L, N);
    const ed::SparseExpAction u(Complex(0.0, -0.3) * ed::bilinear_operator(basis, h));
    const CVector lhs = u.apply(ed::slater_state(basis, B));
    const CMatrix Bt = matrix_exponential<double>(Complex(0.0, -0.3) * h) * B;
    CHECK(fidelity(lhs, ed::slater_state(basis, Bt)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((lhs - ed::slater_state(basis, Bt)).norm() < 1e-10);
  }
}

TEST_CASE("reduced density matrix entropy matches the correlation-matrix method") {
  Rng rng(44);
  const std::vector<std::vector<int>> cuts{{0}, {0, 1}, {1, 2}, {0, 2}, {1, 3}, {0, 1, 3}};
  for (int trial = 0; trial < 40; ++trial) {
    const int N = mise::testing::uniform_int(rng, 1, 3);
    const ed::SectorBasis basis(4, N);
    const CMatrix B = mise::testing::random_quasimodes(rng, 4, N);
    const CVector psi = ed::slater_state(basis, B);
    const CMatrix c = correlation_matrix(B);
    for (const auto& cut : cuts) {
      CAPTURE(cut.size());
      CHECK(ed::entanglement_entropy(basis, psi, cut) == doctest::Approx(entanglement_entropy(c, cut)).epsilon(1e-8));
    }
  }
}

TEST_CASE("energy is conserved without monitoring") {
  const auto cfg = chain(8, Boundary::open, 0.0, pi, 1.0);
  const auto ops = ed::build_sector_operators(cfg, 4);
  const auto u = ed::no_jump_propagator(ops, 0.05);
  const std::vector<int> start{0, 1, 2, 3};
  CVector psi = ed::product_state(ops.basis, start);
  auto energy = [&] { return psi.dot(ops.hamiltonian * psi).real(); };
  const double e0 = energy();
  for (int n = 0; n < 2000; ++n) psi = u.apply(psi);
  CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(energy() - e0) < 1e-8);
}

TEST_CASE("Gaussian and dense trajectories agree step by step") {
  const auto cfg = chain(6, Boundary::open, 0.5, pi);
  StepProtocol protocol = StepProtocol::uniform(0.05, 10.0, 1.0);
  const auto ops = ed::build_sector_operators(cfg, 3);
  const auto dense_u = ed::no_jump_propagator(ops, protocol.dt);
  const Propagator u(build_effective_matrix(cfg), protocol.dt);
  const auto specs = build_jump_specs(cfg);
  const JumpDecisionStream stream(2024);

  CMatrix B = init_product_state(half_filled_left(6), 6);
  CVector psi = ed::product_state(ops.basis, half_filled_left(6));
  double worst = 1.0;
  std::int64_t jumps = 0;
  for (std::int64_t n = 1; n <= protocol.step_count(); ++n) {
    auto g = step(B, specs, u, protocol, cfg.gamma, stream, n);
    auto d = ed::dense_step(psi, ops, dense_u, protocol, stream, n);
    REQUIRE(g.jumped == d.jumped);
    B = std::move(g.state);
    psi = std::move(d.state);
    jumps += static_cast<std::int64_t>(g.jumped.size());
    worst = std::min(worst, fidelity(ed::slater_state(ops.basis, B), psi));
  }
  CHECK(jumps > 5);
  CHECK(worst >= 1.0 - 1e-8);
}

TEST_CASE("dense trajectory runner") {
  TrajectorySetup s;
  s.lattice = chain(6, Boundary::periodic, 0.4, 0.7 * pi);
  s.protocol = StepProtocol::uniform(0.05, 5.0, 1.0);
  s.initial_sites = neel_sites(6);
  s.observables.cuts = {block_cut(2), {0, 3}};
  const ed::DenseTrajectoryRunner dense(s);
  const GaussianTrajectoryRunner gauss(s);
  const auto a = dense(9);
  const auto b = gauss(9);
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  CHECK(a.total_jumps == b.total_jumps);
  for (std::size_t t = 0; t < a.snapshots.size(); ++t) {
    CHECK((a.snapshots[t].density - b.snapshots[t].density).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((a.snapshots[t].entropies - b.snapshots[t].entropies).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((a.snapshots[t].momentum - b.snapshots[t].momentum).cwiseAbs().maxCoeff() < 1e-8);
  }
  CHECK(a.bound_violations == 0);
}
