#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "mise/ed.hpp"
#include "support.hpp"

using namespace mise;
using mise::testing::max_abs;

namespace {

LatticeConfig chain(int L, Boundary bc, double gamma, double theta) {
  LatticeConfig c;
  c.sites = L;
  c.boundary = bc;
  c.gamma = gamma;
  c.theta = theta;
  return c;
}

CMatrix random_density_matrix(mise::testing::Rng& rng, Eigen::Index D) {
  const CMatrix a = mise::testing::random_complex(rng, D, D);
  const CMatrix rho = a * a.adjoint();
  return rho / rho.trace().real();
}

}  // namespace

TEST_CASE("without feedback the maximally mixed state is stationary") {
  for (auto bc : {Boundary::open, Boundary::periodic}) {
    const auto ops = ed::build_sector_operators(chain(6, bc, 0.7, 0.0), 3);
    const ed::LindbladGenerator f(ops);
    CHECK(max_abs(f(ed::maximally_mixed(ops.basis))) < 1e-12);
  }
  // With feedback it is not.
  const auto ops = ed::build_sector_operators(chain(6, Boundary::open, 0.7, pi), 3);
  CHECK(max_abs(ed::LindbladGenerator(ops)(ed::maximally_mixed(ops.basis))) > 1e-3);
}

TEST_CASE("generator preserves trace and hermiticity") {
  mise::testing::Rng rng(51);
  const auto ops = ed::build_sector_operators(chain(5, Boundary::open, 0.9, 0.6 * pi), 2);
  const ed::LindbladGenerator f(ops);
  for (int trial = 0; trial < 10; ++trial) {
    const CMatrix rho = random_density_matrix(rng, ops.basis.size());
    const CMatrix d = f(rho);
    CHECK(std::abs(d.trace()) < 1e-12);
    CHECK(max_abs(d - d.adjoint()) < 1e-12);
  }
}

TEST_CASE("superoperator matches the generator") {
  mise::testing::Rng rng(52);
  const auto ops = ed::build_sector_operators(chain(5, Boundary::periodic, 0.4, pi), 2);
  const ed::LindbladGenerator f(ops);
  const auto s = f.superoperator();
  const auto D = ops.basis.size();
  for (int trial = 0; trial < 5; ++trial) {
    const CMatrix rho = random_density_matrix(rng, D);
    const CVector v = Eigen::Map<const CVector>(rho.data(), D * D);
    const CVector w = s * v;
    CHECK(max_abs(Eigen::Map<const CMatrix>(w.data(), D, D) - f(rho)) < 1e-12);
  }
}

TEST_CASE("steady state without feedback is homogeneous") {
  const auto ops = ed::build_sector_operators(chain(6, Boundary::open, 0.5, 0.0), 3);
  const CMatrix rho = ed::lindblad_steady_state(ops);
  const RVector n = ed::site_densities(ops.basis, rho);
  CHECK((n.array() - 0.5).abs().maxCoeff() < 1e-8);
  CHECK(max_abs(rho - ed::maximally_mixed(ops.basis)) < 1e-8);
}

TEST_CASE("steady state with feedback piles particles up on the left") {
  const auto ops = ed::build_sector_operators(chain(6, Boundary::open, 0.5, pi), 3);
  const CMatrix rho = ed::lindblad_steady_state(ops);
  CHECK(std::abs(rho.trace() - Complex(1.0)) < 1e-10);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);
  CHECK(max_abs(ed::LindbladGenerator(ops)(rho)) < 1e-10);
  const RVector n = ed::site_densities(ops.basis, rho);
  for (int i = 0; i + 1 < 6; ++i) CHECK(n(i) > n(i + 1));
}

TEST_CASE("integration approaches the steady state") {
  const auto ops = ed::build_sector_operators(chain(4, Boundary::open, 0.8, pi), 2);
  const std::vector<int> right{2, 3};
  const CMatrix rho0 = ed::pure_density_matrix(ed::product_state(ops.basis, right));
  const auto run = ed::integrate_lindblad(ops, rho0, {0.0, 1.0, 100.0});
  REQUIRE(run.snapshots.size() == 3);
  CHECK(run.dt == doctest::Approx(0.01));
  CHECK(run.trace_drift < ed::kTraceDriftLimit);
  CHECK(max_abs(run.snapshots.front().rho - rho0) == 0.0);
  CHECK(max_abs(run.snapshots.back().rho - ed::lindblad_steady_state(ops)) < 1e-6);
}

TEST_CASE("integration rejects bad input") {
  const auto ops = ed::build_sector_operators(chain(4, Boundary::open, 0.8, pi), 2);
  CHECK_THROWS_AS(ed::integrate_lindblad(ops, CMatrix::Identity(3, 3), {1.0}), ConfigError);
  CHECK_THROWS_AS(ed::integrate_lindblad(ops, ed::maximally_mixed(ops.basis), {2.0, 1.0}), ConfigError);
  const auto big = ed::build_sector_operators(chain(12, Boundary::open, 0.8, pi), 6);
  CHECK_THROWS_AS(ed::integrate_lindblad(big, ed::maximally_mixed(big.basis), {1.0}), GuardError);
}

TEST_CASE("generated algebra is complete") {
  SUBCASE("projector jumps") {
    const auto small = ed::build_sector_operators(chain(3, Boundary::open, 0.5, 0.0), 1);
    const auto r = ed::algebra_completeness(small);
    CHECK(r.dimension == 9);
    CHECK(r.complete());
    CHECK(ed::algebra_completeness(ed::build_sector_operators(chain(4, Boundary::open, 0.5, 0.0), 2)).dimension == 36);
  }
  SUBCASE("phase-gate feedback") {
    CHECK(ed::algebra_completeness(ed::build_sector_operators(chain(3, Boundary::open, 0.5, pi), 1)).dimension == 9);
    CHECK(ed::algebra_completeness(ed::build_sector_operators(chain(4, Boundary::open, 0.5, pi), 2)).dimension == 36);
  }
  SUBCASE("the Hamiltonian alone is not enough") {
    auto ops = ed::build_sector_operators(chain(4, Boundary::open, 0.5, pi), 2);
    ops.jumps.clear();
    const auto r = ed::algebra_completeness(ops);
    CHECK(r.converged);
    CHECK(r.dimension < 36);
    // Polynomials in H without a constant term: one dimension per distinct
    // non-zero eigenvalue.
    Eigen::SelfAdjointEigenSolver<CMatrix> es{CMatrix(ops.hamiltonian)};
    std::vector<double> values;
    for (double e : es.eigenvalues()) {
      if (std::abs(e) < 1e-8) continue;
      if (values.empty() || e - values.back() > 1e-8) values.push_back(e);
    }
    const auto distinct = static_cast<Eigen::Index>(values.size());
    CHECK(r.dimension == distinct);
  }
  SUBCASE("guard") {
    CHECK_THROWS_AS(ed::algebra_completeness(ed::build_sector_operators(chain(10, Boundary::open, 0.5, pi), 5)),
                    GuardError);
  }
}
