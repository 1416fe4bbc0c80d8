#include <doctest.h>

#include <algorithm>

#include <Eigen/Eigenvalues>

#include "mise/model.hpp"
#include "support.hpp"

using namespace mise;
using mise::testing::max_abs;

namespace {

LatticeConfig chain(int L, Boundary bc, double gamma = 0.0, double theta = pi) {
  LatticeConfig c;
  c.sites = L;
  c.boundary = bc;
  c.gamma = gamma;
  c.theta = theta;
  return c;
}

std::vector<double> sorted_eigenvalues(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  std::vector<double> v(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("two-site hopping matrix") {
  const CMatrix h = build_hopping_matrix(chain(2, Boundary::open));
  CMatrix expected(2, 2);
  expected << 0, 1, 1, 0;
  CHECK(max_abs(h - expected) == 0.0);
}

TEST_CASE("hopping spectra match the cosine band") {
  const auto open3 = sorted_eigenvalues(build_hopping_matrix(chain(3, Boundary::open)));
  CHECK(open3[0] == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-12));
  CHECK(std::abs(open3[1]) < 1e-12);
  CHECK(open3[2] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  const auto ring4 = sorted_eigenvalues(build_hopping_matrix(chain(4, Boundary::periodic)));
  CHECK(ring4[0] == doctest::Approx(-2.0));
  CHECK(std::abs(ring4[1]) < 1e-12);
  CHECK(std::abs(ring4[2]) < 1e-12);
  CHECK(ring4[3] == doctest::Approx(2.0));
}

TEST_CASE("configuration validation") {
  CHECK_THROWS_AS(build_hopping_matrix(chain(1, Boundary::open)), ConfigError);
  CHECK_THROWS_AS(build_hopping_matrix(chain(3, Boundary::open, -0.1)), ConfigError);
  CHECK(chain(5, Boundary::open).bond_count() == 4);
  CHECK(chain(5, Boundary::periodic).bond_count() == 5);
  CHECK(parse_boundary("pbc") == Boundary::periodic);
  CHECK_THROWS_AS(parse_boundary("twisted"), ConfigError);
}

TEST_CASE("effective matrix without monitoring is the hopping matrix") {
  for (auto bc : {Boundary::open, Boundary::periodic}) {
    const auto cfg = chain(7, bc, 0.0);
    CHECK(max_abs(build_effective_matrix(cfg) - build_hopping_matrix(cfg)) == 0.0);
  }
}

TEST_CASE("effective matrix entries") {
  const CMatrix h = build_effective_matrix(chain(3, Boundary::open, 0.4));
  CHECK(h(0, 1) == Complex(1.1, 0.0));
  CHECK(h(1, 2) == Complex(1.1, 0.0));
  CHECK(std::abs(h(1, 0) - Complex(0.9, 0.0)) < 1e-15);
  CHECK(std::abs(h(2, 1) - Complex(0.9, 0.0)) < 1e-15);
  CHECK(std::abs(h(0, 0) - Complex(0.0, -0.1)) < 1e-15);
  CHECK(std::abs(h(1, 1) - Complex(0.0, -0.2)) < 1e-15);
  CHECK(std::abs(h(2, 2) - Complex(0.0, -0.1)) < 1e-15);
  CHECK(h(0, 2) == Complex(0.0));

  const CMatrix ring = build_effective_matrix(chain(4, Boundary::periodic, 0.4));
  for (int i = 0; i < 4; ++i) CHECK(std::abs(ring(i, i) - Complex(0.0, -0.2)) < 1e-15);
  CHECK(std::abs(ring(3, 0) - Complex(1.1, 0.0)) < 1e-15);
  CHECK(std::abs(ring(0, 3) - Complex(0.9, 0.0)) < 1e-15);
}

TEST_CASE("effective matrix equals H - (i gamma / 2) sum of bond projectors") {
  mise::testing::Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    CAPTURE(trial);
    const auto cfg = mise::testing::random_lattice(rng);
    CMatrix projectors = CMatrix::Zero(cfg.sites, cfg.sites);
    for (const auto& spec : build_jump_specs(cfg)) {
      const CVector a = spec.mode_vector(cfg.sites);
      projectors += a * a.adjoint();
    }
    const CMatrix expected = build_hopping_matrix(cfg) - Complex(0.0, 0.5 * cfg.gamma) * projectors;
    CHECK(max_abs(build_effective_matrix(cfg) - expected) < 1e-14);
    // The anti-Hermitian part is the loss term alone.
    const CMatrix heff = build_effective_matrix(cfg);
    const CMatrix anti = (heff - heff.adjoint()) / Complex(0.0, 2.0);
    CHECK(max_abs(anti + 0.5 * cfg.gamma * projectors) < 1e-14);
  }
}

TEST_CASE("jump specs") {
  const auto single = build_jump_specs(chain(2, Boundary::open));
  REQUIRE(single.size() == 1);
  CHECK(single[0].bond.left == 0);
  CHECK(single[0].bond.right == 1);
  CHECK(build_jump_specs(chain(6, Boundary::open)).size() == 5);
  const auto ring = build_jump_specs(chain(6, Boundary::periodic));
  REQUIRE(ring.size() == 6);
  CHECK(ring.back().bond.left == 5);
  CHECK(ring.back().bond.right == 0);

  mise::testing::Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto cfg = mise::testing::random_lattice(rng);
    for (const auto& spec : build_jump_specs(cfg)) {
      const CVector a = spec.mode_vector(cfg.sites);
      CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-15));
      const CMatrix p = a * a.adjoint();
      CHECK(max_abs(p * p - p) < 1e-15);
      CHECK(std::abs(p.trace() - Complex(1.0)) < 1e-15);
      Eigen::SelfAdjointEigenSolver<CMatrix> es(p);
      CHECK(es.eigenvalues().cwiseAbs().maxCoeff() == doctest::Approx(1.0));
      CHECK((es.eigenvalues().array().abs() > 1e-12).count() == 1);
    }
  }
}

TEST_CASE("feedback with theta = pi turns the detected mode into its mirror") {
  const auto cfg = chain(2, Boundary::open, 0.3, pi);
  const auto spec = build_jump_specs(cfg).front();
  const CVector a = spec.mode_vector(2);
  const CVector mapped = build_feedback_matrix(spec, 2) * a;
  CVector mirror(2);
  mirror << 1.0 / std::sqrt(2.0), Complex(0.0, 1.0 / std::sqrt(2.0));
  CHECK((mapped - mirror).norm() < 1e-15);
}

TEST_CASE("feedback matrix") {
  const auto plain = build_jump_specs(chain(4, Boundary::open, 0.3, 0.0));
  CHECK(max_abs(build_feedback_matrix(plain[1], 4) - CMatrix::Identity(4, 4)) == 0.0);

  const auto flip = build_jump_specs(chain(4, Boundary::open, 0.3, pi));
  const CMatrix u = build_feedback_matrix(flip[1], 4);
  CHECK(std::abs(u(2, 2) - Complex(-1.0)) < 1e-15);
  CHECK(u(1, 1) == Complex(1.0));
  CHECK(u(0, 1) == Complex(0.0));

  mise::testing::Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cfg = mise::testing::random_lattice(rng);
    for (const auto& spec : build_jump_specs(cfg)) {
      const CMatrix m = build_feedback_matrix(spec, cfg.sites);
      CHECK(max_abs(m.adjoint() * m - CMatrix::Identity(cfg.sites, cfg.sites)) < 1e-15);
    }
  }
  CHECK_THROWS_AS(build_feedback_matrix(flip[2], 3), ConfigError);
}
