#pragma once

// Hand-rolled generators for property tests. Each test seeds its own engine
// so failures reproduce from the printed case index.

#include <random>

#include <Eigen/Dense>

#include "mise/model.hpp"
#include "mise/types.hpp"

namespace mise::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline CMatrix random_complex(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> g;
  CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = Complex(g(rng), g(rng));
  }
  return m;
}

/// Haar-ish unitary from the QR of a Gaussian matrix.
inline CMatrix random_unitary(Rng& rng, Eigen::Index n) {
  Eigen::HouseholderQR<CMatrix> qr(random_complex(rng, n, n));
  return qr.householderQ() * CMatrix::Identity(n, n);
}

/// Orthonormal L x N quasimodes.
inline CMatrix random_quasimodes(Rng& rng, int L, int N) {
  Eigen::HouseholderQR<CMatrix> qr(random_complex(rng, L, N));
  return qr.householderQ() * CMatrix::Identity(L, N);
}

inline LatticeConfig random_lattice(Rng& rng, int min_sites = 2, int max_sites = 12) {
  LatticeConfig cfg;
  cfg.sites = uniform_int(rng, min_sites, max_sites);
  cfg.boundary = uniform(rng) < 0.5 ? Boundary::open : Boundary::periodic;
  if (cfg.sites < 3) cfg.boundary = Boundary::open;
  cfg.gamma = uniform(rng, 0.0, 2.0);
  cfg.theta = uniform(rng, 0.0, 2.0 * pi);
  return cfg;
}

inline double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace mise::testing
