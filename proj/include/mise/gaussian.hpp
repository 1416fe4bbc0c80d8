#pragma once

// Number-conserving fermionic Gaussian states stored as an L x N matrix B
// whose columns are the occupied quasimodes:
//
//   |B> = prod_j ( sum_i B_ij c_i^dag ) |0>.
//
// The state depends only on span(B); right-multiplying B by any invertible
// N x N matrix changes it at most by a scalar. Functions here keep B with
// orthonormal columns ("canonical") unless stated otherwise.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "mise/entropy.hpp"
#include "mise/model.hpp"
#include "mise/propagator.hpp"
#include "mise/types.hpp"

namespace mise {

template <typename Real>
using QuasimodeMatrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

/// C_ij = <c_i^dag c_j>.
template <typename Real>
using CorrelationMatrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kRankTolerance = 1e-12;
inline constexpr double kPivotTolerance = 1e-12;

namespace detail {

template <typename Derived>
using PlainMatrix = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Derived>
using RealOf = typename Eigen::NumTraits<typename Derived::Scalar>::Real;

inline void check_sites(std::span<const int> sites, Eigen::Index L) {
  std::vector<bool> seen(static_cast<std::size_t>(L), false);
  for (int s : sites) {
    if (s < 0 || s >= L) {
      throw ConfigError(fmt::format("site {} outside a chain of {} sites", s, L));
    }
    if (seen[static_cast<std::size_t>(s)]) {
      throw ConfigError(fmt::format("site {} listed twice", s));
    }
    seen[static_cast<std::size_t>(s)] = true;
  }
}

/// <a|B_j> for every column, where a lives on the two bond sites.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 1, Eigen::Dynamic> mode_overlaps(
    const Eigen::MatrixBase<Derived>& B, const JumpSpec& spec) {
  using Scalar = typename Derived::Scalar;
  const Scalar a0 = std::conj(Scalar(spec.mode(0)));
  const Scalar a1 = std::conj(Scalar(spec.mode(1)));
  return a0 * B.row(spec.bond.left) + a1 * B.row(spec.bond.right);
}

}  // namespace detail

/// Product state with one particle on each listed (zero-based) site.
template <typename Real = double>
QuasimodeMatrix<Real> init_product_state(std::span<const int> occupied, int sites) {
  detail::check_sites(occupied, sites);
  QuasimodeMatrix<Real> B = QuasimodeMatrix<Real>::Zero(sites, static_cast<Eigen::Index>(occupied.size()));
  for (std::size_t j = 0; j < occupied.size(); ++j) {
    B(occupied[j], static_cast<Eigen::Index>(j)) = Real(1);
  }
  return B;
}

/// Orthonormal basis Q of span(B), B = Q R.
///
/// Modified Gram-Schmidt with one re-orthogonalization pass whenever a
/// column loses more than half of its norm. Throws DegenerateStateError if
/// some |R_jj| falls below 1e-12 relative to the largest column norm.
template <typename Derived>
detail::PlainMatrix<Derived> canonicalize(const Eigen::MatrixBase<Derived>& B) {
  using Real = detail::RealOf<Derived>;
  detail::PlainMatrix<Derived> Q = B;
  const Eigen::Index N = Q.cols();
  if (N == 0) return Q;
  const Real scale = Q.colwise().norm().maxCoeff();
  const Real tolerance = Real(kRankTolerance) * scale;
  for (Eigen::Index j = 0; j < N; ++j) {
    Real before = Q.col(j).norm();
    Real after = before;
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index k = 0; k < j; ++k) {
        Q.col(j) -= Q.col(k).dot(Q.col(j)) * Q.col(k);
      }
      after = Q.col(j).norm();
      if (after > Real(0.5) * before) break;
      before = after;
    }
    if (!(after > tolerance)) {
      throw DegenerateStateError(
          fmt::format("quasimode {} is linearly dependent on the others (|R_jj| = {:.3e})", j,
                      static_cast<double>(after)));
    }
    Q.col(j) /= after;
  }
  return Q;
}

/// Apply the no-jump propagator and re-orthonormalize.
template <typename Derived, typename Real>
detail::PlainMatrix<Derived> evolve_nonunitary(const Eigen::MatrixBase<Derived>& B,
                                               const BasicPropagator<Real>& propagator) {
  return canonicalize(propagator.apply(B));
}

/// <P_m> = sum_j |<a|B_j>|^2 for canonical B.
template <typename Derived>
detail::RealOf<Derived> projector_expectation(const Eigen::MatrixBase<Derived>& B, const JumpSpec& spec) {
  if (B.cols() == 0) return 0;
  return detail::mode_overlaps(B, spec).squaredNorm();
}

/// gamma dt <P_m>: the probability of a jump on this bond within one step.
template <typename Derived>
detail::RealOf<Derived> jump_probability(const Eigen::MatrixBase<Derived>& B, const JumpSpec& spec,
                                         double gamma, double dt) {
  const auto p = static_cast<detail::RealOf<Derived>>(gamma * dt) * projector_expectation(B, spec);
  if (p > 1) {
    throw ProtocolError(fmt::format("jump probability {:.4f} exceeds 1; reduce dt", static_cast<double>(p)));
  }
  return p;
}

/// Apply L_m = exp(i theta n_right) |a><a| to a canonical B.
///
/// A Householder reflection in column space (a gauge change B -> B W)
/// leaves a single column, the pivot, overlapping a; the remaining columns
/// are then orthogonal to a and to each other, so replacing the pivot by a
/// gives the projected state already orthonormal, in O(L N). The feedback
/// phase is diagonal and keeps it so. By default the pivot is the column
/// with the largest overlap.
template <typename Derived>
detail::PlainMatrix<Derived> apply_jump(const Eigen::MatrixBase<Derived>& B, const JumpSpec& spec,
                                        std::optional<Eigen::Index> pivot = std::nullopt) {
  using Scalar = typename Derived::Scalar;
  using Real = detail::RealOf<Derived>;
  using Column = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const auto overlaps = detail::mode_overlaps(B, spec);
  if (overlaps.size() == 0) {
    throw ZeroProbabilityJumpError("jump on the vacuum");
  }
  const Real weight = overlaps.norm();
  if (weight < Real(kPivotTolerance)) {
    throw ZeroProbabilityJumpError(fmt::format(
        "no weight in the detected mode on bond ({}, {})", spec.bond.left, spec.bond.right));
  }
  Eigen::Index p = 0;
  if (pivot) {
    p = *pivot;
    if (p < 0 || p >= overlaps.size()) throw ConfigError("pivot column out of range");
  } else {
    overlaps.cwiseAbs().maxCoeff(&p);
  }
  // W = I - 2 u u^dag / |u|^2 maps x = overlaps^dag onto beta e_p.
  Column u = overlaps.adjoint();
  const Scalar xp = u(p);
  const Scalar phase = std::abs(xp) > Real(0) ? xp / std::abs(xp) : Scalar(1);
  u(p) += phase * weight;
  detail::PlainMatrix<Derived> out = B;
  out.noalias() -= (B * u) * (Scalar(Real(2) / u.squaredNorm()) * u.adjoint());
  out.col(p).setZero();
  out(spec.bond.left, p) = Scalar(spec.mode(0));
  out(spec.bond.right, p) = Scalar(spec.mode(1));
  out.row(spec.bond.right) *= Scalar(spec.feedback_factor());
  return out;
}

template <typename Derived>
detail::PlainMatrix<Derived> correlation_matrix(const Eigen::MatrixBase<Derived>& B) {
  return B.conjugate() * B.transpose();
}

/// Von Neumann entropy (nats) of the subsystem formed by `sites`.
template <typename Derived>
detail::RealOf<Derived> entanglement_entropy(const Eigen::MatrixBase<Derived>& C, std::span<const int> sites) {
  using Real = detail::RealOf<Derived>;
  detail::check_sites(sites, C.rows());
  const auto n = static_cast<Eigen::Index>(sites.size());
  if (n == 0) return 0;
  detail::PlainMatrix<Derived> sub(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) sub(a, b) = C(sites[a], sites[b]);
  }
  Eigen::SelfAdjointEigenSolver<detail::PlainMatrix<Derived>> solver(sub, Eigen::EigenvaluesOnly);
  Real s = 0;
  for (Eigen::Index k = 0; k < n; ++k) s += binary_entropy<Real>(solver.eigenvalues()(k));
  return s;
}

template <typename Derived>
Eigen::Matrix<detail::RealOf<Derived>, Eigen::Dynamic, 1> density_profile(const Eigen::MatrixBase<Derived>& C) {
  return C.diagonal().real();
}

/// n_k = (1/L) sum_ij exp(-i k (i - j)) C_ij on k = 2 pi m / L, m = 0..L-1.
///
/// With this sign the bond mode (e_i - i e_{i+1})/sqrt(2) carries weight
/// (1 + sin k)/L, i.e. it counts as right-moving.
template <typename Derived>
Eigen::Matrix<detail::RealOf<Derived>, Eigen::Dynamic, 1> momentum_occupation(
    const Eigen::MatrixBase<Derived>& C, Boundary bc) {
  using Real = detail::RealOf<Derived>;
  if (bc != Boundary::periodic) {
    throw ConfigError("momentum occupation requires periodic boundary conditions");
  }
  const Eigen::Index L = C.rows();
  detail::PlainMatrix<Derived> waves(L, L);  // waves(j, m) = exp(i k_m j)
  for (Eigen::Index m = 0; m < L; ++m) {
    const Real k = Real(2) * std::numbers::pi_v<Real> * Real(m) / Real(L);
    for (Eigen::Index j = 0; j < L; ++j) waves(j, m) = std::polar(Real(1), k * Real(j));
  }
  const detail::PlainMatrix<Derived> cw = C * waves;
  Eigen::Matrix<Real, Eigen::Dynamic, 1> nk(L);
  for (Eigen::Index m = 0; m < L; ++m) {
    nk(m) = (waves.col(m).dot(cw.col(m))).real() / Real(L);
  }
  return nk;
}

}  // namespace mise
