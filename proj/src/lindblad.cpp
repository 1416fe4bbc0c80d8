#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <fmt/format.h>
#include <unsupported/Eigen/KroneckerProduct>

#include "mise/ed.hpp"

namespace mise::ed {

namespace {

SparseOperator identity(Eigen::Index n) {
  SparseOperator id(n, n);
  id.setIdentity();
  return id;
}

}  // namespace

CMatrix maximally_mixed(const SectorBasis& basis) {
  return CMatrix::Identity(basis.size(), basis.size()) / static_cast<double>(basis.size());
}

CMatrix pure_density_matrix(const CVector& psi) { return psi * psi.adjoint() / psi.squaredNorm(); }

RVector site_densities(const SectorBasis& basis, const CMatrix& rho) {
  RVector n = RVector::Zero(basis.sites());
  for (Eigen::Index k = 0; k < basis.size(); ++k) {
    const double w = rho(k, k).real();
    const auto s = basis.state(k);
    for (int i = 0; i < basis.sites(); ++i) {
      if ((s >> i) & 1U) n(i) += w;
    }
  }
  return n;
}

LindbladGenerator::LindbladGenerator(const SectorOperators& ops)
    : gamma_(ops.lattice.gamma), effective_(ops.effective), effective_adjoint_(ops.effective.adjoint()) {
  for (const auto& l : ops.jumps) {
    jumps_.push_back(l);
    jumps_adjoint_.push_back(l.adjoint());
  }
}

CMatrix LindbladGenerator::operator()(const CMatrix& rho) const {
  const Complex i(0.0, 1.0);
  CMatrix out = -i * (effective_ * rho) + i * (rho * effective_adjoint_);
  for (std::size_t m = 0; m < jumps_.size(); ++m) {
    out += gamma_ * (jumps_[m] * (rho * jumps_adjoint_[m]));
  }
  return out;
}

SparseOperator LindbladGenerator::superoperator() const {
  // vec(A X B) = (B^T kron A) vec(X) for column stacking.
  const Complex i(0.0, 1.0);
  const SparseOperator id = identity(dimension());
  SparseOperator s = -i * SparseOperator(Eigen::kroneckerProduct(id, effective_));
  s += i * SparseOperator(Eigen::kroneckerProduct(SparseOperator(effective_adjoint_.transpose()), id));
  for (std::size_t m = 0; m < jumps_.size(); ++m) {
    s += gamma_ * SparseOperator(Eigen::kroneckerProduct(SparseOperator(jumps_adjoint_[m].transpose()), jumps_[m]));
  }
  s.makeCompressed();
  return s;
}

namespace {

CMatrix rk4(const LindbladGenerator& f, const CMatrix& rho, double h) {
  const CMatrix k1 = f(rho);
  const CMatrix k2 = f(rho + 0.5 * h * k1);
  const CMatrix k3 = f(rho + 0.5 * h * k2);
  const CMatrix k4 = f(rho + h * k3);
  return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double min_eigenvalue(const CMatrix& rho) {
  const CMatrix herm = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(herm, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

}  // namespace

LindbladRun integrate_lindblad(const SectorOperators& ops, const CMatrix& rho0, const std::vector<double>& times,
                               std::optional<double> dt) {
  check_sector_guard(ops.basis.sites(), ops.basis.particles(), kLindbladSectorLimit, "lindblad engine");
  if (rho0.rows() != ops.basis.size() || rho0.cols() != ops.basis.size()) {
    throw ConfigError("initial density matrix does not match the sector");
  }
  if (!std::is_sorted(times.begin(), times.end()) || (!times.empty() && times.front() < 0.0)) {
    throw ConfigError("snapshot times must be sorted and non-negative");
  }
  const double gamma = ops.lattice.gamma;
  double h = dt.value_or(gamma > 0.0 ? std::min(0.01, 0.1 / gamma) : 0.01);
  if (!(h > 0.0)) throw ConfigError("lindblad step must be positive");
  const LindbladGenerator f(ops);
  const double trace0 = rho0.trace().real();

  for (int attempt = 0; attempt < 6; ++attempt, h *= 0.5) {
    LindbladRun run;
    run.dt = h;
    CMatrix rho = rho0;
    double t = 0.0;
    for (double target : times) {
      const double span = target - t;
      if (span > 0.0) {
        const auto n = static_cast<std::int64_t>(std::ceil(span / h - 1e-9));
        const double step = span / static_cast<double>(n);
        for (std::int64_t k = 0; k < n; ++k) rho = rk4(f, rho, step);
        t = target;
      }
      const double lowest = min_eigenvalue(rho);
      if (lowest < kPositivityFloor) {
        throw NumericError(fmt::format("density matrix lost positivity (eigenvalue {}) at t = {}", lowest, target));
      }
      run.snapshots.push_back({target, rho});
      run.trace_drift = std::max(run.trace_drift, std::abs(rho.trace().real() - trace0));
    }
    if (run.trace_drift < kTraceDriftLimit) return run;
  }
  throw NumericError(fmt::format("lindblad trace drift stays above {} after step refinement", kTraceDriftLimit));
}

CMatrix lindblad_steady_state(const SectorOperators& ops) {
  check_sector_guard(ops.basis.sites(), ops.basis.particles(), kLindbladSectorLimit, "lindblad steady state");
  const LindbladGenerator f(ops);
  const Eigen::Index D = ops.basis.size();
  const SparseOperator s = f.superoperator();

  // Row 0 (the rho_00 equation) is implied by the other diagonal equations
  // through trace conservation; use it for tr(rho) = 1 instead.
  std::vector<Eigen::Triplet<Complex>> triplets;
  for (Eigen::Index j = 0; j < s.outerSize(); ++j) {
    for (SparseOperator::InnerIterator it(s, j); it; ++it) {
      if (it.row() != 0) triplets.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (Eigen::Index k = 0; k < D; ++k) triplets.emplace_back(0, k * D + k, Complex(1.0));
  SparseOperator a(D * D, D * D);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();

  Eigen::SparseLU<SparseOperator, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw NumericError("lindblad steady state: LU factorization failed");
  CVector rhs = CVector::Zero(D * D);
  rhs(0) = 1.0;
  const CVector x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw NumericError("lindblad steady state: solve failed");
  const CMatrix rho = Eigen::Map<const CMatrix>(x.data(), D, D);
  return 0.5 * (rho + rho.adjoint());
}

}  // namespace mise::ed
