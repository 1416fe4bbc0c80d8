#include <cmath>

#include <fmt/format.h>

#include "mise/ed.hpp"

namespace mise::ed {

namespace {

// Orthonormal basis of operators, stored as column-stacked D^2 vectors.
class OperatorSpan {
 public:
  OperatorSpan(Eigen::Index full, double tolerance) : q_(full, 0), tolerance_(tolerance) {}

  Eigen::Index size() const { return count_; }
  CVector column(Eigen::Index k) const { return q_.col(k); }

  /// Adds `v` when it is independent of the span; returns whether it was added.
  bool insert(CVector v) {
    const double norm = v.norm();
    if (!(norm > 0.0)) return false;
    for (int pass = 0; pass < 2; ++pass) {
      if (count_ > 0) {
        const auto q = q_.leftCols(count_);
        v -= q * (q.adjoint() * v);
      }
    }
    const double rest = v.norm();
    if (rest <= tolerance_ * norm) return false;
    if (count_ == q_.cols()) q_.conservativeResize(Eigen::NoChange, std::max<Eigen::Index>(16, 2 * count_));
    q_.col(count_++) = v / rest;
    return true;
  }

 private:
  CMatrix q_;
  Eigen::Index count_ = 0;
  double tolerance_;
};

CVector vec(const CMatrix& m) { return Eigen::Map<const CVector>(m.data(), m.size()); }

}  // namespace

AlgebraReport algebra_completeness(const SectorOperators& ops, int max_rounds, double tolerance) {
  const Eigen::Index D = ops.basis.size();
  if (static_cast<std::size_t>(D) * static_cast<std::size_t>(D) > kAlgebraSquaredLimit) {
    throw GuardError(fmt::format("algebra closure: D^2 = {} exceeds the limit {}", D * D, kAlgebraSquaredLimit));
  }
  std::vector<CMatrix> generators{CMatrix(ops.hamiltonian)};
  for (const auto& l : ops.jumps) {
    generators.emplace_back(l);
    generators.emplace_back(CMatrix(l.adjoint()));
  }

  AlgebraReport report;
  report.full_dimension = D * D;
  OperatorSpan span(D * D, tolerance);
  std::vector<CMatrix> frontier;
  for (const auto& g : generators) {
    if (span.insert(vec(g))) frontier.push_back(g);
  }
  while (!frontier.empty() && span.size() < report.full_dimension && report.rounds < max_rounds) {
    ++report.rounds;
    std::vector<CMatrix> next;
    for (const auto& x : frontier) {
      for (const auto& g : generators) {
        CMatrix y = g * x;
        if (span.insert(vec(y))) next.push_back(std::move(y));
      }
    }
    frontier = std::move(next);
  }
  report.dimension = span.size();
  report.converged = frontier.empty() || report.dimension == report.full_dimension;
  return report;
}

}  // namespace mise::ed
