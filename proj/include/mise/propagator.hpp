#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace mise {

enum class ExponentialMethod { eigendecomposition, scaling_and_squaring };

inline constexpr double kEigenvectorConditionLimit = 1e8;

/// exp(A) for a generically diagonalizable complex matrix.
///
/// Uses A = V D V^{-1} when cond(V) stays below `condition_limit`, otherwise
/// Eigen's scaling-and-squaring Pade exponential. Non-Hermitian hopping with
/// open ends has cond(V) ~ (t_L/t_R)^{L/2}, so large or strongly monitored
/// chains take the fallback.
template <typename Real>
Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic> matrix_exponential(
    const Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>& generator,
    ExponentialMethod* method = nullptr, Real* condition = nullptr,
    Real condition_limit = Real(kEigenvectorConditionLimit)) {
  using Matrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::ComplexEigenSolver<Matrix> solver(generator, true);
  Real cond = std::numeric_limits<Real>::infinity();
  if (solver.info() == Eigen::Success) {
    Eigen::JacobiSVD<Matrix> svd(solver.eigenvectors());
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) > Real(0)) cond = sv(0) / sv(sv.size() - 1);
  }
  if (condition) *condition = cond;
  if (cond <= condition_limit) {
    if (method) *method = ExponentialMethod::eigendecomposition;
    const Matrix& v = solver.eigenvectors();
    Matrix scaled = v * solver.eigenvalues().array().exp().matrix().asDiagonal();
    // exp(A) = V e^D V^{-1}  <=>  exp(A)^T = V^{-T} (V e^D)^T
    return v.transpose().partialPivLu().solve(scaled.transpose()).transpose();
  }
  if (method) *method = ExponentialMethod::scaling_and_squaring;
  return generator.exp();
}

/// One-step no-jump propagator exp(-i h dt) for a single-particle matrix h.
///
/// The exponential of a nearest-neighbour generator decays like
/// (dt)^d / d! with the (cyclic) distance d from the diagonal, so it is
/// stored as a band of cyclic diagonals when that band is narrow. Dropped
/// entries are below `band_tolerance` relative to the largest entry, or below
/// the rounding floor L * eps * cond(V) of the eigendecomposition when that
/// is larger: entries under that floor are noise of the exponential itself.
template <typename Real>
class BasicPropagator {
 public:
  using Complex = std::complex<Real>;
  using Matrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;

  BasicPropagator(const Matrix& single_particle, Real dt, Real band_tolerance = Real(1e-16))
      : dt_(dt) {
    const Matrix generator = single_particle * Complex(Real(0), -dt);
    matrix_ = matrix_exponential<Real>(generator, &method_, &condition_);
    build_band(band_tolerance);
  }

  const Matrix& matrix() const { return matrix_; }
  Real dt() const { return dt_; }
  ExponentialMethod method() const { return method_; }
  Real eigenvector_condition() const { return condition_; }

  /// Half-width of the stored band, or -1 when the dense matrix is used.
  int bandwidth() const { return bandwidth_; }
  /// Relative size below which entries were dropped from the band.
  Real truncation() const { return truncation_; }

  template <typename Derived>
  Matrix apply(const Eigen::MatrixBase<Derived>& columns) const {
    if (bandwidth_ < 0) return matrix_ * columns;
    const Eigen::Index L = matrix_.rows();
    Matrix out = Matrix::Zero(L, columns.cols());
    for (int d = -bandwidth_; d <= bandwidth_; ++d) {
      const Vector& c = diagonals_[static_cast<std::size_t>(d + bandwidth_)];
      // out(i) += U(i, (i + d) mod L) * B((i + d) mod L)
      const Eigen::Index shift = (d % L + L) % L;
      const Eigen::Index head = L - shift;
      out.topRows(head).noalias() += c.head(head).asDiagonal() * columns.bottomRows(head);
      if (shift > 0) {
        out.bottomRows(shift).noalias() += c.tail(shift).asDiagonal() * columns.topRows(shift);
      }
    }
    return out;
  }

 private:
  void build_band(Real tolerance) {
    if (method_ == ExponentialMethod::eigendecomposition) {
      const auto L = static_cast<Real>(matrix_.rows());
      tolerance = std::max(tolerance, L * std::numeric_limits<Real>::epsilon() * condition_);
    }
    truncation_ = tolerance;
    const Eigen::Index L = matrix_.rows();
    const Real scale = matrix_.cwiseAbs().maxCoeff();
    Eigen::Index width = 0;
    for (Eigen::Index i = 0; i < L; ++i) {
      for (Eigen::Index j = 0; j < L; ++j) {
        const Eigen::Index d = std::abs(i - j);
        const Eigen::Index cyclic = std::min(d, L - d);
        if (cyclic > width && std::abs(matrix_(i, j)) > tolerance * scale) width = cyclic;
      }
    }
    if (4 * width + 2 >= L) {
      bandwidth_ = -1;
      return;
    }
    bandwidth_ = static_cast<int>(width);
    diagonals_.clear();
    for (int d = -bandwidth_; d <= bandwidth_; ++d) {
      Vector c(L);
      for (Eigen::Index i = 0; i < L; ++i) c(i) = matrix_(i, ((i + d) % L + L) % L);
      diagonals_.push_back(std::move(c));
    }
  }

  Real dt_;
  Matrix matrix_;
  ExponentialMethod method_ = ExponentialMethod::eigendecomposition;
  Real condition_ = 0;
  int bandwidth_ = -1;
  Real truncation_ = 0;
  std::vector<Vector> diagonals_;
};

using Propagator = BasicPropagator<double>;

}  // namespace mise
