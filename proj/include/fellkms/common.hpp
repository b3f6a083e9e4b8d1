#ifndef FELLKMS_COMMON_HPP
#define FELLKMS_COMMON_HPP

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace fellkms {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

/// Default tolerance for all real/complex comparisons. Comparisons are
/// relative with an absolute floor of 1: |a - b| <= tol * max(1, |a|, |b|).
inline constexpr double kDefaultTol = 1e-9;

inline bool approx_equal(double a, double b, double tol = kDefaultTol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

inline bool approx_equal(const Complex& a, const Complex& b,
                         double tol = kDefaultTol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

inline bool approx_zero(double a, double tol = kDefaultTol) {
  return std::abs(a) <= tol;
}

inline bool approx_zero(const Complex& a, double tol = kDefaultTol) {
  return std::abs(a) <= tol;
}

inline bool approx_zero(const Matrix& m, double tol = kDefaultTol) {
  return m.size() == 0 || m.cwiseAbs().maxCoeff() <= tol;
}

inline bool approx_equal(const Matrix& a, const Matrix& b,
                         double tol = kDefaultTol) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  double scale = std::max({1.0, a.cwiseAbs().maxCoeff(),
                           b.cwiseAbs().maxCoeff()});
  return a.size() == 0 || (a - b).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Largest singular value; the operator norm in the ambient matrix model.
inline double operator_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.jacobiSvd().singularValues()(0);
}

/// Smallest eigenvalue of the Hermitian part of a square matrix.
inline double min_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es((m + m.adjoint()) / 2.0);
  return es.eigenvalues()(0);
}

/// Column-major vectorisation, the coordinate map behind every span test.
inline Vector vectorize(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

inline Matrix unvectorize(const Vector& v, int rows, int cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

}  // namespace fellkms

#endif  // FELLKMS_COMMON_HPP
