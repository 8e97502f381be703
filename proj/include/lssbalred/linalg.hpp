#pragma once

// Dense linear-algebra helpers shared by every module.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lssbalred {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thrown for malformed inputs (shape mismatch, non-finite data, bad options).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a certificate or grammian could not be found within budget.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace linalg {

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline bool is_symmetric(const Matrix& m, double rel_tol = 1e-10) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

/// Eigenvalues of a symmetric matrix, ascending.
inline Vector sym_eigenvalues(const Matrix& m) {
  if (m.size() == 0) return Vector();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double max_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return -std::numeric_limits<double>::infinity();
  return sym_eigenvalues(m).maxCoeff();
}

inline double min_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return std::numeric_limits<double>::infinity();
  return sym_eigenvalues(m).minCoeff();
}

/// Rank tolerance tau = max(rows, cols) * sigma_max * 1e-10.
inline double rank_tolerance(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  return static_cast<double>(std::max(m.rows(), m.cols())) * smax * 1e-10;
}

/// Orthonormal basis of the column space of `m`, numerical rank at `tol`
/// (negative means the default rank tolerance).
inline Matrix range_basis(const Matrix& m, double tol = -1.0) {
  if (m.cols() == 0 || m.rows() == 0) return Matrix(m.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  if (tol < 0) {
    tol = static_cast<double>(std::max(m.rows(), m.cols())) * (s.size() ? s(0) : 0.0) * 1e-10;
  }
  Index r = 0;
  while (r < s.size() && s(r) > tol) ++r;
  return svd.matrixU().leftCols(r);
}

/// Orthonormal basis of the orthogonal complement of span(basis).
/// `basis` must have orthonormal columns.
inline Matrix orthogonal_complement(const Matrix& basis, Index n) {
  const Index r = basis.cols();
  if (r == 0) return Matrix::Identity(n, n);
  if (r >= n) return Matrix(n, 0);
  Eigen::HouseholderQR<Matrix> qr(basis);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  return q.rightCols(n - r);
}

/// Orthonormal completion [basis, complement] as a square orthogonal matrix.
inline Matrix complete_basis(const Matrix& basis, Index n) {
  Matrix t(n, n);
  t.leftCols(basis.cols()) = basis;
  t.rightCols(n - basis.cols()) = orthogonal_complement(basis, n);
  return t;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Column-major vectorization.
inline Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

inline Matrix unvec(const Vector& v, Index rows, Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

/// Spectral radius. Dense eigenvalues up to dimension 2500, power iteration above.
inline double spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() <= 2500) {
    Eigen::EigenSolver<Matrix> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  // Power iteration on m^T m would give the norm, not the radius; iterate
  // with renormalization and use the geometric growth of ||m^k v||.
  Vector v = Vector::Ones(m.rows()).normalized();
  double estimate = 0.0;
  for (int k = 0; k < 100000; ++k) {
    Vector w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (std::abs(norm - estimate) <= 1e-10 * std::max(1.0, norm)) return norm;
    estimate = norm;
  }
  return estimate;
}

// Symmetric vectorization with sqrt(2) off-diagonal weights, so that
// svec(A).dot(svec(B)) == trace(A * B) for symmetric A, B.
inline Index svec_size(Index n) { return n * (n + 1) / 2; }

inline Vector svec(const Matrix& m) {
  const Index n = m.rows();
  Vector v(svec_size(n));
  Index k = 0;
  constexpr double kRoot2 = 1.4142135623730951;
  for (Index j = 0; j < n; ++j) {
    v(k++) = m(j, j);
    for (Index i = j + 1; i < n; ++i) v(k++) = kRoot2 * 0.5 * (m(i, j) + m(j, i));
  }
  return v;
}

inline Matrix smat(const Vector& v, Index n) {
  Matrix m(n, n);
  Index k = 0;
  constexpr double kInvRoot2 = 0.70710678118654752;
  for (Index j = 0; j < n; ++j) {
    m(j, j) = v(k++);
    for (Index i = j + 1; i < n; ++i) {
      m(i, j) = kInvRoot2 * v(k++);
      m(j, i) = m(i, j);
    }
  }
  return m;
}

/// Lower Cholesky factor; throws InputError if `m` is not positive definite.
inline Matrix cholesky_lower(const Matrix& m, const std::string& what) {
  Eigen::LLT<Matrix> llt(symmetrize(m));
  if (llt.info() != Eigen::Success) throw InputError(what + " is not positive definite");
  return llt.matrixL();
}

/// 2-norm condition number of a symmetric positive definite matrix.
inline double spd_condition(const Matrix& m) {
  const Vector ev = sym_eigenvalues(m);
  if (ev.size() == 0) return 1.0;
  if (ev(0) <= 0) return std::numeric_limits<double>::infinity();
  return ev(ev.size() - 1) / ev(0);
}

inline double relative_error(const Matrix& a, const Matrix& b) {
  const double scale = std::max({1e-300, a.norm(), b.norm()});
  return (a - b).norm() / scale;
}

}  // namespace linalg
}  // namespace lssbalred
