#include "qrwald/linalg.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdlib>

#include "qrwald/errors.hpp"

namespace qrwald {

bool all_finite(const Vector& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

bool all_finite(const Matrix& m) { return all_finite(m.data()); }

double dot(const Vector& a, const Vector& b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs(const Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

Vector matvec(const Matrix& A, const Vector& x) {
  assert(A.cols() == x.size());
  Vector out(A.rows(), 0.0);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const double* row = A.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < A.cols(); ++j) s += row[j] * x[j];
    out[i] = s;
  }
  return out;
}

Vector matvec_transposed(const Matrix& A, const Vector& x) {
  assert(A.rows() == x.size());
  Vector out(A.cols(), 0.0);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const double* row = A.row(i);
    const double xi = x[i];
    for (std::size_t j = 0; j < A.cols(); ++j) out[j] += row[j] * xi;
  }
  return out;
}

Matrix matmul(const Matrix& A, const Matrix& B) {
  assert(A.cols() == B.rows());
  Matrix C(A.rows(), B.cols(), 0.0);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t k = 0; k < A.cols(); ++k) {
      const double aik = A(i, k);
      if (aik == 0.0) continue;
      const double* brow = B.row(k);
      double* crow = C.row(i);
      for (std::size_t j = 0; j < B.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return C;
}

Matrix transpose(const Matrix& A) {
  Matrix T(A.cols(), A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) T(j, i) = A(i, j);
  return T;
}

double frobenius_norm(const Matrix& A) {
  double s = 0.0;
  for (double x : A.data()) s += x * x;
  return std::sqrt(s);
}

bool symmetric_within(const Matrix& A, double tol) {
  if (A.rows() != A.cols()) return false;
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = i + 1; j < A.cols(); ++j)
      if (std::fabs(A(i, j) - A(j, i)) > tol) return false;
  return true;
}

SpdSolver::SpdSolver(const Matrix& A, double pivot_rtol) {
  if (A.rows() != A.cols()) throw DomainError("SpdSolver: matrix must be square");
  n_ = A.rows();
  fac_ = A.data();

  double max_diag = 0.0;
  for (std::size_t i = 0; i < n_; ++i) max_diag = std::max(max_diag, A(i, i));
  if (!(max_diag > 0.0) || !std::isfinite(max_diag))
    throw SingularMatrix("SpdSolver: matrix has no positive diagonal entry");
  const double floor = pivot_rtol * max_diag;

  // Column-wise LDL^T on the lower triangle.
  for (std::size_t j = 0; j < n_; ++j) {
    double dj = fac_[j * n_ + j];
    for (std::size_t k = 0; k < j; ++k) {
      const double ljk = fac_[j * n_ + k];
      dj -= ljk * ljk * fac_[k * n_ + k];
    }
    if (!(dj > floor) || !std::isfinite(dj))
      throw SingularMatrix(strf("SpdSolver: pivot %.3e below floor %.3e at column %zu", dj, floor, j));
    fac_[j * n_ + j] = dj;
    for (std::size_t i = j + 1; i < n_; ++i) {
      double v = fac_[i * n_ + j];
      for (std::size_t k = 0; k < j; ++k)
        v -= fac_[i * n_ + k] * fac_[j * n_ + k] * fac_[k * n_ + k];
      fac_[i * n_ + j] = v / dj;
    }
  }
}

Vector SpdSolver::solve(const Vector& b) const {
  if (b.size() != n_) throw DomainError("SpdSolver::solve: size mismatch");
  Vector x = b;
  // L z = b
  for (std::size_t i = 0; i < n_; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= fac_[i * n_ + k] * x[k];
    x[i] = s;
  }
  // D w = z
  for (std::size_t i = 0; i < n_; ++i) x[i] /= fac_[i * n_ + i];
  // L^T x = w
  for (std::size_t i = n_; i-- > 0;) {
    double s = x[i];
    for (std::size_t k = i + 1; k < n_; ++k) s -= fac_[k * n_ + i] * x[k];
    x[i] = s;
  }
  return x;
}

Matrix SpdSolver::solve(const Matrix& B) const {
  if (B.rows() != n_) throw DomainError("SpdSolver::solve: size mismatch");
  Matrix X(B.rows(), B.cols());
  Vector col(n_);
  for (std::size_t j = 0; j < B.cols(); ++j) {
    for (std::size_t i = 0; i < n_; ++i) col[i] = B(i, j);
    Vector sol = solve(col);
    for (std::size_t i = 0; i < n_; ++i) X(i, j) = sol[i];
  }
  return X;
}

Matrix solve_spd(const Matrix& A, const Matrix& B) { return SpdSolver(A).solve(B); }

Vector solve_spd(const Matrix& A, const Vector& b) { return SpdSolver(A).solve(b); }

Vector solve_linear(Matrix A, Vector b) {
  if (A.rows() != A.cols() || A.rows() != b.size())
    throw DomainError("solve_linear: shape mismatch");
  const std::size_t n = A.rows();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::fabs(A(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::fabs(A(i, k)) > best) {
        best = std::fabs(A(i, k));
        piv = i;
      }
    }
    if (!(best > 0.0) || !std::isfinite(best))
      throw SingularMatrix("solve_linear: singular matrix");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(A(k, j), A(piv, j));
      std::swap(b[k], b[piv]);
    }
    const double akk = A(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = A(i, k) / akk;
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) A(i, j) -= f * A(k, j);
      b[i] -= f * b[k];
    }
  }
  Vector x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= A(i, j) * x[j];
    x[i] = s / A(i, i);
  }
  return x;
}

std::size_t spd_rank(Matrix A, double rtol) {
  if (A.rows() != A.cols()) throw DomainError("spd_rank: matrix must be square");
  const std::size_t n = A.rows();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;

  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, A(i, i));
  if (!(max_diag > 0.0)) return 0;
  const double tol = rtol * max_diag;

  // Outer-product Cholesky with diagonal pivoting; stop at the first pivot
  // under tolerance.
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = A(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      if (A(i, i) > best) {
        best = A(i, i);
        piv = i;
      }
    }
    if (!(best > tol)) return k;
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(A(k, j), A(piv, j));
      for (std::size_t i = 0; i < n; ++i) std::swap(A(i, k), A(i, piv));
    }
    const double lkk = std::sqrt(A(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double lik = A(i, k) / lkk;
      for (std::size_t j = k + 1; j <= i; ++j) {
        const double v = A(i, j) - lik * (A(j, k) / lkk);
        A(i, j) = v;
        A(j, i) = v;
      }
    }
  }
  return n;
}

}  // namespace qrwald
