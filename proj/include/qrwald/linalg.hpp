#pragma once

#include <cstddef>
#include <vector>

namespace qrwald {

using Vector = std::vector<double>;

// Dense row-major matrix. Small dimensions throughout (design matrices are
// n x d with d rarely above a few dozen), so no blocking or views.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

double dot(const Vector& a, const Vector& b);
double max_abs(const Vector& v);

Vector matvec(const Matrix& A, const Vector& x);             // A x
Vector matvec_transposed(const Matrix& A, const Vector& x);  // A^T x
Matrix matmul(const Matrix& A, const Matrix& B);
Matrix transpose(const Matrix& A);
double frobenius_norm(const Matrix& A);
bool symmetric_within(const Matrix& A, double tol);

// LDL^T factorization of a symmetric positive definite matrix; factor once,
// solve many right-hand sides. A pivot falling below pivot_rtol times the
// largest diagonal entry of A raises SingularMatrix.
class SpdSolver {
 public:
  explicit SpdSolver(const Matrix& A, double pivot_rtol = 1e-12);
  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& B) const;

 private:
  std::size_t n_ = 0;
  std::vector<double> fac_;  // L below the diagonal, D on it
};

Matrix solve_spd(const Matrix& A, const Matrix& B);
Vector solve_spd(const Matrix& A, const Vector& b);

// General square solve, Gaussian elimination with partial pivoting.
Vector solve_linear(Matrix A, Vector b);

// Numerical rank of a symmetric PSD matrix via diagonally pivoted Cholesky.
std::size_t spd_rank(Matrix A, double rtol = 1e-12);

}  // namespace qrwald
