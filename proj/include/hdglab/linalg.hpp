// Dense local solves (LU with partial pivoting) and a preconditioned CG for
// the condensed symmetric positive definite skeleton systems.
#pragma once

#include <span>
#include <vector>

#include "hdglab/errors.hpp"

namespace hdglab {

class DenseMatrix {
public:
  DenseMatrix() = default;
  DenseMatrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {}

  static DenseMatrix identity(int n);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }

  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }

  std::span<double> row(int i) { return {a_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> row(int i) const { return {a_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)}; }

  DenseMatrix transposed() const;
  DenseMatrix operator*(const DenseMatrix& other) const;
  std::vector<double> apply(std::span<const double> x) const;

  double max_abs() const;

private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> a_;
};

/// Solve A X = B by LU with partial pivoting. Throws singular-matrix when a
/// pivot falls below 1e-14 times the magnitude scale of A.
DenseMatrix dense_solve(const DenseMatrix& A, const DenseMatrix& B);
std::vector<double> dense_solve(const DenseMatrix& A, std::span<const double> b);

/// Cached LU factorization for repeated solves against the same matrix.
class LuFactor {
public:
  LuFactor() = default;
  explicit LuFactor(DenseMatrix A);

  int size() const noexcept { return lu_.rows(); }
  void solve_in_place(std::span<double> x) const;
  std::vector<double> solve(std::span<const double> b) const;
  DenseMatrix solve(const DenseMatrix& B) const;

private:
  DenseMatrix lu_;
  std::vector<int> perm_;
};

/// Symmetric sparse matrix in CSR form storing the lower triangle only
/// (diagonal included); the upper triangle is implied.
struct SparseSymmetric {
  int n = 0;
  std::vector<int> row_ptr;  // size n+1
  std::vector<int> col;
  std::vector<double> val;

  double density_scale() const;  // max |a_ij|, for diagnostics
};

/// Assemble a SparseSymmetric from coordinate triplets (duplicates summed).
/// Entries with i < j are folded into the lower triangle.
SparseSymmetric sparse_from_triplets(int n, std::span<const int> rows, std::span<const int> cols,
                                     std::span<const double> vals);

struct SpdOptions {
  double tol = 1e-12;      // relative residual target, must be in (0, 1e-6]
  int block_size = 1;      // block-Jacobi block size (1 = diagonal)
  int max_iterations = 0;  // 0 -> 50 * sqrt(n)
};

struct SpdReport {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Preconditioned conjugate gradients for an SPD matrix. Throws not-SPD on
/// detected negative curvature and iterative-failure (with the achieved
/// residual) when the iteration cap is hit.
std::vector<double> spd_solve(const SparseSymmetric& A, std::span<const double> b,
                              const SpdOptions& options = {}, SpdReport* report = nullptr);

/// Thread count for row-parallel kernels: HDGLAB_THREADS, else hardware.
int worker_thread_count();

}  // namespace hdglab
