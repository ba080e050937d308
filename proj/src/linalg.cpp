#include "hdglab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <string>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hdglab {

DenseMatrix DenseMatrix::identity(int n) {
  DenseMatrix I(n, n);
  for (int i = 0; i < n; ++i) I(i, i) = 1.0;
  return I;
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

DenseMatrix DenseMatrix::operator*(const DenseMatrix& other) const {
  if (cols_ != other.rows_) fail(ErrorCode::invalid_parameter, "dense matmul shape mismatch");
  DenseMatrix r(rows_, other.cols_);
  for (int i = 0; i < rows_; ++i) {
    for (int k = 0; k < cols_; ++k) {
      const double aik = (*this)(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < other.cols_; ++j) r(i, j) += aik * other(k, j);
    }
  }
  return r;
}

std::vector<double> DenseMatrix::apply(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != cols_) fail(ErrorCode::invalid_parameter, "dense matvec shape mismatch");
  std::vector<double> y(rows_, 0.0);
  for (int i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (int j = 0; j < cols_; ++j) s += (*this)(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

double DenseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : a_) m = std::max(m, std::abs(v));
  return m;
}

namespace {

// In-place LU with partial pivoting; perm records row swaps.
void lu_factor_in_place(DenseMatrix& A, std::vector<int>& perm) {
  const int n = A.rows();
  if (n != A.cols()) fail(ErrorCode::invalid_parameter, "LU needs a square matrix");
  const double scale = std::max(A.max_abs(), 1e-300);
  perm.resize(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::abs(A(k, k));
    for (int i = k + 1; i < n; ++i) {
      const double v = std::abs(A(i, k));
      if (v > best) { best = v; piv = i; }
    }
    if (best < 1e-14 * scale)
      fail(ErrorCode::singular_matrix, "pivot " + std::to_string(best) + " below threshold");
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(A(k, j), A(piv, j));
      std::swap(perm[k], perm[piv]);
    }
    const double inv = 1.0 / A(k, k);
    for (int i = k + 1; i < n; ++i) {
      const double l = A(i, k) * inv;
      A(i, k) = l;
      if (l == 0.0) continue;
      for (int j = k + 1; j < n; ++j) A(i, j) -= l * A(k, j);
    }
  }
}

void lu_solve_vec(const DenseMatrix& lu, const std::vector<int>& perm, std::span<double> x) {
  const int n = lu.rows();
  std::vector<double> b(n);
  for (int i = 0; i < n; ++i) b[i] = x[perm[i]];
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int j = 0; j < i; ++j) s -= lu(i, j) * b[j];
    b[i] = s;
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < n; ++j) s -= lu(i, j) * b[j];
    b[i] = s / lu(i, i);
  }
  std::copy(b.begin(), b.end(), x.begin());
}

}  // namespace

LuFactor::LuFactor(DenseMatrix A) : lu_(std::move(A)) { lu_factor_in_place(lu_, perm_); }

void LuFactor::solve_in_place(std::span<double> x) const {
  if (static_cast<int>(x.size()) != lu_.rows()) fail(ErrorCode::invalid_parameter, "LU solve size mismatch");
  lu_solve_vec(lu_, perm_, x);
}

std::vector<double> LuFactor::solve(std::span<const double> b) const {
  std::vector<double> x(b.begin(), b.end());
  solve_in_place(x);
  return x;
}

DenseMatrix LuFactor::solve(const DenseMatrix& B) const {
  if (B.rows() != lu_.rows()) fail(ErrorCode::invalid_parameter, "LU solve size mismatch");
  DenseMatrix X = B;
  std::vector<double> colbuf(B.rows());
  for (int j = 0; j < B.cols(); ++j) {
    for (int i = 0; i < B.rows(); ++i) colbuf[i] = X(i, j);
    lu_solve_vec(lu_, perm_, colbuf);
    for (int i = 0; i < B.rows(); ++i) X(i, j) = colbuf[i];
  }
  return X;
}

DenseMatrix dense_solve(const DenseMatrix& A, const DenseMatrix& B) {
  if (A.rows() != B.rows()) fail(ErrorCode::invalid_parameter, "dense_solve shape mismatch");
  return LuFactor(A).solve(B);
}

std::vector<double> dense_solve(const DenseMatrix& A, std::span<const double> b) {
  if (A.rows() != static_cast<int>(b.size())) fail(ErrorCode::invalid_parameter, "dense_solve shape mismatch");
  return LuFactor(A).solve(b);
}

double SparseSymmetric::density_scale() const {
  double m = 0.0;
  for (double v : val) m = std::max(m, std::abs(v));
  return m;
}

SparseSymmetric sparse_from_triplets(int n, std::span<const int> rows, std::span<const int> cols,
                                     std::span<const double> vals) {
  if (rows.size() != cols.size() || rows.size() != vals.size())
    fail(ErrorCode::invalid_parameter, "triplet arrays must have equal length");
  struct Entry { int r, c; double v; };
  std::vector<Entry> entries;
  entries.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    int r = rows[k], c = cols[k];
    if (r < 0 || r >= n || c < 0 || c >= n) fail(ErrorCode::invalid_parameter, "triplet index out of range");
    if (r < c) std::swap(r, c);  // fold into lower triangle
    entries.push_back({r, c, vals[k]});
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.r != b.r ? a.r < b.r : a.c < b.c; });
  SparseSymmetric A;
  A.n = n;
  A.row_ptr.assign(n + 1, 0);
  for (std::size_t k = 0; k < entries.size();) {
    std::size_t j = k;
    double s = 0.0;
    while (j < entries.size() && entries[j].r == entries[k].r && entries[j].c == entries[k].c) s += entries[j++].v;
    A.col.push_back(entries[k].c);
    A.val.push_back(s);
    ++A.row_ptr[entries[k].r + 1];
    k = j;
  }
  for (int i = 0; i < n; ++i) A.row_ptr[i + 1] += A.row_ptr[i];
  return A;
}

int worker_thread_count() {
  if (const char* env = std::getenv("HDGLAB_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

// Full CSR expansion of a lower-triangle symmetric matrix: row-disjoint
// matvec writes keep the parallel product deterministic per row.
struct FullCsr {
  int n = 0;
  std::vector<int> row_ptr, col;
  std::vector<double> val;

  static FullCsr expand(const SparseSymmetric& A) {
    FullCsr f;
    f.n = A.n;
    std::vector<int> counts(A.n, 0);
    for (int i = 0; i < A.n; ++i) {
      for (int k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k) {
        const int j = A.col[k];
        ++counts[i];
        if (j != i) ++counts[j];
      }
    }
    f.row_ptr.assign(A.n + 1, 0);
    for (int i = 0; i < A.n; ++i) f.row_ptr[i + 1] = f.row_ptr[i] + counts[i];
    f.col.resize(f.row_ptr.back());
    f.val.resize(f.row_ptr.back());
    std::vector<int> cursor(f.row_ptr.begin(), f.row_ptr.end() - 1);
    for (int i = 0; i < A.n; ++i) {
      for (int k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k) {
        const int j = A.col[k];
        const double v = A.val[k];
        f.col[cursor[i]] = j;
        f.val[cursor[i]++] = v;
        if (j != i) {
          f.col[cursor[j]] = i;
          f.val[cursor[j]++] = v;
        }
      }
    }
    return f;
  }

  void apply(std::span<const double> x, std::span<double> y) const {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
      y[i] = s;
    }
  }
};

// Block-Jacobi preconditioner built from consecutive diagonal blocks.
struct BlockJacobi {
  int n = 0, bs = 1;
  std::vector<LuFactor> blocks;       // bs > 1
  std::vector<double> inv_diag;       // bs == 1

  static BlockJacobi build(const FullCsr& A, int bs) {
    BlockJacobi p;
    p.n = A.n;
    p.bs = bs;
    if (bs <= 1 || A.n % bs != 0) {
      p.bs = 1;
      p.inv_diag.assign(A.n, 1.0);
      for (int i = 0; i < A.n; ++i) {
        double d = 0.0;
        for (int k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k)
          if (A.col[k] == i) d = A.val[k];
        if (!(d > 0.0)) fail(ErrorCode::not_spd, "nonpositive diagonal entry in SPD solve");
        p.inv_diag[i] = 1.0 / d;
      }
      return p;
    }
    const int nb = A.n / bs;
    p.blocks.reserve(nb);
    for (int b = 0; b < nb; ++b) {
      DenseMatrix blk(bs, bs);
      bool diag_ok = true;
      for (int r = 0; r < bs; ++r) {
        const int i = b * bs + r;
        double d = 0.0;
        for (int k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k) {
          const int j = A.col[k];
          if (j == i) d = A.val[k];
          if (j >= b * bs && j < (b + 1) * bs) blk(r, j - b * bs) = A.val[k];
        }
        if (!(d > 0.0)) diag_ok = false;
      }
      if (!diag_ok) fail(ErrorCode::not_spd, "nonpositive diagonal entry in SPD solve");
      p.blocks.emplace_back(std::move(blk));
    }
    return p;
  }

  void apply(std::span<const double> r, std::span<double> z) const {
    if (bs == 1) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
      for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
      return;
    }
    const int nb = n / bs;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int b = 0; b < nb; ++b) {
      for (int k = 0; k < bs; ++k) z[b * bs + k] = r[b * bs + k];
      blocks[b].solve_in_place(std::span<double>(z.data() + b * bs, static_cast<std::size_t>(bs)));
    }
  }
};

// Chunked serial reduction: result does not depend on the thread count.
double dot(std::span<const double> a, std::span<const double> b) {
  constexpr std::size_t chunk = 4096;
  double total = 0.0;
  for (std::size_t base = 0; base < a.size(); base += chunk) {
    const std::size_t end = std::min(base + chunk, a.size());
    double s = 0.0;
    for (std::size_t i = base; i < end; ++i) s += a[i] * b[i];
    total += s;
  }
  return total;
}

}  // namespace

std::vector<double> spd_solve(const SparseSymmetric& A, std::span<const double> b,
                              const SpdOptions& options, SpdReport* report) {
  if (A.n != static_cast<int>(b.size())) fail(ErrorCode::invalid_parameter, "spd_solve size mismatch");
  if (!(options.tol > 0.0) || options.tol > 1e-6)
    fail(ErrorCode::invalid_parameter, "spd_solve tolerance must lie in (0, 1e-6]");

#ifdef _OPENMP
  omp_set_num_threads(worker_thread_count());
#endif

  const FullCsr full = FullCsr::expand(A);
  const BlockJacobi precond = BlockJacobi::build(full, options.block_size);

  const int n = A.n;
  std::vector<double> x(n, 0.0);
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) {
    if (report) *report = {0, 0.0};
    return x;
  }

  const int cap = options.max_iterations > 0
                      ? options.max_iterations
                      : static_cast<int>(50.0 * std::sqrt(static_cast<double>(n))) + 10;

  std::vector<double> r(b.begin(), b.end());
  std::vector<double> z(n), p(n), q(n);
  precond.apply(r, z);
  std::copy(z.begin(), z.end(), p.begin());
  double rz = dot(r, z);
  double rnorm = bnorm;

  for (int it = 1; it <= cap; ++it) {
    full.apply(p, q);
    const double pq = dot(p, q);
    if (pq <= 0.0) fail(ErrorCode::not_spd, "negative curvature direction in CG");
    const double alpha = rz / pq;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    rnorm = std::sqrt(dot(r, r));
    if (rnorm <= options.tol * bnorm) {
      if (report) *report = {it, rnorm / bnorm};
      return x;
    }
    precond.apply(r, z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw IterativeFailure("CG did not reach tolerance within " + std::to_string(cap) + " iterations",
                         rnorm / bnorm, cap);
}

}  // namespace hdglab
