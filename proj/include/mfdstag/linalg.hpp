#pragma once

#include <span>
#include <string>
#include <vector>

namespace mfdstag::linalg {

using Vector = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);

// Row-major dense matrix for local (cell-sized) work and desk-scale oracles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  static DenseMatrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }
  std::span<const double> row(int i) const {
    return {data_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)};
  }

  Vector multiply(std::span<const double> x) const;
  DenseMatrix multiply(const DenseMatrix& other) const;
  DenseMatrix transpose() const;
  bool is_symmetric(double tol = 0.0) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Partial-pivot LU. Throws SolverError if a pivot vanishes (relative to the
// largest entry of its column).
class LuFactorization {
 public:
  explicit LuFactorization(DenseMatrix a);
  Vector solve(std::span<const double> b) const;
  int size() const { return lu_.rows(); }

 private:
  DenseMatrix lu_;
  std::vector<int> perm_;
};

Vector dense_solve(const DenseMatrix& a, std::span<const double> b);

// Returns false unless the symmetric matrix admits a Cholesky factorization.
bool is_positive_definite(const DenseMatrix& a);

struct Triplet {
  int row;
  int col;
  double value;
};

// Compressed row storage with sorted, unique column indices per row.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  // Duplicate (row, col) entries are summed in input order.
  static SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> entries);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  const std::vector<int>& row_offsets() const { return offsets_; }
  const std::vector<int>& col_indices() const { return cols_idx_; }
  const std::vector<double>& values() const { return values_; }

  double at(int i, int j) const;
  void multiply(std::span<const double> x, std::span<double> y) const;
  Vector multiply(std::span<const double> x) const;
  Vector diagonal() const;
  // Exact comparison of structure and values when tol == 0.
  bool is_symmetric(double tol = 0.0) const;
  DenseMatrix to_dense() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<int> offsets_{0};
  std::vector<int> cols_idx_;
  std::vector<double> values_;
};

struct SolverReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  bool breakdown = false;  // CG only: p^T A p <= 0 was met
  double wall_seconds = 0.0;
  std::string message;
};

struct SolveResult {
  Vector x;
  SolverReport report;
};

enum class Preconditioner { None, Jacobi };

// Preconditioned conjugate gradients. Convergence is declared on the true
// relative residual ||b - Ax|| / ||b|| <= tol.
SolveResult cg(const SparseMatrix& a, std::span<const double> b, double tol, int maxit,
               Preconditioner preconditioner = Preconditioner::Jacobi);

// Unpreconditioned MINRES for symmetric, possibly indefinite systems.
SolveResult minres(const SparseMatrix& a, std::span<const double> b, double tol, int maxit);

// Smallest eigenvalue of A x = lambda D x for SPD A and positive diagonal D,
// by inverse iteration in the D inner product.
double smallest_eigenvalue_estimate(const DenseMatrix& a, std::span<const double> metric,
                                    int maxit, double tol = 1e-13);

}  // namespace mfdstag::linalg
