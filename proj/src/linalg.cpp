#include "mfdstag/linalg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "mfdstag/error.hpp"

namespace mfdstag::linalg {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::fabs(v));
  return m;
}

// --- dense --------------------------------------------------------------------

DenseMatrix DenseMatrix::identity(int n) {
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vector DenseMatrix::multiply(std::span<const double> x) const {
  Vector y(static_cast<std::size_t>(rows_), 0.0);
  for (int i = 0; i < rows_; ++i) y[i] = dot(row(i), x);
  return y;
}

DenseMatrix DenseMatrix::multiply(const DenseMatrix& other) const {
  DenseMatrix out(rows_, other.cols_);
  for (int i = 0; i < rows_; ++i) {
    for (int k = 0; k < cols_; ++k) {
      const double a = (*this)(i, k);
      if (a == 0.0) continue;
      for (int j = 0; j < other.cols_; ++j) out(i, j) += a * other(k, j);
    }
  }
  return out;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (int i = 0; i < rows_; ++i) {
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

bool DenseMatrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  for (int i = 0; i < rows_; ++i) {
    for (int j = i + 1; j < cols_; ++j) {
      if (std::fabs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    }
  }
  return true;
}

LuFactorization::LuFactorization(DenseMatrix a) : lu_(std::move(a)) {
  const int n = lu_.rows();
  if (n != lu_.cols()) throw SolverError("LU factorization needs a square matrix");
  perm_.resize(static_cast<std::size_t>(n));
  std::iota(perm_.begin(), perm_.end(), 0);
  double scale = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::fabs(lu_(i, j)));
  }
  if (scale == 0.0 && n > 0) throw SolverError("singular matrix (all zero)");
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i) {
      if (std::fabs(lu_(i, k)) > std::fabs(lu_(p, k))) p = i;
    }
    if (std::fabs(lu_(p, k)) <= 1e-14 * scale) {
      throw SolverError("singular matrix (zero pivot in column " + std::to_string(k) + ")");
    }
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
      std::swap(perm_[k], perm_[p]);
    }
    const double piv = lu_(k, k);
    for (int i = k + 1; i < n; ++i) {
      const double l = lu_(i, k) / piv;
      lu_(i, k) = l;
      if (l == 0.0) continue;
      for (int j = k + 1; j < n; ++j) lu_(i, j) -= l * lu_(k, j);
    }
  }
}

Vector LuFactorization::solve(std::span<const double> b) const {
  const int n = lu_.rows();
  Vector x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double s = b[perm_[i]];
    for (int j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
    x[i] = s;
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int j = i + 1; j < n; ++j) s -= lu_(i, j) * x[j];
    x[i] = s / lu_(i, i);
  }
  return x;
}

Vector dense_solve(const DenseMatrix& a, std::span<const double> b) {
  if (static_cast<int>(b.size()) != a.rows()) throw SolverError("dense_solve: size mismatch");
  return LuFactorization(a).solve(b);
}

bool is_positive_definite(const DenseMatrix& a) {
  const int n = a.rows();
  DenseMatrix l(n, n);
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) return false;
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return true;
}

// --- sparse -------------------------------------------------------------------

SparseMatrix SparseMatrix::from_triplets(int rows, int cols, std::vector<Triplet> entries) {
  SparseMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  std::stable_sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  m.offsets_.assign(static_cast<std::size_t>(rows) + 1, 0);
  for (std::size_t k = 0; k < entries.size();) {
    const Triplet& t = entries[k];
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
      throw SolverError("sparse entry out of range");
    }
    double v = 0.0;
    std::size_t e = k;
    while (e < entries.size() && entries[e].row == t.row && entries[e].col == t.col) {
      v += entries[e].value;
      ++e;
    }
    m.cols_idx_.push_back(t.col);
    m.values_.push_back(v);
    ++m.offsets_[static_cast<std::size_t>(t.row) + 1];
    k = e;
  }
  for (int i = 0; i < rows; ++i) m.offsets_[i + 1] += m.offsets_[i];
  return m;
}

double SparseMatrix::at(int i, int j) const {
  const auto first = cols_idx_.begin() + offsets_[i];
  const auto last = cols_idx_.begin() + offsets_[i + 1];
  const auto it = std::lower_bound(first, last, j);
  return it != last && *it == j ? values_[static_cast<std::size_t>(it - cols_idx_.begin())]
                                : 0.0;
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (int i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) s += values_[k] * x[cols_idx_[k]];
    y[i] = s;
  }
}

Vector SparseMatrix::multiply(std::span<const double> x) const {
  Vector y(static_cast<std::size_t>(rows_));
  multiply(x, y);
  return y;
}

Vector SparseMatrix::diagonal() const {
  Vector d(static_cast<std::size_t>(std::min(rows_, cols_)), 0.0);
  for (int i = 0; i < static_cast<int>(d.size()); ++i) d[i] = at(i, i);
  return d;
}

bool SparseMatrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  for (int i = 0; i < rows_; ++i) {
    for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      const int j = cols_idx_[k];
      const auto first = cols_idx_.begin() + offsets_[j];
      const auto last = cols_idx_.begin() + offsets_[j + 1];
      const auto it = std::lower_bound(first, last, i);
      if (it == last || *it != i) {
        if (std::fabs(values_[k]) > tol || tol == 0.0) return false;
        continue;
      }
      const double other = values_[static_cast<std::size_t>(it - cols_idx_.begin())];
      if (tol == 0.0 ? other != values_[k] : std::fabs(other - values_[k]) > tol) return false;
    }
  }
  return true;
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix d(rows_, cols_);
  for (int i = 0; i < rows_; ++i) {
    for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) d(i, cols_idx_[k]) = values_[k];
  }
  return d;
}

// --- Krylov solvers -----------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double true_relative_residual(const SparseMatrix& a, std::span<const double> x,
                              std::span<const double> b, double bnorm) {
  Vector r = a.multiply(x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  return norm2(r) / bnorm;
}

void check_square(const SparseMatrix& a, std::span<const double> b, const char* who) {
  if (a.rows() != a.cols() || static_cast<std::size_t>(a.rows()) != b.size()) {
    throw SolverError(std::string(who) + ": dimension mismatch");
  }
}

}  // namespace

SolveResult cg(const SparseMatrix& a, std::span<const double> b, double tol, int maxit,
               Preconditioner preconditioner) {
  check_square(a, b, "cg");
  const auto t0 = Clock::now();
  const std::size_t n = b.size();
  SolveResult out;
  out.x.assign(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    out.report.converged = true;
    return out;
  }

  Vector inv_diag(n, 1.0);
  if (preconditioner == Preconditioner::Jacobi) {
    const Vector d = a.diagonal();
    for (std::size_t i = 0; i < n; ++i) {
      if (!(d[i] > 0.0)) {
        out.report.breakdown = true;
        out.report.relative_residual = 1.0;
        out.report.message = "non-positive diagonal entry at row " + std::to_string(i);
        out.report.wall_seconds = seconds_since(t0);
        return out;
      }
      inv_diag[i] = 1.0 / d[i];
    }
  }

  Vector r(b.begin(), b.end());
  Vector z(n), p(n), ap(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = dot(r, z);
  int it = 0;
  double rel = 1.0;
  while (it < maxit) {
    a.multiply(p, ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) {
      out.report.breakdown = true;
      out.report.message = "p^T A p = " + std::to_string(pap) + " at iteration " +
                           std::to_string(it);
      break;
    }
    const double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      out.x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    ++it;
    rel = norm2(r) / bnorm;
    if (rel <= tol) {
      // confirm on the true residual; keep iterating if drift hides it
      rel = true_relative_residual(a, out.x, b, bnorm);
      if (rel <= tol) break;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  out.report.iterations = it;
  out.report.relative_residual = true_relative_residual(a, out.x, b, bnorm);
  out.report.converged = !out.report.breakdown && out.report.relative_residual <= tol;
  if (!out.report.converged && out.report.message.empty()) {
    out.report.message = "no convergence in " + std::to_string(maxit) + " iterations";
  }
  out.report.wall_seconds = seconds_since(t0);
  return out;
}

SolveResult minres(const SparseMatrix& a, std::span<const double> b, double tol, int maxit) {
  check_square(a, b, "minres");
  const auto t0 = Clock::now();
  const std::size_t n = b.size();
  SolveResult out;
  out.x.assign(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    out.report.converged = true;
    return out;
  }

  Vector v_prev(n, 0.0), v(b.begin(), b.end()), v_next(n);
  Vector w_prev2(n, 0.0), w_prev(n, 0.0), w(n);
  double beta = bnorm;
  for (double& e : v) e /= beta;
  double eta = beta;
  double gamma_prev = 1.0, gamma = 1.0;
  double sigma_prev = 0.0, sigma = 0.0;

  int it = 0;
  while (it < maxit) {
    a.multiply(v, v_next);
    const double alpha = dot(v, v_next);
    for (std::size_t i = 0; i < n; ++i) v_next[i] -= alpha * v[i] + beta * v_prev[i];
    const double beta_next = norm2(v_next);

    const double delta = gamma * alpha - gamma_prev * sigma * beta;
    const double rho1 = std::hypot(delta, beta_next);
    const double rho2 = sigma * alpha + gamma_prev * gamma * beta;
    const double rho3 = sigma_prev * beta;
    if (rho1 == 0.0) {
      out.report.message = "MINRES breakdown (singular system)";
      break;
    }
    gamma_prev = gamma;
    sigma_prev = sigma;
    gamma = delta / rho1;
    sigma = beta_next / rho1;

    for (std::size_t i = 0; i < n; ++i) {
      w[i] = (v[i] - rho3 * w_prev2[i] - rho2 * w_prev[i]) / rho1;
      out.x[i] += gamma * eta * w[i];
    }
    eta = -sigma * eta;
    ++it;

    std::swap(w_prev2, w_prev);
    std::swap(w_prev, w);
    if (std::fabs(eta) / bnorm <= tol || beta_next == 0.0) {
      const double rel = true_relative_residual(a, out.x, b, bnorm);
      if (rel <= tol || beta_next == 0.0) break;
    }
    std::swap(v_prev, v);
    std::swap(v, v_next);
    for (double& e : v) e /= beta_next;
    beta = beta_next;
  }
  out.report.iterations = it;
  out.report.relative_residual = true_relative_residual(a, out.x, b, bnorm);
  out.report.converged = out.report.relative_residual <= tol;
  if (!out.report.converged && out.report.message.empty()) {
    out.report.message = "no convergence in " + std::to_string(maxit) + " iterations";
  }
  out.report.wall_seconds = seconds_since(t0);
  return out;
}

double smallest_eigenvalue_estimate(const DenseMatrix& a, std::span<const double> metric,
                                    int maxit, double tol) {
  const int n = a.rows();
  if (n == 0 || a.cols() != n || static_cast<int>(metric.size()) != n) {
    throw SolverError("smallest_eigenvalue_estimate: dimension mismatch");
  }
  for (double d : metric) {
    if (!(d > 0.0)) throw SolverError("metric must be positive");
  }
  const LuFactorization lu(a);
  // Deterministic start with components in every direction.
  Vector x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[i] = 1.0 + 0.1 * std::sin(1.0 + 3.0 * i);
  auto d_norm = [&](const Vector& v) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += metric[i] * v[i] * v[i];
    return std::sqrt(s);
  };
  double lambda = 0.0;
  Vector dx(static_cast<std::size_t>(n));
  for (int k = 0; k < maxit; ++k) {
    const double xn = d_norm(x);
    for (int i = 0; i < n; ++i) x[i] /= xn;
    for (int i = 0; i < n; ++i) dx[i] = metric[i] * x[i];
    Vector y = lu.solve(dx);
    // x^T D A^-1 D x approximates 1 / lambda_min once x is D-normalized.
    const double mu = dot(dx, y);
    const double next = 1.0 / mu;
    x = std::move(y);
    if (k > 0 && std::fabs(next - lambda) <= tol * std::fabs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  // Final Rayleigh quotient on the last iterate.
  const Vector ax = a.multiply(x);
  double num = dot(x, ax);
  double den = 0.0;
  for (int i = 0; i < n; ++i) den += metric[i] * x[i] * x[i];
  return std::min(lambda, num / den);
}

}  // namespace mfdstag::linalg
