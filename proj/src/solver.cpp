#include "mfdstag/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfdstag/error.hpp"

namespace mfdstag {

namespace {

double domain_area(const SaddleSystem& sys) {
  double a = 0.0;
  for (const auto& ops : sys.local) a += ops.area;
  return a;
}

void fill_sides_from_faces(const Mesh& mesh, Solution& sol) {
  sol.v_side.clear();
  for (int c = 0; c < mesh.num_cells(); ++c) {
    for (int f : mesh.cell_faces(c)) sol.v_side.push_back(sol.v[f]);
  }
}

}  // namespace

Solution solve_saddle(const Mesh& mesh, const SaddleSystem& sys, double tol, int maxit) {
  auto result = linalg::minres(sys.block, sys.rhs, tol, maxit);
  if (!result.report.converged) {
    throw SolverError("MINRES did not converge: " + result.report.message + " (residual " +
                      std::to_string(result.report.relative_residual) + ")");
  }
  Solution sol;
  const auto& x = result.x;
  sol.v.assign(x.begin(), x.begin() + sys.num_faces);
  sol.p.assign(x.begin() + sys.num_faces, x.begin() + sys.num_faces + sys.num_cells);
  if (sys.pure_neumann) sol.multiplier = x.back();
  sol.report = result.report;
  fill_sides_from_faces(mesh, sol);
  return sol;
}

HybridSystem hybridize(const Mesh& mesh, const SaddleSystem& sys) {
  HybridSystem hyb;
  const int nf = sys.num_faces;
  const int nc = sys.num_cells;
  hyb.multiplier_of_face.assign(static_cast<std::size_t>(nf), -1);
  int nmult = 0;
  for (int f = 0; f < nf; ++f) {
    if (sys.face_kind[f] == FaceKind::Interior) hyb.multiplier_of_face[f] = nmult++;
  }
  if (sys.pure_neumann) {
    if (nc == 1) throw SolverError("pure-Neumann problem on a single cell has no hybrid form");
    hyb.source_shift = -sys.compatibility_defect / domain_area(sys);
  }

  std::vector<linalg::Triplet> entries;
  hyb.rhs.assign(static_cast<std::size_t>(nmult), 0.0);
  hyb.cells.resize(static_cast<std::size_t>(nc));
  for (int c = 0; c < nc; ++c) {
    const LocalCellOperators& ops = sys.local[c];
    const auto fs = mesh.cell_faces(c);
    const int m = ops.size();
    HybridSystem::CellBlock& blk = hyb.cells[c];

    std::vector<double> fixed(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
      if (sys.face_kind[fs[i]] == FaceKind::Neumann) {
        fixed[i] = sys.face_value[fs[i]];
      } else {
        blk.free_local.push_back(i);
      }
    }
    const int nfree = static_cast<int>(blk.free_local.size());
    linalg::DenseMatrix a(nfree + 1, nfree + 1);
    std::vector<double> r(static_cast<std::size_t>(nfree) + 1, 0.0);
    for (int ii = 0; ii < nfree; ++ii) {
      const int i = blk.free_local[ii];
      for (int jj = 0; jj < nfree; ++jj) a(ii, jj) = ops.M(i, blk.free_local[jj]);
      a(ii, nfree) = ops.div_row[i];
      a(nfree, ii) = ops.div_row[i];
      double ri = sys.face_kind[fs[i]] == FaceKind::Dirichlet
                      ? ops.div_row[i] * sys.face_value[fs[i]]
                      : 0.0;
      for (int j = 0; j < m; ++j) ri -= ops.M(i, j) * fixed[j];
      r[ii] = ri;
      if (const int lam = hyb.multiplier_of_face[fs[i]]; lam >= 0) {
        blk.mult_row.push_back(ii);
        blk.mult_global.push_back(lam);
      }
    }
    double rp = -(sys.F[c] + hyb.source_shift * ops.area);
    for (int j = 0; j < m; ++j) rp -= ops.div_row[j] * fixed[j];
    r[nfree] = rp;

    const linalg::LuFactorization lu(a);
    blk.base = lu.solve(r);
    const int k = static_cast<int>(blk.mult_row.size());
    blk.coupling = linalg::DenseMatrix(nfree + 1, k);
    std::vector<double> e(static_cast<std::size_t>(nfree) + 1);
    for (int j = 0; j < k; ++j) {
      std::fill(e.begin(), e.end(), 0.0);
      e[blk.mult_row[j]] = ops.div_row[blk.free_local[blk.mult_row[j]]];
      const auto col = lu.solve(e);
      for (int i = 0; i <= nfree; ++i) blk.coupling(i, j) = col[i];
    }
    // S_c = Et A^-1 E, symmetrized; rhs_c = -Et A^-1 r
    for (int j = 0; j < k; ++j) {
      const double ej = ops.div_row[blk.free_local[blk.mult_row[j]]];
      hyb.rhs[blk.mult_global[j]] -= ej * blk.base[blk.mult_row[j]];
      for (int l = j; l < k; ++l) {
        const double el = ops.div_row[blk.free_local[blk.mult_row[l]]];
        const double s =
            0.5 * (ej * blk.coupling(blk.mult_row[j], l) + el * blk.coupling(blk.mult_row[l], j));
        entries.push_back({blk.mult_global[j], blk.mult_global[l], s});
        if (l != j) entries.push_back({blk.mult_global[l], blk.mult_global[j], s});
      }
    }
  }
  hyb.S = linalg::SparseMatrix::from_triplets(nmult, nmult, std::move(entries));
  return hyb;
}

Solution recover(const Mesh& mesh, const SaddleSystem& sys, const HybridSystem& hyb,
                 std::span<const double> lambda) {
  Solution sol;
  const int nc = sys.num_cells;
  sol.p.assign(static_cast<std::size_t>(nc), 0.0);
  sol.v.assign(static_cast<std::size_t>(sys.num_faces), 0.0);
  sol.lambda.assign(static_cast<std::size_t>(sys.num_faces), 0.0);
  std::vector<char> seen(static_cast<std::size_t>(sys.num_faces), 0);
  for (int f = 0; f < sys.num_faces; ++f) {
    if (hyb.multiplier_of_face[f] >= 0) {
      sol.lambda[f] = lambda[hyb.multiplier_of_face[f]];
    } else if (sys.face_kind[f] == FaceKind::Dirichlet) {
      sol.lambda[f] = sys.face_value[f];
    }
  }
  for (int c = 0; c < nc; ++c) {
    const auto fs = mesh.cell_faces(c);
    const auto& blk = hyb.cells[c];
    const int nfree = static_cast<int>(blk.free_local.size());
    std::vector<double> x = blk.base;
    for (std::size_t j = 0; j < blk.mult_global.size(); ++j) {
      const double lam = lambda[blk.mult_global[j]];
      for (int i = 0; i <= nfree; ++i) x[i] += blk.coupling(i, static_cast<int>(j)) * lam;
    }
    std::vector<double> side(fs.size());
    for (std::size_t i = 0; i < fs.size(); ++i) side[i] = sys.face_value[fs[i]];
    for (int ii = 0; ii < nfree; ++ii) side[blk.free_local[ii]] = x[ii];
    sol.p[c] = x[nfree];
    for (std::size_t i = 0; i < fs.size(); ++i) {
      sol.v_side.push_back(side[i]);
      if (!seen[fs[i]]) {
        sol.v[fs[i]] = side[i];
        seen[fs[i]] = 1;
      }
    }
  }
  if (sys.pure_neumann) {
    double mean = 0.0;
    for (int c = 0; c < nc; ++c) mean += sys.local[c].area * sol.p[c];
    mean /= domain_area(sys);
    for (double& p : sol.p) p -= mean;
    for (int f = 0; f < sys.num_faces; ++f) {
      if (hyb.multiplier_of_face[f] >= 0) sol.lambda[f] -= mean;
    }
    sol.multiplier = -sys.compatibility_defect / domain_area(sys);
  }
  return sol;
}

Solution solve_hybrid(const Mesh& mesh, const SaddleSystem& sys, double tol, int maxit,
                      linalg::Preconditioner preconditioner) {
  const HybridSystem hyb = hybridize(mesh, sys);
  auto result = linalg::cg(hyb.S, hyb.rhs, tol, maxit, preconditioner);
  if (result.report.breakdown) {
    double min_kbar = std::numeric_limits<double>::infinity();
    for (const auto& ops : sys.local) min_kbar = std::min(min_kbar, ops.kbar.min_eigenvalue());
    double min_diag = std::numeric_limits<double>::infinity();
    int worst = -1;
    const auto d = hyb.S.diagonal();
    for (int c = 0; c < sys.num_cells; ++c) {
      for (int g : hyb.cells[c].mult_global) {
        if (d[g] < min_diag) {
          min_diag = d[g];
          worst = c;
        }
      }
    }
    throw SolverError("CG breakdown on the hybrid system (loss of positive definiteness): " +
                      result.report.message + "; min cell coefficient " +
                      std::to_string(min_kbar) + ", smallest Schur diagonal " +
                      std::to_string(min_diag) + " at cell " + std::to_string(worst));
  }
  if (!result.report.converged) {
    throw SolverError("CG did not converge on the hybrid system: " + result.report.message);
  }
  Solution sol = recover(mesh, sys, hyb, result.x);
  sol.report = result.report;
  return sol;
}

Solution solve_hybrid(const Mesh& mesh, const StaggeredCoefficient& staggered,
                      const ProblemData& problem, double tol) {
  return solve_hybrid(mesh, assemble(mesh, staggered, problem), tol);
}

double infsup_estimate(const SaddleSystem& sys, InfSupMetric metric) {
  if (sys.pure_neumann) {
    throw SolverError("inf-sup estimate needs at least one Dirichlet face");
  }
  std::vector<int> free;
  std::vector<int> pos(static_cast<std::size_t>(sys.num_faces), -1);
  for (int f = 0; f < sys.num_faces; ++f) {
    if (sys.face_kind[f] != FaceKind::Neumann) {
      pos[f] = static_cast<int>(free.size());
      free.push_back(f);
    }
  }
  const int nfree = static_cast<int>(free.size());
  const int nc = sys.num_cells;
  linalg::DenseMatrix m(nfree, nfree);
  for (int i = 0; i < nfree; ++i) {
    const auto& off = sys.M.row_offsets();
    for (int k = off[free[i]]; k < off[free[i] + 1]; ++k) {
      const int j = pos[sys.M.col_indices()[k]];
      if (j >= 0) m(i, j) = sys.M.values()[k];
    }
  }
  linalg::DenseMatrix b(nc, nfree);
  for (int c = 0; c < nc; ++c) {
    const auto& off = sys.B.row_offsets();
    for (int k = off[c]; k < off[c + 1]; ++k) {
      const int j = pos[sys.B.col_indices()[k]];
      if (j >= 0) b(c, j) = sys.B.values()[k];
    }
  }
  const linalg::LuFactorization lu(m);
  linalg::DenseMatrix z(nfree, nc);
  for (int c = 0; c < nc; ++c) {
    const auto col = lu.solve(b.row(c));
    for (int i = 0; i < nfree; ++i) z(i, c) = col[i];
  }
  linalg::DenseMatrix s = b.multiply(z);
  for (int i = 0; i < nc; ++i) {
    for (int j = i + 1; j < nc; ++j) {
      const double v = 0.5 * (s(i, j) + s(j, i));
      s(i, j) = s(j, i) = v;
    }
  }
  std::vector<double> d(static_cast<std::size_t>(nc));
  for (int c = 0; c < nc; ++c) {
    const auto& ops = sys.local[c];
    d[c] = ops.area * (metric == InfSupMetric::Weighted ? 0.5 * ops.kbar.trace() : 1.0);
  }
  const double lambda = linalg::smallest_eigenvalue_estimate(s, d, 5000, 1e-14);
  return std::sqrt(std::max(lambda, 0.0));
}

BlockResidual saddle_residual(const SaddleSystem& sys, const Solution& sol) {
  BlockResidual res;
  const auto mv = sys.M.multiply(sol.v);
  std::vector<double> btp(static_cast<std::size_t>(sys.num_faces), 0.0);
  const auto& off = sys.B.row_offsets();
  for (int c = 0; c < sys.num_cells; ++c) {
    for (int k = off[c]; k < off[c + 1]; ++k) {
      btp[sys.B.col_indices()[k]] += sys.B.values()[k] * sol.p[c];
    }
  }
  double r1 = 0.0, s1 = 0.0;
  for (int f = 0; f < sys.num_faces; ++f) {
    if (sys.face_kind[f] == FaceKind::Neumann) continue;
    const double r = mv[f] + btp[f] - sys.g[f];
    r1 += r * r;
    s1 = std::max({s1, std::fabs(sys.g[f]), std::fabs(mv[f])});
  }
  const auto bv = sys.B.multiply(sol.v);
  double r2 = 0.0, s2 = 0.0;
  for (int c = 0; c < sys.num_cells; ++c) {
    const double r = bv[c] + sys.F[c] + sys.local[c].area * sol.multiplier;
    r2 += r * r;
    s2 = std::max({s2, std::fabs(sys.F[c]), std::fabs(bv[c])});
  }
  res.gradient = std::sqrt(r1) / std::max(s1, std::numeric_limits<double>::min());
  res.mass = std::sqrt(r2) / std::max(s2, std::numeric_limits<double>::min());
  return res;
}

double ConservationReport::divergence_theorem_residual() const {
  return std::fabs(total_divergence - boundary_flux) / scale;
}

double ConservationReport::balance_residual() const {
  return std::fabs(total_divergence + total_source) / scale;
}

ConservationReport conservation(const Mesh& mesh, const SaddleSystem& sys, const Solution& sol) {
  ConservationReport rep;
  std::size_t k = 0;
  for (int c = 0; c < sys.num_cells; ++c) {
    const auto fs = mesh.cell_faces(c);
    const auto& ops = sys.local[c];
    for (std::size_t i = 0; i < fs.size(); ++i, ++k) {
      const double flux = ops.div_row[i] * sol.v_side[k];
      rep.total_divergence += flux;
      rep.scale += std::fabs(flux);
      if (mesh.face(fs[i]).is_boundary()) rep.boundary_flux += flux;
    }
    const double src = sys.F[c] + ops.area * sol.multiplier;
    rep.total_source += src;
    rep.scale += std::fabs(src);
  }
  if (rep.scale == 0.0) rep.scale = 1.0;
  return rep;
}

std::vector<double> face_flux(const Mesh& mesh, const StaggeredCoefficient& staggered,
                              const Solution& sol) {
  std::vector<double> flux(static_cast<std::size_t>(mesh.num_faces()), 0.0);
  std::vector<char> seen(flux.size(), 0);
  std::size_t k = 0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    for (int f : mesh.cell_faces(c)) {
      if (!seen[f]) {
        flux[f] = -staggered.face[k] * sol.v_side[k];
        seen[f] = 1;
      }
      ++k;
    }
  }
  return flux;
}

namespace {

Solution run_path(const Mesh& mesh, const SaddleSystem& sys, const SolveOptions& options) {
  if (options.path == SolveOptions::Path::Saddle) {
    return solve_saddle(mesh, sys, options.tol, options.maxit);
  }
  return solve_hybrid(mesh, sys, options.tol, options.maxit, options.preconditioner);
}

}  // namespace

SolveOutcome discretize_and_solve(const Mesh& mesh, const ProblemData& problem,
                                  FaceStrategy strategy, const SolveOptions& options) {
  problem.coefficient.check_positive(mesh);
  const CellRule rule = options.assembly.cell_rule;
  SolveOutcome out;
  if (strategy == FaceStrategy::Upwind) {
    auto first = face_values(problem.coefficient, mesh, FaceStrategy::Arithmetic, rule);
    const SaddleSystem sys = assemble(mesh, first, problem, options.assembly);
    out.preliminary = run_path(mesh, sys, options);
    const auto hint = face_flux(mesh, first, *out.preliminary);
    out.staggered = face_values(problem.coefficient, mesh, strategy, rule, hint);
  } else {
    out.staggered = face_values(problem.coefficient, mesh, strategy, rule);
  }
  out.system = assemble(mesh, out.staggered, problem, options.assembly);
  out.solution = run_path(mesh, out.system, options);
  return out;
}

}  // namespace mfdstag
