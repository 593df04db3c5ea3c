#include "mfdstag/mfd.hpp"

#include <algorithm>
#include <cmath>

#include "mfdstag/error.hpp"

namespace mfdstag {

LocalCellOperators build_local(const Mesh& mesh, int c, const Tensor2& kbar,
                               std::span<const double> kface, double stabilization_scale) {
  const auto fs = mesh.cell_faces(c);
  const auto ss = mesh.cell_signs(c);
  const int m = static_cast<int>(fs.size());
  if (static_cast<int>(kface.size()) != m) {
    throw AssemblyError("cell " + std::to_string(c) + ": expected " + std::to_string(m) +
                        " face coefficients");
  }
  LocalCellOperators ops;
  ops.cell = c;
  ops.area = mesh.cell_area(c);
  ops.kbar = kbar;
  ops.N = linalg::DenseMatrix(m, 2);
  ops.R = linalg::DenseMatrix(m, 2);
  ops.div_row.resize(static_cast<std::size_t>(m));
  const Point xc = mesh.cell_centroid(c);
  for (int i = 0; i < m; ++i) {
    const Face& f = mesh.face(fs[i]);
    const double w = ss[i] * f.length;
    ops.N(i, 0) = f.normal.x;
    ops.N(i, 1) = f.normal.y;
    ops.R(i, 0) = w * (f.midpoint.x - xc.x);
    ops.R(i, 1) = w * (f.midpoint.y - xc.y);
    ops.div_row[i] = w * kface[i];
  }

  // (Nt N)^-1
  double a = 0.0, b = 0.0, d = 0.0;
  for (int i = 0; i < m; ++i) {
    a += ops.N(i, 0) * ops.N(i, 0);
    b += ops.N(i, 0) * ops.N(i, 1);
    d += ops.N(i, 1) * ops.N(i, 1);
  }
  const double det = a * d - b * b;
  if (!(det > 1e-12 * (a + d) * (a + d))) {
    throw AssemblyError("cell " + std::to_string(c) + " is degenerate (Nt N singular)");
  }
  const double g00 = d / det, g01 = -b / det, g11 = a / det;

  double trace_rr = 0.0;
  for (int i = 0; i < m; ++i) {
    trace_rr += ops.R(i, 0) * ops.R(i, 0) + ops.R(i, 1) * ops.R(i, 1);
  }
  ops.gamma = stabilization_scale * 0.5 * kbar.trace() * trace_rr / (ops.area * m);

  ops.M = linalg::DenseMatrix(m, m);
  for (int i = 0; i < m; ++i) {
    const Vec2 ri{ops.R(i, 0), ops.R(i, 1)};
    const Vec2 kri = kbar.apply(ri);
    const Vec2 ni{ops.N(i, 0), ops.N(i, 1)};
    const Vec2 gni{g00 * ni.x + g01 * ni.y, g01 * ni.x + g11 * ni.y};
    for (int j = i; j < m; ++j) {
      const Vec2 rj{ops.R(j, 0), ops.R(j, 1)};
      const Vec2 nj{ops.N(j, 0), ops.N(j, 1)};
      const double consistency = dot(kri, rj) / ops.area;
      const double projector = (i == j ? 1.0 : 0.0) - dot(gni, nj);
      ops.M(i, j) = consistency + ops.gamma * projector;
      ops.M(j, i) = ops.M(i, j);
    }
  }

  // M N = R K
  double scale = 0.0;
  double worst = 0.0;
  for (int i = 0; i < m; ++i) {
    const Vec2 rk = kbar.apply({ops.R(i, 0), ops.R(i, 1)});
    double mn0 = 0.0, mn1 = 0.0;
    for (int j = 0; j < m; ++j) {
      mn0 += ops.M(i, j) * ops.N(j, 0);
      mn1 += ops.M(i, j) * ops.N(j, 1);
    }
    scale = std::max({scale, std::fabs(rk.x), std::fabs(rk.y)});
    worst = std::max({worst, std::fabs(mn0 - rk.x), std::fabs(mn1 - rk.y)});
  }
  if (worst > 1e-13 * static_cast<double>(m) * scale) {
    throw AssemblyError("cell " + std::to_string(c) + ": consistency M N = R K violated by " +
                        std::to_string(worst / scale));
  }
  if (!linalg::is_positive_definite(ops.M)) {
    throw AssemblyError("cell " + std::to_string(c) + ": local inner product is not SPD");
  }
  return ops;
}

double apply_weighted_divergence(const LocalCellOperators& ops, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < ops.div_row.size(); ++i) s += ops.div_row[i] * v[i];
  return s / ops.area;
}

BoundaryKind parse_boundary_kind(const std::string& name) {
  if (name == "dirichlet") return BoundaryKind::Dirichlet;
  if (name == "neumann") return BoundaryKind::Neumann;
  throw AssemblyError("unknown boundary kind '" + name + "' (expected dirichlet, neumann)");
}

BoundaryKind BoundaryConditions::kind_of(const std::string& label) const {
  if (auto it = kinds.find(label); it != kinds.end()) return it->second;
  if (auto it = kinds.find("*"); it != kinds.end()) return it->second;
  throw AssemblyError("boundary label '" + label + "' has no boundary condition");
}

SaddleSystem assemble(const Mesh& mesh, const StaggeredCoefficient& staggered,
                      const ProblemData& problem, const AssemblyOptions& options) {
  SaddleSystem sys;
  const int nf = mesh.num_faces();
  const int nc = mesh.num_cells();
  sys.num_faces = nf;
  sys.num_cells = nc;
  if (static_cast<int>(staggered.cell.size()) != nc) {
    throw AssemblyError("coefficient does not match the mesh");
  }

  sys.local.reserve(static_cast<std::size_t>(nc));
  for (int c = 0; c < nc; ++c) {
    sys.local.push_back(build_local(mesh, c, staggered.cell[c], staggered.cell_faces(c),
                                    options.stabilization_scale));
  }

  sys.face_kind.assign(static_cast<std::size_t>(nf), FaceKind::Interior);
  sys.face_value.assign(static_cast<std::size_t>(nf), 0.0);
  bool any_dirichlet = false;
  bool any_boundary = false;
  for (int f = 0; f < nf; ++f) {
    const Face& face = mesh.face(f);
    if (!face.is_boundary()) continue;
    any_boundary = true;
    const BoundaryKind kind = problem.boundary.kind_of(mesh.face_label(f));
    sys.face_kind[f] = kind == BoundaryKind::Dirichlet ? FaceKind::Dirichlet : FaceKind::Neumann;
    any_dirichlet = any_dirichlet || kind == BoundaryKind::Dirichlet;
  }
  sys.pure_neumann = any_boundary && !any_dirichlet;

  sys.g.assign(static_cast<std::size_t>(nf), 0.0);
  sys.F.assign(static_cast<std::size_t>(nc), 0.0);
  std::vector<linalg::Triplet> m_entries;
  std::vector<linalg::Triplet> b_entries;
  double flux_scale = 0.0;
  double prescribed_flux = 0.0;
  for (int c = 0; c < nc; ++c) {
    const LocalCellOperators& ops = sys.local[c];
    const auto fs = mesh.cell_faces(c);
    const auto ss = mesh.cell_signs(c);
    const auto kf = staggered.cell_faces(c);
    const int m = ops.size();
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) m_entries.push_back({fs[i], fs[j], ops.M(i, j)});
      b_entries.push_back({c, fs[i], ops.div_row[i]});

      const int f = fs[i];
      const Face& face = mesh.face(f);
      const Point sel = one_sided_point(mesh, c, f);
      if (sys.face_kind[f] == FaceKind::Dirichlet) {
        if (!problem.boundary.dirichlet) throw AssemblyError("Dirichlet data missing");
        const double gd = problem.boundary.dirichlet(face.midpoint, sel);
        sys.face_value[f] = gd;
        sys.g[f] = ops.div_row[i] * gd;
      } else if (sys.face_kind[f] == FaceKind::Neumann) {
        if (!problem.boundary.neumann) throw AssemblyError("Neumann data missing");
        const double q = problem.boundary.neumann(face.midpoint, sel, ss[i] * face.normal);
        sys.face_value[f] = ss[i] * q / kf[i];
        prescribed_flux += ops.div_row[i] * sys.face_value[f];
        flux_scale += std::fabs(ops.div_row[i] * sys.face_value[f]);
      }
    }
    if (problem.source) {
      const Point xc = mesh.cell_centroid(c);
      sys.F[c] = ops.area * cell_mean(mesh, c, options.cell_rule,
                                      [&](Point p) { return problem.source(p, xc); });
    }
    flux_scale += std::fabs(sys.F[c]);
  }
  if (sys.pure_neumann) {
    double total = prescribed_flux;
    for (double v : sys.F) total += v;
    sys.compatibility_defect = total;
    if (std::fabs(total) > 0.1 * flux_scale) {
      throw AssemblyError("inconsistent pure-Neumann data: source and boundary flux differ by " +
                          std::to_string(total));
    }
  }
  sys.M = linalg::SparseMatrix::from_triplets(nf, nf, m_entries);
  sys.B = linalg::SparseMatrix::from_triplets(nc, nf, std::move(b_entries));

  // Block system with essential (Neumann) faces eliminated symmetrically.
  const int n = nf + nc + (sys.pure_neumann ? 1 : 0);
  sys.rhs.assign(static_cast<std::size_t>(n), 0.0);
  for (int f = 0; f < nf; ++f) sys.rhs[f] = sys.g[f];
  for (int c = 0; c < nc; ++c) sys.rhs[nf + c] = -sys.F[c];
  auto essential = [&](int row) {
    return row < nf && sys.face_kind[row] == FaceKind::Neumann;
  };
  std::vector<linalg::Triplet> entries;
  entries.reserve(sys.M.nnz() + 2 * sys.B.nnz() + static_cast<std::size_t>(n));
  auto push = [&](int i, int j, double v) {
    if (essential(j) && !essential(i)) {
      sys.rhs[i] -= v * sys.face_value[j];
      return;
    }
    if (essential(i)) return;
    entries.push_back({i, j, v});
  };
  for (int i = 0; i < nf; ++i) {
    const auto& off = sys.M.row_offsets();
    for (int k = off[i]; k < off[i + 1]; ++k) {
      push(i, sys.M.col_indices()[k], sys.M.values()[k]);
    }
  }
  for (int c = 0; c < nc; ++c) {
    const auto& off = sys.B.row_offsets();
    for (int k = off[c]; k < off[c + 1]; ++k) {
      const int f = sys.B.col_indices()[k];
      push(nf + c, f, sys.B.values()[k]);
      push(f, nf + c, sys.B.values()[k]);
    }
  }
  for (int f = 0; f < nf; ++f) {
    if (essential(f)) {
      entries.push_back({f, f, 1.0});
      sys.rhs[f] = sys.face_value[f];
    }
  }
  if (sys.pure_neumann) {
    for (int c = 0; c < nc; ++c) {
      entries.push_back({nf + c, n - 1, sys.local[c].area});
      entries.push_back({n - 1, nf + c, sys.local[c].area});
    }
  }
  sys.block = linalg::SparseMatrix::from_triplets(n, n, std::move(entries));
  return sys;
}

}  // namespace mfdstag
