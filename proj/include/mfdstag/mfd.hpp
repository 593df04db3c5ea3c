#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mfdstag/field.hpp"
#include "mfdstag/linalg.hpp"
#include "mfdstag/mesh.hpp"

namespace mfdstag {

// Local mimetic operators of one cell with m faces, in the cell's local
// face order. Degrees of freedom are normal components of the gradient
// along each face's global normal.
struct LocalCellOperators {
  int cell = -1;
  double area = 0.0;
  Tensor2 kbar;
  linalg::DenseMatrix N;          // m x 2, rows n_f
  linalg::DenseMatrix R;          // m x 2, rows sigma |f| (x_f - x_c)
  linalg::DenseMatrix M;          // m x m inner product, SPD
  std::vector<double> div_row;    // sigma |f| k^c_f
  double gamma = 0.0;             // stabilization scale

  int size() const { return static_cast<int>(div_row.size()); }
};

// M = (1/|c|) R K Rt + gamma (I - N (Nt N)^-1 Nt),
// gamma = scale * (tr K / 2) * tr(R Rt) / (|c| m).
// Checks M N = R K, exact symmetry and positive definiteness; throws
// AssemblyError on a degenerate cell or a failed check.
LocalCellOperators build_local(const Mesh& mesh, int c, const Tensor2& kbar,
                               std::span<const double> kface,
                               double stabilization_scale = 1.0);

// (1/|c|) sum_f sigma |f| k^c_f v_f
double apply_weighted_divergence(const LocalCellOperators& ops, std::span<const double> v);

enum class BoundaryKind { Dirichlet, Neumann };

BoundaryKind parse_boundary_kind(const std::string& name);

struct BoundaryConditions {
  // Boundary label -> kind; the label "*" matches any other label.
  std::map<std::string, BoundaryKind> kinds{{"*", BoundaryKind::Dirichlet}};
  // Pressure g_D(x); the second point selects the subdomain.
  std::function<double(Point at, Point select)> dirichlet;
  // Co-normal flux q_N = (K grad p) . n_out at x.
  std::function<double(Point at, Point select, Vec2 outward)> neumann;

  BoundaryKind kind_of(const std::string& label) const;
};

struct ProblemData {
  CoefficientField coefficient;
  std::function<double(Point at, Point select)> source;
  BoundaryConditions boundary;
};

enum class FaceKind : char { Interior, Dirichlet, Neumann };

struct AssemblyOptions {
  double stabilization_scale = 1.0;
  CellRule cell_rule = CellRule::Centroid;
};

// Mixed system for v = grad p, -div(k v) = f:
//   M v + Bt p = g,   -B v = F,
// stored as the symmetric block [[M, Bt], [B, 0]] with right-hand side
// [g; -F]. Neumann faces are essential: their rows and columns are replaced
// by the identity and moved to the right-hand side. A pure-Neumann problem
// gets one extra row/column holding the mean-zero pressure multiplier.
struct SaddleSystem {
  int num_faces = 0;
  int num_cells = 0;
  std::vector<LocalCellOperators> local;
  std::vector<FaceKind> face_kind;
  std::vector<double> face_value;  // g_D on Dirichlet faces, fixed v_f on Neumann faces
  linalg::SparseMatrix M;          // faces x faces, before boundary elimination
  linalg::SparseMatrix B;          // cells x faces
  std::vector<double> g;           // face space
  std::vector<double> F;           // |c| f_c
  bool pure_neumann = false;
  // sum_c F_c + net prescribed boundary flux; zero for compatible data
  double compatibility_defect = 0.0;

  linalg::SparseMatrix block;
  std::vector<double> rhs;

  int block_size() const { return block.rows(); }
};

// Throws AssemblyError for unlabeled boundary faces or grossly
// inconsistent pure-Neumann data.
SaddleSystem assemble(const Mesh& mesh, const StaggeredCoefficient& staggered,
                      const ProblemData& problem, const AssemblyOptions& options = {});

}  // namespace mfdstag
