#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfdstag/expr.hpp"
#include "mfdstag/geometry.hpp"
#include "mfdstag/mesh.hpp"

namespace mfdstag {

// Offset used to pick the subdomain "from within" a cell at a face point:
// the piece is selected at x_f + eps (x_c - x_f) and evaluated at x_f.
inline constexpr double kOneSidedOffset = 1e-8;

// A function given by (selector, expression) pieces. A piece applies where
// its selector is > 0; a piece without selector applies everywhere. The
// first applicable piece wins.
class PiecewiseExpr {
 public:
  PiecewiseExpr() = default;
  explicit PiecewiseExpr(expr::Expr single);
  void add_piece(std::optional<expr::Expr> where, expr::Expr value);

  int num_pieces() const { return static_cast<int>(values_.size()); }
  const expr::Expr& piece(int i) const { return values_[i]; }
  const std::optional<expr::Expr>& selector(int i) const { return where_[i]; }

  // Throws DomainError if no piece applies at p.
  int locate(Point p) const;
  double eval(Point at) const { return eval(at, at); }
  double eval(Point at, Point select) const;

 private:
  std::vector<std::optional<expr::Expr>> where_;
  std::vector<expr::Expr> values_;
};

// Scalar or SPD tensor diffusion coefficient, possibly discontinuous across
// subdomain boundaries (which must be aligned with mesh faces).
class CoefficientField {
 public:
  static CoefficientField scalar(PiecewiseExpr k);
  static CoefficientField scalar(expr::Expr k) { return scalar(PiecewiseExpr(std::move(k))); }
  static CoefficientField constant(double k) { return scalar(expr::Expr::constant(k)); }
  // The three pieces must share the same selectors.
  static CoefficientField tensor(PiecewiseExpr kxx, PiecewiseExpr kxy, PiecewiseExpr kyy);

  bool is_tensor() const { return tensor_; }
  const PiecewiseExpr& kxx() const { return kxx_; }
  const PiecewiseExpr& kxy() const { return kxy_; }
  const PiecewiseExpr& kyy() const { return kyy_; }

  Tensor2 tensor_at(Point at, Point select) const;
  // Scalar fields only.
  double scalar_at(Point at, Point select) const;

  // Positivity at every cell centroid and every one-sided face point.
  // Throws CoefficientError on a non-positive sample.
  void check_positive(const Mesh& mesh) const;

 private:
  bool tensor_ = false;
  PiecewiseExpr kxx_, kxy_, kyy_;
};

enum class CellRule { Centroid, Triangulated };

enum class FaceStrategy { Trace, Arithmetic, Harmonic, Upwind };

FaceStrategy parse_face_strategy(const std::string& name);
std::string to_string(FaceStrategy s);
CellRule parse_cell_rule(const std::string& name);
std::string to_string(CellRule r);

// Point where the subdomain of cell c is looked up for face f.
Point one_sided_point(const Mesh& mesh, int c, int f);

// Mean of g over cell c: value at the centroid, or the fan triangulation
// from the centroid with the interior 3-point rule on each triangle.
double cell_mean(const Mesh& mesh, int c, CellRule rule,
                 const std::function<double(Point)>& g);

// k-bar for cell c (tensor form; isotropic for scalar fields).
Tensor2 cell_average(const CoefficientField& k, const Mesh& mesh, int c,
                     CellRule rule = CellRule::Centroid);

// Cell values and per-(cell, face) values of the coefficient. Storage of
// `face` follows Mesh::cell_faces, so face[offset(c) + i] belongs to local
// face i of cell c.
struct StaggeredCoefficient {
  std::vector<Tensor2> cell;
  std::vector<double> face;
  std::vector<int> offsets;

  std::span<const double> cell_faces(int c) const {
    return {face.data() + offsets[c], static_cast<std::size_t>(offsets[c + 1] - offsets[c])};
  }
  double cell_scalar(int c) const { return 0.5 * cell[c].trace(); }
};

// `flux_hint` is required for Upwind: one signed flux per face, positive
// along the face's global normal. The donor cell is the one the flux leaves;
// faces with |flux| below 1e-14 of the largest fall back to Arithmetic.
StaggeredCoefficient face_values(const CoefficientField& k, const Mesh& mesh,
                                 FaceStrategy strategy, CellRule rule = CellRule::Centroid,
                                 std::span<const double> flux_hint = {});

}  // namespace mfdstag
