#include "mfdstag/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfdstag/error.hpp"

namespace mfdstag {

PiecewiseExpr::PiecewiseExpr(expr::Expr single) { add_piece(std::nullopt, std::move(single)); }

void PiecewiseExpr::add_piece(std::optional<expr::Expr> where, expr::Expr value) {
  where_.push_back(std::move(where));
  values_.push_back(std::move(value));
}

int PiecewiseExpr::locate(Point p) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!where_[i] || where_[i]->eval(p.x, p.y) > 0.0) return static_cast<int>(i);
  }
  throw DomainError("no piece applies at (" + std::to_string(p.x) + ", " +
                    std::to_string(p.y) + ")");
}

double PiecewiseExpr::eval(Point at, Point select) const {
  return values_[locate(select)].eval(at.x, at.y);
}

CoefficientField CoefficientField::scalar(PiecewiseExpr k) {
  CoefficientField f;
  f.kxx_ = std::move(k);
  return f;
}

CoefficientField CoefficientField::tensor(PiecewiseExpr kxx, PiecewiseExpr kxy,
                                          PiecewiseExpr kyy) {
  if (kxx.num_pieces() != kxy.num_pieces() || kxx.num_pieces() != kyy.num_pieces()) {
    throw CoefficientError("tensor components must have the same pieces");
  }
  CoefficientField f;
  f.tensor_ = true;
  f.kxx_ = std::move(kxx);
  f.kxy_ = std::move(kxy);
  f.kyy_ = std::move(kyy);
  return f;
}

Tensor2 CoefficientField::tensor_at(Point at, Point select) const {
  const int i = kxx_.locate(select);
  if (!tensor_) return Tensor2::isotropic(kxx_.piece(i).eval(at.x, at.y));
  return {kxx_.piece(i).eval(at.x, at.y), kxy_.piece(i).eval(at.x, at.y),
          kyy_.piece(i).eval(at.x, at.y)};
}

double CoefficientField::scalar_at(Point at, Point select) const {
  if (tensor_) throw CoefficientError("scalar value requested from a tensor coefficient");
  return kxx_.eval(at, select);
}

namespace {

void require_positive(const Tensor2& k, Point at) {
  const double lo = k.xy == 0.0 ? std::min(k.xx, k.yy) : k.min_eigenvalue();
  if (!(lo > 0.0)) {
    throw CoefficientError("non-positive coefficient (min eigenvalue " + std::to_string(lo) +
                           ") at (" + std::to_string(at.x) + ", " + std::to_string(at.y) + ")");
  }
}

double face_scalar(const CoefficientField& k, Point at, Point select, Vec2 n) {
  if (!k.is_tensor()) return k.scalar_at(at, select);
  return k.tensor_at(at, select).quadratic(n);
}

}  // namespace

void CoefficientField::check_positive(const Mesh& mesh) const {
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Point xc = mesh.cell_centroid(c);
    require_positive(tensor_at(xc, xc), xc);
    for (int f : mesh.cell_faces(c)) {
      const Point xf = mesh.face(f).midpoint;
      require_positive(tensor_at(xf, one_sided_point(mesh, c, f)), xf);
    }
  }
}

FaceStrategy parse_face_strategy(const std::string& name) {
  if (name == "trace") return FaceStrategy::Trace;
  if (name == "arithmetic") return FaceStrategy::Arithmetic;
  if (name == "harmonic") return FaceStrategy::Harmonic;
  if (name == "upwind") return FaceStrategy::Upwind;
  throw CoefficientError("unknown face strategy '" + name +
                         "' (expected trace, arithmetic, harmonic, upwind)");
}

std::string to_string(FaceStrategy s) {
  switch (s) {
    case FaceStrategy::Trace: return "trace";
    case FaceStrategy::Arithmetic: return "arithmetic";
    case FaceStrategy::Harmonic: return "harmonic";
    case FaceStrategy::Upwind: return "upwind";
  }
  return "?";
}

CellRule parse_cell_rule(const std::string& name) {
  if (name == "centroid") return CellRule::Centroid;
  if (name == "triangulated") return CellRule::Triangulated;
  throw CoefficientError("unknown cell rule '" + name + "' (expected centroid, triangulated)");
}

std::string to_string(CellRule r) {
  return r == CellRule::Centroid ? "centroid" : "triangulated";
}

Point one_sided_point(const Mesh& mesh, int c, int f) {
  const Point xf = mesh.face(f).midpoint;
  return xf + kOneSidedOffset * (mesh.cell_centroid(c) - xf);
}

double cell_mean(const Mesh& mesh, int c, CellRule rule,
                 const std::function<double(Point)>& g) {
  const Point xc = mesh.cell_centroid(c);
  if (rule == CellRule::Centroid) return g(xc);
  const auto cv = mesh.cell_vertices(c);
  const auto& verts = mesh.vertices();
  double sum = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const std::size_t m = cv.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Point a = verts[cv[i]];
    const Point b = verts[cv[(i + 1) % m]];
    const double area = 0.5 * cross(a - xc, b - xc);
    const double g0 = g((2.0 / 3.0) * xc + (1.0 / 6.0) * (a + b));
    const double g1 = g((2.0 / 3.0) * a + (1.0 / 6.0) * (xc + b));
    const double g2 = g((2.0 / 3.0) * b + (1.0 / 6.0) * (xc + a));
    lo = std::min({lo, g0, g1, g2});
    hi = std::max({hi, g0, g1, g2});
    sum += area * (g0 + g1 + g2) / 3.0;
  }
  // A positive-weight mean lies within the sample range; clamping keeps
  // constant fields exact under roundoff.
  return std::clamp(sum / mesh.cell_area(c), lo, hi);
}

Tensor2 cell_average(const CoefficientField& k, const Mesh& mesh, int c, CellRule rule) {
  const Point xc = mesh.cell_centroid(c);
  if (rule == CellRule::Centroid) return k.tensor_at(xc, xc);
  // The cell's piece is fixed by its centroid.
  auto component = [&](auto pick) {
    return cell_mean(mesh, c, rule, [&](Point p) { return pick(k.tensor_at(p, xc)); });
  };
  const double xx = component([](const Tensor2& t) { return t.xx; });
  if (!k.is_tensor()) return Tensor2::isotropic(xx);
  return {xx, component([](const Tensor2& t) { return t.xy; }),
          component([](const Tensor2& t) { return t.yy; })};
}

StaggeredCoefficient face_values(const CoefficientField& k, const Mesh& mesh,
                                 FaceStrategy strategy, CellRule rule,
                                 std::span<const double> flux_hint) {
  if (strategy == FaceStrategy::Upwind && flux_hint.empty()) {
    throw CoefficientError("the upwind strategy needs a face flux hint");
  }
  if (!flux_hint.empty() && static_cast<int>(flux_hint.size()) != mesh.num_faces()) {
    throw CoefficientError("flux hint must have one value per face");
  }

  StaggeredCoefficient out;
  const int nc = mesh.num_cells();
  out.cell.reserve(static_cast<std::size_t>(nc));
  out.offsets.reserve(static_cast<std::size_t>(nc) + 1);
  out.offsets.push_back(0);
  for (int c = 0; c < nc; ++c) {
    const Tensor2 kc = cell_average(k, mesh, c, rule);
    require_positive(kc, mesh.cell_centroid(c));
    out.cell.push_back(kc);
    out.offsets.push_back(out.offsets.back() + mesh.cell_size(c));
  }

  // One-sided traces; plus_side holds the value from the cell whose outward
  // normal equals the global face normal.
  const int nf = mesh.num_faces();
  out.face.resize(static_cast<std::size_t>(out.offsets.back()));
  std::vector<double> plus_side(static_cast<std::size_t>(nf), 0.0);
  std::vector<double> minus_side(static_cast<std::size_t>(nf), 0.0);
  for (int c = 0; c < nc; ++c) {
    const auto fs = mesh.cell_faces(c);
    const auto ss = mesh.cell_signs(c);
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const Face& face = mesh.face(fs[i]);
      const double v =
          face_scalar(k, face.midpoint, one_sided_point(mesh, c, fs[i]), face.normal);
      if (!(v > 0.0)) {
        throw CoefficientError("non-positive face value " + std::to_string(v) + " on face " +
                               std::to_string(fs[i]) + " from cell " + std::to_string(c));
      }
      out.face[static_cast<std::size_t>(out.offsets[c]) + i] = v;
      (ss[i] > 0 ? plus_side : minus_side)[fs[i]] = v;
    }
  }
  if (strategy == FaceStrategy::Trace) return out;

  double hint_scale = 0.0;
  for (double h : flux_hint) hint_scale = std::max(hint_scale, std::fabs(h));
  const double tie = 1e-14 * hint_scale;

  std::vector<double> shared(static_cast<std::size_t>(nf), 0.0);
  for (int f = 0; f < nf; ++f) {
    if (mesh.face(f).is_boundary()) continue;
    const double a = plus_side[f];
    const double b = minus_side[f];
    double v = 0.5 * (a + b);
    switch (strategy) {
      case FaceStrategy::Harmonic: v = 2.0 * a * b / (a + b); break;
      case FaceStrategy::Upwind:
        if (flux_hint[f] > tie) {
          v = a;
        } else if (flux_hint[f] < -tie) {
          v = b;
        }
        break;
      default: break;
    }
    // equal traces stay bit-identical under every strategy
    if (a == b) v = a;
    shared[f] = v;
  }
  for (int c = 0; c < nc; ++c) {
    const auto fs = mesh.cell_faces(c);
    for (std::size_t i = 0; i < fs.size(); ++i) {
      if (!mesh.face(fs[i]).is_boundary()) {
        out.face[static_cast<std::size_t>(out.offsets[c]) + i] = shared[fs[i]];
      }
    }
  }
  return out;
}

}  // namespace mfdstag
