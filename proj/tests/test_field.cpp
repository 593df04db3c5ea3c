#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mfdstag/error.hpp"
#include "mfdstag/field.hpp"

using namespace mfdstag;
using expr::parse;

namespace {

const FaceStrategy kAll[] = {FaceStrategy::Trace, FaceStrategy::Arithmetic,
                             FaceStrategy::Harmonic, FaceStrategy::Upwind};

PiecewiseExpr two_sided(const std::string& left, const std::string& right) {
  PiecewiseExpr k;
  k.add_piece(parse("0.5 - x"), parse(left));
  k.add_piece(std::nullopt, parse(right));
  return k;
}

// Flux hint pointing in +x on every face (positive along n_f when n_f.x > 0).
std::vector<double> eastward_hint(const Mesh& mesh) {
  std::vector<double> hint(mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const double nx = mesh.face(f).normal.x;
    hint[f] = nx > 0 ? 1.0 : (nx < 0 ? -1.0 : 0.0);
  }
  return hint;
}

// Local index of face f in cell c.
int local_of(const Mesh& mesh, int c, int f) {
  const auto faces = mesh.cell_faces(c);
  for (std::size_t i = 0; i < faces.size(); ++i) {
    if (faces[i] == f) return static_cast<int>(i);
  }
  return -1;
}

// The interior face of quad(2) at x = 0.5, y in [0, 0.5].
int interface_face(const Mesh& mesh) {
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.face(f);
    if (!face.is_boundary() && face.midpoint.x == 0.5 && face.midpoint.y == 0.25) return f;
  }
  return -1;
}

}  // namespace

TEST(CellAverage, ReferenceValues) {
  const Mesh sq = Mesh::build({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2, 3}});
  EXPECT_EQ(cell_average(CoefficientField::constant(1.0), sq, 0).xx, 1.0);
  EXPECT_EQ(cell_average(CoefficientField::scalar(parse("x")), sq, 0).xx, 0.5);
  EXPECT_NEAR(cell_average(CoefficientField::scalar(parse("x^2")), sq, 0, CellRule::Triangulated).xx,
              1.0 / 3.0, 1e-12);
}

TEST(CellAverage, TriangulatedRuleIsExactForQuadratics) {
  const Mesh m = generate_polygonal_mesh(3, 4);
  // Oracle: integral of x^2 + x*y over a polygon via the Green-theorem
  // edge formulas, divided by the area.
  for (int c = 0; c < m.num_cells(); ++c) {
    const auto vs = m.cell_vertices(c);
    double ixx = 0.0, ixy = 0.0;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const Point a = m.vertices()[vs[i]];
      const Point b = m.vertices()[vs[(i + 1) % vs.size()]];
      const double cr = a.x * b.y - b.x * a.y;
      ixx += cr * (a.x * a.x + a.x * b.x + b.x * b.x) / 12.0;
      ixy += cr * (a.x * b.y + 2 * a.x * a.y + 2 * b.x * b.y + b.x * a.y) / 24.0;
    }
    const double expect = (ixx + ixy) / m.cell_area(c);
    const double got = cell_mean(m, c, CellRule::Triangulated,
                                 [](Point p) { return p.x * p.x + p.x * p.y; });
    EXPECT_NEAR(got, expect, 1e-13);
  }
}

TEST(FaceValues, ContinuousCoefficientAgreesEverywhere) {
  const Mesh m = generate_quad_mesh(2);
  const int f = interface_face(m);
  ASSERT_GE(f, 0);
  const auto k = CoefficientField::scalar(parse("1+x"));
  const auto hint = eastward_hint(m);
  for (FaceStrategy s : kAll) {
    const auto st = face_values(k, m, s, CellRule::Centroid, hint);
    for (int c : m.face(f).cells) {
      EXPECT_EQ(st.cell_faces(c)[local_of(m, c, f)], 1.5) << to_string(s);
    }
  }
}

TEST(FaceValues, PiecewiseExamples) {
  const Mesh m = generate_quad_mesh(2);
  const int f = interface_face(m);
  ASSERT_GE(f, 0);
  const auto k = CoefficientField::scalar(two_sided("1", "4"));
  const Face& face = m.face(f);
  const int left = m.cell_centroid(face.cells[0]).x < 0.5 ? face.cells[0] : face.cells[1];
  const int right = left == face.cells[0] ? face.cells[1] : face.cells[0];
  auto side = [&](const StaggeredCoefficient& st, int c) {
    return st.cell_faces(c)[local_of(m, c, f)];
  };

  const auto trace = face_values(k, m, FaceStrategy::Trace);
  EXPECT_EQ(side(trace, left), 1.0);
  EXPECT_EQ(side(trace, right), 4.0);
  const auto arith = face_values(k, m, FaceStrategy::Arithmetic);
  EXPECT_EQ(side(arith, left), 2.5);
  EXPECT_EQ(side(arith, right), 2.5);
  const auto harm = face_values(k, m, FaceStrategy::Harmonic);
  EXPECT_DOUBLE_EQ(side(harm, left), 1.6);
  EXPECT_DOUBLE_EQ(side(harm, right), 1.6);
  const auto up = face_values(k, m, FaceStrategy::Upwind, CellRule::Centroid, eastward_hint(m));
  EXPECT_EQ(side(up, left), 1.0);
  EXPECT_EQ(side(up, right), 1.0);
  std::vector<double> westward = eastward_hint(m);
  for (double& h : westward) h = -h;
  const auto down = face_values(k, m, FaceStrategy::Upwind, CellRule::Centroid, westward);
  EXPECT_EQ(side(down, left), 4.0);
  EXPECT_EQ(side(down, right), 4.0);
  std::vector<double> tie(m.num_faces(), 0.0);
  const auto tied = face_values(k, m, FaceStrategy::Upwind, CellRule::Centroid, tie);
  EXPECT_EQ(side(tied, left), 2.5);

  EXPECT_EQ(trace.cell[left].xx, 1.0);
  EXPECT_EQ(trace.cell[right].xx, 4.0);
}

TEST(FaceValues, BoundaryFacesUseTheTrace) {
  const Mesh m = generate_quad_mesh(4);
  const auto k = CoefficientField::scalar(parse("1 + x + 2*y"));
  for (FaceStrategy s : kAll) {
    const auto st = face_values(k, m, s, CellRule::Centroid, eastward_hint(m));
    for (int c = 0; c < m.num_cells(); ++c) {
      const auto faces = m.cell_faces(c);
      for (std::size_t i = 0; i < faces.size(); ++i) {
        const Face& f = m.face(faces[i]);
        if (!f.is_boundary()) continue;
        EXPECT_EQ(st.cell_faces(c)[i], 1 + f.midpoint.x + 2 * f.midpoint.y);
      }
    }
  }
}

TEST(FaceValues, UpwindNeedsAHint) {
  const Mesh m = generate_quad_mesh(2);
  const auto k = CoefficientField::constant(1.0);
  EXPECT_THROW((void)face_values(k, m, FaceStrategy::Upwind), CoefficientError);
  std::vector<double> short_hint(3, 1.0);
  EXPECT_THROW((void)face_values(k, m, FaceStrategy::Upwind, CellRule::Centroid, short_hint),
               CoefficientError);
}

TEST(FaceValues, ConstantCoefficientIsExactUnderEveryStrategy) {
  const double kappa = 3.7;
  const auto k = CoefficientField::constant(kappa);
  for (const Mesh& m : {generate_polygonal_mesh(4, 1), generate_perturbed_quad_mesh(5, 0.3, 2)}) {
    for (FaceStrategy s : kAll) {
      for (CellRule r : {CellRule::Centroid, CellRule::Triangulated}) {
        const auto st = face_values(k, m, s, r, eastward_hint(m));
        for (const Tensor2& t : st.cell) EXPECT_EQ(t, Tensor2::isotropic(kappa));
        for (double v : st.face) EXPECT_EQ(v, kappa);
      }
    }
  }
}

TEST(FaceValues, MeansLieBetweenTheTraces) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 100.0);
  const Mesh m = generate_quad_mesh(2);
  const int f = interface_face(m);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = u(rng), b = u(rng);
    const auto k = CoefficientField::scalar(two_sided(std::to_string(a), std::to_string(b)));
    const auto tr = face_values(k, m, FaceStrategy::Trace);
    const int c0 = m.face(f).cells[0];
    const int c1 = m.face(f).cells[1];
    const double t0 = tr.cell_faces(c0)[local_of(m, c0, f)];
    const double t1 = tr.cell_faces(c1)[local_of(m, c1, f)];
    const double lo = std::min(t0, t1), hi = std::max(t0, t1);
    for (FaceStrategy s : {FaceStrategy::Arithmetic, FaceStrategy::Harmonic}) {
      const auto st = face_values(k, m, s);
      const double v0 = st.cell_faces(c0)[local_of(m, c0, f)];
      const double v1 = st.cell_faces(c1)[local_of(m, c1, f)];
      EXPECT_EQ(v0, v1);
      EXPECT_GE(v0, lo * (1 - 1e-15));
      EXPECT_LE(v0, hi * (1 + 1e-15));
    }
  }
}

TEST(FaceValues, TensorFaceValueIsNormalQuadraticForm) {
  const Mesh m = generate_perturbed_quad_mesh(4, 0.3, 8);
  const auto k = CoefficientField::tensor(PiecewiseExpr(parse("2 + x")), PiecewiseExpr(parse("0.3*y")),
                                          PiecewiseExpr(parse("1 + y^2")));
  const auto st = face_values(k, m, FaceStrategy::Trace);
  for (int c = 0; c < m.num_cells(); ++c) {
    const auto faces = m.cell_faces(c);
    for (std::size_t i = 0; i < faces.size(); ++i) {
      const Face& f = m.face(faces[i]);
      const Point x = f.midpoint;
      const Tensor2 K{2 + x.x, 0.3 * x.y, 1 + x.y * x.y};
      EXPECT_NEAR(st.cell_faces(c)[i], K.quadratic(f.normal), 1e-14);
    }
    const Point xc = m.cell_centroid(c);
    EXPECT_NEAR(st.cell[c].xy, 0.3 * xc.y, 1e-15);
  }
}

TEST(FaceValues, Deterministic) {
  const Mesh m = generate_polygonal_mesh(5, 2);
  const auto k = CoefficientField::scalar(two_sided("1 + x*y", "10*exp(y)"));
  for (FaceStrategy s : kAll) {
    const auto a = face_values(k, m, s, CellRule::Triangulated, eastward_hint(m));
    const auto b = face_values(k, m, s, CellRule::Triangulated, eastward_hint(m));
    EXPECT_EQ(a.face, b.face);
    EXPECT_EQ(a.cell, b.cell);
  }
}

TEST(CoefficientField, PositivityIsChecked) {
  const Mesh m = generate_quad_mesh(4);
  EXPECT_THROW(CoefficientField::scalar(parse("x - 0.5")).check_positive(m), CoefficientError);
  EXPECT_NO_THROW(CoefficientField::scalar(parse("0.01 + x")).check_positive(m));
  // Indefinite tensor: eigenvalues 1 +- 2.
  const auto bad = CoefficientField::tensor(PiecewiseExpr(parse("1")), PiecewiseExpr(parse("2")),
                                            PiecewiseExpr(parse("1")));
  EXPECT_THROW(bad.check_positive(m), CoefficientError);
}

TEST(CoefficientField, OneSidedSelection) {
  const auto k = two_sided("1", "100");
  EXPECT_EQ(k.eval({0.5, 0.3}, {0.5 - 1e-8, 0.3}), 1.0);
  EXPECT_EQ(k.eval({0.5, 0.3}, {0.5 + 1e-8, 0.3}), 100.0);
  EXPECT_EQ(k.locate({0.2, 0.0}), 0);
  EXPECT_EQ(k.locate({0.7, 0.0}), 1);
  PiecewiseExpr partial;
  partial.add_piece(parse("0.5 - x"), parse("1"));
  EXPECT_THROW((void)partial.eval({0.9, 0.1}), DomainError);
}

TEST(CoefficientField, StrategyNames) {
  for (FaceStrategy s : kAll) EXPECT_EQ(parse_face_strategy(to_string(s)), s);
  EXPECT_THROW((void)parse_face_strategy("geometric"), CoefficientError);
  EXPECT_EQ(parse_cell_rule("triangulated"), CellRule::Triangulated);
  EXPECT_THROW((void)parse_cell_rule("gauss"), CoefficientError);
}
