#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "mfdstag/error.hpp"
#include "mfdstag/mesh.hpp"

using namespace mfdstag;

namespace {

Mesh unit_square() { return Mesh::build({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2, 3}}); }

Mesh unit_triangle() {
  return Mesh::build({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, [](int, int, Point) { return "wall"; });
}

// Independent oracle: shoelace area straight from vertex coordinates.
double shoelace(const Mesh& mesh, int c) {
  const auto vs = mesh.cell_vertices(c);
  double a = 0.0;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const Point p = mesh.vertices()[vs[i]];
    const Point q = mesh.vertices()[vs[(i + 1) % vs.size()]];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

// Both per-cell identities, evaluated independently of the build-time check.
void expect_identities(const Mesh& mesh, const std::string& what) {
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto faces = mesh.cell_faces(c);
    const auto signs = mesh.cell_signs(c);
    const double area = mesh.cell_area(c);
    const Point xc = mesh.cell_centroid(c);
    double sx = 0, sy = 0, ixx = 0, ixy = 0, iyx = 0, iyy = 0, scale = 0;
    for (std::size_t i = 0; i < faces.size(); ++i) {
      const Face& f = mesh.face(faces[i]);
      const double w = signs[i] * f.length;
      sx += w * f.normal.x;
      sy += w * f.normal.y;
      const Point d = f.midpoint - xc;
      ixx += w * f.normal.x * d.x;
      ixy += w * f.normal.x * d.y;
      iyx += w * f.normal.y * d.x;
      iyy += w * f.normal.y * d.y;
      scale = std::max(scale, f.length);
    }
    ASSERT_LE(std::abs(sx), 1e-13 * scale) << what << " cell " << c;
    ASSERT_LE(std::abs(sy), 1e-13 * scale) << what << " cell " << c;
    ASSERT_LE(std::abs(ixx - area), 1e-13 * std::max(area, scale * scale)) << what << " cell " << c;
    ASSERT_LE(std::abs(iyy - area), 1e-13 * std::max(area, scale * scale)) << what << " cell " << c;
    ASSERT_LE(std::abs(ixy), 1e-13 * std::max(area, scale * scale)) << what << " cell " << c;
    ASSERT_LE(std::abs(iyx), 1e-13 * std::max(area, scale * scale)) << what << " cell " << c;
  }
}

void expect_conforming(const Mesh& mesh) {
  std::vector<int> count(mesh.num_faces(), 0);
  std::vector<int> sign_sum(mesh.num_faces(), 0);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto faces = mesh.cell_faces(c);
    const auto signs = mesh.cell_signs(c);
    for (std::size_t i = 0; i < faces.size(); ++i) {
      ++count[faces[i]];
      sign_sum[faces[i]] += signs[i];
    }
  }
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.face(f);
    EXPECT_GT(face.length, 0.0);
    if (face.is_boundary()) {
      EXPECT_EQ(count[f], 1);
    } else {
      EXPECT_EQ(count[f], 2);
      EXPECT_EQ(sign_sum[f], 0) << "face " << f;
    }
  }
}

std::vector<Mesh> sample_meshes() {
  std::vector<Mesh> out;
  for (int n : {2, 3, 8, 16}) {
    out.push_back(generate_quad_mesh(n));
    for (std::uint64_t seed : {1u, 2u, 99u}) {
      out.push_back(generate_perturbed_quad_mesh(n, 0.3, seed));
      out.push_back(generate_perturbed_quad_mesh(n, 0.4, seed));
      out.push_back(generate_polygonal_mesh(n, seed));
    }
  }
  return out;
}

}  // namespace

TEST(MeshBuild, UnitSquareCell) {
  const Mesh m = unit_square();
  EXPECT_EQ(m.num_cells(), 1);
  EXPECT_EQ(m.num_faces(), 4);
  EXPECT_DOUBLE_EQ(m.cell_area(0), 1.0);
  EXPECT_DOUBLE_EQ(m.cell_centroid(0).x, 0.5);
  EXPECT_DOUBLE_EQ(m.cell_centroid(0).y, 0.5);
  for (const Face& f : m.faces()) EXPECT_DOUBLE_EQ(f.length, 1.0);
  std::set<std::string> labels;
  for (int f = 0; f < 4; ++f) labels.insert(m.face_label(f));
  EXPECT_EQ(labels, (std::set<std::string>{"left", "right", "bottom", "top"}));
  const auto q = quality(m);
  EXPECT_DOUBLE_EQ(q.inradius[0], 0.5);
  EXPECT_EQ(q.max_faces, 4);
}

TEST(MeshBuild, Triangle) {
  const Mesh m = unit_triangle();
  EXPECT_DOUBLE_EQ(m.cell_area(0), 0.5);
  EXPECT_NEAR(m.cell_centroid(0).x, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.cell_centroid(0).y, 1.0 / 3.0, 1e-15);
  const auto q = quality(m);
  // Distance from (1/3, 1/3) to the line x + y = 1.
  EXPECT_NEAR(q.inradius[0], (1.0 - 2.0 / 3.0) / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(q.h, std::sqrt(2.0), 1e-15);
  EXPECT_LE(q.inradius[0], q.cell_diameter[0]);
  EXPECT_EQ(m.face_label(0), "wall");
}

TEST(MeshBuild, OutwardNormalsViaSigns) {
  const Mesh m = generate_polygonal_mesh(4, 3);
  for (int c = 0; c < m.num_cells(); ++c) {
    const auto faces = m.cell_faces(c);
    const auto signs = m.cell_signs(c);
    for (std::size_t i = 0; i < faces.size(); ++i) {
      const Face& f = m.face(faces[i]);
      const Point d = f.midpoint - m.cell_centroid(c);
      EXPECT_GT(signs[i] * dot(f.normal, d), 0.0);
      EXPECT_NEAR(norm(f.normal), 1.0, 1e-15);
    }
  }
}

TEST(MeshBuild, RejectsInvalidInput) {
  const std::vector<Point> sq = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  auto code_of = [](auto&& fn) -> std::string {
    try {
      fn();
    } catch (const MeshError& e) {
      return e.code();
    }
    return "";
  };
  // clockwise
  EXPECT_EQ(code_of([&] { Mesh::build(sq, {{0, 3, 2, 1}}); }), "mesh_error");
  // bow tie
  EXPECT_EQ(code_of([&] { Mesh::build(sq, {{0, 1, 3, 2}}); }), "mesh_error");
  // zero area
  EXPECT_EQ(code_of([&] { Mesh::build({{0, 0}, {1, 0}, {2, 0}}, {{0, 1, 2}}); }), "mesh_error");
  // index out of range
  EXPECT_EQ(code_of([&] { Mesh::build(sq, {{0, 1, 7}}); }), "mesh_error");
  // repeated vertex
  EXPECT_EQ(code_of([&] { Mesh::build(sq, {{0, 1, 1, 2}}); }), "mesh_error");
  // too few vertices
  EXPECT_EQ(code_of([&] { Mesh::build(sq, {{0, 1}}); }), "mesh_error");
  // hanging vertex: a big left cell next to two small right cells
  const std::vector<Point> hv = {{0, 0}, {1, 0}, {2, 0}, {2, 0.5}, {2, 1},
                                 {1, 1}, {0, 1}, {1, 0.5}};
  EXPECT_EQ(code_of([&] { Mesh::build(hv, {{0, 1, 5, 6}, {1, 2, 3, 7}, {7, 3, 4, 5}}); }),
            "mesh_error");
  // same edge used in the same direction by two cells (overlap)
  EXPECT_EQ(code_of([&] {
              Mesh::build({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 2}}, {{0, 1, 2, 3}, {0, 1, 4}});
            }),
            "mesh_error");
}

TEST(MeshGenerate, QuadCounts) {
  const Mesh m = generate_quad_mesh(2);
  EXPECT_EQ(m.num_cells(), 4);
  EXPECT_EQ(m.num_faces(), 12);
  EXPECT_EQ(m.num_vertices(), 9);
  EXPECT_DOUBLE_EQ(quality(m).h, std::sqrt(2.0) / 2.0);
  const auto q4 = quality(generate_quad_mesh(4));
  EXPECT_DOUBLE_EQ(q4.h, std::sqrt(2.0) / 4.0);
  EXPECT_EQ(q4.max_faces, 4);
}

TEST(MeshGenerate, ZeroPerturbationIsTheQuadMesh) {
  const Mesh a = generate_perturbed_quad_mesh(4, 0.0, 12345);
  const Mesh b = generate_quad_mesh(4);
  EXPECT_EQ(mesh_to_text(a), mesh_to_text(b));
}

TEST(MeshGenerate, PerturbationBoundedAndBoundaryFixed) {
  const int n = 8;
  const double xi = 0.3;
  const Mesh p = generate_perturbed_quad_mesh(n, xi, 5);
  const Mesh q = generate_quad_mesh(n);
  ASSERT_EQ(p.num_vertices(), q.num_vertices());
  int moved = 0;
  for (int v = 0; v < p.num_vertices(); ++v) {
    const Point a = p.vertices()[v], b = q.vertices()[v];
    const bool boundary = b.x == 0 || b.x == 1 || b.y == 0 || b.y == 1;
    if (boundary) {
      EXPECT_EQ(a, b);
    } else {
      EXPECT_LE(norm(a - b), xi / n + 1e-15);
      moved += !(a == b);
    }
  }
  EXPECT_EQ(moved, (n - 1) * (n - 1));
}

TEST(MeshGenerate, ShoelaceOracleOnPerturbedMeshes) {
  for (std::uint64_t seed : {1u, 7u, 31u}) {
    const Mesh m = generate_perturbed_quad_mesh(12, 0.4, seed);
    for (int c = 0; c < m.num_cells(); ++c) {
      EXPECT_NEAR(m.cell_area(c), shoelace(m, c), 1e-14);
    }
  }
}

TEST(MeshGenerate, IdentitiesAndConformityOnAllFamilies) {
  for (const Mesh& m : sample_meshes()) {
    expect_identities(m, std::to_string(m.num_cells()) + " cells");
    expect_conforming(m);
    double total = 0.0;
    for (int c = 0; c < m.num_cells(); ++c) total += m.cell_area(c);
    EXPECT_NEAR(total, 1.0, 1e-12);
    const auto q = quality(m);
    EXPECT_GT(q.h, 0.0);
    EXPECT_GE(q.max_faces, 3);
    for (int c = 0; c < m.num_cells(); ++c) EXPECT_LE(q.inradius[c], q.cell_diameter[c]);
  }
}

TEST(MeshGenerate, PolygonalShape) {
  const Mesh m = generate_polygonal_mesh(8, 1);
  EXPECT_EQ(m.num_cells(), 81);
  const auto q = quality(m);
  EXPECT_GE(q.max_faces, 5);
  EXPECT_LE(q.max_faces, 16);
  expect_identities(m, "polygonal(8,1)");
  std::set<int> sizes;
  for (int c = 0; c < m.num_cells(); ++c) sizes.insert(m.cell_size(c));
  EXPECT_GE(sizes.size(), 3u) << "expected mixed valence";
}

TEST(MeshGenerate, Deterministic) {
  EXPECT_EQ(mesh_to_text(generate_perturbed_quad_mesh(10, 0.3, 4)),
            mesh_to_text(generate_perturbed_quad_mesh(10, 0.3, 4)));
  EXPECT_NE(mesh_to_text(generate_perturbed_quad_mesh(10, 0.3, 4)),
            mesh_to_text(generate_perturbed_quad_mesh(10, 0.3, 5)));
  EXPECT_EQ(mesh_to_text(generate_polygonal_mesh(6, 2)), mesh_to_text(generate_polygonal_mesh(6, 2)));
  EXPECT_NE(mesh_to_text(generate_polygonal_mesh(6, 2)), mesh_to_text(generate_polygonal_mesh(6, 3)));
}

TEST(MeshGenerate, RejectsBadParameters) {
  EXPECT_THROW((void)generate_perturbed_quad_mesh(4, 0.41, 1), MeshError);
  EXPECT_THROW((void)generate_perturbed_quad_mesh(4, -0.1, 1), MeshError);
  EXPECT_THROW((void)generate_quad_mesh(1), MeshError);
  EXPECT_THROW((void)generate_polygonal_mesh(1, 1), MeshError);
  EXPECT_THROW((void)parse_mesh_family("hexagons"), MeshError);
  EXPECT_EQ(parse_mesh_family("perturbed-quad"), MeshFamily::PerturbedQuad);
  EXPECT_EQ(to_string(parse_mesh_family("polygonal")), "polygonal");
}

TEST(MeshFile, RoundTripIsExact) {
  const Mesh m = generate_polygonal_mesh(5, 9);
  const std::string text = mesh_to_text(m);
  const Mesh back = mesh_from_text(text);
  EXPECT_EQ(mesh_to_text(back), text);
  ASSERT_EQ(back.num_cells(), m.num_cells());
  for (int c = 0; c < m.num_cells(); ++c) {
    EXPECT_EQ(back.cell_area(c), m.cell_area(c));
    EXPECT_EQ(back.cell_centroid(c), m.cell_centroid(c));
  }
  for (int f = 0; f < m.num_faces(); ++f) {
    ASSERT_EQ(back.face(f).is_boundary(), m.face(f).is_boundary());
    if (m.face(f).is_boundary()) EXPECT_EQ(back.face_label(f), m.face_label(f));
  }

  const auto path = std::filesystem::temp_directory_path() / "mfdstag_mesh_roundtrip.json";
  save_mesh(m, path.string());
  EXPECT_EQ(mesh_to_text(load_mesh(path.string())), text);
  std::filesystem::remove(path);
}

TEST(MeshFile, CustomLabels) {
  const std::string text = R"({
    "vertices": [[0,0],[1,0],[1,1],[0,1]],
    "cells": [[0,1,2,3]],
    "boundary_labels": {"inflow": [[3,0]], "wall": [[0,1],[2,3]]}
  })";
  const Mesh m = mesh_from_text(text);
  std::map<std::string, int> count;
  for (int f = 0; f < m.num_faces(); ++f) ++count[m.face_label(f)];
  EXPECT_EQ(count["inflow"], 1);
  EXPECT_EQ(count["wall"], 2);
  EXPECT_EQ(count["boundary"], 1);
}

TEST(MeshFile, ErrorsNameTheProblem) {
  auto message = [](const std::string& text) -> std::string {
    try {
      (void)mesh_from_text(text);
    } catch (const MeshError& e) {
      return e.what();
    }
    return "";
  };
  EXPECT_NE(message("{\n  \"vertices\": [[0,0],\n  [1,0]\n").find("line"), std::string::npos);
  EXPECT_NE(message(R"({"vertices": [[0,0]], "cells": [], "extra": 1})").find("extra"),
            std::string::npos);
  EXPECT_NE(message(R"({"vertices": [[0,"a"]], "cells": []})").find("vertices[0]"),
            std::string::npos);
  EXPECT_NE(message(R"({"vertices": [[0,0],[1,0],[0,1]], "cells": [[0,1,-2]]})"), "");
  EXPECT_NE(message(R"({"cells": [[0,1,2]]})").find("vertices"), std::string::npos);
  EXPECT_THROW((void)load_mesh("/nonexistent/mesh.json"), MeshError);
}
