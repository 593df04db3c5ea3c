#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfdstag/geometry.hpp"

namespace mfdstag {

// One unique edge of the mesh. The normal has a single global orientation
// (it points to the right of vertices[0] -> vertices[1]); a cell recovers
// its outward normal through the incidence sign.
struct Face {
  std::array<int, 2> vertices{};
  double length = 0.0;
  Point midpoint;
  Vec2 normal;
  std::array<int, 2> cells{-1, -1};  // cells[1] == -1 on the boundary
  int label = -1;                    // index into Mesh::labels(), boundary only

  bool is_boundary() const { return cells[1] < 0; }
};

// Returns the label of a boundary face; an empty string means "boundary".
using FaceLabeler = std::function<std::string(int va, int vb, Point midpoint)>;

// Labels boundary faces of the unit square as left/right/bottom/top.
FaceLabeler unit_square_sides();

// Labels boundary faces listed by endpoint pairs (either order).
FaceLabeler labels_from_vertex_pairs(
    std::map<std::string, std::vector<std::array<int, 2>>> pairs);

class Mesh {
 public:
  // Builds faces, incidence and geometry, then checks conformity, cell
  // simplicity, positivity and the two per-cell geometric identities.
  // Throws MeshError on any violation.
  static Mesh build(std::vector<Point> vertices, std::vector<std::vector<int>> cells,
                    const FaceLabeler& labeler = unit_square_sides());

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_cells() const { return static_cast<int>(cell_offsets_.size()) - 1; }
  int num_faces() const { return static_cast<int>(faces_.size()); }

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const Face& face(int f) const { return faces_[f]; }

  // Local face i of a cell joins local vertices i and i+1.
  std::span<const int> cell_vertices(int c) const { return span_of(cell_vertices_, c); }
  std::span<const int> cell_faces(int c) const { return span_of(cell_faces_, c); }
  std::span<const int> cell_signs(int c) const { return span_of(cell_signs_, c); }
  int cell_size(int c) const { return cell_offsets_[c + 1] - cell_offsets_[c]; }

  double cell_area(int c) const { return areas_[c]; }
  Point cell_centroid(int c) const { return centroids_[c]; }

  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& face_label(int f) const { return labels_.at(faces_[f].label); }

  std::vector<std::vector<int>> cell_lists() const;

 private:
  std::span<const int> span_of(const std::vector<int>& v, int c) const {
    return {v.data() + cell_offsets_[c],
            static_cast<std::size_t>(cell_offsets_[c + 1] - cell_offsets_[c])};
  }

  std::vector<Point> vertices_;
  std::vector<int> cell_offsets_{0};
  std::vector<int> cell_vertices_;
  std::vector<int> cell_faces_;
  std::vector<int> cell_signs_;
  std::vector<double> areas_;
  std::vector<Point> centroids_;
  std::vector<Face> faces_;
  std::vector<std::string> labels_;
};

struct MeshQuality {
  double h = 0.0;                  // max cell diameter
  std::vector<double> cell_diameter;
  std::vector<double> inradius;    // centroid-to-nearest-face-line distance
  int max_faces = 0;
  double min_inradius_ratio = 0.0;
};

MeshQuality quality(const Mesh& mesh);

// Uniform n x n squares on the unit square.
Mesh generate_quad_mesh(int n);

// Uniform grid whose interior vertices are moved by a random vector of
// length at most xi / n. Bit-reproducible for a given seed. Requires
// 0 <= xi <= 0.4.
Mesh generate_perturbed_quad_mesh(int n, double xi, std::uint64_t seed);

// Median-dual polygons over a randomly triangulated, perturbed n x n grid:
// (n + 1)^2 cells with 4 to 16 faces each.
Mesh generate_polygonal_mesh(int n, std::uint64_t seed);

enum class MeshFamily { Quad, PerturbedQuad, Polygonal };

MeshFamily parse_mesh_family(const std::string& name);
std::string to_string(MeshFamily family);

// n is the per-side resolution; xi is only used by the perturbed family.
Mesh generate_mesh(MeshFamily family, int n, double xi, std::uint64_t seed);

// Text mesh document: {"vertices": [[x, y], ...], "cells": [[i, j, k, ...], ...],
// "boundary_labels": {"name": [[a, b], ...]}}. Doubles round-trip exactly.
std::string mesh_to_text(const Mesh& mesh);
Mesh mesh_from_text(const std::string& text);
void save_mesh(const Mesh& mesh, const std::string& path);
Mesh load_mesh(const std::string& path);

}  // namespace mfdstag
