#include "mfdstag/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mfdstag/error.hpp"

namespace mfdstag {

namespace {

constexpr double kIdentityTol = 1e-13;

std::string cell_tag(int c) { return "cell " + std::to_string(c); }

// Signed area and centroid, computed relative to the first vertex to limit
// cancellation for cells far from the origin.
std::pair<double, Point> area_and_centroid(std::span<const Point> poly) {
  const Point o = poly[0];
  double a2 = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Point p = poly[i] - o;
    const Point q = poly[(i + 1) % m] - o;
    const double w = cross(p, q);
    a2 += w;
    cx += (p.x + q.x) * w;
    cy += (p.y + q.y) * w;
  }
  const double area = 0.5 * a2;
  if (area == 0.0) return {0.0, o};
  return {area, Point{o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2)}};
}

int orient(Point a, Point b, Point c) {
  const double v = cross(b - a, c - a);
  return (v > 0.0) - (v < 0.0);
}

bool on_segment(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

bool segments_touch(Point a, Point b, Point c, Point d) {
  const int o1 = orient(a, b, c);
  const int o2 = orient(a, b, d);
  const int o3 = orient(c, d, a);
  const int o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

void check_simple(std::span<const Point> poly, int c) {
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Point a = poly[i];
    const Point b = poly[(i + 1) % m];
    const Point n = poly[(i + 2) % m];
    if (a == b) throw MeshError(cell_tag(c) + " has a zero-length edge");
    // an edge folding straight back onto its predecessor
    if (cross(b - a, n - b) == 0.0 && dot(b - a, n - b) < 0.0) {
      throw MeshError(cell_tag(c) + " is self-intersecting (folded edge)");
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 2; j < m; ++j) {
      if (i == 0 && j == m - 1) continue;  // adjacent through the wrap
      if (segments_touch(poly[i], poly[(i + 1) % m], poly[j], poly[(j + 1) % m])) {
        throw MeshError(cell_tag(c) + " is self-intersecting");
      }
    }
  }
}

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

// Portable uniform double in [0, 1).
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<Point> grid_vertices(int n, double xi, std::uint64_t seed) {
  std::vector<Point> v;
  v.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      v.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    }
  }
  if (xi > 0.0) {
    std::mt19937_64 rng(seed);
    const double rmax = xi / n;
    for (int j = 1; j < n; ++j) {
      for (int i = 1; i < n; ++i) {
        const double r = rmax * std::sqrt(uniform01(rng));
        const double t = 2.0 * std::numbers::pi * uniform01(rng);
        Point& p = v[static_cast<std::size_t>(j * (n + 1) + i)];
        p = p + Point{r * std::cos(t), r * std::sin(t)};
      }
    }
  }
  return v;
}

std::vector<std::vector<int>> grid_cells(int n) {
  std::vector<std::vector<int>> cells;
  cells.reserve(static_cast<std::size_t>(n * n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v0 = j * (n + 1) + i;
      cells.push_back({v0, v0 + 1, v0 + n + 2, v0 + n + 1});
    }
  }
  return cells;
}

void check_resolution(int n) {
  if (n < 2) throw MeshError("mesh resolution must be at least 2, got " + std::to_string(n));
}

}  // namespace

FaceLabeler unit_square_sides() {
  return [](int, int, Point m) -> std::string {
    constexpr double tol = 1e-12;
    if (m.x < tol) return "left";
    if (m.x > 1.0 - tol) return "right";
    if (m.y < tol) return "bottom";
    if (m.y > 1.0 - tol) return "top";
    return "";
  };
}

FaceLabeler labels_from_vertex_pairs(
    std::map<std::string, std::vector<std::array<int, 2>>> pairs) {
  auto table = std::make_shared<std::unordered_map<std::uint64_t, std::string>>();
  for (const auto& [label, list] : pairs) {
    for (const auto& p : list) (*table)[edge_key(p[0], p[1])] = label;
  }
  return [table](int a, int b, Point) -> std::string {
    auto it = table->find(edge_key(a, b));
    return it == table->end() ? std::string() : it->second;
  };
}

Mesh Mesh::build(std::vector<Point> vertices, std::vector<std::vector<int>> cells,
                 const FaceLabeler& labeler) {
  Mesh mesh;
  mesh.vertices_ = std::move(vertices);
  const int nv = mesh.num_vertices();
  if (cells.empty()) throw MeshError("mesh has no cells");
  for (const Point& p : mesh.vertices_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw MeshError("non-finite vertex coordinate");
    }
  }

  std::unordered_map<std::uint64_t, int> edge_to_face;
  edge_to_face.reserve(cells.size() * 4);
  std::vector<Point> poly;
  std::vector<int> first_signs;

  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const int c = static_cast<int>(ci);
    const auto& cv = cells[ci];
    const int m = static_cast<int>(cv.size());
    if (m < 3) throw MeshError(cell_tag(c) + " has fewer than 3 vertices");
    poly.clear();
    for (int v : cv) {
      if (v < 0 || v >= nv) {
        throw MeshError(cell_tag(c) + " references vertex " + std::to_string(v) +
                        " out of range");
      }
      poly.push_back(mesh.vertices_[v]);
    }
    {
      std::vector<int> sorted = cv;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw MeshError(cell_tag(c) + " repeats a vertex");
      }
    }
    check_simple(poly, c);
    const auto [area, centroid] = area_and_centroid(poly);
    if (!(area > 0.0)) {
      throw MeshError(cell_tag(c) + " has non-positive area (cells must be counterclockwise)");
    }
    mesh.areas_.push_back(area);
    mesh.centroids_.push_back(centroid);

    for (int i = 0; i < m; ++i) {
      const int a = cv[i];
      const int b = cv[(i + 1) % m];
      mesh.cell_vertices_.push_back(a);
      const std::uint64_t key = edge_key(a, b);
      auto [it, inserted] = edge_to_face.try_emplace(key, mesh.num_faces());
      if (inserted) {
        Face f;
        f.vertices = {std::min(a, b), std::max(a, b)};
        const Point p0 = mesh.vertices_[f.vertices[0]];
        const Point p1 = mesh.vertices_[f.vertices[1]];
        const Vec2 t = p1 - p0;
        f.length = norm(t);
        f.midpoint = 0.5 * (p0 + p1);
        f.normal = {t.y / f.length, -t.x / f.length};
        f.cells[0] = c;
        mesh.faces_.push_back(f);
        first_signs.push_back(a == f.vertices[0] ? 1 : -1);
      } else {
        Face& f = mesh.faces_[it->second];
        if (f.cells[1] >= 0) {
          throw MeshError("non-conforming edge (" + std::to_string(a) + ", " +
                          std::to_string(b) + ") shared by more than two cells");
        }
        const int first_sign = first_signs[it->second];
        const int this_sign = a == f.vertices[0] ? 1 : -1;
        if (first_sign == this_sign) {
          throw MeshError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                          ") traversed in the same direction by two cells "
                          "(overlap or inconsistent orientation)");
        }
        f.cells[1] = c;
      }
      mesh.cell_faces_.push_back(it->second);
      mesh.cell_signs_.push_back(a == mesh.faces_[it->second].vertices[0] ? 1 : -1);
    }
    mesh.cell_offsets_.push_back(static_cast<int>(mesh.cell_faces_.size()));
  }

  // Hanging vertices show up as a vertex inside a boundary edge.
  std::vector<int> boundary_vertices;
  {
    std::vector<char> mark(static_cast<std::size_t>(nv), 0);
    for (const Face& f : mesh.faces_) {
      if (f.is_boundary()) mark[f.vertices[0]] = mark[f.vertices[1]] = 1;
    }
    for (int v = 0; v < nv; ++v) {
      if (mark[v]) boundary_vertices.push_back(v);
    }
  }
  for (const Face& f : mesh.faces_) {
    if (!f.is_boundary()) continue;
    const Point a = mesh.vertices_[f.vertices[0]];
    const Point b = mesh.vertices_[f.vertices[1]];
    for (int v : boundary_vertices) {
      if (v == f.vertices[0] || v == f.vertices[1]) continue;
      const Point p = mesh.vertices_[v];
      if (on_segment(a, b, p) &&
          std::fabs(cross(b - a, p - a)) <= 1e-12 * f.length * f.length) {
        throw MeshError("non-conforming edge: vertex " + std::to_string(v) +
                        " lies inside boundary edge (" + std::to_string(f.vertices[0]) +
                        ", " + std::to_string(f.vertices[1]) + ")");
      }
    }
  }

  std::map<std::string, int> label_index;
  for (Face& f : mesh.faces_) {
    if (!f.is_boundary()) continue;
    std::string label = labeler ? labeler(f.vertices[0], f.vertices[1], f.midpoint) : "";
    if (label.empty()) label = "boundary";
    auto [it, inserted] = label_index.try_emplace(label, static_cast<int>(mesh.labels_.size()));
    if (inserted) mesh.labels_.push_back(label);
    f.label = it->second;
  }

  // Per-cell identities: sum sigma |f| n_f = 0 and
  // sum sigma |f| n_f (x_f - x_c)^T = |c| I.
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto fs = mesh.cell_faces(c);
    const auto ss = mesh.cell_signs(c);
    const Point xc = mesh.centroids_[c];
    double diam2 = 0.0;
    for (int v : mesh.cell_vertices(c)) {
      for (int w : mesh.cell_vertices(c)) {
        const Vec2 d = mesh.vertices_[v] - mesh.vertices_[w];
        diam2 = std::max(diam2, dot(d, d));
      }
    }
    double sx = 0.0, sy = 0.0, mxx = 0.0, mxy = 0.0, myx = 0.0, myy = 0.0;
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const Face& f = mesh.faces_[fs[i]];
      const double w = ss[i] * f.length;
      const Vec2 r = f.midpoint - xc;
      sx += w * f.normal.x;
      sy += w * f.normal.y;
      mxx += w * f.normal.x * r.x;
      mxy += w * f.normal.x * r.y;
      myx += w * f.normal.y * r.x;
      myy += w * f.normal.y * r.y;
    }
    const double diam = std::sqrt(diam2);
    const double area = mesh.areas_[c];
    const double tol_area = kIdentityTol * std::max(area, diam2);
    if (std::fabs(sx) > kIdentityTol * diam * static_cast<double>(fs.size()) ||
        std::fabs(sy) > kIdentityTol * diam * static_cast<double>(fs.size())) {
      throw MeshError(cell_tag(c) + " violates the closed-boundary identity");
    }
    if (std::fabs(mxx - area) > tol_area || std::fabs(myy - area) > tol_area ||
        std::fabs(mxy) > tol_area || std::fabs(myx) > tol_area) {
      throw MeshError(cell_tag(c) + " violates the divergence identity");
    }
  }
  return mesh;
}

std::vector<std::vector<int>> Mesh::cell_lists() const {
  std::vector<std::vector<int>> out;
  out.reserve(static_cast<std::size_t>(num_cells()));
  for (int c = 0; c < num_cells(); ++c) {
    const auto v = cell_vertices(c);
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

MeshQuality quality(const Mesh& mesh) {
  MeshQuality q;
  q.min_inradius_ratio = std::numeric_limits<double>::infinity();
  const auto& verts = mesh.vertices();
  for (int c = 0; c < mesh.num_cells(); ++c) {
    double d2 = 0.0;
    const auto cv = mesh.cell_vertices(c);
    for (std::size_t i = 0; i < cv.size(); ++i) {
      for (std::size_t j = i + 1; j < cv.size(); ++j) {
        const Vec2 d = verts[cv[i]] - verts[cv[j]];
        d2 = std::max(d2, dot(d, d));
      }
    }
    const double hc = std::sqrt(d2);
    double r = std::numeric_limits<double>::infinity();
    const Point xc = mesh.cell_centroid(c);
    for (int f : mesh.cell_faces(c)) {
      const Face& face = mesh.face(f);
      r = std::min(r, std::fabs(dot(xc - face.midpoint, face.normal)));
    }
    q.cell_diameter.push_back(hc);
    q.inradius.push_back(r);
    q.h = std::max(q.h, hc);
    q.max_faces = std::max(q.max_faces, mesh.cell_size(c));
    q.min_inradius_ratio = std::min(q.min_inradius_ratio, r / hc);
  }
  return q;
}

Mesh generate_quad_mesh(int n) {
  check_resolution(n);
  return Mesh::build(grid_vertices(n, 0.0, 0), grid_cells(n));
}

Mesh generate_perturbed_quad_mesh(int n, double xi, std::uint64_t seed) {
  check_resolution(n);
  if (!(xi >= 0.0 && xi <= 0.4)) {
    throw MeshError("perturbation fraction must lie in [0, 0.4]");
  }
  return Mesh::build(grid_vertices(n, xi, seed), grid_cells(n));
}

Mesh generate_polygonal_mesh(int n, std::uint64_t seed) {
  check_resolution(n);
  constexpr double kGridPerturbation = 0.2;
  const std::vector<Point> pv = grid_vertices(n, kGridPerturbation, seed);
  const int npv = static_cast<int>(pv.size());

  // Triangulate each quad along a randomly chosen diagonal.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::array<int, 3>> tris;
  for (const auto& q : grid_cells(n)) {
    if (rng() & 1U) {
      tris.push_back({q[0], q[1], q[2]});
      tris.push_back({q[0], q[2], q[3]});
    } else {
      tris.push_back({q[0], q[1], q[3]});
      tris.push_back({q[1], q[2], q[3]});
    }
  }

  std::vector<Point> dv;
  std::unordered_map<std::uint64_t, int> edge_mid;
  auto midpoint_of = [&](int a, int b) {
    auto [it, inserted] = edge_mid.try_emplace(edge_key(a, b), static_cast<int>(dv.size()));
    if (inserted) dv.push_back(0.5 * (pv[a] + pv[b]));
    return it->second;
  };
  std::vector<int> tri_centroid(tris.size());
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const auto& tr = tris[t];
    tri_centroid[t] = static_cast<int>(dv.size());
    dv.push_back((1.0 / 3.0) * (pv[tr[0]] + pv[tr[1]] + pv[tr[2]]));
  }

  // For every primal vertex v: the triangles around it, keyed by the vertex
  // that precedes the far edge in counterclockwise order.
  struct Wedge {
    int tri;
    int next;
  };
  std::vector<std::unordered_map<int, Wedge>> fan(static_cast<std::size_t>(npv));
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const auto& tr = tris[t];
    for (int k = 0; k < 3; ++k) {
      fan[tr[k]][tr[(k + 1) % 3]] = Wedge{static_cast<int>(t), tr[(k + 2) % 3]};
    }
  }

  std::vector<std::vector<int>> cells;
  cells.reserve(static_cast<std::size_t>(npv));
  for (int v = 0; v < npv; ++v) {
    const auto& wedges = fan[v];
    int start = -1;
    // A boundary vertex starts at the wedge whose first edge has no predecessor.
    std::vector<int> starts;
    for (const auto& [a, w] : wedges) starts.push_back(a);
    std::sort(starts.begin(), starts.end());
    for (int a : starts) {
      bool has_pred = false;
      for (const auto& [b, w] : wedges) {
        if (w.next == a) {
          has_pred = true;
          break;
        }
      }
      if (!has_pred) {
        start = a;
        break;
      }
    }
    const bool boundary = start >= 0;
    if (!boundary) start = starts.front();

    std::vector<int> poly;
    int boundary_vertex_index = -1;
    if (boundary) {
      boundary_vertex_index = static_cast<int>(dv.size());
      dv.push_back(pv[v]);
      poly.push_back(boundary_vertex_index);
    }
    int a = start;
    for (std::size_t step = 0; step < wedges.size(); ++step) {
      const Wedge& w = wedges.at(a);
      poly.push_back(midpoint_of(v, a));
      poly.push_back(tri_centroid[w.tri]);
      a = w.next;
    }
    if (boundary) poly.push_back(midpoint_of(v, a));
    cells.push_back(std::move(poly));
  }
  return Mesh::build(std::move(dv), std::move(cells));
}

MeshFamily parse_mesh_family(const std::string& name) {
  if (name == "quad") return MeshFamily::Quad;
  if (name == "perturbed" || name == "perturbed-quad") return MeshFamily::PerturbedQuad;
  if (name == "polygonal") return MeshFamily::Polygonal;
  throw MeshError("unknown mesh family '" + name + "' (expected quad, perturbed, polygonal)");
}

std::string to_string(MeshFamily family) {
  switch (family) {
    case MeshFamily::Quad: return "quad";
    case MeshFamily::PerturbedQuad: return "perturbed";
    case MeshFamily::Polygonal: return "polygonal";
  }
  return "?";
}

Mesh generate_mesh(MeshFamily family, int n, double xi, std::uint64_t seed) {
  switch (family) {
    case MeshFamily::Quad: return generate_quad_mesh(n);
    case MeshFamily::PerturbedQuad: return generate_perturbed_quad_mesh(n, xi, seed);
    case MeshFamily::Polygonal: return generate_polygonal_mesh(n, seed);
  }
  throw MeshError("unknown mesh family");
}

// --- file format ------------------------------------------------------------

std::string mesh_to_text(const Mesh& mesh) {
  nlohmann::ordered_json doc;
  auto& verts = doc["vertices"] = nlohmann::ordered_json::array();
  for (const Point& p : mesh.vertices()) verts.push_back({p.x, p.y});
  auto& cells = doc["cells"] = nlohmann::ordered_json::array();
  for (const auto& cv : mesh.cell_lists()) cells.push_back(cv);
  std::map<std::string, std::vector<std::array<int, 2>>> groups;
  for (const Face& f : mesh.faces()) {
    if (f.is_boundary()) groups[mesh.labels()[f.label]].push_back(f.vertices);
  }
  auto& labels = doc["boundary_labels"] = nlohmann::ordered_json::object();
  for (const auto& [name, list] : groups) labels[name] = list;
  return doc.dump(1) + "\n";
}

Mesh mesh_from_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MeshError(std::string("mesh file: ") + e.what());
  }
  auto require = [](bool ok, const std::string& path, const std::string& msg) {
    if (!ok) throw MeshError("mesh file: " + path + ": " + msg);
  };
  require(doc.is_object(), "<root>", "expected an object");
  for (const auto& [key, _] : doc.items()) {
    require(key == "vertices" || key == "cells" || key == "boundary_labels", key,
            "unknown key");
  }
  require(doc.contains("vertices") && doc["vertices"].is_array(), "vertices",
          "missing or not an array");
  require(doc.contains("cells") && doc["cells"].is_array(), "cells",
          "missing or not an array");

  std::vector<Point> vertices;
  for (std::size_t i = 0; i < doc["vertices"].size(); ++i) {
    const auto& p = doc["vertices"][i];
    const std::string path = "vertices[" + std::to_string(i) + "]";
    require(p.is_array() && p.size() == 2 && p[0].is_number() && p[1].is_number(), path,
            "expected [x, y]");
    vertices.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  std::vector<std::vector<int>> cells;
  for (std::size_t i = 0; i < doc["cells"].size(); ++i) {
    const auto& c = doc["cells"][i];
    const std::string path = "cells[" + std::to_string(i) + "]";
    require(c.is_array(), path, "expected an array of vertex indices");
    std::vector<int> list;
    for (std::size_t k = 0; k < c.size(); ++k) {
      require(c[k].is_number_integer(), path + "[" + std::to_string(k) + "]",
              "expected an integer");
      list.push_back(c[k].get<int>());
    }
    cells.push_back(std::move(list));
  }
  FaceLabeler labeler = [](int, int, Point) { return std::string(); };
  if (doc.contains("boundary_labels")) {
    const auto& bl = doc["boundary_labels"];
    require(bl.is_object(), "boundary_labels", "expected an object");
    std::map<std::string, std::vector<std::array<int, 2>>> pairs;
    for (const auto& [name, list] : bl.items()) {
      const std::string path = "boundary_labels." + name;
      require(list.is_array(), path, "expected a list of [a, b] pairs");
      for (const auto& pr : list) {
        require(pr.is_array() && pr.size() == 2 && pr[0].is_number_integer() &&
                    pr[1].is_number_integer(),
                path, "expected [a, b] vertex pairs");
        pairs[name].push_back({pr[0].get<int>(), pr[1].get<int>()});
      }
    }
    labeler = labels_from_vertex_pairs(std::move(pairs));
  }
  return Mesh::build(std::move(vertices), std::move(cells), labeler);
}

void save_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot open '" + path + "' for writing");
  out << mesh_to_text(mesh);
}

Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return mesh_from_text(ss.str());
}

}  // namespace mfdstag
