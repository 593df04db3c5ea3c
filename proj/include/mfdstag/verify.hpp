#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mfdstag/field.hpp"
#include "mfdstag/mesh.hpp"
#include "mfdstag/mfd.hpp"
#include "mfdstag/solver.hpp"

namespace mfdstag {

// Exact pressure and coefficient with everything derived from them
// symbolically: grad p, the forcing f = -div(K grad p) for every pair of
// (pressure piece, coefficient piece), and boundary data.
class ManufacturedProblem {
 public:
  static ManufacturedProblem make(PiecewiseExpr p, CoefficientField k);
  static ManufacturedProblem make(const std::string& p, const std::string& k);

  const CoefficientField& coefficient() const;
  const PiecewiseExpr& pressure_expr() const;

  double pressure(Point at, Point select) const;
  Vec2 gradient(Point at, Point select) const;
  double source(Point at, Point select) const;
  double pressure(Point at) const { return pressure(at, at); }
  Vec2 gradient(Point at) const { return gradient(at, at); }
  double source(Point at) const { return source(at, at); }

  const expr::Expr& source_expr(int pressure_piece, int coefficient_piece) const;

  ProblemData data(std::map<std::string, BoundaryKind> kinds = {
                       {"*", BoundaryKind::Dirichlet}}) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

// p = sin(pi x) sin(pi y), k = 1 + x y.
ManufacturedProblem smooth_problem();

// k = k_left for x < 1/2 and k_right otherwise, with the flux-continuous
// exact solution p = (1 + (exp(x) - exp(1/2)) / k) (1 + y^2).
ManufacturedProblem interface_problem(double k_left, double k_right);

enum class VectorNorm { Weighted, Unweighted };

struct ErrorOptions {
  VectorNorm vector_norm = VectorNorm::Weighted;
  CellRule cell_rule = CellRule::Centroid;
};

struct ErrorNorms {
  double e_p = 0.0;      // sqrt(sum |c| (p_c - p_I,c)^2)
  double e_v = 0.0;      // sqrt(sum d_c^T M_c d_c), d_c = v - (grad p)(x_f) . n_f
  double max_p = 0.0;    // max |p_c - p_I,c|
  double max_v = 0.0;    // max |d|
};

// Exact interpolant: cell means (centroid value by default) and one-sided
// normal gradient components at face midpoints.
Solution interpolate(const Mesh& mesh, const ManufacturedProblem& problem,
                     CellRule rule = CellRule::Centroid);

ErrorNorms compute_errors(const Solution& solution, const ManufacturedProblem& problem,
                          const Mesh& mesh, std::span<const LocalCellOperators> ops,
                          const ErrorOptions& options = {});

// Least-squares slope of log(e) against log(h).
double least_squares_rate(std::span<const double> h, std::span<const double> e);

struct ConvergenceLevel {
  int n = 0;
  double h = 0.0;
  int num_cells = 0;
  int num_faces = 0;
  double e_p = 0.0;
  double e_v = 0.0;
  double rate_p_so_far = 0.0;  // NaN on the first level
  double rate_v_so_far = 0.0;
  int iterations = 0;
  double conservation = 0.0;   // max of the two conservation residuals
};

struct ConvergenceReport {
  std::string family;
  std::string strategy;
  std::vector<ConvergenceLevel> levels;
  double rate_p = 0.0;
  double rate_v = 0.0;
};

struct StudyOptions {
  MeshFamily family = MeshFamily::Quad;
  double xi = 0.3;
  std::uint64_t seed = 1;
  std::vector<int> levels{8, 16, 32, 64};
  SolveOptions solve;
  VectorNorm vector_norm = VectorNorm::Weighted;
  std::map<std::string, BoundaryKind> boundary{{"*", BoundaryKind::Dirichlet}};
  int threads = 1;
  // Called once per level after the solve (from the worker thread).
  std::function<void(const Mesh&, const SolveOutcome&, ConvergenceLevel&)> on_level;
};

// Seed used for the random families at resolution n.
std::uint64_t level_seed(std::uint64_t seed, int n);

ConvergenceReport convergence_study(const ManufacturedProblem& problem, FaceStrategy strategy,
                                    const StudyOptions& options);

// One report per (family, strategy) pair, families outermost.
std::vector<ConvergenceReport> compare_strategies(const ManufacturedProblem& problem,
                                                  std::span<const MeshFamily> families,
                                                  std::span<const FaceStrategy> strategies,
                                                  const StudyOptions& options);

// CSV with columns level,h,n_cells,n_faces,e_p,e_v,rate_p_so_far,rate_v_so_far,cg_iters
std::string to_csv(const ConvergenceReport& report);
std::string to_json(std::span<const ConvergenceReport> reports);
std::string format_table(std::span<const ConvergenceReport> reports);

}  // namespace mfdstag
