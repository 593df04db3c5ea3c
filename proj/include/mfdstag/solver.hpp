#pragma once

#include <optional>
#include <vector>

#include "mfdstag/field.hpp"
#include "mfdstag/linalg.hpp"
#include "mfdstag/mesh.hpp"
#include "mfdstag/mfd.hpp"

namespace mfdstag {

struct Solution {
  std::vector<double> p;       // per cell
  std::vector<double> v;       // per face, gradient component along the face normal
  std::vector<double> v_side;  // per (cell, local face), StaggeredCoefficient layout
  std::vector<double> lambda;  // per face: face pressure (hybrid path only)
  double multiplier = 0.0;     // mean-zero multiplier of pure-Neumann problems
  linalg::SolverReport report;
};

struct SolveOptions {
  enum class Path { Hybrid, Saddle };
  Path path = Path::Hybrid;
  double tol = 1e-10;
  int maxit = 200000;
  linalg::Preconditioner preconditioner = linalg::Preconditioner::Jacobi;
  AssemblyOptions assembly;
};

// MINRES on the symmetric indefinite block system.
Solution solve_saddle(const Mesh& mesh, const SaddleSystem& system, double tol,
                      int maxit = 200000);

// Hybridized system: face dofs duplicated per cell, one multiplier (face
// pressure) per interior face enforcing continuity of the numerical flux
// sigma1 k1 v1 + sigma2 k2 v2 = 0. Dirichlet face pressures are known;
// Neumann dofs are fixed. The local saddle blocks are eliminated, leaving
// the SPD matrix S on the multipliers.
struct HybridSystem {
  struct CellBlock {
    std::vector<int> free_local;   // local faces with unknown v
    std::vector<int> mult_row;     // row (into free_local) of each multiplier
    std::vector<int> mult_global;  // global multiplier index
    std::vector<double> base;      // A^-1 r, length free + 1
    linalg::DenseMatrix coupling;  // A^-1 E, (free + 1) x multipliers
  };
  std::vector<int> multiplier_of_face;  // -1 when the face has no multiplier
  std::vector<CellBlock> cells;
  linalg::SparseMatrix S;
  std::vector<double> rhs;
  double source_shift = 0.0;  // per unit area, pure-Neumann compatibility

  int num_multipliers() const { return S.rows(); }
};

HybridSystem hybridize(const Mesh& mesh, const SaddleSystem& system);

// Back-substitution from the multipliers.
Solution recover(const Mesh& mesh, const SaddleSystem& system, const HybridSystem& hybrid,
                 std::span<const double> lambda);

// PCG on S followed by back-substitution. Throws SolverError on CG
// breakdown or non-convergence.
Solution solve_hybrid(const Mesh& mesh, const SaddleSystem& system, double tol,
                      int maxit = 200000,
                      linalg::Preconditioner preconditioner = linalg::Preconditioner::Jacobi);

Solution solve_hybrid(const Mesh& mesh, const StaggeredCoefficient& staggered,
                      const ProblemData& problem, double tol);

enum class InfSupMetric { Weighted, Unweighted };

// beta_h = sqrt(lambda_min(D^-1/2 B M^-1 Bt D^-1/2)) over the free faces,
// with D = diag(|c| kbar_c) (Weighted) or diag(|c|) (Unweighted). Dense;
// meant for meshes of up to a few thousand faces.
double infsup_estimate(const SaddleSystem& system,
                       InfSupMetric metric = InfSupMetric::Weighted);

struct BlockResidual {
  double gradient = 0.0;  // ||M v + Bt p - g|| / max(||g||, ||M v||), free faces
  double mass = 0.0;      // ||B v + F|| / max(||F||, ||B v||)
};

BlockResidual saddle_residual(const SaddleSystem& system, const Solution& solution);

struct ConservationReport {
  double total_divergence = 0.0;  // sum_c |c| DIV^k v
  double boundary_flux = 0.0;     // sum over boundary faces of sigma |f| k v
  double total_source = 0.0;      // sum_c |c| f_c (+ pure-Neumann multiplier)
  double scale = 0.0;

  // |sum |c| DIV - boundary flux| / scale
  double divergence_theorem_residual() const;
  // |sum |c| DIV + sum |c| f| / scale
  double balance_residual() const;
};

ConservationReport conservation(const Mesh& mesh, const SaddleSystem& system,
                                const Solution& solution);

struct SolveOutcome {
  StaggeredCoefficient staggered;
  SaddleSystem system;
  Solution solution;
  std::optional<Solution> preliminary;  // Arithmetic pass that drives Upwind
};

// Face values (with the two-pass Upwind when requested), assembly, solve.
SolveOutcome discretize_and_solve(const Mesh& mesh, const ProblemData& problem,
                                  FaceStrategy strategy, const SolveOptions& options);

// Flux along each face's global normal, -k^c_f v_f, from the first cell.
std::vector<double> face_flux(const Mesh& mesh, const StaggeredCoefficient& staggered,
                              const Solution& solution);

}  // namespace mfdstag
