#include "mfdstag/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <thread>

#include <nlohmann/json.hpp>

#include "mfdstag/error.hpp"

namespace mfdstag {

using expr::Expr;
using expr::Var;

struct ManufacturedProblem::Impl {
  PiecewiseExpr p;
  CoefficientField k;
  std::vector<Expr> px, py;
  std::vector<Expr> f;  // f[ip * nk + ik]
  int nk = 0;
};

ManufacturedProblem ManufacturedProblem::make(PiecewiseExpr p, CoefficientField k) {
  auto impl = std::make_shared<Impl>();
  impl->nk = k.kxx().num_pieces();
  for (int i = 0; i < p.num_pieces(); ++i) {
    const Expr px = expr::differentiate(p.piece(i), Var::X);
    const Expr py = expr::differentiate(p.piece(i), Var::Y);
    impl->px.push_back(px);
    impl->py.push_back(py);
    for (int j = 0; j < impl->nk; ++j) {
      Expr flux_x, flux_y;
      if (k.is_tensor()) {
        flux_x = k.kxx().piece(j) * px + k.kxy().piece(j) * py;
        flux_y = k.kxy().piece(j) * px + k.kyy().piece(j) * py;
      } else {
        flux_x = k.kxx().piece(j) * px;
        flux_y = k.kxx().piece(j) * py;
      }
      impl->f.push_back(
          -(expr::differentiate(flux_x, Var::X) + expr::differentiate(flux_y, Var::Y)));
    }
  }
  impl->p = std::move(p);
  impl->k = std::move(k);
  ManufacturedProblem out;
  out.impl_ = std::move(impl);
  return out;
}

ManufacturedProblem ManufacturedProblem::make(const std::string& p, const std::string& k) {
  return make(PiecewiseExpr(expr::parse(p)), CoefficientField::scalar(expr::parse(k)));
}

const CoefficientField& ManufacturedProblem::coefficient() const { return impl_->k; }
const PiecewiseExpr& ManufacturedProblem::pressure_expr() const { return impl_->p; }

double ManufacturedProblem::pressure(Point at, Point select) const {
  return impl_->p.eval(at, select);
}

Vec2 ManufacturedProblem::gradient(Point at, Point select) const {
  const int i = impl_->p.locate(select);
  return {impl_->px[i].eval(at.x, at.y), impl_->py[i].eval(at.x, at.y)};
}

double ManufacturedProblem::source(Point at, Point select) const {
  const int i = impl_->p.locate(select);
  const int j = impl_->k.kxx().locate(select);
  return impl_->f[static_cast<std::size_t>(i * impl_->nk + j)].eval(at.x, at.y);
}

const Expr& ManufacturedProblem::source_expr(int pressure_piece, int coefficient_piece) const {
  return impl_->f.at(static_cast<std::size_t>(pressure_piece * impl_->nk + coefficient_piece));
}

ProblemData ManufacturedProblem::data(std::map<std::string, BoundaryKind> kinds) const {
  ProblemData d;
  d.coefficient = impl_->k;
  const ManufacturedProblem self = *this;
  d.source = [self](Point at, Point sel) { return self.source(at, sel); };
  d.boundary.kinds = std::move(kinds);
  d.boundary.dirichlet = [self](Point at, Point sel) { return self.pressure(at, sel); };
  d.boundary.neumann = [self](Point at, Point sel, Vec2 n) {
    const Tensor2 k = self.coefficient().tensor_at(at, sel);
    return dot(k.apply(self.gradient(at, sel)), n);
  };
  return d;
}

ManufacturedProblem smooth_problem() {
  return ManufacturedProblem::make("sin(pi*x)*sin(pi*y)", "1+x*y");
}

ManufacturedProblem interface_problem(double k_left, double k_right) {
  auto piece = [](double k) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "(1 + (exp(x) - exp(0.5)) / %.17g) * (1 + y^2)", k);
    return expr::parse(buf);
  };
  const Expr left = expr::parse("0.5 - x");
  PiecewiseExpr p;
  p.add_piece(left, piece(k_left));
  p.add_piece(std::nullopt, piece(k_right));
  PiecewiseExpr k;
  k.add_piece(left, Expr::constant(k_left));
  k.add_piece(std::nullopt, Expr::constant(k_right));
  return ManufacturedProblem::make(std::move(p), CoefficientField::scalar(std::move(k)));
}

Solution interpolate(const Mesh& mesh, const ManufacturedProblem& problem, CellRule rule) {
  Solution s;
  s.p.resize(static_cast<std::size_t>(mesh.num_cells()));
  s.v.assign(static_cast<std::size_t>(mesh.num_faces()), 0.0);
  std::vector<char> seen(s.v.size(), 0);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Point xc = mesh.cell_centroid(c);
    s.p[c] = cell_mean(mesh, c, rule, [&](Point q) { return problem.pressure(q, xc); });
    for (int f : mesh.cell_faces(c)) {
      const Face& face = mesh.face(f);
      const double vf =
          dot(problem.gradient(face.midpoint, one_sided_point(mesh, c, f)), face.normal);
      s.v_side.push_back(vf);
      if (!seen[f]) {
        s.v[f] = vf;
        seen[f] = 1;
      }
    }
  }
  return s;
}

ErrorNorms compute_errors(const Solution& solution, const ManufacturedProblem& problem,
                          const Mesh& mesh, std::span<const LocalCellOperators> ops,
                          const ErrorOptions& options) {
  const Solution exact = interpolate(mesh, problem, options.cell_rule);
  if (solution.p.size() != exact.p.size() || solution.v.size() != exact.v.size() ||
      (!solution.v_side.empty() && solution.v_side.size() != exact.v_side.size())) {
    throw ConfigError("solution does not match the mesh");
  }
  // Without side values every side takes the shared face value.
  const bool shared = solution.v_side.empty();
  ErrorNorms e;
  double sp = 0.0, sv = 0.0;
  std::size_t k = 0;
  std::vector<double> delta;
  std::vector<double> ones;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double dp = solution.p[c] - exact.p[c];
    sp += mesh.cell_area(c) * dp * dp;
    e.max_p = std::max(e.max_p, std::fabs(dp));
    const int m = mesh.cell_size(c);
    delta.assign(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i, ++k) {
      const double vh = shared ? solution.v[mesh.cell_faces(c)[i]] : solution.v_side[k];
      delta[i] = vh - exact.v_side[k];
      e.max_v = std::max(e.max_v, std::fabs(delta[i]));
    }
    if (options.vector_norm == VectorNorm::Weighted) {
      const auto md = ops[c].M.multiply(delta);
      sv += linalg::dot(delta, md);
    } else {
      ones.assign(static_cast<std::size_t>(m), 1.0);
      const auto unit = build_local(mesh, c, Tensor2::isotropic(1.0), ones);
      const auto md = unit.M.multiply(delta);
      sv += linalg::dot(delta, md);
    }
  }
  e.e_p = std::sqrt(sp);
  e.e_v = std::sqrt(std::max(sv, 0.0));
  return e;
}

double least_squares_rate(std::span<const double> h, std::span<const double> e) {
  const std::size_t n = h.size();
  if (n < 2 || e.size() != n) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(h[i] > 0.0) || !(e[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    sx += std::log(h[i]);
    sy += std::log(e[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(h[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(e[i]) - my);
  }
  return sxy / sxx;
}

std::uint64_t level_seed(std::uint64_t seed, int n) {
  return seed * 1000003ULL + static_cast<std::uint64_t>(n);
}

ConvergenceReport convergence_study(const ManufacturedProblem& problem, FaceStrategy strategy,
                                    const StudyOptions& options) {
  if (options.levels.size() < 3) {
    throw ConfigError("a convergence study needs at least 3 levels");
  }
  ConvergenceReport report;
  report.family = to_string(options.family);
  report.strategy = to_string(strategy);
  const std::size_t nl = options.levels.size();
  report.levels.resize(nl);
  std::vector<std::exception_ptr> failures(nl);
  const ProblemData data = problem.data(options.boundary);

  auto run_level = [&](std::size_t li) {
    const int n = options.levels[li];
    try {
      const Mesh mesh = generate_mesh(options.family, n, options.xi, level_seed(options.seed, n));
      const SolveOutcome out = discretize_and_solve(mesh, data, strategy, options.solve);
      const ErrorNorms err =
          compute_errors(out.solution, problem, mesh, out.system.local,
                         {options.vector_norm, options.solve.assembly.cell_rule});
      const ConservationReport cons = conservation(mesh, out.system, out.solution);
      ConvergenceLevel& lvl = report.levels[li];
      lvl.n = n;
      lvl.h = quality(mesh).h;
      lvl.num_cells = mesh.num_cells();
      lvl.num_faces = mesh.num_faces();
      lvl.e_p = err.e_p;
      lvl.e_v = err.e_v;
      lvl.iterations = out.solution.report.iterations;
      lvl.conservation =
          std::max(cons.divergence_theorem_residual(), cons.balance_residual());
      if (options.on_level) options.on_level(mesh, out, lvl);
    } catch (const Error& e) {
      failures[li] = std::make_exception_ptr(
          Error(e.code(), "level n=" + std::to_string(n) + " (" + report.family + ", " +
                              report.strategy + "): " + e.what()));
    } catch (...) {
      failures[li] = std::current_exception();
    }
  };

  const int threads = std::clamp(options.threads, 1, static_cast<int>(nl));
  if (threads == 1) {
    for (std::size_t li = 0; li < nl; ++li) run_level(li);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t li = next++; li < nl; li = next++) run_level(li);
      });
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  for (std::size_t li = 1; li < nl; ++li) {
    if (!(report.levels[li].h < report.levels[li - 1].h)) {
      throw ConfigError("mesh size must decrease across levels");
    }
  }
  std::vector<double> h, ep, ev;
  for (auto& lvl : report.levels) {
    h.push_back(lvl.h);
    ep.push_back(lvl.e_p);
    ev.push_back(lvl.e_v);
    lvl.rate_p_so_far = least_squares_rate(h, ep);
    lvl.rate_v_so_far = least_squares_rate(h, ev);
  }
  report.rate_p = report.levels.back().rate_p_so_far;
  report.rate_v = report.levels.back().rate_v_so_far;
  return report;
}

std::vector<ConvergenceReport> compare_strategies(const ManufacturedProblem& problem,
                                                  std::span<const MeshFamily> families,
                                                  std::span<const FaceStrategy> strategies,
                                                  const StudyOptions& options) {
  std::vector<ConvergenceReport> out;
  for (MeshFamily family : families) {
    StudyOptions opts = options;
    opts.family = family;
    for (FaceStrategy s : strategies) out.push_back(convergence_study(problem, s, opts));
  }
  return out;
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}

}  // namespace

std::string to_csv(const ConvergenceReport& report) {
  std::string out = "level,h,n_cells,n_faces,e_p,e_v,rate_p_so_far,rate_v_so_far,cg_iters\n";
  for (const auto& l : report.levels) {
    out += std::to_string(l.n) + "," + num(l.h) + "," + std::to_string(l.num_cells) + "," +
           std::to_string(l.num_faces) + "," + num(l.e_p) + "," + num(l.e_v) + "," +
           num(l.rate_p_so_far) + "," + num(l.rate_v_so_far) + "," +
           std::to_string(l.iterations) + "\n";
  }
  return out;
}

std::string to_json(std::span<const ConvergenceReport> reports) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json jr;
    jr["family"] = r.family;
    jr["strategy"] = r.strategy;
    jr["rate_p"] = r.rate_p;
    jr["rate_v"] = r.rate_v;
    auto& levels = jr["levels"] = nlohmann::ordered_json::array();
    for (const auto& l : r.levels) {
      levels.push_back({{"level", l.n},
                        {"h", l.h},
                        {"n_cells", l.num_cells},
                        {"n_faces", l.num_faces},
                        {"e_p", l.e_p},
                        {"e_v", l.e_v},
                        {"rate_p_so_far", l.rate_p_so_far},
                        {"rate_v_so_far", l.rate_v_so_far},
                        {"cg_iters", l.iterations},
                        {"conservation", l.conservation}});
    }
    doc.push_back(std::move(jr));
  }
  return doc.dump(2) + "\n";
}

std::string format_table(std::span<const ConvergenceReport> reports) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %-11s %6s %12s %12s %12s %8s\n", "family", "strategy",
                "n", "h", "e_p", "e_v", "cg");
  out += buf;
  for (const auto& r : reports) {
    for (const auto& l : r.levels) {
      std::snprintf(buf, sizeof buf, "%-10s %-11s %6d %12.4e %12.4e %12.4e %8d\n",
                    r.family.c_str(), r.strategy.c_str(), l.n, l.h, l.e_p, l.e_v, l.iterations);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "%-10s %-11s   rate_p = %.3f  rate_v = %.3f\n",
                  r.family.c_str(), r.strategy.c_str(), r.rate_p, r.rate_v);
    out += buf;
  }
  return out;
}

}  // namespace mfdstag
