#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mfdstag/cli.hpp"
#include "mfdstag/error.hpp"
#include "mfdstag/expr.hpp"
#include "mfdstag/mesh.hpp"
#include "mfdstag/solver.hpp"
#include "mfdstag/verify.hpp"

namespace py = pybind11;
using namespace mfdstag;

namespace {

SolveOptions::Path parse_path(const std::string& s) {
  if (s == "hybrid") return SolveOptions::Path::Hybrid;
  if (s == "saddle") return SolveOptions::Path::Saddle;
  throw ConfigError("unknown solver path '" + s + "' (expected hybrid, saddle)");
}

std::map<std::string, BoundaryKind> parse_boundary(const std::map<std::string, std::string>& b) {
  std::map<std::string, BoundaryKind> out;
  for (const auto& [label, kind] : b) out[label] = parse_boundary_kind(kind);
  return out;
}

py::dict errors_dict(const ErrorNorms& e) {
  py::dict d;
  d["e_p"] = e.e_p;
  d["e_v"] = e.e_v;
  d["max_p"] = e.max_p;
  d["max_v"] = e.max_v;
  return d;
}

py::dict solve(const Mesh& mesh, const std::string& p, const std::string& k,
               const std::string& strategy, const std::string& path, double tol, int maxit,
               const std::map<std::string, std::string>& boundary) {
  const auto problem = ManufacturedProblem::make(p, k);
  SolveOptions o;
  o.path = parse_path(path);
  o.tol = tol;
  o.maxit = maxit;
  SolveOutcome out;
  {
    py::gil_scoped_release release;
    out = discretize_and_solve(mesh, problem.data(parse_boundary(boundary)),
                               parse_face_strategy(strategy), o);
  }
  const auto cons = conservation(mesh, out.system, out.solution);
  py::dict r;
  r["p"] = out.solution.p;
  r["v"] = out.solution.v;
  r["iterations"] = out.solution.report.iterations;
  r["residual"] = out.solution.report.relative_residual;
  r["conservation"] = std::max(cons.divergence_theorem_residual(), cons.balance_residual());
  r["errors"] = errors_dict(compute_errors(out.solution, problem, mesh, out.system.local));
  return r;
}

py::dict study(const std::string& p, const std::string& k, const std::string& family,
               const std::string& strategy, const std::vector<int>& levels, double xi,
               std::uint64_t seed, int threads) {
  const auto problem = ManufacturedProblem::make(p, k);
  StudyOptions o;
  o.family = parse_mesh_family(family);
  o.levels = levels;
  o.xi = xi;
  o.seed = seed;
  o.threads = threads;
  ConvergenceReport rep;
  {
    py::gil_scoped_release release;
    rep = convergence_study(problem, parse_face_strategy(strategy), o);
  }
  py::list rows;
  for (const auto& l : rep.levels) {
    py::dict row;
    row["n"] = l.n;
    row["h"] = l.h;
    row["n_cells"] = l.num_cells;
    row["n_faces"] = l.num_faces;
    row["e_p"] = l.e_p;
    row["e_v"] = l.e_v;
    row["iterations"] = l.iterations;
    rows.append(row);
  }
  py::dict r;
  r["family"] = rep.family;
  r["strategy"] = rep.strategy;
  r["rate_p"] = rep.rate_p;
  r["rate_v"] = rep.rate_v;
  r["levels"] = rows;
  r["csv"] = to_csv(rep);
  return r;
}

double infsup(const Mesh& mesh, const std::string& k, const std::string& metric) {
  const auto problem = ManufacturedProblem::make("x", k);
  const auto sys = assemble(mesh, face_values(problem.coefficient(), mesh, FaceStrategy::Trace),
                            problem.data());
  if (metric != "weighted" && metric != "unweighted") {
    throw ConfigError("unknown metric '" + metric + "' (expected weighted, unweighted)");
  }
  return infsup_estimate(sys, metric == "weighted" ? InfSupMetric::Weighted : InfSupMetric::Unweighted);
}

}  // namespace

PYBIND11_MODULE(_mfdstag, m) {
  m.doc() = "Mixed mimetic finite differences with staggered diffusion coefficients";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::object(py::exception<Error>(m, "MfdstagError")); });
  // Raised errors carry the machine-readable code as `.code`.
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object exc = type(e.what());
      exc.attr("code") = e.code();
      PyErr_SetObject(type.ptr(), exc.ptr());
    }
  });

  py::class_<expr::Expr>(m, "Expr")
      .def(py::init([](const std::string& s) { return expr::parse(s); }), py::arg("source"))
      .def("__call__", &expr::Expr::eval, py::arg("x"), py::arg("y"))
      .def("diff",
           [](const expr::Expr& e, const std::string& var) {
             if (var != "x" && var != "y") throw ConfigError("variable must be 'x' or 'y'");
             return expr::differentiate(e, var == "x" ? expr::Var::X : expr::Var::Y);
           },
           py::arg("var"))
      .def("__str__", &expr::Expr::print)
      .def("__repr__", [](const expr::Expr& e) { return "Expr('" + e.print() + "')"; });

  py::class_<Mesh>(m, "Mesh")
      .def_property_readonly("num_cells", &Mesh::num_cells)
      .def_property_readonly("num_faces", &Mesh::num_faces)
      .def_property_readonly("num_vertices", &Mesh::num_vertices)
      .def_property_readonly("vertices",
                             [](const Mesh& mesh) {
                               std::vector<std::pair<double, double>> v;
                               for (const Point& p : mesh.vertices()) v.emplace_back(p.x, p.y);
                               return v;
                             })
      .def_property_readonly("cells", &Mesh::cell_lists)
      .def_property_readonly("h", [](const Mesh& mesh) { return quality(mesh).h; })
      .def("cell_area", &Mesh::cell_area, py::arg("c"))
      .def("cell_centroid",
           [](const Mesh& mesh, int c) {
             const Point p = mesh.cell_centroid(c);
             return std::make_pair(p.x, p.y);
           },
           py::arg("c"))
      .def("to_text", &mesh_to_text)
      .def_static("from_text", &mesh_from_text, py::arg("text"))
      .def("save", &save_mesh, py::arg("path"))
      .def_static("load", &load_mesh, py::arg("path"));

  m.def("generate_mesh",
        [](const std::string& family, int n, double xi, std::uint64_t seed) {
          return generate_mesh(parse_mesh_family(family), n, xi, seed);
        },
        py::arg("family"), py::arg("n"), py::arg("xi") = 0.3, py::arg("seed") = 1);

  m.def("solve", &solve, py::arg("mesh"), py::arg("p"), py::arg("k"),
        py::arg("strategy") = "trace", py::arg("path") = "hybrid", py::arg("tol") = 1e-10,
        py::arg("maxit") = 200000,
        py::arg("boundary") = std::map<std::string, std::string>{{"*", "dirichlet"}});

  m.def("convergence_study", &study, py::arg("p"), py::arg("k"), py::arg("family") = "quad",
        py::arg("strategy") = "trace", py::arg("levels") = std::vector<int>{8, 16, 32, 64},
        py::arg("xi") = 0.3, py::arg("seed") = 1, py::arg("threads") = 1);

  m.def("infsup", &infsup, py::arg("mesh"), py::arg("k") = "1", py::arg("metric") = "weighted");

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          int code;
          {
            py::gil_scoped_release release;
            code = run_cli(args, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));
}
