#include "mfdstag/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "mfdstag/error.hpp"

namespace mfdstag {

using json = nlohmann::ordered_json;

namespace {

// Keys whose value may be null, a string, a list of pieces or an object.
const std::set<std::string> kFlexible = {
    "problem.p",        "problem.k",       "problem.k_tensor", "problem.f",
    "problem.dirichlet", "problem.neumann", "mesh.file",        "output.mesh"};

// Objects whose keys are user-defined.
const std::set<std::string> kFreeForm = {"problem.boundary"};

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) {
    return !a.is_number_integer() || b.is_number_integer();
  }
  return a.type() == b.type();
}

void merge_into(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError(prefix + ": expected an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = join(prefix, key);
    if (!base.contains(key)) throw ConfigError(path + ": unknown key");
    json& slot = base[key];
    if (kFlexible.contains(path)) {
      slot = value;
    } else if (kFreeForm.contains(path)) {
      if (!value.is_object()) throw ConfigError(path + ": expected an object");
      slot = value;
    } else if (slot.is_object()) {
      merge_into(slot, value, path);
    } else {
      if (!same_kind(slot, value)) {
        throw ConfigError(path + ": expected " + std::string(slot.type_name()) + ", got " +
                          std::string(value.type_name()));
      }
      slot = value;
    }
  }
}

template <typename T>
T get(const json& doc, const std::string& dotted) {
  const json* node = &doc;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) node = &node->at(part);
  try {
    return node->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(dotted + ": wrong type");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

json RunConfig::defaults() {
  return json::parse(R"cfg({
  "command": "solve",
  "problem": {
    "p": "sin(pi*x)*sin(pi*y)",
    "k": "1+x*y",
    "k_tensor": null,
    "f": null,
    "dirichlet": null,
    "neumann": null,
    "boundary": {"*": "dirichlet"}
  },
  "mesh": {"family": "quad", "n": 8, "xi": 0.3, "seed": 1, "file": null},
  "levels": [8, 16, 32, 64],
  "strategy": "trace",
  "strategies": ["trace", "upwind", "arithmetic", "harmonic"],
  "families": ["quad", "perturbed", "polygonal"],
  "solver": {"path": "hybrid", "tol": 1e-10, "maxit": 200000, "preconditioner": "jacobi"},
  "quadrature": "centroid",
  "stabilization_scale": 1.0,
  "vector_norm": "weighted",
  "infsup_metric": "weighted",
  "floors": {"rate_p": 1.8, "rate_v": 0.9},
  "output": {"dir": ".", "csv": "convergence.csv", "infsup_csv": "infsup.csv", "report": "report.json", "mesh": null}
})cfg");
}

RunConfig RunConfig::from_defaults() {
  RunConfig cfg;
  cfg.doc_ = defaults();
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::from_text(const std::string& text) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  cfg.doc_ = defaults();
  merge_into(cfg.doc_, user, "");
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) { return from_text(read_file(path)); }

void RunConfig::set(const std::string& assignment) { apply({assignment}); }

void RunConfig::apply(const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) assign(a);
  validate();
}

void RunConfig::assign(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  // Build the nested override object and merge it like a config file.
  json user = value;
  std::vector<std::string> parts;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    json wrap = json::object();
    wrap[*it] = std::move(user);
    user = std::move(wrap);
  }
  // Free-form maps are merged key by key rather than replaced.
  const std::string parent = parts.size() > 1 ? key.substr(0, key.rfind('.')) : "";
  if (kFreeForm.contains(parent)) {
    json* node = &doc_;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = value;
  } else {
    merge_into(doc_, user, "");
  }
}

void RunConfig::validate() const {
  static const std::set<std::string> commands = {"solve", "converge", "compare", "infsup",
                                                 "mesh-info"};
  if (!commands.contains(command())) {
    throw ConfigError("command: unknown command '" + command() + "'");
  }
  (void)strategy();
  (void)strategies();
  (void)families();
  (void)solve_options();
  (void)vector_norm();
  (void)infsup_metric();
  (void)boundary_kinds();
  for (int n : levels()) {
    if (n < 2) throw ConfigError("levels: every level must be at least 2");
  }
  const json& p = doc_["problem"];
  if (p["p"].is_null() && p["f"].is_null()) {
    throw ConfigError("problem: give either an exact solution 'p' or a source 'f'");
  }
  if (p["k"].is_null() && p["k_tensor"].is_null()) {
    throw ConfigError("problem: give a coefficient 'k' or 'k_tensor'");
  }
}

std::string RunConfig::command() const { return get<std::string>(doc_, "command"); }

FaceStrategy RunConfig::strategy() const {
  try {
    return parse_face_strategy(get<std::string>(doc_, "strategy"));
  } catch (const CoefficientError& e) {
    throw ConfigError(std::string("strategy: ") + e.what());
  }
}

std::vector<FaceStrategy> RunConfig::strategies() const {
  std::vector<FaceStrategy> out;
  try {
    for (const auto& s : get<std::vector<std::string>>(doc_, "strategies")) {
      out.push_back(parse_face_strategy(s));
    }
  } catch (const CoefficientError& e) {
    throw ConfigError(std::string("strategies: ") + e.what());
  }
  return out;
}

std::vector<MeshFamily> RunConfig::families() const {
  std::vector<MeshFamily> out;
  try {
    for (const auto& s : get<std::vector<std::string>>(doc_, "families")) {
      out.push_back(parse_mesh_family(s));
    }
    (void)parse_mesh_family(get<std::string>(doc_, "mesh.family"));
  } catch (const MeshError& e) {
    throw ConfigError(std::string("families: ") + e.what());
  }
  return out;
}

std::vector<int> RunConfig::levels() const { return get<std::vector<int>>(doc_, "levels"); }

SolveOptions RunConfig::solve_options() const {
  SolveOptions o;
  const auto path = get<std::string>(doc_, "solver.path");
  if (path == "hybrid") {
    o.path = SolveOptions::Path::Hybrid;
  } else if (path == "saddle") {
    o.path = SolveOptions::Path::Saddle;
  } else {
    throw ConfigError("solver.path: expected hybrid or saddle, got '" + path + "'");
  }
  o.tol = get<double>(doc_, "solver.tol");
  o.maxit = get<int>(doc_, "solver.maxit");
  if (!(o.tol > 0.0)) throw ConfigError("solver.tol: must be positive");
  if (o.maxit < 1) throw ConfigError("solver.maxit: must be positive");
  const auto pc = get<std::string>(doc_, "solver.preconditioner");
  if (pc == "jacobi") {
    o.preconditioner = linalg::Preconditioner::Jacobi;
  } else if (pc == "none") {
    o.preconditioner = linalg::Preconditioner::None;
  } else {
    throw ConfigError("solver.preconditioner: expected jacobi or none");
  }
  try {
    o.assembly.cell_rule = parse_cell_rule(get<std::string>(doc_, "quadrature"));
  } catch (const CoefficientError& e) {
    throw ConfigError(std::string("quadrature: ") + e.what());
  }
  o.assembly.stabilization_scale = get<double>(doc_, "stabilization_scale");
  if (!(o.assembly.stabilization_scale > 0.0)) {
    throw ConfigError("stabilization_scale: must be positive");
  }
  return o;
}

VectorNorm RunConfig::vector_norm() const {
  const auto s = get<std::string>(doc_, "vector_norm");
  if (s == "weighted") return VectorNorm::Weighted;
  if (s == "unweighted") return VectorNorm::Unweighted;
  throw ConfigError("vector_norm: expected weighted or unweighted");
}

InfSupMetric RunConfig::infsup_metric() const {
  const auto s = get<std::string>(doc_, "infsup_metric");
  if (s == "weighted") return InfSupMetric::Weighted;
  if (s == "unweighted") return InfSupMetric::Unweighted;
  throw ConfigError("infsup_metric: expected weighted or unweighted");
}

double RunConfig::rate_floor_p() const { return get<double>(doc_, "floors.rate_p"); }
double RunConfig::rate_floor_v() const { return get<double>(doc_, "floors.rate_v"); }

std::map<std::string, BoundaryKind> RunConfig::boundary_kinds() const {
  std::map<std::string, BoundaryKind> out;
  for (const auto& [label, kind] : doc_["problem"]["boundary"].items()) {
    if (!kind.is_string()) throw ConfigError("problem.boundary." + label + ": expected a string");
    try {
      out[label] = parse_boundary_kind(kind.get<std::string>());
    } catch (const AssemblyError& e) {
      throw ConfigError("problem.boundary." + label + ": " + e.what());
    }
  }
  return out;
}

StudyOptions RunConfig::study_options() const {
  StudyOptions o;
  o.family = parse_mesh_family(get<std::string>(doc_, "mesh.family"));
  o.xi = get<double>(doc_, "mesh.xi");
  o.seed = get<std::uint64_t>(doc_, "mesh.seed");
  o.levels = levels();
  o.solve = solve_options();
  o.vector_norm = vector_norm();
  o.boundary = boundary_kinds();
  return o;
}

Mesh RunConfig::build_mesh() const {
  const json& file = doc_["mesh"]["file"];
  if (!file.is_null()) {
    if (!file.is_string()) throw ConfigError("mesh.file: expected a path");
    return load_mesh(file.get<std::string>());
  }
  return build_mesh(parse_mesh_family(get<std::string>(doc_, "mesh.family")),
                    get<int>(doc_, "mesh.n"));
}

Mesh RunConfig::build_mesh(MeshFamily family, int n) const {
  return generate_mesh(family, n, get<double>(doc_, "mesh.xi"),
                       level_seed(get<std::uint64_t>(doc_, "mesh.seed"), n));
}

PiecewiseExpr piecewise_from_json(const json& value, const std::string& path) {
  auto parse_at = [&](const json& v, const std::string& p) {
    if (v.is_number()) return expr::Expr::constant(v.get<double>());
    if (!v.is_string()) throw ConfigError(p + ": expected an expression string");
    try {
      return expr::parse(v.get<std::string>());
    } catch (const ParseError& e) {
      throw ConfigError(p + ": " + e.what());
    }
  };
  if (value.is_string() || value.is_number()) return PiecewiseExpr(parse_at(value, path));
  if (!value.is_array() || value.empty()) {
    throw ConfigError(path + ": expected an expression or a list of {where, expr} pieces");
  }
  PiecewiseExpr out;
  for (std::size_t i = 0; i < value.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    const json& piece = value[i];
    if (!piece.is_object()) throw ConfigError(p + ": expected {where, expr}");
    for (const auto& [key, _] : piece.items()) {
      if (key != "where" && key != "expr") throw ConfigError(p + "." + key + ": unknown key");
    }
    if (!piece.contains("expr")) throw ConfigError(p + ".expr: missing");
    std::optional<expr::Expr> where;
    if (piece.contains("where") && !piece["where"].is_null()) {
      where = parse_at(piece["where"], p + ".where");
    }
    out.add_piece(std::move(where), parse_at(piece["expr"], p + ".expr"));
  }
  return out;
}

namespace {

CoefficientField coefficient_from(const json& problem) {
  if (!problem["k_tensor"].is_null()) {
    const json& t = problem["k_tensor"];
    if (!t.is_object()) throw ConfigError("problem.k_tensor: expected {xx, xy, yy}");
    for (const auto& [key, _] : t.items()) {
      if (key != "xx" && key != "xy" && key != "yy") {
        throw ConfigError("problem.k_tensor." + key + ": unknown key");
      }
    }
    for (const char* key : {"xx", "xy", "yy"}) {
      if (!t.contains(key)) throw ConfigError(std::string("problem.k_tensor.") + key + ": missing");
    }
    try {
      return CoefficientField::tensor(piecewise_from_json(t["xx"], "problem.k_tensor.xx"),
                                      piecewise_from_json(t["xy"], "problem.k_tensor.xy"),
                                      piecewise_from_json(t["yy"], "problem.k_tensor.yy"));
    } catch (const CoefficientError& e) {
      throw ConfigError(std::string("problem.k_tensor: ") + e.what());
    }
  }
  return CoefficientField::scalar(piecewise_from_json(problem["k"], "problem.k"));
}

}  // namespace

std::optional<ManufacturedProblem> RunConfig::manufactured() const {
  const json& problem = doc_["problem"];
  if (problem["p"].is_null()) return std::nullopt;
  try {
    return ManufacturedProblem::make(piecewise_from_json(problem["p"], "problem.p"),
                                     coefficient_from(problem));
  } catch (const DomainError& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
}

ProblemData RunConfig::problem_data() const {
  if (auto m = manufactured()) return m->data(boundary_kinds());
  const json& problem = doc_["problem"];
  ProblemData d;
  d.coefficient = coefficient_from(problem);
  d.boundary.kinds = boundary_kinds();
  auto f = piecewise_from_json(problem["f"], "problem.f");
  d.source = [f](Point at, Point sel) { return f.eval(at, sel); };
  if (!problem["dirichlet"].is_null()) {
    auto g = piecewise_from_json(problem["dirichlet"], "problem.dirichlet");
    d.boundary.dirichlet = [g](Point at, Point sel) { return g.eval(at, sel); };
  }
  if (!problem["neumann"].is_null()) {
    auto q = piecewise_from_json(problem["neumann"], "problem.neumann");
    d.boundary.neumann = [q](Point at, Point sel, Vec2) { return q.eval(at, sel); };
  }
  return d;
}

}  // namespace mfdstag
