#include "mfdstag/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <thread>

#include "mfdstag/config.hpp"
#include "mfdstag/error.hpp"

namespace mfdstag {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr double kConservationTol = 1e-10;

class CheckFailed : public Error {
 public:
  CheckFailed(const std::string& code, const std::string& msg) : Error(code, msg) {}
};

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

struct Context {
  RunConfig cfg;
  fs::path out_dir;
  std::ostream& out;

  fs::path output_path(const std::string& key) const {
    return out_dir / cfg.doc()["output"][key].get<std::string>();
  }
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw ConfigError("failed writing '" + path.string() + "'");
}

void maybe_save_mesh(const Context& ctx, const Mesh& mesh) {
  const json& target = ctx.cfg.doc()["output"]["mesh"];
  if (target.is_null()) return;
  if (!target.is_string()) throw ConfigError("output.mesh: expected a path");
  fs::path path(target.get<std::string>());
  if (path.is_relative()) path = ctx.out_dir / path;
  save_mesh(mesh, path.string());
}

int study_threads() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  int threads = static_cast<int>(hw);
  if (const char* env = std::getenv("MFDSTAG_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw ConfigError("MFDSTAG_THREADS: expected a positive integer, got '" + std::string(env) +
                        "'");
    }
    threads = std::min<int>(threads, static_cast<int>(v));
  }
  return threads;
}

json conservation_json(const ConservationReport& c) {
  json j;
  j["total_divergence"] = c.total_divergence;
  j["boundary_flux"] = c.boundary_flux;
  j["total_source"] = c.total_source;
  j["divergence_theorem_residual"] = c.divergence_theorem_residual();
  j["balance_residual"] = c.balance_residual();
  return j;
}

void check_conservation(double residual, const std::string& where) {
  if (!(residual <= kConservationTol)) {
    throw CheckFailed("invariant_violation",
                      "conservation residual " + fmt(residual) + " exceeds " +
                          fmt(kConservationTol) + where);
  }
}

json mesh_summary(const Mesh& mesh) {
  const MeshQuality q = quality(mesh);
  json j;
  j["cells"] = mesh.num_cells();
  j["faces"] = mesh.num_faces();
  j["vertices"] = mesh.num_vertices();
  j["h"] = q.h;
  j["max_faces"] = q.max_faces;
  j["min_inradius_ratio"] = q.min_inradius_ratio;
  return j;
}

int cmd_solve(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const Mesh mesh = cfg.build_mesh();
  maybe_save_mesh(ctx, mesh);
  const ProblemData data = cfg.problem_data();
  const SolveOptions options = cfg.solve_options();
  const auto t0 = std::chrono::steady_clock::now();
  const SolveOutcome outcome = discretize_and_solve(mesh, data, cfg.strategy(), options);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const Solution& sol = outcome.solution;

  const ConservationReport cons = conservation(mesh, outcome.system, sol);
  const BlockResidual res = saddle_residual(outcome.system, sol);

  json report;
  report["command"] = "solve";
  report["strategy"] = to_string(cfg.strategy());
  report["path"] = options.path == SolveOptions::Path::Hybrid ? "hybrid" : "saddle";
  report["mesh"] = mesh_summary(mesh);
  report["solver"] = {{"iterations", sol.report.iterations},
                      {"relative_residual", sol.report.relative_residual},
                      {"converged", sol.report.converged}};
  report["residual"] = {{"gradient", res.gradient}, {"mass", res.mass}};
  report["conservation"] = conservation_json(cons);
  if (outcome.system.pure_neumann) report["multiplier"] = sol.multiplier;

  ctx.out << "mesh: " << mesh.num_cells() << " cells, " << mesh.num_faces() << " faces\n";
  ctx.out << "solver: " << sol.report.iterations << " iterations, residual "
          << fmt(sol.report.relative_residual) << ", " << fmt(seconds) << " s\n";
  ctx.out << "conservation: " << fmt(cons.divergence_theorem_residual()) << " (divergence), "
          << fmt(cons.balance_residual()) << " (balance)\n";

  if (auto exact = cfg.manufactured()) {
    ErrorOptions eo;
    eo.vector_norm = cfg.vector_norm();
    eo.cell_rule = options.assembly.cell_rule;
    const ErrorNorms err = compute_errors(sol, *exact, mesh, outcome.system.local, eo);
    double max_centroid = 0.0;
    for (int c = 0; c < mesh.num_cells(); ++c) {
      const Point xc = mesh.cell_centroid(c);
      max_centroid = std::max(max_centroid, std::abs(sol.p[c] - exact->pressure(xc)));
    }
    report["errors"] = {{"e_p", err.e_p},
                        {"e_v", err.e_v},
                        {"max_p", err.max_p},
                        {"max_v", err.max_v},
                        {"max_p_centroid", max_centroid}};
    ctx.out << "errors: e_p " << fmt(err.e_p) << ", e_v " << fmt(err.e_v)
            << ", max |p_c - p(x_c)| " << fmt(max_centroid) << "\n";
  }
  write_file(ctx.output_path("report"), report.dump(2) + "\n");
  check_conservation(std::max(cons.divergence_theorem_residual(), cons.balance_residual()), "");
  return kExitOk;
}

void check_levels(const ConvergenceReport& r) {
  for (const auto& level : r.levels) {
    check_conservation(level.conservation, " (" + r.family + "/" + r.strategy + ", n = " +
                                               std::to_string(level.n) + ")");
  }
}

int cmd_converge(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const auto exact = cfg.manufactured();
  if (!exact) throw ConfigError("problem.p: converge needs an exact solution");
  StudyOptions study = cfg.study_options();
  study.threads = study_threads();
  const ConvergenceReport report = convergence_study(*exact, cfg.strategy(), study);
  write_file(ctx.output_path("csv"), to_csv(report));
  const std::vector<ConvergenceReport> all{report};
  write_file(ctx.output_path("report"), to_json(all));
  ctx.out << format_table(all);
  check_levels(report);
  const bool ok_p = report.rate_p >= cfg.rate_floor_p();
  const bool ok_v = report.rate_v >= cfg.rate_floor_v();
  if (!ok_p || !ok_v) {
    throw CheckFailed("rate_floor", "rate_p " + fmt(report.rate_p) + " (floor " +
                                        fmt(cfg.rate_floor_p()) + "), rate_v " +
                                        fmt(report.rate_v) + " (floor " +
                                        fmt(cfg.rate_floor_v()) + ")");
  }
  return kExitOk;
}

int cmd_compare(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const auto exact = cfg.manufactured();
  if (!exact) throw ConfigError("problem.p: compare needs an exact solution");
  StudyOptions study = cfg.study_options();
  study.threads = study_threads();
  const auto families = cfg.families();
  const auto strategies = cfg.strategies();
  const auto reports = compare_strategies(*exact, families, strategies, study);
  for (const auto& r : reports) {
    write_file(ctx.out_dir / (r.family + "-" + r.strategy + ".csv"), to_csv(r));
  }
  write_file(ctx.output_path("report"), to_json(reports));
  ctx.out << format_table(reports);
  for (const auto& r : reports) check_levels(r);
  return kExitOk;
}

int cmd_infsup(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const ProblemData data = cfg.problem_data();
  const SolveOptions options = cfg.solve_options();
  const MeshFamily family = parse_mesh_family(cfg.doc()["mesh"]["family"].get<std::string>());
  std::string csv = "n,h,n_cells,n_faces,beta\n";
  json rows = json::array();
  ctx.out << "     n            h        beta\n";
  for (int n : cfg.levels()) {
    const Mesh mesh = cfg.build_mesh(family, n);
    data.coefficient.check_positive(mesh);
    const StaggeredCoefficient k = face_values(data.coefficient, mesh, cfg.strategy(),
                                               options.assembly.cell_rule);
    const SaddleSystem system = assemble(mesh, k, data, options.assembly);
    const double beta = infsup_estimate(system, cfg.infsup_metric());
    const double h = quality(mesh).h;
    char line[128];
    std::snprintf(line, sizeof line, "%d,%.10e,%d,%d,%.10e\n", n, h, mesh.num_cells(),
                  mesh.num_faces(), beta);
    csv += line;
    std::snprintf(line, sizeof line, "%6d %12.5e %12.5e\n", n, h, beta);
    ctx.out << line;
    rows.push_back({{"n", n}, {"h", h}, {"beta", beta}});
  }
  write_file(ctx.output_path("infsup_csv"), csv);
  json report;
  report["command"] = "infsup";
  report["family"] = to_string(family);
  report["levels"] = rows;
  write_file(ctx.output_path("report"), report.dump(2) + "\n");
  return kExitOk;
}

int cmd_mesh_info(Context& ctx) {
  const Mesh mesh = ctx.cfg.build_mesh();
  maybe_save_mesh(ctx, mesh);
  json report = mesh_summary(mesh);
  ctx.out << "cells " << mesh.num_cells() << "\n"
          << "faces " << mesh.num_faces() << "\n"
          << "vertices " << mesh.num_vertices() << "\n";
  char line[96];
  std::snprintf(line, sizeof line, "h %.17g\n", report["h"].get<double>());
  ctx.out << line << "max_faces " << report["max_faces"].get<int>() << "\n";
  std::snprintf(line, sizeof line, "min_inradius_ratio %.17g\n",
                report["min_inradius_ratio"].get<double>());
  ctx.out << line;
  write_file(ctx.output_path("report"), report.dump(2) + "\n");
  return kExitOk;
}

int dispatch(Context& ctx) {
  const std::string cmd = ctx.cfg.command();
  if (cmd == "solve") return cmd_solve(ctx);
  if (cmd == "converge") return cmd_converge(ctx);
  if (cmd == "compare") return cmd_compare(ctx);
  if (cmd == "infsup") return cmd_infsup(ctx);
  return cmd_mesh_info(ctx);
}

int exit_code_for(const Error& e) {
  const std::string& code = e.code();
  if (code == "config_error" || code == "parse_error" || code == "usage_error") return kExitUsage;
  if (code == "invariant_violation" || code == "rate_floor") return kExitCheck;
  return kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mimetic finite differences with staggered diffusion coefficients", "mfdstag"};
  std::string command;
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  bool print_config = false;
  app.add_option("command", command, "solve | converge | compare | infsup | mesh-info");
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--set", overrides, "Override a config value: dotted.key=value")
      ->take_all()
      ->allow_extra_args(false);
  app.add_option("--out", out_dir, "Output directory (overrides output.dir)");
  app.add_flag("--print-config", print_config, "Print the effective configuration and exit");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: usage_error: " << one_line(e.what()) << "\n";
    return kExitUsage;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig::from_defaults()
                                        : RunConfig::from_file(config_path);
    if (!command.empty()) cfg.set("command=\"" + command + "\"");
    cfg.apply(overrides);
    if (print_config) {
      out << cfg.dump();
      return kExitOk;
    }
    if (command.empty() && config_path.empty()) {
      throw Error("usage_error", "no command given (try --help)");
    }
    fs::path dir = out_dir.empty() ? fs::path(cfg.doc()["output"]["dir"].get<std::string>())
                                   : fs::path(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "'");
    Context ctx{std::move(cfg), dir, out};
    return dispatch(ctx);
  } catch (const Error& e) {
    err << "error: " << e.code() << ": " << one_line(e.what()) << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: internal_error: " << one_line(e.what()) << "\n";
    return kExitFailure;
  }
}

}  // namespace mfdstag
