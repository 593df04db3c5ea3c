#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfdstag/cli.hpp"
#include "mfdstag/config.hpp"
#include "mfdstag/mesh.hpp"

namespace fs = std::filesystem;
using namespace mfdstag;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream o, e;
  Run r;
  r.code = run_cli(args, o, e);
  r.out = o.str();
  r.err = e.str();
  return r;
}

std::string config(const std::string& name) { return std::string(MFDSTAG_CONFIG_DIR) + "/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mfdstag_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string out(const std::string& sub = "") const { return (dir_ / sub).string(); }
  fs::path dir_;
};

void expect_single_line_error(const Run& r, const std::string& code) {
  EXPECT_EQ(r.err.rfind("error: " + code + ": ", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1) << r.err;
}

}  // namespace

TEST_F(Cli, PrintConfigShowsEveryDefault) {
  const auto r = run({"--print-config"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(nlohmann::ordered_json::parse(r.out), RunConfig::defaults());
  const auto o = run({"--print-config", "--set", "mesh.n=3"});
  EXPECT_EQ(nlohmann::json::parse(o.out)["mesh"]["n"], 3);
}

TEST_F(Cli, UnknownKeyIsRejectedWithItsPath) {
  const auto r = run({"solve", "--set", "mesh.nn=3", "--out", out()});
  EXPECT_EQ(r.code, 1);
  expect_single_line_error(r, "config_error");
  EXPECT_NE(r.err.find("mesh.nn"), std::string::npos);

  const fs::path cfg = dir_ / "bad.json";
  std::ofstream(cfg) << R"({"solver": {"tol": 1e-8, "precond": "none"}})";
  const auto f = run({"solve", "--config", cfg.string()});
  EXPECT_EQ(f.code, 1);
  EXPECT_NE(f.err.find("solver.precond"), std::string::npos);
}

TEST_F(Cli, MalformedInputsAreUsageErrors) {
  const fs::path cfg = dir_ / "broken.json";
  std::ofstream(cfg) << "{\"mesh\": {\"n\": 4,}";
  expect_single_line_error(run({"solve", "--config", cfg.string()}), "config_error");
  const auto wrong_type = run({"solve", "--set", "mesh.n=\"four\"", "--out", out()});
  EXPECT_EQ(wrong_type.code, 1);
  const auto bad_expr = run({"solve", "--set", "problem.k=\"1 + * x\"", "--out", out()});
  EXPECT_EQ(bad_expr.code, 1);
  expect_single_line_error(bad_expr, "config_error");
  const auto bad_cmd = run({"frobnicate", "--out", out()});
  EXPECT_EQ(bad_cmd.code, 1);
  const auto bad_flag = run({"solve", "--nope"});
  EXPECT_EQ(bad_flag.code, 1);
  expect_single_line_error(bad_flag, "usage_error");
}

TEST_F(Cli, MeshInfoOnTwoByTwo) {
  const auto r = run({"mesh-info", "--set", "mesh.n=2", "--out", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("cells 4\n"), std::string::npos);
  EXPECT_NE(r.out.find("faces 12\n"), std::string::npos);
  EXPECT_NE(r.out.find("vertices 9\n"), std::string::npos);
  const auto pos = r.out.find("h ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_NEAR(std::stod(r.out.substr(pos + 2)), std::sqrt(2.0) / 2.0, 1e-15);
}

TEST_F(Cli, ConvergeDefaultPassesFloors) {
  const auto r = run({"converge", "--out", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(dir_ / "convergence.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "level,h,n_cells,n_faces,e_p,e_v,rate_p_so_far,rate_v_so_far,cg_iters");
  std::string last;
  int rows = 0;
  while (std::getline(lines, line)) {
    last = line;
    ++rows;
  }
  EXPECT_EQ(rows, 4);
  std::vector<std::string> cols;
  std::istringstream cells(last);
  for (std::string c; std::getline(cells, c, ',');) cols.push_back(c);
  ASSERT_EQ(cols.size(), 9u);
  EXPECT_GE(std::stod(cols[6]), 1.8);
  const auto report = nlohmann::json::parse(slurp(dir_ / "report.json"));
  EXPECT_GE(report[0]["rate_p"].get<double>(), 1.8);
}

TEST_F(Cli, ConvergeBelowFloorIsACheckFailure) {
  const auto r = run({"converge", "--set", "levels=[4,8,16]", "--set", "floors.rate_p=3.5",
                      "--out", out()});
  EXPECT_EQ(r.code, 3);
  expect_single_line_error(r, "rate_floor");
  EXPECT_TRUE(fs::exists(dir_ / "convergence.csv"));
}

TEST_F(Cli, PatchConfigIsExact) {
  const auto r = run({"solve", "--config", config("patch.json"), "--out", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(slurp(dir_ / "report.json"));
  EXPECT_LE(report["errors"]["max_p_centroid"].get<double>(), 1e-11);
  EXPECT_LE(report["conservation"]["balance_residual"].get<double>(), 1e-10);
}

TEST_F(Cli, OutputsAreByteIdentical) {
  for (const std::string sub : {"a", "b"}) {
    const auto r = run({"converge", "--config", config("smooth.json"), "--set", "levels=[4,8,16]",
                        "--set", "mesh.family=\"polygonal\"", "--set", "floors.rate_p=0",
                        "--set", "floors.rate_v=0", "--out", out(sub)});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(slurp(dir_ / "a/convergence.csv"), slurp(dir_ / "b/convergence.csv"));
  EXPECT_EQ(slurp(dir_ / "a/report.json"), slurp(dir_ / "b/report.json"));
}

TEST_F(Cli, CompareWritesOneCsvPerPair) {
  const auto r = run({"compare", "--config", config("interface.json"), "--set", "levels=[4,8,16]",
                      "--out", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* s : {"trace", "upwind", "arithmetic", "harmonic"}) {
    EXPECT_TRUE(fs::exists(dir_ / ("quad-" + std::string(s) + ".csv"))) << s;
    EXPECT_NE(r.out.find(s), std::string::npos);
  }
}

TEST_F(Cli, InfsupWritesTable) {
  const auto r = run({"infsup", "--config", config("infsup.json"), "--out", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(slurp(dir_ / "infsup.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "n,h,n_cells,n_faces,beta");
  std::vector<double> beta;
  while (std::getline(csv, line)) beta.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  ASSERT_EQ(beta.size(), 3u);
  EXPECT_GT(beta[0], 0.0);
  EXPECT_GE(beta[2], 0.5 * beta[0]);
}

TEST_F(Cli, SolverFailureExitsTwo) {
  const auto r = run({"solve", "--set", "solver.maxit=1", "--set", "mesh.n=16", "--out", out()});
  EXPECT_EQ(r.code, 2);
  expect_single_line_error(r, "solver_error");
}

TEST_F(Cli, MeshFileErrorsCarryLineInfo) {
  const fs::path bad = dir_ / "bad.mesh";
  std::ofstream(bad) << "vertices 3\n0 0\n1 zero\n0 1\ncells 1\n3 0 1 2\n";
  const auto r = run({"mesh-info", "--set", "mesh.file=\"" + bad.generic_string() + "\"",
                      "--out", out()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
  EXPECT_NE(r.err.find("line"), std::string::npos) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST_F(Cli, SavedMeshReloads) {
  const auto a = run({"mesh-info", "--set", "mesh.family=\"polygonal\"", "--set", "mesh.n=5",
                      "--set", "output.mesh=\"poly.mesh\"", "--out", out()});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_TRUE(fs::exists(dir_ / "poly.mesh"));
  const auto b = run({"mesh-info", "--set",
                      "mesh.file=\"" + (dir_ / "poly.mesh").generic_string() + "\"", "--out", out()});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out, b.out);
}

TEST_F(Cli, SolveWithMixedBoundaryTensorConfig) {
  const auto r = run({"solve", "--config", config("mixed-bc.json"), "--out", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(slurp(dir_ / "report.json"));
  EXPECT_LE(report["errors"]["e_p"].get<double>(), 5e-3);
}

TEST_F(Cli, ExplicitDataWithoutExactSolution) {
  const auto r = run({"solve", "--set", "problem.p=null", "--set", "problem.f=\"1\"",
                      "--set", "problem.dirichlet=\"0\"", "--out", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(slurp(dir_ / "report.json"));
  EXPECT_FALSE(report.contains("errors"));
}

TEST_F(Cli, BinaryReportsErrorsOnStderr) {
  const std::string cmd = std::string("\"") + MFDSTAG_CLI_PATH + "\" mesh-info --set mesh.n=0 --out \"" +
                          out() + "\" 2>\"" + out("err.txt") + "\"";
  const int status = std::system(cmd.c_str());
  ASSERT_NE(status, -1);
  EXPECT_NE(status, 0);
  const std::string err = slurp(dir_ / "err.txt");
  EXPECT_EQ(err.rfind("error: ", 0), 0u) << err;
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);

  const std::string ok = std::string("\"") + MFDSTAG_CLI_PATH + "\" mesh-info --set mesh.n=2 --out \"" +
                         out() + "\" >\"" + out("info.txt") + "\"";
  EXPECT_EQ(std::system(ok.c_str()), 0);
  EXPECT_NE(slurp(dir_ / "info.txt").find("cells 4"), std::string::npos);
}
