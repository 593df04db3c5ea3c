#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfdstag/field.hpp"
#include "mfdstag/mesh.hpp"
#include "mfdstag/mfd.hpp"
#include "mfdstag/solver.hpp"
#include "mfdstag/verify.hpp"

namespace mfdstag {

// Validated run configuration. Every key has a default (see
// RunConfig::defaults()); unknown keys and mistyped values are rejected
// with their dotted key path.
class RunConfig {
 public:
  static nlohmann::ordered_json defaults();

  // Parses a config document and merges it over the defaults.
  static RunConfig from_text(const std::string& text);
  static RunConfig from_file(const std::string& path);
  static RunConfig from_defaults();

  // "a.b.c=value"; value is read as JSON when it parses, else as a string.
  void set(const std::string& assignment);
  // Several overrides, validated together once all are applied.
  void apply(const std::vector<std::string>& assignments);

  const nlohmann::ordered_json& doc() const { return doc_; }
  std::string dump() const { return doc_.dump(2) + "\n"; }

  std::string command() const;
  FaceStrategy strategy() const;
  std::vector<FaceStrategy> strategies() const;
  std::vector<MeshFamily> families() const;
  std::vector<int> levels() const;
  SolveOptions solve_options() const;
  StudyOptions study_options() const;
  InfSupMetric infsup_metric() const;
  VectorNorm vector_norm() const;
  double rate_floor_p() const;
  double rate_floor_v() const;

  // From mesh.file when set, else from mesh.family / n / xi / seed.
  Mesh build_mesh() const;
  Mesh build_mesh(MeshFamily family, int n) const;

  // Present when problem.p is given.
  std::optional<ManufacturedProblem> manufactured() const;
  ProblemData problem_data() const;
  std::map<std::string, BoundaryKind> boundary_kinds() const;

 private:
  void assign(const std::string& assignment);
  void validate() const;
  nlohmann::ordered_json doc_;
};

PiecewiseExpr piecewise_from_json(const nlohmann::ordered_json& value, const std::string& path);

}  // namespace mfdstag
