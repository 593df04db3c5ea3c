#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfdstag {

// Base of every library error. `code()` is a short machine-parseable tag
// used by the CLI when it reports a failure on a single line.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : Error("parse_error", what + " at byte " + std::to_string(offset)),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error("domain_error", what) {}
};

class MeshError : public Error {
 public:
  explicit MeshError(const std::string& what) : Error("mesh_error", what) {}
};

class CoefficientError : public Error {
 public:
  explicit CoefficientError(const std::string& what)
      : Error("coefficient_error", what) {}
};

class AssemblyError : public Error {
 public:
  explicit AssemblyError(const std::string& what)
      : Error("assembly_error", what) {}
};

class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what) : Error("solver_error", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

}  // namespace mfdstag
