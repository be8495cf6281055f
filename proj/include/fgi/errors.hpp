#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace fgi {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad scenario/config input (schema violations, out-of-range build parameters).
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg, std::vector<std::string> violations = {})
      : Error(msg), violations(std::move(violations)) {}
  std::vector<std::string> violations;  // JSON-pointer style paths with messages
};

// A precondition on an operation argument was violated.
struct ArgumentError : Error {
  using Error::Error;
};

// Endpoints at the cut locus: no unique minimizing geodesic. Carries the
// canonical tie-break plane so callers can still construct a representative.
struct DegenerateGeodesicError : ArgumentError {
  DegenerateGeodesicError(const std::string& msg, std::array<double, 3> axis,
                          std::array<double, 3> plane_dir)
      : ArgumentError(msg), axis(axis), plane_dir(plane_dir) {}
  std::array<double, 3> axis;       // direction from start point through the center
  std::array<double, 3> plane_dir;  // tie-break: e1 orthogonalized against axis
};

struct MeshQualityError : Error {
  using Error::Error;
};

struct InputError : Error {
  using Error::Error;
};

struct SolverError : Error {
  using Error::Error;
};

struct ConvergenceError : SolverError {
  ConvergenceError(const std::string& msg, std::string diagnostics)
      : SolverError(msg), diagnostics(std::move(diagnostics)) {}
  std::string diagnostics;
};

struct RangeError : Error {
  using Error::Error;
};

struct InfeasibleError : Error {
  using Error::Error;
};

struct NumericalError : Error {
  using Error::Error;
};

struct IoError : Error {
  IoError(const std::string& msg, std::string path) : Error(msg + ": " + path), path(std::move(path)) {}
  std::string path;
};

}  // namespace fgi
