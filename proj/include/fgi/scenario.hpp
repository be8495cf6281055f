#pragma once

// Scenario configuration (JSON), experiment orchestration, and deterministic
// artifact emission.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fgi/manifold.hpp"
#include "fgi/ot.hpp"

namespace fgi {

struct GeneratorSpec {
  std::string kind;  // uniform | gaussian-bump | cap | ridge | translate-of
  std::array<double, 2> center{0.0, 0.0};  // torus bump center (ridge: center[0] only)
  std::array<double, 3> center3{0.0, 0.0, 1.0};  // sphere bump center direction
  double width = 0.2;
  std::array<double, 3> axis{0.0, 0.0, 1.0};
  double angle = 0.6;
  int ridge_axis = 0;  // torus coordinate the ridge profile varies along
  std::string base;  // translate-of source
  std::array<double, 2> v{0.0, 0.0};
  double floor = 0.0;
};

struct ManifoldBlock {
  std::string kind;  // sphere | torus | mesh-file
  double radius = 1.0;
  int subdivisions = 3;
  int nx = 16, ny = 16;
  double Lx = 1.0, Ly = 1.0;
  std::string path;  // mesh-file kind
};

struct ExperimentBlock {
  std::string kind;  // fgi | directional | competitor | heatflow | bv-projection |
                     // bv-regularized | geometry-lab
  std::string solver = "exact";  // exact | sinkhorn
  double sinkhorn_eps = 1e-3;
  bool export_plan = false;
  // ladder of sizes: torus nx=ny=N; sphere subdivision levels
  std::vector<int> ladder;
  int axis = 0;                       // directional
  std::array<long, 2> v_steps{1, 0};  // competitor lattice shift, in grid steps
  double t_final = 0.5, dt = 0.01;    // heatflow
  double cap_constant = 1.0;          // bv-projection
  std::optional<GeneratorSpec> cap_generator;
  std::string penalty_family = "entropy";  // bv-regularized
  double penalty_weight = 1.0;
  long iterations = 400;
  double tol = 1e-8;
  double step0 = 1.0;
  long trials = 10000;  // geometry-lab
  double sigma = 0.2;
};

struct ScenarioConfig {
  ManifoldBlock manifold;
  std::map<std::string, GeneratorSpec> densities;
  std::string cost_family = "quadratic";
  double cost_p = 2.0;
  std::string ell_family = "quadratic";
  double ell_p = 2.0;
  double ell_t0 = 0.5;
  ExperimentBlock experiment;
  std::map<std::string, double> tolerances;
  std::uint64_t seed = 1;
  std::string out_prefix = "run";
  std::string raw_text;  // canonical bytes for the manifest hash
};

// Parses and validates; throws ConfigError carrying every violation found
// (JSON-pointer style paths), not only the first.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config_file(const std::string& path);

// Builds the manifold for a ladder level (level < 0 means the configured base
// size). For the torus the level is N (nx = ny = N); for the sphere it is the
// subdivision count.
Manifold build_scenario_manifold(const ScenarioConfig& cfg, int level = -1);

// Evaluates a named density generator on the manifold (normalized).
DensityField build_density(const Manifold& M, const ScenarioConfig& cfg,
                           const std::string& name);

// Runs the experiment, writes artifacts under out_dir, returns the process
// exit code: 0 pass, 2 tolerance assertion failed, 3 solver/config error.
// Partial artifacts are removed when the run aborts (exit 3); completed
// artifacts are kept on assertion failures (exit 2).
int run_scenario(const ScenarioConfig& cfg, const std::string& out_dir);

}  // namespace fgi
