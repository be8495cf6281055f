#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fgi/experiments.hpp"
#include "fgi/geometry.hpp"
#include "fgi/harness.hpp"
#include "fgi/numformat.hpp"
#include "fgi/parallel.hpp"
#include "fgi/scenario.hpp"

namespace fgi {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config validation

class Validator {
 public:
  std::vector<std::string> errs;

  void fail(const std::string& ptr, const std::string& msg) { errs.push_back(ptr + ": " + msg); }

  bool object(const json& j, const std::string& ptr, std::initializer_list<const char*> allowed,
              std::initializer_list<const char*> required = {}) {
    if (!j.is_object()) {
      fail(ptr, "must be an object");
      return false;
    }
    for (const auto& item : j.items()) {
      bool ok = false;
      for (const char* k : allowed)
        if (item.key() == k) ok = true;
      if (!ok) fail(ptr + "/" + item.key(), "unknown key");
    }
    bool have_all = true;
    for (const char* k : required)
      if (!j.contains(k)) {
        fail(ptr + "/" + k, "missing required key");
        have_all = false;
      }
    return have_all;
  }

  double number(const json& j, const std::string& ptr, const char* key, double fallback,
                double lo, double hi) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number()) {
      fail(ptr + "/" + key, "must be a number");
      return fallback;
    }
    const double x = v.get<double>();
    if (x < lo || x > hi) {
      std::ostringstream os;
      os << "must be in [" << lo << ", " << hi << "]";
      fail(ptr + "/" + key, os.str());
      return fallback;
    }
    return x;
  }

  long integer(const json& j, const std::string& ptr, const char* key, long fallback, long lo,
               long hi) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer()) {
      fail(ptr + "/" + key, "must be an integer");
      return fallback;
    }
    const long x = v.get<long>();
    if (x < lo || x > hi) {
      std::ostringstream os;
      os << "must be an integer in [" << lo << ", " << hi << "]";
      fail(ptr + "/" + key, os.str());
      return fallback;
    }
    return x;
  }

  std::string text(const json& j, const std::string& ptr, const char* key,
                   const std::string& fallback, std::initializer_list<const char*> oneof = {}) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_string()) {
      fail(ptr + "/" + key, "must be a string");
      return fallback;
    }
    const std::string s = v.get<std::string>();
    if (oneof.size() > 0) {
      bool ok = false;
      for (const char* cand : oneof)
        if (s == cand) ok = true;
      if (!ok) {
        std::string msg = "must be one of {";
        bool first = true;
        for (const char* cand : oneof) {
          if (!first) msg += ", ";
          msg += cand;
          first = false;
        }
        fail(ptr + "/" + key, msg + "}");
      }
    }
    return s;
  }

  bool boolean(const json& j, const std::string& ptr, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_boolean()) {
      fail(ptr + "/" + key, "must be a boolean");
      return fallback;
    }
    return j.at(key).get<bool>();
  }

  template <std::size_t n>
  std::array<double, n> vec(const json& j, const std::string& ptr, const char* key,
                            std::array<double, n> fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_array() || v.size() != n || !std::all_of(v.begin(), v.end(), [](const json& e) {
          return e.is_number();
        })) {
      fail(ptr + "/" + key, "must be an array of " + std::to_string(n) + " numbers");
      return fallback;
    }
    std::array<double, n> out;
    for (std::size_t k = 0; k < n; ++k) out[k] = v[k].get<double>();
    return out;
  }
};

GeneratorSpec parse_generator(Validator& V, const json& j, const std::string& ptr,
                              const std::string& manifold_kind) {
  GeneratorSpec g;
  if (!V.object(j, ptr,
                {"kind", "center", "width", "axis", "angle", "base", "v", "floor"},
                {"kind"}))
    return g;
  g.kind = V.text(j, ptr, "kind", "uniform",
                  {"uniform", "gaussian-bump", "cap", "ridge", "translate-of"});
  g.floor = V.number(j, ptr, "floor", 0.0, 0.0, 1e6);
  const bool torus = manifold_kind == "torus";
  if (g.kind == "gaussian-bump") {
    if (!j.contains("center")) {
      V.fail(ptr + "/center", "missing required key");
    } else if (torus) {
      g.center = V.vec<2>(j, ptr, "center", g.center);
    } else {
      g.center3 = V.vec<3>(j, ptr, "center", g.center3);
    }
    g.width = V.number(j, ptr, "width", 0.2, 1e-6, 1e6);
  } else if (g.kind == "cap") {
    if (!j.contains("axis")) {
      V.fail(ptr + "/axis", "missing required key");
    } else if (torus) {
      const auto c = V.vec<2>(j, ptr, "axis", {g.axis[0], g.axis[1]});
      g.axis = {c[0], c[1], 0.0};
    } else {
      g.axis = V.vec<3>(j, ptr, "axis", g.axis);
    }
    g.angle = V.number(j, ptr, "angle", 0.6, 1e-6, 1e6);
  } else if (g.kind == "ridge") {
    if (!torus) V.fail(ptr, "ridge generators need the torus");
    if (!j.contains("center"))
      V.fail(ptr + "/center", "missing required key");
    else
      g.center[0] = V.number(j, ptr, "center", 0.0, -1e9, 1e9);
    g.width = V.number(j, ptr, "width", 0.2, 1e-6, 1e6);
    g.ridge_axis = static_cast<int>(V.integer(j, ptr, "axis", 0, 0, 1));
  } else if (g.kind == "translate-of") {
    if (!torus) V.fail(ptr, "translate-of generators need the torus");
    g.base = V.text(j, ptr, "base", "");
    if (g.base.empty()) V.fail(ptr + "/base", "missing required key");
    g.v = V.vec<2>(j, ptr, "v", g.v);
  } else {
    for (const char* k : {"center", "width", "axis", "angle", "base", "v"})
      if (j.contains(k)) V.fail(ptr + "/" + std::string(k), "not valid for kind uniform");
  }
  return g;
}

const std::set<std::string> kToleranceKeys = {
    "slack_min",       "abs_lhs_max", "value_max",          "second_diff_max",
    "feasibility_max", "mono_max",    "budget_factor",      "nonexpansive_slack",
    "gap_max",         "max_ratio",   "identity_residual_max"};

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
  const json root = json::parse(text, nullptr, false);
  if (root.is_discarded())
    throw ConfigError("configuration is not valid JSON", {"/: not valid JSON"});

  Validator V;
  ScenarioConfig cfg;
  cfg.raw_text = text;
  V.object(root, "",
           {"manifold", "densities", "cost", "ell", "experiment", "tolerances", "seed",
            "outputs"},
           {"manifold", "experiment"});

  if (root.contains("manifold")) {
    const json& m = root.at("manifold");
    if (V.object(m, "/manifold",
                 {"kind", "radius", "subdivisions", "nx", "ny", "Lx", "Ly", "path"},
                 {"kind"})) {
      cfg.manifold.kind = V.text(m, "/manifold", "kind", "torus", {"sphere", "torus", "mesh-file"});
      cfg.manifold.radius = V.number(m, "/manifold", "radius", 1.0, 1e-9, 1e9);
      cfg.manifold.subdivisions =
          static_cast<int>(V.integer(m, "/manifold", "subdivisions", 3, 0, 7));
      cfg.manifold.nx = static_cast<int>(V.integer(m, "/manifold", "nx", 16, 4, 4096));
      cfg.manifold.ny = static_cast<int>(V.integer(m, "/manifold", "ny", 16, 4, 4096));
      cfg.manifold.Lx = V.number(m, "/manifold", "Lx", 1.0, 1e-9, 1e9);
      cfg.manifold.Ly = V.number(m, "/manifold", "Ly", 1.0, 1e-9, 1e9);
      cfg.manifold.path = V.text(m, "/manifold", "path", "");
      if (cfg.manifold.kind == "mesh-file" && cfg.manifold.path.empty())
        V.fail("/manifold/path", "missing required key for kind mesh-file");
    }
  }

  if (root.contains("densities")) {
    const json& d = root.at("densities");
    if (!d.is_object()) {
      V.fail("/densities", "must be an object of named generators");
    } else {
      for (const auto& item : d.items())
        cfg.densities[item.key()] =
            parse_generator(V, item.value(), "/densities/" + item.key(), cfg.manifold.kind);
      for (const auto& [name, gen] : cfg.densities)
        if (gen.kind == "translate-of") {
          auto it = cfg.densities.find(gen.base);
          if (it == cfg.densities.end())
            V.fail("/densities/" + name + "/base", "references unknown generator " + gen.base);
          else if (it->second.kind == "translate-of")
            V.fail("/densities/" + name + "/base", "chained translate-of is not supported");
        }
    }
  }

  if (root.contains("cost")) {
    const json& c = root.at("cost");
    if (V.object(c, "/cost", {"family", "p"})) {
      cfg.cost_family =
          V.text(c, "/cost", "family", "quadratic", {"quadratic", "power", "cosh", "linear"});
      cfg.cost_p = V.number(c, "/cost", "p", 2.0, 1.0 + 1e-9, 64.0);
    }
  }
  if (root.contains("ell")) {
    const json& l = root.at("ell");
    if (V.object(l, "/ell", {"family", "p", "t0"})) {
      cfg.ell_family = V.text(l, "/ell", "family", "quadratic",
                              {"linear", "power", "quadratic", "shifted-quadratic"});
      cfg.ell_p = V.number(l, "/ell", "p", 2.0, 1.0 + 1e-9, 64.0);
      cfg.ell_t0 = V.number(l, "/ell", "t0", 0.5, 0.0, 1e9);
    }
  }

  if (root.contains("experiment")) {
    const json& e = root.at("experiment");
    if (V.object(e, "/experiment",
                 {"kind", "solver", "sinkhorn_eps", "export_plan", "ladder", "axis", "v_steps",
                  "t_final", "dt", "cap_constant", "cap", "penalty", "iterations", "tol",
                  "step0", "trials", "sigma"},
                 {"kind"})) {
      ExperimentBlock& x = cfg.experiment;
      x.kind = V.text(e, "/experiment", "kind", "fgi",
                      {"fgi", "directional", "competitor", "heatflow", "bv-projection",
                       "bv-regularized", "geometry-lab"});
      x.solver = V.text(e, "/experiment", "solver", "exact", {"exact", "sinkhorn"});
      x.sinkhorn_eps = V.number(e, "/experiment", "sinkhorn_eps", 1e-3, 1e-12, 1e12);
      x.export_plan = V.boolean(e, "/experiment", "export_plan", false);
      if (e.contains("ladder")) {
        const json& lad = e.at("ladder");
        if (!lad.is_array() || lad.empty() ||
            !std::all_of(lad.begin(), lad.end(),
                         [](const json& v) { return v.is_number_integer(); })) {
          V.fail("/experiment/ladder", "must be a nonempty array of integers");
        } else {
          for (const json& v : lad) x.ladder.push_back(v.get<int>());
        }
      }
      x.axis = static_cast<int>(V.integer(e, "/experiment", "axis", 0, 0, 1));
      if (e.contains("v_steps")) {
        const json& vs = e.at("v_steps");
        if (!vs.is_array() || vs.size() != 2 ||
            !std::all_of(vs.begin(), vs.end(),
                         [](const json& v) { return v.is_number_integer(); }))
          V.fail("/experiment/v_steps", "must be an array of 2 integers");
        else
          x.v_steps = {vs[0].get<long>(), vs[1].get<long>()};
      }
      x.t_final = V.number(e, "/experiment", "t_final", 0.5, 1e-9, 1e6);
      x.dt = V.number(e, "/experiment", "dt", 0.01, 1e-9, 1e6);
      x.cap_constant = V.number(e, "/experiment", "cap_constant", 1.0, 0.0, 1e9);
      if (e.contains("cap"))
        x.cap_generator = parse_generator(V, e.at("cap"), "/experiment/cap", cfg.manifold.kind);
      if (e.contains("penalty")) {
        const json& p = e.at("penalty");
        if (V.object(p, "/experiment/penalty", {"family", "weight"})) {
          x.penalty_family = V.text(p, "/experiment/penalty", "family", "entropy",
                                    {"entropy", "quadratic"});
          x.penalty_weight = V.number(p, "/experiment/penalty", "weight", 1.0, 0.0, 1e12);
        }
      }
      x.iterations = V.integer(e, "/experiment", "iterations", 400, 1, 1000000);
      x.tol = V.number(e, "/experiment", "tol", 1e-8, 0.0, 1.0);
      x.step0 = V.number(e, "/experiment", "step0", 1.0, 1e-9, 1e9);
      x.trials = V.integer(e, "/experiment", "trials", 10000, 1, 100000000);
      x.sigma = V.number(e, "/experiment", "sigma", 0.2, 0.0, 0.2499999);

      const bool needs_mu_nu = x.kind == "fgi" || x.kind == "directional" ||
                               x.kind == "competitor" || x.kind == "heatflow";
      const bool needs_nu = x.kind == "bv-projection" || x.kind == "bv-regularized";
      if (needs_mu_nu) {
        for (const char* name : {"mu", "nu"})
          if (!cfg.densities.count(name))
            V.fail("/densities/" + std::string(name),
                   "required by experiment " + x.kind);
      } else if (needs_nu && !cfg.densities.count("nu")) {
        V.fail("/densities/nu", "required by experiment " + x.kind);
      }
      if (!x.ladder.empty() && cfg.manifold.kind == "mesh-file")
        V.fail("/experiment/ladder", "refinement ladders need a built-in manifold kind");
    }
  }

  if (root.contains("tolerances")) {
    const json& t = root.at("tolerances");
    if (!t.is_object()) {
      V.fail("/tolerances", "must be an object");
    } else {
      for (const auto& item : t.items()) {
        if (!kToleranceKeys.count(item.key())) {
          V.fail("/tolerances/" + item.key(), "unknown tolerance key");
        } else if (!item.value().is_number()) {
          V.fail("/tolerances/" + item.key(), "must be a number");
        } else {
          cfg.tolerances[item.key()] = item.value().get<double>();
        }
      }
    }
  }

  if (root.contains("seed")) {
    if (!root.at("seed").is_number_unsigned())
      V.fail("/seed", "must be a nonnegative integer");
    else
      cfg.seed = root.at("seed").get<std::uint64_t>();
  }
  if (root.contains("outputs")) {
    const json& o = root.at("outputs");
    if (V.object(o, "/outputs", {"prefix"})) {
      cfg.out_prefix = V.text(o, "/outputs", "prefix", "run");
      if (cfg.out_prefix.empty() || cfg.out_prefix.find('/') != std::string::npos)
        V.fail("/outputs/prefix", "must be a nonempty name without path separators");
    }
  }

  if (!V.errs.empty())
    throw ConfigError("configuration has " + std::to_string(V.errs.size()) + " violation(s)",
                      V.errs);
  return cfg;
}

ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config", path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// ---------------------------------------------------------------------------
// Scenario building blocks

Manifold build_scenario_manifold(const ScenarioConfig& cfg, int level) {
  const ManifoldBlock& m = cfg.manifold;
  if (m.kind == "sphere")
    return build_sphere_mesh(level >= 0 ? level : m.subdivisions, m.radius);
  if (m.kind == "torus") {
    const int nx = level >= 0 ? level : m.nx;
    const int ny = level >= 0 ? level : m.ny;
    return build_torus_mesh(nx, ny, m.Lx, m.Ly);
  }
  return read_mesh(m.path);
}

namespace {

double generator_value(const Manifold& M, const ScenarioConfig& cfg, const GeneratorSpec& g,
                       const Vec3& pos, int depth) {
  if (depth > 3) throw ConfigError("generator recursion too deep");
  double v = 0.0;
  if (g.kind == "uniform") {
    v = 1.0;
  } else if (g.kind == "gaussian-bump") {
    double d;
    if (M.kind == ManifoldKind::FlatTorus) {
      double dx = std::abs(pos.x() - g.center[0]), dy = std::abs(pos.y() - g.center[1]);
      dx = std::min(dx, M.Lx - dx);
      dy = std::min(dy, M.Ly - dy);
      d = std::hypot(dx, dy);
    } else if (M.kind == ManifoldKind::Sphere) {
      const Vec3 c = Vec3(g.center3[0], g.center3[1], g.center3[2]).normalized();
      const double cosang = std::clamp(pos.normalized().dot(c), -1.0, 1.0);
      d = M.radius * std::acos(cosang);
    } else {
      d = (pos - Vec3(g.center3[0], g.center3[1], g.center3[2])).norm();
    }
    v = std::exp(-0.5 * d * d / (g.width * g.width));
  } else if (g.kind == "cap") {
    double d;
    if (M.kind == ManifoldKind::Sphere) {
      const Vec3 a = Vec3(g.axis[0], g.axis[1], g.axis[2]).normalized();
      d = std::acos(std::clamp(pos.normalized().dot(a), -1.0, 1.0));
    } else if (M.kind == ManifoldKind::FlatTorus) {
      double dx = std::abs(pos.x() - g.axis[0]), dy = std::abs(pos.y() - g.axis[1]);
      dx = std::min(dx, M.Lx - dx);
      dy = std::min(dy, M.Ly - dy);
      d = std::hypot(dx, dy);
    } else {
      d = (pos - Vec3(g.axis[0], g.axis[1], g.axis[2])).norm();
    }
    if (d < g.angle) {
      const double c = std::cos(0.5 * kPi * d / g.angle);
      v = c * c;
    }
  } else if (g.kind == "ridge") {
    // profile along one torus coordinate only, uniform along the other
    if (M.kind != ManifoldKind::FlatTorus)
      throw ConfigError("ridge generators need the torus");
    const double L = g.ridge_axis == 0 ? M.Lx : M.Ly;
    const double coord = g.ridge_axis == 0 ? pos.x() : pos.y();
    double d = std::abs(coord - g.center[0]);
    d = std::min(d, L - d);
    if (d < g.width) {
      const double c = std::cos(0.5 * kPi * d / g.width);
      v = c * c;
    }
  } else if (g.kind == "translate-of") {
    if (M.kind != ManifoldKind::FlatTorus)
      throw ConfigError("translate-of generators need the torus");
    const Vec3 shifted = M.wrap(pos - Vec3(g.v[0], g.v[1], 0.0));
    return generator_value(M, cfg, cfg.densities.at(g.base), shifted, depth + 1) + g.floor;
  }
  return v + g.floor;
}

std::vector<double> evaluate_generator(const Manifold& M, const ScenarioConfig& cfg,
                                       const GeneratorSpec& g) {
  std::vector<double> vals(M.n_vertices());
  for (int i = 0; i < M.n_vertices(); ++i)
    vals[i] = generator_value(M, cfg, g, M.vertices[i], 0);
  return vals;
}

}  // namespace

DensityField build_density(const Manifold& M, const ScenarioConfig& cfg,
                           const std::string& name) {
  auto it = cfg.densities.find(name);
  if (it == cfg.densities.end())
    throw ConfigError("scenario has no density generator named " + name);
  return make_density(M, evaluate_generator(M, cfg, it->second), true);
}

// ---------------------------------------------------------------------------
// Artifact writing

namespace {

CostSpec cost_from(const ScenarioConfig& cfg) {
  if (cfg.cost_family == "quadratic") return CostSpec::quadratic();
  if (cfg.cost_family == "power") return CostSpec::power(cfg.cost_p);
  if (cfg.cost_family == "cosh") return CostSpec::cosh_cost();
  return CostSpec::linear();
}

EllSpec ell_from(const ScenarioConfig& cfg) {
  if (cfg.ell_family == "quadratic") return EllSpec::quadratic();
  if (cfg.ell_family == "power") return EllSpec::power(cfg.ell_p);
  if (cfg.ell_family == "shifted-quadratic") return EllSpec::shifted_quadratic(cfg.ell_t0);
  return EllSpec::linear();
}

class Emitter {
 public:
  Emitter(const ScenarioConfig& cfg, const std::string& out_dir)
      : cfg_(cfg), dir_(out_dir) {}

  void write(const std::string& artifact, const std::string& content) {
    fs::create_directories(dir_);
    const fs::path p = fs::path(dir_) / (cfg_.out_prefix + "_" + artifact);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot open artifact for writing", p.string());
    out << content;
    if (!out) throw IoError("write failed", p.string());
    written_.push_back(p);
  }

  void write_json(const std::string& artifact, const json& j) { write(artifact, j.dump(2) + "\n"); }

  // rows rendered with shortest round-trip formatting
  void write_csv(const std::string& artifact, const std::string& header,
                 const std::vector<std::vector<double>>& rows,
                 const std::vector<int>* int_col0 = nullptr) {
    std::string s = header + "\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
      bool first = true;
      if (int_col0) {
        s += std::to_string((*int_col0)[r]);
        first = false;
      }
      for (double vv : rows[r]) {
        if (!first) s += ",";
        s += fmt_double(vv);
        first = false;
      }
      s += "\n";
    }
    write(artifact, s);
  }

  void finish_manifest() {
    json m;
    m["config_hash"] = config_hash();
    m["seed"] = cfg_.seed;
    m["version"] = "1.0.0";
    std::vector<std::string> names;
    for (const auto& p : written_) names.push_back(p.filename().string());
    std::sort(names.begin(), names.end());
    m["artifacts"] = names;
    write_json("manifest.json", m);
  }

  void remove_all() {
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
    written_.clear();
  }

 private:
  std::string config_hash() const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
    for (unsigned char c : cfg_.raw_text) {
      h ^= c;
      h *= 1099511628211ull;
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  const ScenarioConfig& cfg_;
  std::string dir_;
  std::vector<fs::path> written_;
};

struct Assertions {
  const std::map<std::string, double>& tol;
  std::vector<std::string> failures;

  double get(const char* key, double fallback) const {
    auto it = tol.find(key);
    return it == tol.end() ? fallback : it->second;
  }
  bool has(const char* key) const { return tol.count(key) > 0; }

  void check(bool ok, const std::string& msg) {
    if (!ok) failures.push_back(msg);
  }
  void check_min(const char* key, double value, const char* what) {
    if (!has(key)) return;
    const double lim = tol.at(key);
    if (!(value >= lim))
      failures.push_back(std::string(what) + " = " + fmt_double(value) +
                         " below tolerance " + fmt_double(lim));
  }
  void check_max(const char* key, double fallback, double value, const char* what) {
    const double lim = get(key, fallback);
    if (!(value <= lim))
      failures.push_back(std::string(what) + " = " + fmt_double(value) +
                         " above tolerance " + fmt_double(lim));
  }
};

int level_label(const Manifold& M, const ScenarioConfig& cfg, int level) {
  if (cfg.manifold.kind == "torus") return M.nx;
  if (cfg.manifold.kind == "sphere") return level >= 0 ? level : cfg.manifold.subdivisions;
  return M.n_vertices();
}

std::vector<int> effective_levels(const ScenarioConfig& cfg) {
  if (!cfg.experiment.ladder.empty()) return cfg.experiment.ladder;
  return {-1};
}

json fgi_report_json(const FgiReport& rep) {
  json j;
  j["lhs"] = rep.lhs;
  j["rhs"] = rep.rhs;
  j["slack"] = rep.slack;
  j["n_vertices"] = rep.n_vertices;
  j["cost_family"] = rep.cost_family;
  j["ell_family"] = rep.ell_family;
  j["solver"] = rep.solver;
  j["K"] = rep.K;
  j["excluded_mass"] = rep.excluded_mass;
  j["cut_locus_pairs"] = rep.cut_locus.size();
  return j;
}

void export_plan_files(Emitter& em, const TransportPlan& plan, const PotentialPair& pot) {
  std::string s = "i,j,mass\n";
  for (const auto& e : plan.entries) {
    s += std::to_string(e.i);
    s += ",";
    s += std::to_string(e.j);
    s += ",";
    s += fmt_double(e.mass);
    s += "\n";
  }
  em.write("plan.csv", s);
  std::string t = "vertex,phi,psi\n";
  for (std::size_t i = 0; i < pot.phi.size(); ++i) {
    t += std::to_string(i);
    t += ",";
    t += fmt_double(pot.phi[i]);
    t += ",";
    t += fmt_double(pot.psi[i]);
    t += "\n";
  }
  em.write("potentials.csv", t);
}

// ---------------------------------------------------------------------------
// Experiment runners (each returns via the shared assertion collector)

void run_fgi(const ScenarioConfig& cfg, Emitter& em, Assertions& as) {
  const CostSpec c = cost_from(cfg);
  const EllSpec l = ell_from(cfg);
  std::vector<int> labels;
  std::vector<std::vector<double>> rows;
  FgiReport last;
  TransportPlan last_plan;
  PotentialPair last_pot;
  for (int level : effective_levels(cfg)) {
    const Manifold M = build_scenario_manifold(cfg, level);
    const DensityField mu = build_density(M, cfg, "mu");
    const DensityField nu = build_density(M, cfg, "nu");
    if (cfg.experiment.solver == "exact") {
      const DenseMatrix C = cost_matrix(M, c);
      ExactResult sol = solve_exact(mu, nu, C);
      last = five_gradients_from_solution(M, mu, nu, c, l, sol.plan, sol.potentials, "exact");
      last_plan = std::move(sol.plan);
      last_pot = std::move(sol.potentials);
    } else {
      last = check_five_gradients(M, mu, nu, c, l, FgiSolver::Sinkhorn,
                                  cfg.experiment.sinkhorn_eps);
    }
    labels.push_back(level_label(M, cfg, level));
    rows.push_back({last.lhs, last.rhs, last.slack});
  }
  em.write_csv("ladder.csv", "N,lhs,rhs,slack", rows, &labels);
  em.write_json("report.json", fgi_report_json(last));
  if (cfg.experiment.export_plan && cfg.experiment.solver == "exact")
    export_plan_files(em, last_plan, last_pot);
  as.check_min("slack_min", last.slack, "slack");
  if (as.has("abs_lhs_max")) as.check_max("abs_lhs_max", 0.0, std::abs(last.lhs), "|lhs|");
}

void run_directional(const ScenarioConfig& cfg, Emitter& em, Assertions& as) {
  const CostSpec c = cost_from(cfg);
  const EllSpec f = ell_from(cfg);
  std::vector<int> labels;
  std::vector<std::vector<double>> rows;
  double last_value = 0.0, last_identity = 0.0;
  for (int level : effective_levels(cfg)) {
    const Manifold M = build_scenario_manifold(cfg, level);
    const DensityField mu = build_density(M, cfg, "mu");
    const DensityField nu = build_density(M, cfg, "nu");
    const DenseMatrix C = cost_matrix(M, c);
    PotentialPair pot;
    if (cfg.experiment.solver == "exact") {
      pot = solve_exact(mu, nu, C).potentials;
    } else {
      pot = sinkhorn(mu, nu, C, cfg.experiment.sinkhorn_eps,
                     default_halvings(C, cfg.experiment.sinkhorn_eps), nullptr, nullptr, false)
                .potentials;
    }
    last_value =
        directional_value_from_potentials(M, cfg.experiment.axis, f, mu, nu, pot);
    // Exact summation identity: both coordinate values against the
    // isotropic-lhs evaluation with the matching quadratic profile.
    const double v0 = directional_value_from_potentials(M, 0, EllSpec::quadratic(), mu, nu, pot);
    const double v1 = directional_value_from_potentials(M, 1, EllSpec::quadratic(), mu, nu, pot);
    TransportPlan empty_plan;
    empty_plan.n_rows = M.n_vertices();
    empty_plan.n_cols = M.n_vertices();
    const FgiReport rep = five_gradients_from_solution(M, mu, nu, c, EllSpec::quadratic(),
                                                       empty_plan, pot, "exact");
    last_identity = std::abs(v0 + v1 + rep.lhs);
    labels.push_back(level_label(M, cfg, level));
    rows.push_back({last_value, 0.0, -last_value});
  }
  em.write_csv("ladder.csv", "N,lhs,rhs,slack", rows, &labels);
  json j;
  j["value"] = last_value;
  j["axis"] = cfg.experiment.axis;
  j["identity_residual"] = last_identity;
  em.write_json("report.json", j);
  if (as.has("value_max")) as.check_max("value_max", 0.0, last_value, "directional value");
  as.check_max("identity_residual_max", 1e-10, last_identity, "summed-direction identity");
}

void run_competitor(const ScenarioConfig& cfg, Emitter& em, Assertions& as) {
  const CostSpec c = cost_from(cfg);
  const EllSpec f = ell_from(cfg);
  const Manifold M = build_scenario_manifold(cfg, -1);
  const DensityField mu = build_density(M, cfg, "mu");
  const DensityField nu = build_density(M, cfg, "nu");
  const DenseMatrix C = cost_matrix(M, c);
  const ExactResult sol = solve_exact(mu, nu, C);
  const std::array<double, 2> v{cfg.experiment.v_steps[0] * M.hx(),
                                cfg.experiment.v_steps[1] * M.hy()};
  const CompetitorReport rep = competitor_defect(M, sol.potentials, sol.plan, C, v, f);
  json j;
  j["second_diff"] = rep.second_diff;
  j["feasibility_residual"] = rep.feasibility_residual;
  j["mono_residual"] = rep.mono_residual;
  j["v"] = {v[0], v[1]};
  em.write_json("report.json", j);
  as.check_max("second_diff_max", 1e-10, rep.second_diff, "competitor second difference");
  as.check_max("feasibility_max", 1e-8, rep.feasibility_residual, "competitor feasibility");
  as.check_max("mono_max", 0.0, rep.mono_residual, "monotonicity residual");
}

void run_heatflow(const ScenarioConfig& cfg, Emitter& em, Assertions& as) {
  const CostSpec c = cost_from(cfg);
  const Manifold M = build_scenario_manifold(cfg, -1);
  const DensityField mu = build_density(M, cfg, "mu");
  const DensityField nu = build_density(M, cfg, "nu");
  const auto curve =
      contraction_experiment(M, mu, nu, cfg.experiment.t_final, cfg.experiment.dt, c);
  std::vector<std::vector<double>> rows;
  for (const auto& p : curve) rows.push_back({p.t, p.w2, p.bound});
  em.write_csv("curve.csv", "t,w2,bound", rows);
  double worst_ratio = 0.0, worst_excess = 0.0;
  for (const auto& p : curve) {
    if (p.bound > 0.0) worst_ratio = std::max(worst_ratio, p.w2 / p.bound);
    worst_excess = std::max(worst_excess, p.w2 - curve.front().w2);
  }
  json j;
  j["w2_initial"] = curve.front().w2;
  j["w2_final"] = curve.back().w2;
  j["worst_ratio_to_bound"] = worst_ratio;
  j["worst_excess_over_initial"] = worst_excess;
  j["K"] = M.K;
  em.write_json("report.json", j);
  if (M.K > 0.0)
    as.check_max("budget_factor", 1.05, worst_ratio, "W2 / contraction bound");
  else
    as.check_max("nonexpansive_slack", 5e-3, worst_excess, "W2 growth over initial");
}

void run_bv_projection(const ScenarioConfig& cfg, Emitter& em, Assertions& as) {
  const CostSpec c = cost_from(cfg);
  std::vector<int> labels;
  std::vector<std::vector<double>> rows;
  BvReport last;
  double last_gap = 0.0;
  for (int level : effective_levels(cfg)) {
    const Manifold M = build_scenario_manifold(cfg, level);
    const DensityField nu = build_density(M, cfg, "nu");
    std::vector<double> f(M.n_vertices(), cfg.experiment.cap_constant);
    if (cfg.experiment.cap_generator)
      f = evaluate_generator(M, cfg, *cfg.experiment.cap_generator);
    ProjectionResult proj = wasserstein_projection(nu, f, c);
    last = bv_estimate_report(proj.mu_bar, nu, proj.plan, M, BvMode::Projection, &f);
    last_gap = proj.gap;
    labels.push_back(level_label(M, cfg, level));
    rows.push_back({last.bv_mu_bar + last.transport_term, last.bv_nu + 2.0 * last.bv_f,
                    last.slack});
  }
  em.write_csv("ladder.csv", "N,lhs,rhs,slack", rows, &labels);
  json j;
  j["bv_mu_bar"] = last.bv_mu_bar;
  j["bv_nu"] = last.bv_nu;
  j["bv_f"] = last.bv_f;
  j["transport_term"] = last.transport_term;
  j["slack"] = last.slack;
  j["mode"] = last.mode;
  j["lp_gap"] = last_gap;
  em.write_json("report.json", j);
  as.check_min("slack_min", last.slack, "BV projection slack");
  as.check_max("gap_max", 1e-9, std::abs(last_gap), "LP duality gap");
}

void run_bv_regularized(const ScenarioConfig& cfg, Emitter& em, Assertions& as) {
  const CostSpec c = cost_from(cfg);
  PenaltySpec pen;
  pen.family = cfg.experiment.penalty_family == "quadratic" ? PenaltyFamily::Quadratic
                                                            : PenaltyFamily::Entropy;
  pen.weight = cfg.experiment.penalty_weight;
  RegularizedOptions opt;
  opt.max_iterations = cfg.experiment.iterations;
  opt.tol = cfg.experiment.tol;
  opt.step0 = cfg.experiment.step0;
  opt.use_sinkhorn = cfg.experiment.solver == "sinkhorn";
  opt.sinkhorn_eps = cfg.experiment.sinkhorn_eps;

  std::vector<int> labels;
  std::vector<std::vector<double>> rows;
  BvReport last;
  json trace_json = json::array();
  for (int level : effective_levels(cfg)) {
    const Manifold M = build_scenario_manifold(cfg, level);
    const DensityField nu = build_density(M, cfg, "nu");
    const RegularizedResult res = regularized_min(nu, pen, c, opt);
    const DenseMatrix C = cost_matrix(M, c);
    if (opt.use_sinkhorn) {
      const SinkhornResult sr = sinkhorn(res.mu_bar, nu, C, opt.sinkhorn_eps,
                                         default_halvings(C, opt.sinkhorn_eps));
      last = bv_estimate_report_dense(res.mu_bar, nu, sr.plan, M, BvMode::Contraction);
    } else {
      const ExactResult sol = solve_exact(res.mu_bar, nu, C);
      last = bv_estimate_report(res.mu_bar, nu, sol.plan, M, BvMode::Contraction);
    }
    labels.push_back(level_label(M, cfg, level));
    rows.push_back({last.bv_mu_bar + last.transport_term, last.bv_nu, last.slack});
    trace_json = res.energy_trace;
  }
  em.write_csv("ladder.csv", "N,lhs,rhs,slack", rows, &labels);
  json j;
  j["bv_mu_bar"] = last.bv_mu_bar;
  j["bv_nu"] = last.bv_nu;
  j["transport_term"] = last.transport_term;
  j["slack"] = last.slack;
  j["mode"] = last.mode;
  j["energy_trace"] = trace_json;
  em.write_json("report.json", j);
  as.check_min("slack_min", last.slack, "BV regularized slack");
}

void run_geometry_lab(const ScenarioConfig& cfg, Emitter& em, Assertions& as) {
  const Manifold M = build_scenario_manifold(cfg, -1);
  const CurvatureReport rep =
      curvature_algebra_checks(M, cfg.experiment.trials, cfg.seed, cfg.experiment.sigma);
  json j;
  for (const auto* chk : {&rep.riemann, &rep.trace}) {
    json r;
    r["check"] = chk->check;
    r["trials"] = chk->trials;
    r["max_ratio"] = chk->max_ratio;
    r["bound"] = chk->bound;
    r["pass"] = chk->pass;
    j[chk->check] = r;
  }
  j["seed"] = rep.seed;

  if (M.kind == ManifoldKind::Sphere) {
    // Canonical cross-check: perpendicular parallel field on a quarter
    // great circle, analytic formula against the length finite difference.
    int far = -1;
    double best = std::numeric_limits<double>::infinity();
    const double target = 0.5 * kPi * M.radius;
    for (int v = 1; v < M.n_vertices(); ++v) {
      const double err = std::abs(geodesic_distance(M, 0, v) - target);
      if (err < best) {
        best = err;
        far = v;
      }
    }
    const GeodesicPath P = geodesic_path(M, 0, far, 64);
    const VariationField xi = parallel_field(P, 0.0, 1.0);
    const double analytic = second_variation_upper(P, xi);
    const FdVariation fd = finite_difference_length_variation(P, xi, 1e-3);
    json v;
    v["length"] = P.length;
    v["second_variation_upper"] = analytic;
    v["second_fd"] = fd.second_fd;
    v["difference"] = std::abs(analytic - fd.second_fd);
    j["variation_cross_check"] = v;
  }
  em.write_json("report.json", j);
  as.check(rep.riemann.pass, "curvature tensor bound violated");
  as.check(rep.trace.pass, "near-orthonormal trace bound violated");
  const double lim = as.get("max_ratio", 1.0);
  as.check(rep.riemann.max_ratio <= lim && rep.trace.max_ratio <= lim,
           "observed/bound ratio above " + fmt_double(lim));
}

}  // namespace

int run_scenario(const ScenarioConfig& cfg, const std::string& out_dir) {
  Emitter em(cfg, out_dir);
  Assertions as{cfg.tolerances, {}};
  try {
    const std::string& kind = cfg.experiment.kind;
    if (kind == "fgi")
      run_fgi(cfg, em, as);
    else if (kind == "directional")
      run_directional(cfg, em, as);
    else if (kind == "competitor")
      run_competitor(cfg, em, as);
    else if (kind == "heatflow")
      run_heatflow(cfg, em, as);
    else if (kind == "bv-projection")
      run_bv_projection(cfg, em, as);
    else if (kind == "bv-regularized")
      run_bv_regularized(cfg, em, as);
    else
      run_geometry_lab(cfg, em, as);
    em.finish_manifest();
  } catch (const Error& e) {
    em.remove_all();
    std::fprintf(stderr, "error: %s\n", e.what());
    if (const auto* conv = dynamic_cast<const ConvergenceError*>(&e))
      std::fprintf(stderr, "diagnostics: %s\n", conv->diagnostics.c_str());
    return 3;
  }
  if (!as.failures.empty()) {
    for (const auto& f : as.failures) std::fprintf(stderr, "assertion failed: %s\n", f.c_str());
    return 2;
  }
  return 0;
}

}  // namespace fgi
