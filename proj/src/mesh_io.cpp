#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "fgi/manifold.hpp"
#include "fgi/numformat.hpp"

namespace fgi {

void write_mesh(const Manifold& M, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open mesh file for writing", path);
  out << "fgi-mesh v1\n";
  for (int i = 0; i < M.n_vertices(); ++i) {
    const Vec3& v = M.vertices[i];
    out << "v " << fmt_double(v.x()) << ' ' << fmt_double(v.y()) << ' ' << fmt_double(v.z()) << ' '
        << fmt_double(M.vertex_weights[i]) << '\n';
  }
  for (const auto& t : M.triangles) out << "f " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  out << "meta kind=" << kind_name(M.kind);
  if (M.kind == ManifoldKind::Sphere)
    out << " radius=" << fmt_double(M.radius) << " subdivisions=" << M.subdivisions;
  if (M.kind == ManifoldKind::FlatTorus)
    out << " nx=" << M.nx << " ny=" << M.ny << " Lx=" << fmt_double(M.Lx) << " Ly="
        << fmt_double(M.Ly);
  out << " K=" << fmt_double(M.K) << " Ktilde=" << fmt_double(M.Ktilde) << '\n';
  if (!out) throw IoError("write failed", path);
}

Manifold read_mesh(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mesh file", path);
  std::string line;
  if (!std::getline(in, line) || line != "fgi-mesh v1")
    throw InputError("bad mesh header in " + path + ": expected 'fgi-mesh v1'");

  std::vector<Vec3> vertices;
  std::vector<double> weights;
  std::vector<std::array<int, 3>> triangles;
  std::map<std::string, std::string> meta;

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      double x, y, z, w;
      if (!(ss >> x >> y >> z >> w))
        throw InputError("bad vertex line " + std::to_string(lineno) + " in " + path);
      vertices.emplace_back(x, y, z);
      weights.push_back(w);
    } else if (tag == "f") {
      int a, b, c;
      if (!(ss >> a >> b >> c))
        throw InputError("bad face line " + std::to_string(lineno) + " in " + path);
      triangles.push_back({a, b, c});
    } else if (tag == "meta") {
      std::string kv;
      while (ss >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InputError("bad meta token '" + kv + "' in " + path);
        meta[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
    } else {
      throw InputError("unknown line tag '" + tag + "' at line " + std::to_string(lineno) +
                       " in " + path);
    }
  }
  if (!meta.count("kind")) throw InputError("mesh file missing meta kind in " + path);

  auto meta_num = [&](const std::string& key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw InputError("mesh meta missing '" + key + "' in " + path);
    return std::stod(it->second);
  };

  const std::string kind = meta["kind"];
  const double K = meta.count("K") ? meta_num("K") : 0.0;
  const double Kt = meta.count("Ktilde") ? meta_num("Ktilde") : 0.0;

  if (kind == "generic-mesh")
    return build_generic_mesh(std::move(vertices), std::move(triangles), std::move(weights), K, Kt);

  Manifold M =
      detail::assemble_mesh(std::move(vertices), std::move(triangles), std::move(weights), K, Kt);

  if (kind == "sphere") {
    M.kind = ManifoldKind::Sphere;
    M.radius = meta_num("radius");
    M.subdivisions = meta.count("subdivisions") ? static_cast<int>(meta_num("subdivisions")) : -1;
    if (!(M.radius > 0.0)) throw InputError("sphere mesh needs positive radius in " + path);
    if (std::abs(K - 1.0 / (M.radius * M.radius)) > 1e-9)
      throw InputError("sphere meta K inconsistent with radius in " + path);
    for (const auto& v : M.vertices)
      if (std::abs(v.norm() - M.radius) > 1e-9 * M.radius)
        throw InputError("sphere mesh vertex off the stated radius in " + path);
    M.diam = 3.14159265358979323846 * M.radius;
    detail::rebuild_frames(M);
    return M;
  }
  if (kind == "flat-torus") {
    M.kind = ManifoldKind::FlatTorus;
    M.nx = static_cast<int>(meta_num("nx"));
    M.ny = static_cast<int>(meta_num("ny"));
    M.Lx = meta_num("Lx");
    M.Ly = meta_num("Ly");
    if (M.nx * M.ny != M.n_vertices())
      throw InputError("torus meta grid does not match vertex count in " + path);
    M.diam = std::hypot(M.Lx / 2.0, M.Ly / 2.0);
    detail::rebuild_frames(M);
    return M;
  }
  throw InputError("unknown mesh kind '" + kind + "' in " + path);
}

}  // namespace fgi
