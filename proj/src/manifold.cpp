#include "fgi/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <utility>

#include "fgi/parallel.hpp"

namespace fgi {

namespace {

void accumulate_lumped_weights(Manifold& M) {
  M.vertex_weights.assign(M.vertices.size(), 0.0);
  double area = 0.0;
  for (const auto& t : M.triangles) {
    const Vec3 e1 = M.vertices[t[1]] - M.vertices[t[0]];
    const Vec3 e2 = M.vertices[t[2]] - M.vertices[t[0]];
    const double a = 0.5 * e1.cross(e2).norm();
    area += a;
    for (int k = 0; k < 3; ++k) M.vertex_weights[t[k]] += a / 3.0;
  }
  M.mesh_area = area;
}

void build_adjacency(Manifold& M) {
  M.adjacency.assign(M.vertices.size(), {});
  for (const auto& t : M.triangles) {
    for (int k = 0; k < 3; ++k) {
      M.adjacency[t[k]].push_back(t[(k + 1) % 3]);
      M.adjacency[t[k]].push_back(t[(k + 2) % 3]);
    }
  }
  for (auto& ring : M.adjacency) {
    std::sort(ring.begin(), ring.end());
    ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
  }
}

void check_closed(const Manifold& M) {
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& t : M.triangles) {
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edge_count[{a, b}];
    }
  }
  for (const auto& [e, c] : edge_count) {
    if (c != 2)
      throw MeshQualityError("mesh is not a closed surface: edge (" + std::to_string(e.first) +
                             "," + std::to_string(e.second) + ") belongs to " + std::to_string(c) +
                             " triangles");
  }
}

Vec3 tangent_from_normal(const Vec3& n) {
  int k = 0;
  double best = std::abs(n[0]);
  for (int i = 1; i < 3; ++i) {
    if (std::abs(n[i]) < best) {
      best = std::abs(n[i]);
      k = i;
    }
  }
  Vec3 e = Vec3::Zero();
  e[k] = 1.0;
  Vec3 t = e - e.dot(n) * n;
  return t.normalized();
}

void build_frames(Manifold& M) {
  const int n = M.n_vertices();
  M.frames.resize(n);
  M.vertex_normals.resize(n);
  if (M.kind == ManifoldKind::FlatTorus) {
    for (int i = 0; i < n; ++i) {
      M.vertex_normals[i] = Vec3(0, 0, 1);
      M.frames[i] = {Vec3(1, 0, 0), Vec3(0, 1, 0)};
    }
    return;
  }
  if (M.kind == ManifoldKind::Sphere) {
    for (int i = 0; i < n; ++i) {
      const Vec3 nrm = M.vertices[i].normalized();
      const Vec3 t1 = tangent_from_normal(nrm);
      M.vertex_normals[i] = nrm;
      M.frames[i] = {t1, nrm.cross(t1)};
    }
    return;
  }
  std::vector<Vec3> acc(n, Vec3::Zero());
  for (const auto& t : M.triangles) {
    const Vec3 nv = (M.vertices[t[1]] - M.vertices[t[0]]).cross(M.vertices[t[2]] - M.vertices[t[0]]);
    for (int k = 0; k < 3; ++k) acc[t[k]] += nv;  // cross product length already carries area weight
  }
  for (int i = 0; i < n; ++i) {
    const Vec3 nrm = acc[i].normalized();
    const Vec3 t1 = tangent_from_normal(nrm);
    M.vertex_normals[i] = nrm;
    M.frames[i] = {t1, nrm.cross(t1)};
  }
}

// single-source shortest paths over the edge graph, chordal edge lengths
std::vector<double> dijkstra(const Manifold& M, int src, std::vector<int>* prev = nullptr) {
  const int n = M.n_vertices();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  if (prev) prev->assign(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  dist[src] = 0.0;
  pq.push({0.0, src});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (int v : M.adjacency[u]) {
      const double nd = d + (M.vertices[u] - M.vertices[v]).norm();
      if (nd < dist[v]) {
        dist[v] = nd;
        if (prev) (*prev)[v] = u;
        pq.push({nd, v});
      }
    }
  }
  return dist;
}

double generic_diameter(const Manifold& M) {
  double best = 0.0;
  for (int i = 0; i < M.n_vertices(); ++i) {
    const auto d = dijkstra(M, i);
    for (double v : d)
      if (v > best) best = v;
  }
  return best;
}

}  // namespace

double DenseMatrix::max_value() const {
  double best = -std::numeric_limits<double>::infinity();
  for (double v : data)
    if (v > best) best = v;
  return best;
}

std::string kind_name(ManifoldKind k) {
  switch (k) {
    case ManifoldKind::Sphere: return "sphere";
    case ManifoldKind::FlatTorus: return "flat-torus";
    case ManifoldKind::GenericMesh: return "generic-mesh";
  }
  return "?";
}

void Manifold::check_vertex(int i, const char* what) const {
  if (i < 0 || i >= n_vertices())
    throw ArgumentError(std::string(what) + ": vertex index " + std::to_string(i) +
                        " out of range [0," + std::to_string(n_vertices()) + ")");
}

Vec3 Manifold::wrap(const Vec3& p) const {
  auto wrap1 = [](double x, double L) {
    double r = std::fmod(x, L);
    if (r < 0) r += L;
    return r;
  };
  return {wrap1(p.x(), Lx), wrap1(p.y(), Ly), 0.0};
}

double Manifold::point_distance(const Vec3& a, const Vec3& b) const {
  switch (kind) {
    case ManifoldKind::Sphere: {
      const double c = std::clamp(a.dot(b) / (radius * radius), -1.0, 1.0);
      return radius * std::acos(c);
    }
    case ManifoldKind::FlatTorus: {
      double dx = std::abs(a.x() - b.x());
      double dy = std::abs(a.y() - b.y());
      dx = std::min(dx, Lx - dx);
      dy = std::min(dy, Ly - dy);
      return std::hypot(dx, dy);
    }
    case ManifoldKind::GenericMesh: return (a - b).norm();
  }
  return 0.0;
}

Vec3 Manifold::exp_map(const Vec3& p, const Vec3& v) const {
  const double len = v.norm();
  if (len <= 1e-300) return p;
  switch (kind) {
    case ManifoldKind::Sphere: {
      const Vec3 n = p / radius;
      Vec3 u = v - v.dot(n) * n;
      const double ulen = u.norm();
      if (ulen <= 1e-300) return p;
      u /= ulen;
      const double theta = len / radius;
      return radius * (std::cos(theta) * n + std::sin(theta) * u);
    }
    case ManifoldKind::FlatTorus: return wrap(p + Vec3(v.x(), v.y(), 0.0));
    case ManifoldKind::GenericMesh: {
      // first-order: straight ambient step; callers on generic meshes accept
      // chordal accuracy (documented)
      return p + v;
    }
  }
  return p;
}

CostSpec CostSpec::power(double p) {
  if (!(p > 1.0)) throw ArgumentError("power cost requires p > 1, got " + std::to_string(p));
  return {Family::Power, p};
}

double CostSpec::h(double t) const {
  switch (family) {
    case Family::Quadratic: return 0.5 * t * t;
    case Family::Power: return std::pow(t, p) / p;
    case Family::Cosh: return std::cosh(t) - 1.0;
    case Family::Linear: return t;
  }
  return 0.0;
}

double CostSpec::hprime(double t) const {
  switch (family) {
    case Family::Quadratic: return t;
    case Family::Power: return std::pow(t, p - 1.0);
    case Family::Cosh: return std::sinh(t);
    case Family::Linear: return 1.0;
  }
  return 0.0;
}

double CostSpec::lambda_inv(double s) const {
  switch (family) {
    case Family::Quadratic: return s;
    case Family::Power: return std::pow(s, 1.0 / (p - 1.0));
    case Family::Cosh: return std::asinh(s);
    case Family::Linear:
      throw ArgumentError("linear cost has no invertible λ; reserved for W1 computations");
  }
  return 0.0;
}

std::string CostSpec::family_name() const {
  switch (family) {
    case Family::Quadratic: return "quadratic";
    case Family::Power: return "power";
    case Family::Cosh: return "cosh";
    case Family::Linear: return "linear";
  }
  return "?";
}

Manifold build_sphere_mesh(int subdivisions, double radius) {
  if (subdivisions < 0 || subdivisions > 7)
    throw ConfigError("sphere subdivisions must be in [0,7], got " + std::to_string(subdivisions));
  if (!(radius > 0.0)) throw ConfigError("sphere radius must be positive");

  Manifold M;
  M.kind = ManifoldKind::Sphere;
  M.radius = radius;
  M.subdivisions = subdivisions;
  M.K = 1.0 / (radius * radius);
  M.Ktilde = M.K;
  M.diam = kPi * radius;

  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> base = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : base) v = radius * v.normalized();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

  M.vertices = std::move(base);
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const Vec3 m = radius * (0.5 * (M.vertices[a] + M.vertices[b])).normalized();
      M.vertices.push_back(m);
      const int idx = static_cast<int>(M.vertices.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  M.triangles = std::move(faces);

  accumulate_lumped_weights(M);
  build_adjacency(M);
  build_frames(M);
  check_closed(M);
  return M;
}

Manifold build_torus_mesh(int nx, int ny, double Lx, double Ly) {
  if (nx < 4 || ny < 4)
    throw ConfigError("torus grid needs nx, ny >= 4, got " + std::to_string(nx) + "x" +
                      std::to_string(ny));
  if (!(Lx > 0.0) || !(Ly > 0.0)) throw ConfigError("torus side lengths must be positive");

  Manifold M;
  M.kind = ManifoldKind::FlatTorus;
  M.Lx = Lx;
  M.Ly = Ly;
  M.nx = nx;
  M.ny = ny;
  M.K = 0.0;
  M.Ktilde = 0.0;
  M.diam = std::hypot(Lx / 2.0, Ly / 2.0);

  const double hx = Lx / nx, hy = Ly / ny;
  M.vertices.reserve(static_cast<std::size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) M.vertices.emplace_back(ix * hx, iy * hy, 0.0);

  M.triangles.reserve(static_cast<std::size_t>(nx) * ny * 2);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const int a = M.grid_index(ix, iy);
      const int b = M.grid_index((ix + 1) % nx, iy);
      const int c = M.grid_index(ix, (iy + 1) % ny);
      const int d = M.grid_index((ix + 1) % nx, (iy + 1) % ny);
      M.triangles.push_back({a, b, d});
      M.triangles.push_back({a, d, c});
    }
  }

  M.vertex_weights.assign(M.vertices.size(), hx * hy);
  M.mesh_area = Lx * Ly;
  build_adjacency(M);
  build_frames(M);
  check_closed(M);
  return M;
}

namespace detail {

void rebuild_frames(Manifold& M) { build_frames(M); }

Manifold assemble_mesh(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> triangles,
                       std::vector<double> weights, double K, double Ktilde) {
  Manifold M;
  M.kind = ManifoldKind::GenericMesh;
  M.vertices = std::move(vertices);
  M.triangles = std::move(triangles);
  M.K = K;
  M.Ktilde = Ktilde;
  const int n = M.n_vertices();
  for (const auto& t : M.triangles)
    for (int k = 0; k < 3; ++k)
      if (t[k] < 0 || t[k] >= n) throw InputError("triangle references vertex out of range");

  double area = 0.0;
  for (const auto& t : M.triangles) {
    const Vec3 e1 = M.vertices[t[1]] - M.vertices[t[0]];
    const Vec3 e2 = M.vertices[t[2]] - M.vertices[t[0]];
    area += 0.5 * e1.cross(e2).norm();
  }
  M.mesh_area = area;

  if (weights.empty()) {
    accumulate_lumped_weights(M);
  } else {
    if (static_cast<int>(weights.size()) != n)
      throw InputError("weight count does not match vertex count");
    double sum = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw InputError("vertex weights must be positive");
      sum += w;
    }
    if (std::abs(sum - area) > 1e-9 * std::max(1.0, area))
      throw InputError("vertex weights do not sum to the mesh surface area");
    M.vertex_weights = std::move(weights);
  }

  build_adjacency(M);
  build_frames(M);
  check_closed(M);
  return M;
}

}  // namespace detail

Manifold build_generic_mesh(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> triangles,
                            std::vector<double> weights, double K, double Ktilde) {
  Manifold M = detail::assemble_mesh(std::move(vertices), std::move(triangles), std::move(weights),
                                     K, Ktilde);
  M.diam = generic_diameter(M);
  return M;
}

double geodesic_distance(const Manifold& M, int i, int j) {
  M.check_vertex(i, "geodesic_distance");
  M.check_vertex(j, "geodesic_distance");
  switch (M.kind) {
    case ManifoldKind::Sphere:
      return M.point_distance(M.vertices[i], M.vertices[j]);
    case ManifoldKind::FlatTorus: {
      // min over the 9 lattice translates of the target
      const Vec3 a = M.vertices[i], b = M.vertices[j];
      double best = std::numeric_limits<double>::infinity();
      for (int sy = -1; sy <= 1; ++sy)
        for (int sx = -1; sx <= 1; ++sx) {
          const double d = std::hypot(b.x() + sx * M.Lx - a.x(), b.y() + sy * M.Ly - a.y());
          if (d < best) best = d;
        }
      return best;
    }
    case ManifoldKind::GenericMesh: {
      return dijkstra(M, i)[j];
    }
  }
  return 0.0;
}

GeodesicPath geodesic_path(const Manifold& M, int i, int j, int steps) {
  M.check_vertex(i, "geodesic_path");
  M.check_vertex(j, "geodesic_path");
  if (steps < 2) throw ArgumentError("geodesic_path needs steps >= 2");
  if (i == j) throw ArgumentError("geodesic_path needs distinct endpoints");

  GeodesicPath P;
  P.M = &M;
  const int m = steps;

  switch (M.kind) {
    case ManifoldKind::Sphere: {
      const double r = M.radius;
      const Vec3 p = M.vertices[i] / r, q = M.vertices[j] / r;
      const double c = std::clamp(p.dot(q), -1.0, 1.0);
      const double theta = std::acos(c);
      const double dist = r * theta;
      if (std::abs(dist - kPi * r) <= 1e-9 * std::max(1.0, kPi * r)) {
        Vec3 e1(1, 0, 0);
        Vec3 pd = e1 - e1.dot(p) * p;
        if (pd.norm() < 1e-9) {
          const Vec3 e2(0, 1, 0);
          pd = e2 - e2.dot(p) * p;
        }
        pd.normalize();
        throw DegenerateGeodesicError(
            "antipodal endpoints: geodesic not unique; canonical tie-break plane attached",
            {p.x(), p.y(), p.z()}, {pd.x(), pd.y(), pd.z()});
      }
      Vec3 u = q - c * p;
      u.normalize();
      const Vec3 axis = p.cross(u);  // unit: p ⊥ u
      P.length = dist;
      P.samples.reserve(m + 1);
      P.tangents.reserve(m + 1);
      P.normals2.reserve(m + 1);
      for (int k = 0; k <= m; ++k) {
        const double a = theta * k / m;
        P.samples.push_back(r * (std::cos(a) * p + std::sin(a) * u));
        P.tangents.push_back(-std::sin(a) * p + std::cos(a) * u);
        P.normals2.push_back(axis);
      }
      return P;
    }
    case ManifoldKind::FlatTorus: {
      const Vec3 a = M.vertices[i], b = M.vertices[j];
      double best = std::numeric_limits<double>::infinity();
      Vec3 d = Vec3::Zero();
      for (int sy = -1; sy <= 1; ++sy)
        for (int sx = -1; sx <= 1; ++sx) {
          const Vec3 cand(b.x() + sx * M.Lx - a.x(), b.y() + sy * M.Ly - a.y(), 0.0);
          const double len = cand.norm();
          if (len < best) {
            best = len;
            d = cand;
          }
        }
      P.length = best;
      const Vec3 t = d / best;
      const Vec3 n2(-t.y(), t.x(), 0.0);
      for (int k = 0; k <= m; ++k) {
        P.samples.push_back(M.wrap(a + (static_cast<double>(k) / m) * d));
        P.tangents.push_back(t);
        P.normals2.push_back(n2);
      }
      return P;
    }
    case ManifoldKind::GenericMesh: {
      std::vector<int> prev;
      const auto dist = dijkstra(M, i, &prev);
      if (!std::isfinite(dist[j])) throw ArgumentError("mesh is disconnected: no path");
      std::vector<int> chain;
      for (int v = j; v != -1; v = prev[v]) chain.push_back(v);
      std::reverse(chain.begin(), chain.end());
      // uniform arc-length resampling of the polyline
      std::vector<double> cum{0.0};
      for (std::size_t k = 1; k < chain.size(); ++k)
        cum.push_back(cum.back() + (M.vertices[chain[k]] - M.vertices[chain[k - 1]]).norm());
      const double L = cum.back();
      P.length = L;
      std::size_t seg = 0;
      for (int k = 0; k <= m; ++k) {
        const double s = L * k / m;
        while (seg + 2 < cum.size() && cum[seg + 1] < s) ++seg;
        const Vec3 a = M.vertices[chain[seg]], b = M.vertices[chain[seg + 1]];
        const double t = (s - cum[seg]) / (cum[seg + 1] - cum[seg]);
        P.samples.push_back(a + t * (b - a));
        const Vec3 tau = (b - a).normalized();
        P.tangents.push_back(tau);
        const Vec3 nrm = M.vertex_normals[chain[seg]];
        Vec3 n2 = nrm.cross(tau);
        const double n2len = n2.norm();
        P.normals2.push_back(n2len > 1e-12 ? Vec3(n2 / n2len) : tangent_from_normal(tau));
      }
      return P;
    }
  }
  throw ArgumentError("unreachable manifold kind");
}

namespace {

DenseMatrix cost_matrix_impl(const Manifold& M, const CostSpec& c, bool parallel) {
  const int n = M.n_vertices();
  const std::size_t bytes = static_cast<std::size_t>(n) * n * sizeof(double);
  if (bytes > 1600000000ull)
    throw ArgumentError("dense cost matrix refused: " + std::to_string(n) + "^2 entries exceed the 1.6 GB desk-scale budget");
  DenseMatrix C(n, n);

  auto fill_row = [&](int i) {
    double* out = C.data.data() + static_cast<std::size_t>(i) * n;
    if (M.kind == ManifoldKind::GenericMesh) {
      const auto d = dijkstra(M, i);
      for (int j = 0; j < n; ++j) out[j] = i == j ? 0.0 : c.h(d[j]);
    } else {
      for (int j = 0; j < n; ++j) out[j] = i == j ? 0.0 : c.h(geodesic_distance(M, i, j));
    }
  };

  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) fill_row(i);
  } else {
    for (int i = 0; i < n; ++i) fill_row(i);
  }
  return C;
}

}  // namespace

DenseMatrix cost_matrix(const Manifold& M, const CostSpec& c) { return cost_matrix_impl(M, c, true); }

DenseMatrix cost_matrix_serial(const Manifold& M, const CostSpec& c) {
  return cost_matrix_impl(M, c, false);
}

}  // namespace fgi
