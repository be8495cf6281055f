#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fgi/errors.hpp"

namespace fgi {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = 3.14159265358979323846;

struct DenseMatrix {
  int rows = 0, cols = 0;
  std::vector<double> data;  // row-major

  DenseMatrix() = default;
  DenseMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
  double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }
  double max_value() const;
};

enum class ManifoldKind { Sphere, FlatTorus, GenericMesh };

std::string kind_name(ManifoldKind k);

// Discretized compact surface. Immutable after construction; all members are
// plain data so instances can be shared freely across threads.
struct Manifold {
  ManifoldKind kind = ManifoldKind::GenericMesh;

  // sphere
  double radius = 0.0;
  int subdivisions = -1;
  // flat torus
  double Lx = 0.0, Ly = 0.0;
  int nx = 0, ny = 0;

  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<double> vertex_weights;          // lumped vol_g, sums to mesh_area
  std::vector<std::vector<int>> adjacency;     // sorted 1-rings
  std::vector<std::array<Vec3, 2>> frames;     // per-vertex orthonormal tangent basis
  std::vector<Vec3> vertex_normals;

  double K = 0.0;       // Ricci lower bound
  double Ktilde = 0.0;  // sectional sup
  double mesh_area = 0.0;
  double diam = 0.0;    // geodesic diameter (analytic kinds exact)

  int n_vertices() const { return static_cast<int>(vertices.size()); }

  // torus grid helpers
  int grid_index(int ix, int iy) const { return iy * nx + ix; }
  std::array<int, 2> grid_coords(int i) const { return {i % nx, i / nx}; }
  double hx() const { return Lx / nx; }
  double hy() const { return Ly / ny; }
  Vec2 torus_point(int i) const {
    auto [ix, iy] = grid_coords(i);
    return {ix * hx(), iy * hy()};
  }

  // distance between arbitrary (off-vertex) points; chordal for generic kind
  double point_distance(const Vec3& a, const Vec3& b) const;
  // vertex-indexed shortcut: exact for analytic kinds, chordal on generic
  // meshes (geodesic_distance runs Dijkstra when the true distance is needed)
  double point_distance(int i, int j) const { return point_distance(vertices[i], vertices[j]); }
  // geodesic step from p along tangent v (length = |v|); first order on generic
  Vec3 exp_map(const Vec3& p, const Vec3& v) const;
  // wraps a torus point into the fundamental domain
  Vec3 wrap(const Vec3& p) const;

  void check_vertex(int i, const char* what) const;
};

struct CostSpec {
  enum class Family { Quadratic, Power, Cosh, Linear };
  Family family = Family::Quadratic;
  double p = 2.0;  // Power only

  static CostSpec quadratic() { return {Family::Quadratic, 2.0}; }
  static CostSpec power(double p);
  static CostSpec cosh_cost() { return {Family::Cosh, 2.0}; }
  static CostSpec linear() { return {Family::Linear, 1.0}; }

  double h(double t) const;
  double hprime(double t) const;  // λ
  double lambda_inv(double s) const;
  bool nonlinear() const { return family != Family::Linear; }
  std::string family_name() const;
};

// Unit-speed discrete geodesic with its parallel orthonormal frame
// {tangent, normal2}. For analytic kinds the frame is exact, which lets
// variation fields live in frame coefficients where parallel transport is
// the identity on coordinates.
struct GeodesicPath {
  const Manifold* M = nullptr;
  std::vector<Vec3> samples;
  std::vector<Vec3> tangents;  // unit γ̇ per sample
  std::vector<Vec3> normals2;  // second parallel frame vector per sample
  double length = 0.0;

  int segments() const { return static_cast<int>(samples.size()) - 1; }
  double dt() const { return length / segments(); }
};

Manifold build_sphere_mesh(int subdivisions, double radius);
Manifold build_torus_mesh(int nx, int ny, double Lx, double Ly);
// Assembles adjacency/frames/area and validates closedness for imported data.
Manifold build_generic_mesh(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> triangles,
                            std::vector<double> weights, double K, double Ktilde);

double geodesic_distance(const Manifold& M, int i, int j);
GeodesicPath geodesic_path(const Manifold& M, int i, int j, int steps);

DenseMatrix cost_matrix(const Manifold& M, const CostSpec& c);
DenseMatrix cost_matrix_serial(const Manifold& M, const CostSpec& c);  // reference kernel

// plain-text mesh format, header "fgi-mesh v1"
void write_mesh(const Manifold& M, const std::string& path);
Manifold read_mesh(const std::string& path);

namespace detail {
// Shared assembly for imported meshes: validates indices/closedness, builds
// adjacency and frames, checks the weight/area invariant. Leaves diam at 0.
Manifold assemble_mesh(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> triangles,
                       std::vector<double> weights, double K, double Ktilde);
void rebuild_frames(Manifold& M);
}  // namespace detail

}  // namespace fgi
