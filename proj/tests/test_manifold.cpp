#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <vector>

#include "fgi/errors.hpp"
#include "fgi/manifold.hpp"
#include "fgi/parallel.hpp"
#include "fgi/rng.hpp"

using namespace fgi;

namespace {
constexpr double kSphereArea = 4.0 * kPi;  // unit radius
}

TEST_CASE("icosphere combinatorics and embedding") {
  for (int s : {0, 1, 2, 3}) {
    const Manifold M = build_sphere_mesh(s, 1.0);
    CHECK(M.n_vertices() == 10 * (1 << (2 * s)) + 2);
    CHECK(static_cast<int>(M.triangles.size()) == 20 * static_cast<int>(std::pow(4, s)));
    for (const auto& v : M.vertices) CHECK(std::abs(v.norm() - 1.0) < 1e-12);
  }
  const Manifold M0 = build_sphere_mesh(0, 1.0);
  CHECK(M0.n_vertices() == 12);
  CHECK(M0.triangles.size() == 20);
  const Manifold M2 = build_sphere_mesh(2, 1.0);
  CHECK(M2.n_vertices() == 162);
}

TEST_CASE("sphere area converges monotonically to 4 pi r^2") {
  double prev_err = 1e9;
  for (int s : {0, 1, 2, 3}) {
    const Manifold M = build_sphere_mesh(s, 1.0);
    double total = 0.0;
    for (double w : M.vertex_weights) total += w;
    CHECK(total == doctest::Approx(M.mesh_area).epsilon(1e-12));
    const double err = std::abs(total - kSphereArea);
    CHECK(err < prev_err);
    prev_err = err;
    if (s == 2) CHECK(err / kSphereArea < 0.02);
  }
  const Manifold Mr = build_sphere_mesh(1, 2.0);
  CHECK(Mr.K == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(Mr.Ktilde == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("sphere subdivision bounds are enforced") {
  CHECK_THROWS_AS(build_sphere_mesh(-1, 1.0), ConfigError);
  CHECK_THROWS_AS(build_sphere_mesh(8, 1.0), ConfigError);
  CHECK_THROWS_AS(build_sphere_mesh(2, 0.0), ConfigError);
}

TEST_CASE("torus grid weights and curvature") {
  const Manifold M = build_torus_mesh(4, 4, 1.0, 1.0);
  CHECK(M.n_vertices() == 16);
  for (double w : M.vertex_weights) CHECK(w == doctest::Approx(1.0 / 16).epsilon(1e-15));
  double total = 0.0;
  for (double w : M.vertex_weights) total += w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));

  const Manifold M2 = build_torus_mesh(8, 4, 2.0, 1.0);
  CHECK(M2.n_vertices() == 32);
  for (double w : M2.vertex_weights) CHECK(w == doctest::Approx(1.0 / 16).epsilon(1e-15));

  const Manifold M3 = build_torus_mesh(16, 16, 1.0, 1.0);
  CHECK(M3.K == 0.0);
  CHECK(M3.Ktilde == 0.0);

  CHECK_THROWS_AS(build_torus_mesh(3, 4, 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(build_torus_mesh(4, 4, -1.0, 1.0), ConfigError);
}

TEST_CASE("torus min-image distance against a brute-force lattice oracle") {
  const Manifold M = build_torus_mesh(8, 8, 1.0, 1.0);
  SplitMix64 rng(11);
  for (int t = 0; t < 200; ++t) {
    const int i = rng.uniform_int(M.n_vertices());
    const int j = rng.uniform_int(M.n_vertices());
    const Vec3 a = M.vertices[i], b = M.vertices[j];
    double best = 1e300;
    for (int sx = -1; sx <= 1; ++sx)
      for (int sy = -1; sy <= 1; ++sy) {
        const double dx = a.x() - b.x() + sx * M.Lx;
        const double dy = a.y() - b.y() + sy * M.Ly;
        best = std::min(best, std::hypot(dx, dy));
      }
    CHECK(M.point_distance(i, j) == doctest::Approx(best).epsilon(1e-14));
    CHECK(geodesic_distance(M, i, j) == doctest::Approx(best).epsilon(1e-14));
  }
  // wrap-around shift example: (0,0) to (0.75,0) is 0.25 through the seam
  const int i0 = M.grid_index(0, 0);
  const int j0 = M.grid_index(6, 0);  // 6/8 = 0.75
  CHECK(geodesic_distance(M, i0, j0) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("sphere distance: poles, identity, metric axioms") {
  const Manifold M = build_sphere_mesh(2, 1.0);
  // icosahedron-derived spheres always carry antipodal vertex pairs; find one
  int north = 0;
  double best_z = -2.0;
  for (int i = 0; i < M.n_vertices(); ++i)
    if (M.vertices[i].z() > best_z) {
      best_z = M.vertices[i].z();
      north = i;
    }
  int south = 0;
  double worst = 2.0;
  for (int i = 0; i < M.n_vertices(); ++i) {
    const double d = (M.vertices[i] + M.vertices[north]).norm();
    if (d < worst) {
      worst = d;
      south = i;
    }
  }
  CHECK(worst < 1e-9);  // genuine antipode exists
  CHECK(geodesic_distance(M, north, south) == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(geodesic_distance(M, north, north) == 0.0);

  SplitMix64 rng(3);
  for (int t = 0; t < 300; ++t) {
    const int i = rng.uniform_int(M.n_vertices());
    const int j = rng.uniform_int(M.n_vertices());
    const int k = rng.uniform_int(M.n_vertices());
    const double dij = M.point_distance(i, j);
    CHECK(dij == doctest::Approx(M.point_distance(j, i)).epsilon(1e-14));
    if (i == j) CHECK(dij == 0.0);
    if (i != j) CHECK(dij > 0.0);
    CHECK(dij <= M.point_distance(i, k) + M.point_distance(k, j) + 1e-12);
  }
  CHECK_THROWS_AS(geodesic_distance(M, -1, 0), ArgumentError);
  CHECK_THROWS_AS(geodesic_distance(M, 0, M.n_vertices()), ArgumentError);
}

TEST_CASE("geodesic paths: sampling, length, frames") {
  const Manifold S = build_sphere_mesh(3, 1.0);
  // find two vertices roughly a quarter-turn apart on the sphere
  int far = 1;
  double target = kPi / 2, best = 1e9;
  for (int j = 1; j < S.n_vertices(); ++j) {
    const double d = std::abs(geodesic_distance(S, 0, j) - target);
    if (d < best) {
      best = d;
      far = j;
    }
  }
  const GeodesicPath P = geodesic_path(S, 0, far, 16);
  CHECK(static_cast<int>(P.samples.size()) == 17);
  CHECK(P.length == doctest::Approx(geodesic_distance(S, 0, far)).epsilon(1e-10));
  // uniform spacing, unit tangents, orthonormal frame
  const double seg = P.length / 16;
  for (int k = 0; k + 1 < static_cast<int>(P.samples.size()); ++k) {
    const double step = (P.samples[k + 1] - P.samples[k]).norm();
    CHECK(step == doctest::Approx(2.0 * std::sin(seg / 2)).epsilon(1e-9));  // chord of arc
    CHECK(P.tangents[k].norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(P.normals2[k].norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(P.tangents[k].dot(P.normals2[k])) < 1e-12);
    // tangency to the sphere
    CHECK(std::abs(P.tangents[k].dot(P.samples[k])) < 1e-12);
  }

  const Manifold T = build_torus_mesh(10, 10, 1.0, 1.0);
  const GeodesicPath Q = geodesic_path(T, T.grid_index(0, 0), T.grid_index(9, 0), 4);
  CHECK(Q.length == doctest::Approx(0.1).epsilon(1e-12));  // wraps through the seam

  // antipodal pair must raise the degenerate-geodesic error
  const Manifold S1 = build_sphere_mesh(1, 1.0);
  int north = 0;
  for (int i = 0; i < S1.n_vertices(); ++i)
    if (S1.vertices[i].z() > S1.vertices[north].z()) north = i;
  int south = north;
  for (int i = 0; i < S1.n_vertices(); ++i)
    if ((S1.vertices[i] + S1.vertices[north]).norm() < 1e-9) south = i;
  REQUIRE(south != north);
  CHECK_THROWS_AS(geodesic_path(S1, north, south, 8), DegenerateGeodesicError);
}

TEST_CASE("cost families: values, derivative inverse, linear = distance") {
  const CostSpec q = CostSpec::quadratic();
  CHECK(q.h(2.0) == doctest::Approx(2.0).epsilon(1e-15));  // d^2/2
  CHECK(q.hprime(3.0) == doctest::Approx(3.0).epsilon(1e-15));
  const CostSpec c = CostSpec::cosh_cost();
  CHECK(c.h(0.0) == 0.0);
  CHECK(c.hprime(0.0) == 0.0);
  const CostSpec lin = CostSpec::linear();
  CHECK(lin.h(0.7) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK_FALSE(lin.nonlinear());
  CHECK(q.nonlinear());

  SplitMix64 rng(21);
  for (const CostSpec& spec : {CostSpec::quadratic(), CostSpec::power(3.0), CostSpec::cosh_cost()}) {
    for (int t = 0; t < 50; ++t) {
      const double d = rng.uniform(1e-3, 2.5);
      CHECK(spec.lambda_inv(spec.hprime(d)) == doctest::Approx(d).epsilon(1e-9));
    }
  }
}

TEST_CASE("cost_matrix is symmetric, zero-diagonal, bitwise equal to serial") {
  const Manifold M = build_sphere_mesh(2, 1.0);
  const DenseMatrix C = cost_matrix(M, CostSpec::quadratic());
  const DenseMatrix Cs = cost_matrix_serial(M, CostSpec::quadratic());
  REQUIRE(C.rows == M.n_vertices());
  REQUIRE(C.cols == M.n_vertices());
  for (int i = 0; i < C.rows; ++i) {
    CHECK(C.data[static_cast<std::size_t>(i) * C.cols + i] == 0.0);
    for (int j = 0; j < C.cols; ++j) {
      const double cij = C.data[static_cast<std::size_t>(i) * C.cols + j];
      CHECK(cij == Cs.data[static_cast<std::size_t>(i) * C.cols + j]);  // bitwise
      CHECK(cij == C.data[static_cast<std::size_t>(j) * C.cols + i]);
      CHECK(cij >= 0.0);
    }
  }
  // linear cost equals the distance matrix entrywise
  const DenseMatrix D = cost_matrix(M, CostSpec::linear());
  SplitMix64 rng(8);
  for (int t = 0; t < 100; ++t) {
    const int i = rng.uniform_int(M.n_vertices());
    const int j = rng.uniform_int(M.n_vertices());
    CHECK(D.data[static_cast<std::size_t>(i) * D.cols + j] ==
          doctest::Approx(geodesic_distance(M, i, j)).epsilon(1e-14));
  }
}

TEST_CASE("cost_matrix bitwise invariant under thread count") {
  const Manifold M = build_torus_mesh(24, 24, 1.0, 1.0);
  const int before = current_max_threads();
  set_thread_count(1);
  const DenseMatrix C1 = cost_matrix(M, CostSpec::quadratic());
  set_thread_count(4);
  const DenseMatrix C4 = cost_matrix(M, CostSpec::quadratic());
  set_thread_count(before);
  REQUIRE(C1.data.size() == C4.data.size());
  for (std::size_t k = 0; k < C1.data.size(); ++k) CHECK(C1.data[k] == C4.data[k]);
}

TEST_CASE("exp_map and wrap behave on both analytic kinds") {
  const Manifold T = build_torus_mesh(8, 8, 1.0, 1.0);
  const Vec3 p(0.9, 0.1, 0.0);
  const Vec3 stepped = T.exp_map(p, Vec3(0.2, 0.0, 0.0));
  CHECK(stepped.x() == doctest::Approx(0.1).epsilon(1e-12));  // wrapped
  CHECK(stepped.y() == doctest::Approx(0.1).epsilon(1e-12));

  const Manifold S = build_sphere_mesh(1, 1.0);
  const Vec3 q = S.vertices[0];
  // pick any tangent direction
  Vec3 t = q.cross(Vec3(0.3, 0.7, 0.2));
  t.normalize();
  const double ang = 0.8;
  const Vec3 moved = S.exp_map(q, ang * t);
  CHECK(moved.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(S.point_distance(q, moved) == doctest::Approx(ang).epsilon(1e-12));
}

TEST_CASE("mesh file round-trip preserves geometry and metadata") {
  namespace fs = std::filesystem;
  const fs::path tmp = fs::temp_directory_path() / "fgi_test_mesh_roundtrip.txt";
  const Manifold M = build_sphere_mesh(1, 1.0);
  write_mesh(M, tmp.string());
  const Manifold R = read_mesh(tmp.string());
  REQUIRE(R.n_vertices() == M.n_vertices());
  REQUIRE(R.triangles.size() == M.triangles.size());
  for (int i = 0; i < M.n_vertices(); ++i) {
    CHECK((R.vertices[i] - M.vertices[i]).norm() == 0.0);  // fmt_double round-trip
    CHECK(R.vertex_weights[i] == M.vertex_weights[i]);
  }
  CHECK(R.K == M.K);
  CHECK(R.Ktilde == M.Ktilde);
  fs::remove(tmp);

  CHECK_THROWS_AS(read_mesh("/nonexistent/fgi-mesh.txt"), IoError);
}

TEST_CASE("open meshes are rejected") {
  // one triangle: every edge is a boundary edge; weights match the area so
  // the closedness check is the one that fires
  std::vector<Vec3> verts = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  std::vector<std::array<int, 3>> tris = {{0, 1, 2}};
  std::vector<double> w = {0.5 / 3.0, 0.5 / 3.0, 0.5 / 3.0};
  CHECK_THROWS_AS(detail::assemble_mesh(verts, tris, w, 0.0, 0.0), MeshQualityError);
}

TEST_CASE("generic mesh distances fall back to Dijkstra") {
  // same geometry as the sphere, but imported as a plain triangle soup
  const Manifold S = build_sphere_mesh(2, 1.0);
  const Manifold G = build_generic_mesh(S.vertices, S.triangles, S.vertex_weights, 1.0, 1.0);
  REQUIRE(G.kind == ManifoldKind::GenericMesh);
  SplitMix64 rng(31);
  for (int t = 0; t < 20; ++t) {
    const int i = rng.uniform_int(G.n_vertices());
    const int j = rng.uniform_int(G.n_vertices());
    const double dg = geodesic_distance(G, i, j);
    const double ds = geodesic_distance(S, i, j);
    CHECK(dg >= ds - 1e-9);           // graph paths cannot beat the true geodesic
    if (i != j) CHECK(dg <= ds * 1.2 + 1e-12);  // first-order accuracy band
    CHECK(dg == doctest::Approx(geodesic_distance(G, j, i)).epsilon(1e-12));
  }
}
