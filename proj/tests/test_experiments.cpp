#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fgi/errors.hpp"
#include "fgi/experiments.hpp"
#include "fgi/manifold.hpp"
#include "fgi/ot.hpp"
#include "fgi/parallel.hpp"

using namespace fgi;

namespace {

DensityField torus_bump_density(const Manifold& T, double cx, double cy, double width,
                                double floor) {
  std::vector<double> vals(T.n_vertices());
  for (int i = 0; i < T.n_vertices(); ++i) {
    const Vec3& p = T.vertices[i];
    double dx = std::abs(p.x() - cx), dy = std::abs(p.y() - cy);
    dx = std::min(dx, T.Lx - dx);
    dy = std::min(dy, T.Ly - dy);
    vals[i] = std::exp(-0.5 * (dx * dx + dy * dy) / (width * width)) + floor;
  }
  return make_density(T, std::move(vals));
}

DensityField sphere_cap_density(const Manifold& S, const Vec3& axis, double angle,
                                double floor) {
  const double cos_angle = std::cos(angle);
  std::vector<double> vals(S.n_vertices());
  for (int i = 0; i < S.n_vertices(); ++i) {
    const double c = S.vertices[i].normalized().dot(axis);
    vals[i] = c > cos_angle ? 1.0 : floor;
  }
  return make_density(S, std::move(vals));
}

DensityField uniform_density(const Manifold& M) {
  return make_density(M, std::vector<double>(M.n_vertices(), 1.0));
}

double total_variation(const DensityField& a, const DensityField& b) {
  double s = 0.0;
  for (int i = 0; i < a.M->n_vertices(); ++i) s += std::abs(a.mass(i) - b.mass(i));
  return 0.5 * s;
}

double field_mass(const DensityField& rho) {
  double s = 0.0;
  for (int i = 0; i < rho.M->n_vertices(); ++i) s += rho.mass(i);
  return s;
}

// Three collinear vertices: the single triangle has zero area.
Manifold flat_triangle_mesh() {
  Manifold M;
  M.kind = ManifoldKind::GenericMesh;
  M.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
  M.triangles = {{0, 1, 2}};
  M.vertex_weights = {1.0, 1.0, 1.0};
  M.adjacency = {{1}, {0, 2}, {1}};
  M.mesh_area = 3.0;
  return M;
}

}  // namespace

TEST_CASE("heat operator: uniform fixed point, zero row sums, argument checks") {
  const Manifold T = build_torus_mesh(16, 16, 1.0, 1.0);
  const HeatOperator HT(T, 0.01);
  CHECK(HT.stiffness_row_sum_max() <= 1e-12);
  CHECK(HT.dt() == 0.01);

  const DensityField ut = uniform_density(T);
  DensityField stepped = HT.step(ut);
  double max_dev = 0.0;
  for (int i = 0; i < T.n_vertices(); ++i)
    max_dev = std::max(max_dev, std::abs(stepped.rho[i] - ut.rho[i]));
  CHECK(max_dev <= 1e-10);
  CHECK(std::abs(field_mass(stepped) - 1.0) <= 1e-12);

  const Manifold S = build_sphere_mesh(2, 1.0);
  const HeatOperator HS(S, 0.01);
  CHECK(HS.stiffness_row_sum_max() <= 1e-12);
  const DensityField us = uniform_density(S);
  DensityField stepped_s = HS.step(us);
  max_dev = 0.0;
  for (int i = 0; i < S.n_vertices(); ++i)
    max_dev = std::max(max_dev, std::abs(stepped_s.rho[i] - us.rho[i]));
  CHECK(max_dev <= 1e-10);

  CHECK_THROWS_AS(HeatOperator(T, 0.0), ArgumentError);
  CHECK_THROWS_AS(HeatOperator(T, -0.5), ArgumentError);
  CHECK_THROWS_AS(HT.step(us), ArgumentError);  // density from the sphere

  const Manifold bad = flat_triangle_mesh();
  CHECK_THROWS_AS(HeatOperator(bad, 0.01), MeshQualityError);
}

TEST_CASE("heat flow: cap peak decays monotonically and mass is conserved") {
  const Manifold S = build_sphere_mesh(2, 1.0);
  const HeatOperator H(S, 0.01);
  DensityField rho = sphere_cap_density(S, Vec3(0, 0, 1), 0.6, 0.05);
  const double mass0 = field_mass(rho);
  CHECK(std::abs(mass0 - 1.0) <= 1e-12);

  double clamped = 0.0;
  double prev_sup = *std::max_element(rho.rho.begin(), rho.rho.end());
  for (int k = 0; k < 10; ++k) {
    rho = heat_step(H, rho, &clamped);
    const double sup = *std::max_element(rho.rho.begin(), rho.rho.end());
    CHECK(sup < prev_sup);
    CHECK(std::abs(field_mass(rho) - mass0) <= 1e-12);
    prev_sup = sup;
  }
  CHECK(clamped == 0.0);  // strictly positive data never clamps
}

TEST_CASE("heat flow: degree-one spherical mode decays at the implicit Euler rate") {
  // rho ~ 1 + z/2 on the unit sphere: the z-moment is a pure first-harmonic
  // amplitude with continuum eigenvalue 2, so ten implicit steps at dt shrink
  // it by (1 + 2 dt)^{-10} up to the mesh eigenvalue error.
  const Manifold S = build_sphere_mesh(3, 1.0);
  std::vector<double> vals(S.n_vertices());
  for (int i = 0; i < S.n_vertices(); ++i) vals[i] = 1.0 + 0.5 * S.vertices[i].z();
  DensityField rho = make_density(S, std::move(vals));

  auto z_moment = [&](const DensityField& r) {
    double s = 0.0;
    for (int i = 0; i < S.n_vertices(); ++i) s += r.mass(i) * S.vertices[i].z();
    return s;
  };

  const double m0 = z_moment(rho);
  CHECK(m0 > 0.1);

  const double dt = 0.01;
  const HeatOperator H(S, dt);
  for (int k = 0; k < 10; ++k) rho = H.step(rho);
  const double ratio = z_moment(rho) / m0;
  const double predicted = std::pow(1.0 + 2.0 * dt, -10.0);
  CHECK(std::abs(ratio - predicted) <= 0.05 * predicted);
}

TEST_CASE("contraction curve: identical inputs stay at zero for all times") {
  const Manifold T = build_torus_mesh(12, 12, 1.0, 1.0);
  const DensityField mu = torus_bump_density(T, 0.3, 0.5, 0.2, 0.5);
  const auto curve = contraction_experiment(T, mu, mu, 0.05, 0.025, CostSpec::quadratic());
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].t == 0.0);
  for (const auto& pt : curve) {
    CHECK(pt.w2 == 0.0);
    CHECK(pt.bound == 0.0);
  }
}

TEST_CASE("contraction curve: torus flow is nonexpansive with a constant bound") {
  const Manifold T = build_torus_mesh(16, 16, 1.0, 1.0);
  const DensityField mu = torus_bump_density(T, 0.3, 0.5, 0.15, 0.5);
  const DensityField nu = torus_bump_density(T, 0.7, 0.5, 0.15, 0.5);
  const auto curve = contraction_experiment(T, mu, nu, 0.2, 0.05, CostSpec::quadratic());
  REQUIRE(curve.size() == 5);
  // the floor mass stays put, so the distance is well below the bump offset
  CHECK(curve[0].w2 > 0.01);
  for (std::size_t k = 0; k < curve.size(); ++k) {
    CHECK(curve[k].t == doctest::Approx(0.05 * static_cast<double>(k)).epsilon(1e-12));
    // Flat metric: the rate bound is the initial distance itself.
    CHECK(curve[k].bound == curve[0].w2);
    CHECK(curve[k].w2 <= curve[0].w2 * (1.0 + 5e-3) + 1e-6);
  }

  CHECK_THROWS_AS(contraction_experiment(T, mu, nu, 0.2, 0.05, CostSpec::linear()),
                  ArgumentError);
  CHECK_THROWS_AS(contraction_experiment(T, mu, nu, 0.01, 0.05, CostSpec::quadratic()),
                  ArgumentError);
  CHECK_THROWS_AS(contraction_experiment(T, mu, nu, 0.2, 0.0, CostSpec::quadratic()),
                  ArgumentError);
}

TEST_CASE("contraction curve: rotated sphere caps contract at least at rate exp(-t)") {
  // Unit sphere has curvature bound 1, so the flow contracts at e^{-t}. The
  // coarse mesh keeps the runtime small; the band absorbs its eigenvalue error.
  const Manifold S = build_sphere_mesh(2, 1.0);
  const DensityField mu = sphere_cap_density(S, Vec3(0, 0, 1), 0.5, 0.05);
  const DensityField nu = sphere_cap_density(S, Vec3(1, 0, 0), 0.5, 0.05);
  const auto curve = contraction_experiment(S, mu, nu, 0.1, 0.02, CostSpec::quadratic());
  REQUIRE(curve.size() == 6);
  CHECK(curve[0].w2 > 0.5);
  for (const auto& pt : curve) {
    CHECK(pt.bound == doctest::Approx(std::exp(-pt.t) * curve[0].w2).epsilon(1e-12));
    CHECK(pt.w2 <= std::exp(-pt.t) * curve[0].w2 * 1.10);
  }
  for (std::size_t k = 1; k < curve.size(); ++k) CHECK(curve[k].w2 < curve[k - 1].w2);
}

TEST_CASE("bv norm: constants vanish, sine ridge matches the integral, scaling is linear") {
  const Manifold T = build_torus_mesh(64, 64, 1.0, 1.0);
  CHECK(bv_norm(T, uniform_density(T)) == 0.0);

  const Manifold S = build_sphere_mesh(2, 1.0);
  CHECK(bv_norm(S, uniform_density(S)) == 0.0);

  auto ridge = [&](double amplitude) {
    std::vector<double> vals(T.n_vertices());
    for (int i = 0; i < T.n_vertices(); ++i)
      vals[i] = 1.0 + amplitude * std::sin(2.0 * kPi * T.vertices[i].x());
    return make_density(T, std::move(vals));
  };

  // d/dx [1 + sin(2 pi x)/2] integrates |pi cos| to exactly 2 over the torus.
  const double bv_half = bv_norm(T, ridge(0.5));
  CHECK(std::abs(bv_half - 2.0) <= 0.06);

  const double bv_full = bv_norm(T, ridge(1.0));
  CHECK(bv_full / bv_half == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("wasserstein projection: slack caps reproduce the target exactly") {
  const Manifold T = build_torus_mesh(16, 16, 1.0, 1.0);
  const DensityField nu = torus_bump_density(T, 0.35, 0.5, 0.2, 1.0);
  std::vector<double> f(T.n_vertices());
  for (int i = 0; i < T.n_vertices(); ++i) f[i] = nu.rho[i] + 0.5;

  const ProjectionResult res = wasserstein_projection(nu, f, CostSpec::quadratic());
  CHECK(res.cost == 0.0);
  CHECK(std::abs(res.gap) <= 1e-12);
  for (const auto& e : res.plan.entries) CHECK(e.i == e.j);
  for (int i = 0; i < T.n_vertices(); ++i) {
    // The pivot arithmetic reaches each diagonal mass through cap-residual
    // chains, so the recovered density matches only up to round-off.
    CHECK(res.mu_bar.rho[i] == doctest::Approx(nu.rho[i]).epsilon(1e-13));
  }
}

TEST_CASE("wasserstein projection: unit cap forces the uniform density") {
  // Cap mass equals total mass, so every cap binds and the projection of any
  // admissible target is the uniform density. Dyadic data keeps the tight
  // capacity balance exact in floating point.
  const Manifold T = build_torus_mesh(32, 32, 1.0, 1.0);
  std::vector<double> block(T.n_vertices(), 0.0);
  for (int iy = 12; iy < 20; ++iy)
    for (int ix = 12; ix < 20; ++ix) block[T.grid_index(ix, iy)] = 16.0;
  const DensityField nu = make_density(T, std::move(block));
  const double peak = *std::max_element(nu.rho.begin(), nu.rho.end());
  CHECK(peak > 3.0);

  const std::vector<double> f(T.n_vertices(), 1.0);
  const ProjectionResult res = wasserstein_projection(nu, f, CostSpec::quadratic());
  CHECK(res.cost > 0.0);
  CHECK(res.gap <= 1e-9);
  for (int i = 0; i < T.n_vertices(); ++i) {
    CHECK(res.mu_bar.rho[i] <= 1.0 + 1e-10);
    CHECK(res.mu_bar.rho[i] >= 1.0 - 1e-9);
  }
  CHECK(std::abs(field_mass(res.mu_bar) - 1.0) <= 1e-10);
}

TEST_CASE("wasserstein projection: binding cap splits a point mass to its neighbor") {
  const Manifold T = build_torus_mesh(8, 4, 1.0, 1.0);
  const int A = T.grid_index(2, 1);
  const int B = T.grid_index(3, 1);
  const double w = T.vertex_weights[A];

  std::vector<double> point(T.n_vertices(), 0.0);
  point[A] = 1.0 / w;
  const DensityField nu = make_density(T, std::move(point));

  std::vector<double> f(T.n_vertices(), 0.0);
  f[A] = 0.5 / w;  // cap mass 1/2 at the source vertex
  f[B] = 1.0 / w;  // room for the remainder next door

  const ProjectionResult res = wasserstein_projection(nu, f, CostSpec::quadratic());
  const DenseMatrix C = cost_matrix(T, CostSpec::quadratic());

  REQUIRE(res.plan.entries.size() == 2);
  double mass_at_A = 0.0, mass_at_B = 0.0;
  for (const auto& e : res.plan.entries) {
    CHECK(e.j == A);  // all demand sits at A
    if (e.i == A) mass_at_A = e.mass;
    if (e.i == B) mass_at_B = e.mass;
  }
  CHECK(mass_at_A == 0.5);
  CHECK(mass_at_B == 0.5);
  CHECK(res.cost == 0.5 * C(B, A));
  CHECK(res.mu_bar.rho[A] == f[A]);  // cap binds exactly

  // Enumerate the one-parameter family of feasible plans on {A, B}.
  double best = 1e300;
  for (int k = 0; k <= 512; ++k) {
    const double t = 0.5 * k / 512.0;  // mass kept at A
    best = std::min(best, (1.0 - t) * C(B, A));
  }
  CHECK(res.cost == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("wasserstein projection: infeasible and malformed caps are rejected") {
  const Manifold T = build_torus_mesh(16, 16, 1.0, 1.0);
  const DensityField nu = torus_bump_density(T, 0.35, 0.5, 0.2, 1.0);

  CHECK_THROWS_AS(
      wasserstein_projection(nu, std::vector<double>(T.n_vertices(), 0.9), CostSpec::quadratic()),
      InfeasibleError);

  std::vector<double> neg(T.n_vertices(), 2.0);
  neg[7] = -0.1;
  CHECK_THROWS_AS(wasserstein_projection(nu, neg, CostSpec::quadratic()), ArgumentError);
  CHECK_THROWS_AS(
      wasserstein_projection(nu, std::vector<double>(17, 2.0), CostSpec::quadratic()),
      ArgumentError);
}

TEST_CASE("regularized minimizer: huge entropy weight pins the uniform density") {
  const Manifold T = build_torus_mesh(8, 8, 1.0, 1.0);
  const DensityField nu = torus_bump_density(T, 0.3, 0.4, 0.25, 1.0);
  const PenaltySpec strong{PenaltyFamily::Entropy, 1e6};

  const RegularizedResult res = regularized_min(nu, strong, CostSpec::quadratic());
  CHECK(total_variation(res.mu_bar, uniform_density(T)) <= 1e-3);
  for (std::size_t k = 1; k < res.energy_trace.size(); ++k)
    CHECK(res.energy_trace[k] <= res.energy_trace[k - 1]);
}

TEST_CASE("regularized minimizer: vanishing penalty recovers the target") {
  const Manifold T = build_torus_mesh(8, 8, 1.0, 1.0);
  const DensityField nu = torus_bump_density(T, 0.3, 0.4, 0.25, 1.0);
  const PenaltySpec weak{PenaltyFamily::Quadratic, 1e-8};

  const RegularizedResult res = regularized_min(nu, weak, CostSpec::quadratic());
  CHECK(total_variation(res.mu_bar, nu) <= 1e-3);
  REQUIRE(res.energy_trace.size() >= 2);
  CHECK(res.energy_trace.back() < res.energy_trace.front());
  for (std::size_t k = 1; k < res.energy_trace.size(); ++k)
    CHECK(res.energy_trace[k] <= res.energy_trace[k - 1]);
}

TEST_CASE("regularized minimizer: beats the interpolation family under a real penalty") {
  const Manifold T = build_torus_mesh(8, 8, 1.0, 1.0);
  const DensityField nu = torus_bump_density(T, 0.3, 0.4, 0.25, 1.0);
  const DensityField u = uniform_density(T);
  const PenaltySpec pen{PenaltyFamily::Quadratic, 1.0};
  const DenseMatrix C = cost_matrix(T, CostSpec::quadratic());

  const RegularizedResult res = regularized_min(nu, pen, CostSpec::quadratic());
  const double achieved = res.energy_trace.back();

  // One-parameter oracle family: blends of the uniform density and the target.
  double family_best = 1e300;
  for (int k = 0; k <= 10; ++k) {
    const double lam = k / 10.0;
    DensityField blend;
    blend.M = &T;
    blend.rho.resize(T.n_vertices());
    for (int i = 0; i < T.n_vertices(); ++i)
      blend.rho[i] = (1.0 - lam) * u.rho[i] + lam * nu.rho[i];
    double energy = solve_exact(blend, nu, C).cost;
    for (int i = 0; i < T.n_vertices(); ++i)
      energy += T.vertex_weights[i] * pen.eta(blend.rho[i]);
    family_best = std::min(family_best, energy);
  }
  CHECK(achieved <= family_best + 1e-4);
}

TEST_CASE("regularized minimizer: iteration cap raises a convergence error") {
  const Manifold T = build_torus_mesh(8, 8, 1.0, 1.0);
  const DensityField nu = torus_bump_density(T, 0.3, 0.4, 0.25, 1.0);
  RegularizedOptions opt;
  opt.max_iterations = 1;
  opt.tol = 0.0;  // a positive decrease never counts as converged
  CHECK_THROWS_AS(
      regularized_min(nu, PenaltySpec{PenaltyFamily::Quadratic, 1e-8}, CostSpec::quadratic(), opt),
      ConvergenceError);
}

TEST_CASE("regularized minimizer: identical runs and thread counts agree bitwise") {
  const Manifold T = build_torus_mesh(8, 8, 1.0, 1.0);
  const DensityField nu = torus_bump_density(T, 0.3, 0.4, 0.25, 1.0);
  const PenaltySpec pen{PenaltyFamily::Quadratic, 1.0};

  const RegularizedResult a = regularized_min(nu, pen, CostSpec::quadratic());
  const RegularizedResult b = regularized_min(nu, pen, CostSpec::quadratic());
  CHECK(a.mu_bar.rho == b.mu_bar.rho);
  CHECK(a.energy_trace == b.energy_trace);

  const int prev = current_max_threads();
  set_thread_count(prev == 1 ? 4 : 1);
  const RegularizedResult c = regularized_min(nu, pen, CostSpec::quadratic());
  set_thread_count(prev);
  CHECK(a.mu_bar.rho == c.mu_bar.rho);
  CHECK(a.energy_trace == c.energy_trace);
  CHECK(a.iterations == c.iterations);
}

TEST_CASE("regularized minimizer: entropic inner solver stays near the uniform optimum") {
  const Manifold T = build_torus_mesh(8, 8, 1.0, 1.0);
  const DensityField nu = torus_bump_density(T, 0.3, 0.4, 0.25, 1.0);
  RegularizedOptions opt;
  opt.use_sinkhorn = true;
  opt.sinkhorn_eps = 2e-3;

  const RegularizedResult res =
      regularized_min(nu, PenaltySpec{PenaltyFamily::Entropy, 1e6}, CostSpec::quadratic(), opt);
  CHECK(total_variation(res.mu_bar, uniform_density(T)) <= 2e-3);
  for (std::size_t k = 1; k < res.energy_trace.size(); ++k)
    CHECK(res.energy_trace[k] <= res.energy_trace[k - 1]);
}

TEST_CASE("bv report: uniform data gives exactly zero slack in both modes") {
  const Manifold T = build_torus_mesh(16, 16, 1.0, 1.0);
  const DensityField u = uniform_density(T);
  const DenseMatrix C = cost_matrix(T, CostSpec::quadratic());
  const ExactResult id = solve_exact(u, u, C);

  const BvReport contraction = bv_estimate_report(u, u, id.plan, T, BvMode::Contraction);
  CHECK(contraction.bv_mu_bar == 0.0);
  CHECK(contraction.bv_nu == 0.0);
  CHECK(contraction.transport_term == 0.0);
  CHECK(contraction.slack == 0.0);
  CHECK(contraction.mode == "contraction");
  CHECK(contraction.n_vertices == 256);

  const std::vector<double> f(T.n_vertices(), 1.0);
  const BvReport projection = bv_estimate_report(u, u, id.plan, T, BvMode::Projection, &f);
  CHECK(projection.bv_f == 0.0);
  CHECK(projection.slack == 0.0);
  CHECK(projection.mode == "projection");

  // Same exactness on a positively curved mesh: the plan never leaves the
  // diagonal, so the curvature term is a sum of exact zeros.
  const Manifold S = build_sphere_mesh(2, 1.0);
  const DensityField us = uniform_density(S);
  const DenseMatrix CS = cost_matrix(S, CostSpec::quadratic());
  const ExactResult ids = solve_exact(us, us, CS);
  const BvReport on_sphere = bv_estimate_report(us, us, ids.plan, S, BvMode::Contraction);
  CHECK(on_sphere.transport_term == 0.0);
  CHECK(on_sphere.slack == 0.0);
}

TEST_CASE("bv report: projection under a flat cap never increases the bv norm") {
  double prev_neg = 1e300;
  for (const int N : {16, 32}) {
    const Manifold T = build_torus_mesh(N, N, 1.0, 1.0);
    const DensityField nu = torus_bump_density(T, 0.35, 0.5, 0.2, 0.1);
    const std::vector<double> f(T.n_vertices(), 2.0);
    const ProjectionResult proj = wasserstein_projection(nu, f, CostSpec::quadratic());
    const BvReport rep =
        bv_estimate_report(proj.mu_bar, nu, proj.plan, T, BvMode::Projection, &f);

    CHECK(rep.bv_f == 0.0);  // constant cap
    CHECK(rep.transport_term == 0.0);
    CHECK(std::abs(rep.slack - (rep.bv_nu + 2.0 * rep.bv_f - rep.bv_mu_bar -
                                rep.transport_term)) <= 1e-12);
    CHECK(rep.slack >= -1e-9);
    const double neg = std::max(0.0, -rep.slack);
    CHECK(neg <= prev_neg);
    prev_neg = neg;
  }
}

TEST_CASE("bv report: one heat step lowers the bv norm of a bump") {
  const Manifold T = build_torus_mesh(32, 32, 1.0, 1.0);
  const DensityField nu = torus_bump_density(T, 0.5, 0.5, 0.15, 0.1);
  const HeatOperator H(T, 1e-3);
  const DensityField smoothed = H.step(nu);
  const DenseMatrix C = cost_matrix(T, CostSpec::quadratic());
  const ExactResult r = solve_exact(smoothed, nu, C);

  const BvReport rep = bv_estimate_report(smoothed, nu, r.plan, T, BvMode::Contraction);
  CHECK(rep.transport_term == 0.0);  // flat metric
  CHECK(rep.slack >= -1e-9);
  CHECK(rep.bv_mu_bar < rep.bv_nu);
  CHECK(std::abs(rep.slack - (rep.bv_nu - rep.bv_mu_bar - rep.transport_term)) <= 1e-12);
}

TEST_CASE("bv report: dense plan agrees with the sparse plan and checks its inputs") {
  const Manifold T = build_torus_mesh(16, 16, 1.0, 1.0);
  const DensityField nu = torus_bump_density(T, 0.35, 0.5, 0.2, 0.1);
  const std::vector<double> f(T.n_vertices(), 2.0);
  const ProjectionResult proj = wasserstein_projection(nu, f, CostSpec::quadratic());

  DenseMatrix P(T.n_vertices(), T.n_vertices());
  for (const auto& e : proj.plan.entries) P(e.i, e.j) = e.mass;

  const BvReport sparse =
      bv_estimate_report(proj.mu_bar, nu, proj.plan, T, BvMode::Projection, &f);
  const BvReport dense =
      bv_estimate_report_dense(proj.mu_bar, nu, P, T, BvMode::Projection, &f);
  CHECK(std::abs(sparse.slack - dense.slack) <= 1e-12);
  CHECK(std::abs(sparse.transport_term - dense.transport_term) <= 1e-12);
  CHECK(sparse.bv_mu_bar == dense.bv_mu_bar);
  CHECK(sparse.bv_nu == dense.bv_nu);
  CHECK(sparse.mode == dense.mode);

  CHECK_THROWS_AS(bv_estimate_report(proj.mu_bar, nu, proj.plan, T, BvMode::Projection),
                  ArgumentError);
  DenseMatrix wrong(3, 3);
  CHECK_THROWS_AS(bv_estimate_report_dense(proj.mu_bar, nu, wrong, T, BvMode::Projection, &f),
                  ArgumentError);
}
