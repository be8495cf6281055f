#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fgi/harness.hpp"
#include "fgi/parallel.hpp"

namespace fgi {

double EllSpec::ell(double t) const {
  switch (family) {
    case Family::Linear:
      return t;
    case Family::Power:
      return std::pow(t, p) / p;
    case Family::Quadratic:
      return 0.5 * t * t;
    case Family::ShiftedQuadratic: {
      const double u = std::max(0.0, t * t - t0 * t0);
      return 0.25 * u * u;
    }
  }
  return 0.0;
}

double EllSpec::ell_prime(double t) const {
  switch (family) {
    case Family::Linear:
      return 1.0;
    case Family::Power:
      return std::pow(t, p - 1.0);
    case Family::Quadratic:
      return t;
    case Family::ShiftedQuadratic:
      return std::max(0.0, t * t - t0 * t0) * t;
  }
  return 0.0;
}

double EllSpec::f_prime(double t) const {
  if (t > 0.0) return ell_prime(t);
  if (t < 0.0) return -ell_prime(-t);
  return 0.0;
}

const char* EllSpec::family_name() const {
  switch (family) {
    case Family::Linear:
      return "linear";
    case Family::Power:
      return "power";
    case Family::Quadratic:
      return "quadratic";
    case Family::ShiftedQuadratic:
      return "shifted-quadratic";
  }
  return "?";
}

EllSpec EllSpec::power(double p) {
  if (!(p > 1.0)) throw ArgumentError("EllSpec::power requires p > 1");
  return {Family::Power, p, 0.5};
}

EllSpec EllSpec::shifted_quadratic(double t0) {
  if (!(t0 >= 0.0)) throw ArgumentError("EllSpec::shifted_quadratic requires t0 >= 0");
  return {Family::ShiftedQuadratic, 2.0, t0};
}

double TangentField::norm(int i) const { return std::hypot(coeff[i][0], coeff[i][1]); }

double TangentField::dot(const TangentField& other, int i) const {
  return coeff[i][0] * other.coeff[i][0] + coeff[i][1] * other.coeff[i][1];
}

TangentField vertex_gradient(const Manifold& M, const std::vector<double>& field) {
  if (static_cast<int>(field.size()) != M.n_vertices())
    throw ArgumentError("vertex_gradient: field size does not match vertex count");
  TangentField g;
  g.M = &M;
  g.coeff.resize(field.size());

  if (M.kind == ManifoldKind::FlatTorus) {
    const double ihx = 1.0 / (2.0 * M.hx()), ihy = 1.0 / (2.0 * M.hy());
    const int nx = M.nx, ny = M.ny;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M.n_vertices(); ++i) {
      const auto [ix, iy] = M.grid_coords(i);
      const double fxp = field[M.grid_index((ix + 1) % nx, iy)];
      const double fxm = field[M.grid_index((ix + nx - 1) % nx, iy)];
      const double fyp = field[M.grid_index(ix, (iy + 1) % ny)];
      const double fym = field[M.grid_index(ix, (iy + ny - 1) % ny)];
      g.coeff[i] = {(fxp - fxm) * ihx, (fyp - fym) * ihy};
    }
    return g;
  }

  // Least-squares linear fit over the 1-ring, in the vertex tangent frame.
  int bad_vertex = -1;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < M.n_vertices(); ++i) {
    const Vec3& e1 = M.frames[i][0];
    const Vec3& e2 = M.frames[i][1];
    double a00 = 0.0, a01 = 0.0, a11 = 0.0, b0 = 0.0, b1 = 0.0, scale = 0.0;
    for (int j : M.adjacency[i]) {
      const Vec3 d = M.vertices[j] - M.vertices[i];
      const double d0 = d.dot(e1), d1 = d.dot(e2);
      const double df = field[j] - field[i];
      a00 += d0 * d0;
      a01 += d0 * d1;
      a11 += d1 * d1;
      b0 += d0 * df;
      b1 += d1 * df;
      scale = std::max(scale, d0 * d0 + d1 * d1);
    }
    const double det = a00 * a11 - a01 * a01;
    if (det <= 1e-12 * scale * scale) {
#pragma omp critical
      bad_vertex = i;
      g.coeff[i] = {0.0, 0.0};
      continue;
    }
    g.coeff[i] = {(a11 * b0 - a01 * b1) / det, (a00 * b1 - a01 * b0) / det};
  }
  if (bad_vertex >= 0)
    throw MeshQualityError("vertex_gradient: degenerate 1-ring at vertex " +
                           std::to_string(bad_vertex));
  return g;
}

std::array<double, 2> ell_prime_vec(const EllSpec& l, const std::array<double, 2>& v) {
  const double n = std::hypot(v[0], v[1]);
  if (n == 0.0) return {0.0, 0.0};
  const double s = l.ell_prime(n) / n;
  return {s * v[0], s * v[1]};
}

namespace {

bool cut_locus_pair(const Manifold& M, double d) {
  if (M.kind != ManifoldKind::Sphere) return false;
  const double anti = kPi * M.radius;
  return std::abs(d - anti) <= 1e-9 * std::max(1.0, anti);
}

double fgi_lhs(const Manifold& M, const DensityField& mu, const DensityField& nu,
               const EllSpec& l, const PotentialPair& pot) {
  const TangentField gphi = vertex_gradient(M, pot.phi);
  const TangentField gpsi = vertex_gradient(M, pot.psi);
  const TangentField gmu = vertex_gradient(M, mu.rho);
  const TangentField gnu = vertex_gradient(M, nu.rho);
  return chunked_sum(M.n_vertices(), [&](int i) {
    const auto lphi = ell_prime_vec(l, gphi.coeff[i]);
    const auto lpsi = ell_prime_vec(l, gpsi.coeff[i]);
    const double t1 = lphi[0] * gmu.coeff[i][0] + lphi[1] * gmu.coeff[i][1];
    const double t2 = lpsi[0] * gnu.coeff[i][0] + lpsi[1] * gnu.coeff[i][1];
    return M.vertex_weights[i] * (t1 + t2);
  });
}

}  // namespace

FgiReport five_gradients_from_solution(const Manifold& M, const DensityField& mu,
                                       const DensityField& nu, const CostSpec& c,
                                       const EllSpec& l, const TransportPlan& plan,
                                       const PotentialPair& pot, const char* solver_name) {
  FgiReport rep;
  rep.n_vertices = M.n_vertices();
  rep.cost_family = c.family_name();
  rep.ell_family = l.family_name();
  rep.solver = solver_name;
  rep.K = M.K;
  rep.lhs = fgi_lhs(M, mu, nu, l, pot);

  const int ne = static_cast<int>(plan.entries.size());
  std::vector<char> excluded(plan.entries.size(), 0);
  for (int k = 0; k < ne; ++k) {
    const auto& e = plan.entries[k];
    const double d = M.point_distance(e.i, e.j);
    if (cut_locus_pair(M, d)) {
      excluded[k] = 1;
      rep.excluded_mass += e.mass;
      rep.cut_locus.push_back({e.i, e.j, e.mass});
    }
  }
  rep.rhs = M.K * chunked_sum(ne, [&](int k) {
    if (excluded[k]) return 0.0;
    const auto& e = plan.entries[k];
    const double d = M.point_distance(e.i, e.j);
    return e.mass * l.ell_prime(c.hprime(d)) * d;
  });
  rep.slack = rep.lhs - rep.rhs;
  return rep;
}

FgiReport check_five_gradients(const Manifold& M, const DensityField& mu,
                               const DensityField& nu, const CostSpec& c, const EllSpec& l,
                               FgiSolver solver, double sinkhorn_eps) {
  mu.validate("mu");
  nu.validate("nu");
  if (mu.min_density() <= 0.0 || nu.min_density() <= 0.0)
    throw ArgumentError("check_five_gradients: densities must be strictly positive");
  if (!c.nonlinear())
    throw ArgumentError("check_five_gradients: cost must have nonlinear h");
  const DenseMatrix C = cost_matrix(M, c);

  if (solver == FgiSolver::Exact) {
    const ExactResult sol = solve_exact(mu, nu, C);
    return five_gradients_from_solution(M, mu, nu, c, l, sol.plan, sol.potentials, "exact");
  }

  const SinkhornResult sol =
      sinkhorn(mu, nu, C, sinkhorn_eps, default_halvings(C, sinkhorn_eps));
  FgiReport rep;
  rep.n_vertices = M.n_vertices();
  rep.cost_family = c.family_name();
  rep.ell_family = l.family_name();
  rep.solver = "sinkhorn";
  rep.K = M.K;
  rep.lhs = fgi_lhs(M, mu, nu, l, sol.potentials);
  const int nv = M.n_vertices();
  // Dense-plan right-hand side; cut-locus pairs excluded as in the sparse path.
  double excluded_mass = 0.0;
  rep.rhs = M.K * chunked_sum(nv, [&](int i) {
    const double* row = sol.plan.row(i);
    double s = 0.0;
    for (int j = 0; j < nv; ++j) {
      const double m = row[j];
      if (m == 0.0) continue;
      const double d = M.point_distance(i, j);
      if (cut_locus_pair(M, d)) continue;
      s += m * l.ell_prime(c.hprime(d)) * d;
    }
    return s;
  });
  for (int i = 0; i < nv; ++i) {
    const double* row = sol.plan.row(i);
    for (int j = 0; j < nv; ++j) {
      if (row[j] > 0.0) {
        const double d = M.point_distance(i, j);
        if (cut_locus_pair(M, d)) {
          excluded_mass += row[j];
          if (rep.cut_locus.size() < 64) rep.cut_locus.push_back({i, j, row[j]});
        }
      }
    }
  }
  rep.excluded_mass = excluded_mass;
  rep.slack = rep.lhs - rep.rhs;
  return rep;
}

namespace {

void require_torus(const Manifold& M, const char* who) {
  if (M.kind != ManifoldKind::FlatTorus)
    throw ArgumentError(std::string(who) + ": requires the flat torus (translation group)");
}

}  // namespace

double directional_value_from_potentials(const Manifold& T, int axis, const EllSpec& f,
                                         const DensityField& mu, const DensityField& nu,
                                         const PotentialPair& pot) {
  require_torus(T, "directional_fgi");
  if (axis != 0 && axis != 1)
    throw ArgumentError("directional_fgi: axis must be 0 or 1");
  const int nx = T.nx, ny = T.ny;
  const double ih = 1.0 / (2.0 * (axis == 0 ? T.hx() : T.hy()));
  auto X = [&](const std::vector<double>& u, int i) {
    const auto [ix, iy] = T.grid_coords(i);
    int ip, im;
    if (axis == 0) {
      ip = T.grid_index((ix + 1) % nx, iy);
      im = T.grid_index((ix + nx - 1) % nx, iy);
    } else {
      ip = T.grid_index(ix, (iy + 1) % ny);
      im = T.grid_index(ix, (iy + ny - 1) % ny);
    }
    return (u[ip] - u[im]) * ih;
  };
  return -chunked_sum(T.n_vertices(), [&](int i) {
    const double t1 = f.f_prime(X(pot.phi, i)) * X(mu.rho, i);
    const double t2 = f.f_prime(X(pot.psi, i)) * X(nu.rho, i);
    return T.vertex_weights[i] * (t1 + t2);
  });
}

double directional_fgi(const Manifold& T, int axis, const EllSpec& f, const DensityField& mu,
                       const DensityField& nu, const CostSpec& h, FgiSolver solver,
                       double sinkhorn_eps) {
  require_torus(T, "directional_fgi");
  const DenseMatrix C = cost_matrix(T, h);
  PotentialPair pot;
  if (solver == FgiSolver::Exact) {
    pot = solve_exact(mu, nu, C).potentials;
  } else {
    pot = sinkhorn(mu, nu, C, sinkhorn_eps, default_halvings(C, sinkhorn_eps), nullptr,
                   nullptr, false)
              .potentials;
  }
  return directional_value_from_potentials(T, axis, f, mu, nu, pot);
}

CompetitorReport competitor_defect(const Manifold& T, const PotentialPair& pot,
                                   const TransportPlan& plan, const DenseMatrix& C,
                                   const std::array<double, 2>& v, const EllSpec& f) {
  require_torus(T, "competitor_defect");
  const double rx = v[0] / T.hx(), ry = v[1] / T.hy();
  const long sx = std::lround(rx), sy = std::lround(ry);
  if (std::abs(rx - sx) > 1e-9 * std::max(1.0, std::abs(rx)) ||
      std::abs(ry - sy) > 1e-9 * std::max(1.0, std::abs(ry)))
    throw ArgumentError("competitor_defect: v must be a lattice translation");
  const int nx = T.nx, ny = T.ny;
  auto shift = [&](int i, long ax, long ay) {
    const auto [ix, iy] = T.grid_coords(i);
    const int jx = static_cast<int>(((ix + ax) % nx + nx) % nx);
    const int jy = static_cast<int>(((iy + ay) % ny + ny) % ny);
    return T.grid_index(jx, jy);
  };

  const int nv = T.n_vertices();
  auto energy = [&](long ax, long ay) {
    return chunked_sum(nv, [&](int i) { return plan.row_marginal[i] * pot.phi[shift(i, ax, ay)]; }) +
           chunked_sum(nv, [&](int j) { return plan.col_marginal[j] * pot.psi[shift(j, ax, ay)]; });
  };
  CompetitorReport rep;
  rep.second_diff = energy(sx, sy) + energy(-sx, -sy) - 2.0 * energy(0, 0);

  // Nonlinear competitor at flow time t = |v|.
  const double t = std::hypot(v[0], v[1]);
  std::vector<double> phit(nv), psit(nv);
  if (t > 0.0) {
    for (int i = 0; i < nv; ++i) {
      const int is = shift(i, sx, sy);
      phit[i] = pot.phi[i] + t * f.f_prime((pot.phi[is] - pot.phi[i]) / t);
      psit[i] = pot.psi[i] + t * f.f_prime((pot.psi[is] - pot.psi[i]) / t);
    }
  } else {
    phit = pot.phi;
    psit = pot.psi;
  }
  double resid = 0.0;
  for (const auto& e : plan.entries)
    resid = std::max(resid, phit[e.i] + psit[e.j] - C(e.i, e.j));
  rep.feasibility_residual = std::max(0.0, resid);

  double mono = 0.0;
  for (int a = -30; a <= 30; ++a)
    for (int b = -30; b <= 30; ++b) {
      if (a + b > 0) continue;
      const double ta = a / 10.0, tb = b / 10.0;
      mono = std::max(mono, f.f_prime(ta) + f.f_prime(tb));
    }
  rep.mono_residual = std::max(0.0, mono);
  return rep;
}

std::vector<double> difference_quotient_l1(const Manifold& T, const std::vector<double>& field,
                                           int axis, const std::vector<double>& t_ladder,
                                           const std::vector<double>& analytic_deriv) {
  require_torus(T, "difference_quotient_l1");
  if (axis != 0 && axis != 1)
    throw ArgumentError("difference_quotient_l1: axis must be 0 or 1");
  if (field.size() != analytic_deriv.size() ||
      static_cast<int>(field.size()) != T.n_vertices())
    throw ArgumentError("difference_quotient_l1: size mismatch");
  const double h = axis == 0 ? T.hx() : T.hy();
  const int nx = T.nx, ny = T.ny;
  std::vector<double> errs;
  errs.reserve(t_ladder.size());
  for (double t : t_ladder) {
    const double r = t / h;
    const long s = std::lround(r);
    if (s == 0 || std::abs(r - s) > 1e-9 * std::max(1.0, std::abs(r)))
      throw ArgumentError("difference_quotient_l1: t = " + std::to_string(t) +
                          " is not a nonzero lattice multiple of the spacing");
    errs.push_back(chunked_sum(T.n_vertices(), [&](int i) {
      const auto [ix, iy] = T.grid_coords(i);
      const int j = axis == 0
                        ? T.grid_index(static_cast<int>(((ix + s) % nx + nx) % nx), iy)
                        : T.grid_index(ix, static_cast<int>(((iy + s) % ny + ny) % ny));
      const double q = (field[j] - field[i]) / t;
      return T.vertex_weights[i] * std::abs(q - analytic_deriv[i]);
    }));
  }
  return errs;
}

}  // namespace fgi
