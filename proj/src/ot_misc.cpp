#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fgi/harness.hpp"
#include "fgi/ot.hpp"
#include "fgi/parallel.hpp"

namespace fgi {

double DensityField::total_mass() const {
  const auto& w = M->vertex_weights;
  const auto& r = rho;
  return chunked_sum(static_cast<int>(r.size()),
                     [&](int i) { return w[i] * r[i]; });
}

double DensityField::min_density() const {
  double lo = std::numeric_limits<double>::infinity();
  for (double v : rho) lo = std::min(lo, v);
  return lo;
}

void DensityField::validate(const char* what) const {
  if (!M) throw ArgumentError(std::string(what) + ": density has no manifold");
  if (static_cast<int>(rho.size()) != M->n_vertices())
    throw ArgumentError(std::string(what) + ": density size " + std::to_string(rho.size()) +
                        " does not match vertex count " + std::to_string(M->n_vertices()));
  for (std::size_t i = 0; i < rho.size(); ++i)
    if (!(rho[i] >= 0.0) || !std::isfinite(rho[i]))
      throw ArgumentError(std::string(what) + ": negative or non-finite density at vertex " +
                          std::to_string(i));
}

DensityField make_density(const Manifold& M, std::vector<double> rho, bool normalize) {
  DensityField d;
  d.M = &M;
  d.rho = std::move(rho);
  d.validate("make_density");
  if (normalize) {
    const double tot = d.total_mass();
    if (tot <= 0.0) throw ArgumentError("make_density: density has zero total mass");
    for (double& v : d.rho) v /= tot;
  }
  return d;
}

void TransportPlan::rebuild_marginals() {
  row_marginal.assign(n_rows, 0.0);
  col_marginal.assign(n_cols, 0.0);
  for (const Entry& e : entries) {
    row_marginal[e.i] += e.mass;
    col_marginal[e.j] += e.mass;
  }
}

double TransportPlan::cost_against(const DenseMatrix& C) const {
  return chunked_sum(static_cast<int>(entries.size()), [&](int k) {
    const Entry& e = entries[k];
    return e.mass * C(e.i, e.j);
  });
}

double TransportPlan::total_mass() const {
  return chunked_sum(static_cast<int>(entries.size()),
                     [&](int k) { return entries[k].mass; });
}

std::vector<double> c_transform(const std::vector<double>& chi, const DenseMatrix& C) {
  if (static_cast<int>(chi.size()) != C.rows)
    throw ArgumentError("c_transform: potential size does not match cost rows");
  std::vector<double> out(C.cols);
  for (int j = 0; j < C.cols; ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < C.rows; ++i) best = std::min(best, C(i, j) - chi[i]);
    out[j] = best;
  }
  return out;
}

std::vector<double> c_transform_rows(const std::vector<double>& chi, const DenseMatrix& C) {
  if (static_cast<int>(chi.size()) != C.cols)
    throw ArgumentError("c_transform_rows: potential size does not match cost cols");
  std::vector<double> out(C.rows);
  for (int i = 0; i < C.rows; ++i) {
    double best = std::numeric_limits<double>::infinity();
    const double* row = C.row(i);
    for (int j = 0; j < C.cols; ++j) best = std::min(best, row[j] - chi[j]);
    out[i] = best;
  }
  return out;
}

double duality_gap(const TransportPlan& plan, const PotentialPair& pot, const DenseMatrix& C,
                   const DensityField& mu, const DensityField& nu) {
  // Dual feasibility first: phi_i + psi_j <= C_ij up to 1e-9 everywhere.
  double worst = 0.0;
  int wi = -1, wj = -1;
  for (int i = 0; i < C.rows; ++i) {
    const double* row = C.row(i);
    const double phi = pot.phi[i];
    for (int j = 0; j < C.cols; ++j) {
      const double v = phi + pot.psi[j] - row[j];
      if (v > worst) {
        worst = v;
        wi = i;
        wj = j;
      }
    }
  }
  if (worst > 1e-9)
    throw ArgumentError("duality_gap: potentials infeasible at pair (" + std::to_string(wi) +
                        "," + std::to_string(wj) + ") with violation " + std::to_string(worst));
  const double primal = plan.cost_against(C);
  const int nv = static_cast<int>(pot.phi.size());
  const double dual =
      chunked_sum(nv, [&](int i) { return pot.phi[i] * mu.mass(i); }) +
      chunked_sum(static_cast<int>(pot.psi.size()),
                  [&](int j) { return pot.psi[j] * nu.mass(j); });
  return primal - dual;
}

double support_slackness(const TransportPlan& plan, const PotentialPair& pot,
                         const DenseMatrix& C) {
  double worst = 0.0;
  for (const TransportPlan::Entry& e : plan.entries) {
    if (e.mass <= 1e-12) continue;
    const double v = std::abs(C(e.i, e.j) - pot.phi[e.i] - pot.psi[e.j]);
    worst = std::max(worst, v);
  }
  return worst;
}

std::vector<Vec3> recover_map(const PotentialPair& pot, const Manifold& M, const CostSpec& c,
                              const DensityField& mu) {
  if (!c.nonlinear())
    throw ArgumentError("recover_map: cost derivative must be invertible (nonlinear h)");
  const TangentField grad = vertex_gradient(M, pot.phi);
  const double lambda_top = c.hprime(M.diam);
  std::vector<Vec3> out(M.n_vertices());
  for (int i = 0; i < M.n_vertices(); ++i) {
    out[i] = M.vertices[i];
    if (mu.rho[i] <= 0.0) continue;
    const double gn = grad.norm(i);
    if (gn <= 1e-10) continue;
    if (gn > lambda_top * (1.0 + 1e-9))
      throw RangeError("recover_map: gradient norm " + std::to_string(gn) +
                       " exceeds the cost derivative range " + std::to_string(lambda_top) +
                       " at vertex " + std::to_string(i) +
                       " (discretization artifact)");
    const double step = c.lambda_inv(gn);
    out[i] = M.exp_map(M.vertices[i], (-step / gn) * grad.ambient(i));
  }
  return out;
}

int default_halvings(const DenseMatrix& C, double eps_final) {
  const double eps0 = C.max_value() / 4.0;
  if (eps_final >= eps0) return 0;
  int h = 0;
  double e = eps0;
  while (e / 2.0 > eps_final && h < 60) {
    e /= 2.0;
    ++h;
  }
  return h;
}

}  // namespace fgi
