#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "fgi/experiments.hpp"
#include "fgi/parallel.hpp"

namespace fgi {

namespace {

double bv_of_vector(const Manifold& M, const std::vector<double>& field) {
  const TangentField g = vertex_gradient(M, field);
  return chunked_sum(M.n_vertices(),
                     [&](int i) { return M.vertex_weights[i] * g.norm(i); });
}

}  // namespace

double bv_norm(const Manifold& M, const DensityField& rho) {
  rho.validate("bv_norm");
  return bv_of_vector(M, rho.rho);
}

ProjectionResult wasserstein_projection(const DensityField& nu, const std::vector<double>& f,
                                        const CostSpec& c) {
  nu.validate("nu");
  const Manifold& M = *nu.M;
  if (static_cast<int>(f.size()) != M.n_vertices())
    throw ArgumentError("wasserstein_projection: cap size does not match vertex count");
  const int nv = M.n_vertices();
  std::vector<double> caps(nv), demands(nv);
  double cap_total = 0.0;
  for (int i = 0; i < nv; ++i) {
    if (!(f[i] >= 0.0))
      throw ArgumentError("wasserstein_projection: negative cap at vertex " +
                          std::to_string(i));
    caps[i] = f[i] * M.vertex_weights[i];
    cap_total += caps[i];
    demands[i] = nu.mass(i);
  }
  if (cap_total < 1.0 - 1e-12)
    throw InfeasibleError("wasserstein_projection: cap mass " + std::to_string(cap_total) +
                          " is below 1; no admissible density");
  const DenseMatrix C = cost_matrix(M, c);
  CappedResult flow = solve_capped(caps, demands, C);

  ProjectionResult out;
  out.plan = std::move(flow.plan);
  out.potentials = std::move(flow.potentials);
  out.cost = flow.cost;
  out.gap = flow.gap;
  out.mu_bar.M = &M;
  out.mu_bar.rho.assign(nv, 0.0);
  for (int i = 0; i < nv; ++i)
    out.mu_bar.rho[i] = out.plan.row_marginal[i] / M.vertex_weights[i];
  return out;
}

double PenaltySpec::eta(double t) const {
  switch (family) {
    case PenaltyFamily::Entropy:
      return weight * (t > 0.0 ? t * std::log(t) : 0.0);
    case PenaltyFamily::Quadratic:
      return weight * 0.5 * t * t;
  }
  return 0.0;
}

double PenaltySpec::eta_prime(double t) const {
  switch (family) {
    case PenaltyFamily::Entropy:
      return weight * (std::log(std::max(t, 1e-300)) + 1.0);
    case PenaltyFamily::Quadratic:
      return weight * t;
  }
  return 0.0;
}

RegularizedResult regularized_min(const DensityField& nu, const PenaltySpec& eta,
                                  const CostSpec& c, const RegularizedOptions& opt) {
  nu.validate("nu");
  const Manifold& M = *nu.M;
  const int nv = M.n_vertices();
  const DenseMatrix C = cost_matrix(M, c);

  SinkhornState warm;
  bool have_warm = false;
  // Transport cost and anchored first-variation potential for a candidate.
  auto transport = [&](const DensityField& mu, std::vector<double>* phi_out) {
    if (opt.use_sinkhorn) {
      SinkhornState next;
      const SinkhornResult r =
          sinkhorn(mu, nu, C, opt.sinkhorn_eps, have_warm ? 0 : default_halvings(C, opt.sinkhorn_eps),
                   have_warm ? &warm : nullptr, &next, false);
      warm = std::move(next);
      have_warm = true;
      if (phi_out) *phi_out = r.potentials.phi;
      return r.primal_cost;
    }
    const ExactResult r = solve_exact(mu, nu, C);
    if (phi_out) *phi_out = r.potentials.phi;
    return r.cost;
  };
  auto penalty = [&](const DensityField& mu) {
    return chunked_sum(nv, [&](int i) { return M.vertex_weights[i] * eta.eta(mu.rho[i]); });
  };

  DensityField mu;
  mu.M = &M;
  mu.rho.assign(nv, 1.0 / M.mesh_area);

  RegularizedResult out;
  out.mu_bar.M = &M;
  std::vector<double> phi;
  double energy = transport(mu, &phi) + penalty(mu);
  out.energy_trace.push_back(energy);

  for (long k = 1; k <= opt.max_iterations; ++k) {
    ++out.iterations;
    // Mirror-descent direction: first variation plus penalty derivative.
    std::vector<double> grad(nv);
    for (int i = 0; i < nv; ++i) grad[i] = phi[i] + eta.eta_prime(mu.rho[i]);
    double g_max = 0.0, g_min = grad[0];
    for (double g : grad) {
      g_max = std::max(g_max, std::abs(g));
      g_min = std::min(g_min, g);
    }
    if (g_max == 0.0) break;

    double step = opt.step0 / std::sqrt(static_cast<double>(k));
    bool accepted = false;
    for (int halve = 0; halve < 20 && !accepted; ++halve, step *= 0.5) {
      DensityField cand;
      cand.M = &M;
      cand.rho.resize(nv);
      double total = 0.0;
      for (int i = 0; i < nv; ++i) {
        // Shifting by the minimum leaves the normalized update unchanged and
        // keeps the exponentials in [0, 1] for arbitrarily steep penalties.
        const double m = mu.mass(i) * std::exp(-step * (grad[i] - g_min));
        cand.rho[i] = m;
        total += m;
      }
      for (int i = 0; i < nv; ++i) cand.rho[i] /= total * M.vertex_weights[i];
      std::vector<double> cand_phi;
      const double cand_energy = transport(cand, &cand_phi) + penalty(cand);
      if (cand_energy <= energy) {
        const double decrease = (energy - cand_energy) / std::max(1.0, std::abs(energy));
        mu = std::move(cand);
        phi = std::move(cand_phi);
        energy = cand_energy;
        out.energy_trace.push_back(energy);
        accepted = true;
        if (decrease < opt.tol) {
          out.mu_bar = std::move(mu);
          return out;
        }
      }
    }
    if (!accepted) {
      // No descent direction at any step length: stationary for this scheme.
      out.mu_bar = std::move(mu);
      return out;
    }
  }
  std::ostringstream trace;
  trace << "energy trace (last 10):";
  const std::size_t from =
      out.energy_trace.size() > 10 ? out.energy_trace.size() - 10 : std::size_t{0};
  for (std::size_t i = from; i < out.energy_trace.size(); ++i)
    trace << " " << out.energy_trace[i];
  throw ConvergenceError("regularized_min hit the iteration cap before the relative energy "
                         "decrease fell below tolerance",
                         trace.str());
}

namespace {

BvReport assemble_bv_report(const DensityField& mu_bar, const DensityField& nu,
                            double distance_integral, const Manifold& M, BvMode mode,
                            const std::vector<double>* f) {
  if (mode == BvMode::Projection && !f)
    throw ArgumentError("bv_estimate_report: projection mode requires the cap field f");
  BvReport rep;
  rep.n_vertices = M.n_vertices();
  rep.mode = mode == BvMode::Projection ? "projection" : "contraction";
  rep.bv_mu_bar = bv_norm(M, mu_bar);
  rep.bv_nu = bv_norm(M, nu);
  rep.transport_term = M.K * distance_integral;
  if (mode == BvMode::Projection) {
    rep.bv_f = bv_of_vector(M, *f);
    rep.slack = rep.bv_nu + 2.0 * rep.bv_f - rep.bv_mu_bar - rep.transport_term;
  } else {
    rep.slack = rep.bv_nu - rep.bv_mu_bar - rep.transport_term;
  }
  return rep;
}

}  // namespace

BvReport bv_estimate_report(const DensityField& mu_bar, const DensityField& nu,
                            const TransportPlan& plan, const Manifold& M, BvMode mode,
                            const std::vector<double>* f) {
  const double integral = chunked_sum(static_cast<int>(plan.entries.size()), [&](int k) {
    const auto& e = plan.entries[k];
    return e.mass * M.point_distance(e.i, e.j);
  });
  return assemble_bv_report(mu_bar, nu, integral, M, mode, f);
}

BvReport bv_estimate_report_dense(const DensityField& mu_bar, const DensityField& nu,
                                  const DenseMatrix& plan, const Manifold& M, BvMode mode,
                                  const std::vector<double>* f) {
  if (plan.rows != M.n_vertices() || plan.cols != M.n_vertices())
    throw ArgumentError("bv_estimate_report_dense: plan size does not match the mesh");
  const double integral = chunked_sum(plan.rows, [&](int i) {
    const double* row = plan.row(i);
    double s = 0.0;
    for (int j = 0; j < plan.cols; ++j)
      if (row[j] != 0.0) s += row[j] * M.point_distance(i, j);
    return s;
  });
  return assemble_bv_report(mu_bar, nu, integral, M, mode, f);
}

}  // namespace fgi
