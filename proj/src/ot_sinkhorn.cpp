#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "fgi/ot.hpp"
#include "fgi/parallel.hpp"

namespace fgi {

namespace {

constexpr double kLogSumTol = 1e-10;
constexpr long kIterCapPerLevel = 50000;

struct Compact {
  std::vector<int> idx;
  std::vector<double> mass, log_mass;
};

Compact compact_support(const DensityField& d) {
  Compact c;
  const int n = d.M->n_vertices();
  for (int i = 0; i < n; ++i) {
    const double m = d.mass(i);
    if (m > 0.0) {
      c.idx.push_back(i);
      c.mass.push_back(m);
      c.log_mass.push_back(std::log(m));
    }
  }
  return c;
}

// Serial log-sum-exp of a_j = logq[j] + (g[j] - Crow[j]) / eps over one row.
double row_lse(const double* crow, const double* g, const double* logq, int n, double inv_eps) {
  double hi = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j) hi = std::max(hi, logq[j] + (g[j] - crow[j]) * inv_eps);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += std::exp(logq[j] + (g[j] - crow[j]) * inv_eps - hi);
  return hi + std::log(s);
}

}  // namespace

SinkhornResult sinkhorn(const DensityField& mu, const DensityField& nu, const DenseMatrix& C,
                        double eps_final, int halvings, const SinkhornState* warm,
                        SinkhornState* state_out, bool want_plan) {
  if (mu.M != nu.M) throw ArgumentError("sinkhorn: densities live on different manifolds");
  if (!(eps_final > 0.0)) throw ArgumentError("sinkhorn: eps_final must be positive");
  if (halvings < 0) throw ArgumentError("sinkhorn: halving count must be nonnegative");
  mu.validate("mu");
  nu.validate("nu");
  const int nv = mu.M->n_vertices();

  const Compact src = compact_support(mu);
  const Compact tgt = compact_support(nu);
  const int m = static_cast<int>(src.idx.size());
  const int n = static_cast<int>(tgt.idx.size());
  if (m == 0 || n == 0) throw InputError("sinkhorn: empty support");

  // Compact cost and its transpose (the column phase walks columns of the
  // original, which would stride badly).
  DenseMatrix Cc, Ct;
  Cc.rows = m;
  Cc.cols = n;
  Cc.data.resize(static_cast<std::size_t>(m) * n);
  Ct.rows = n;
  Ct.cols = m;
  Ct.data.resize(static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i) {
    const double* row = C.row(src.idx[i]);
    for (int j = 0; j < n; ++j) {
      const double v = row[tgt.idx[j]];
      Cc.data[static_cast<std::size_t>(i) * n + j] = v;
      Ct.data[static_cast<std::size_t>(j) * m + i] = v;
    }
  }

  std::vector<double> f(m, 0.0), g(n, 0.0);
  if (warm && static_cast<int>(warm->f.size()) == nv &&
      static_cast<int>(warm->g.size()) == nv) {
    for (int i = 0; i < m; ++i) f[i] = warm->f[src.idx[i]];
    for (int j = 0; j < n; ++j) g[j] = warm->g[tgt.idx[j]];
  }

  // Epsilon ladder: halvings levels starting at max(C)/4, then eps_final.
  std::vector<double> levels;
  const double eps0 = C.max_value() / 4.0;
  double e = eps0;
  for (int k = 0; k < halvings; ++k) {
    if (e <= eps_final) break;
    levels.push_back(e);
    e /= 2.0;
  }
  levels.push_back(eps_final);

  std::vector<double> f_new(m), g_new(n);
  long total_iters = 0;
  for (double eps : levels) {
    const double inv_eps = 1.0 / eps;
    long it = 0;
    while (true) {
      ++it;
      ++total_iters;
#pragma omp parallel for schedule(static)
      for (int i = 0; i < m; ++i)
        f_new[i] = -eps * row_lse(Cc.row(i), g.data(), tgt.log_mass.data(), n, inv_eps);
      double delta = 0.0;
      for (int i = 0; i < m; ++i) delta = std::max(delta, std::abs(f_new[i] - f[i]));
      std::swap(f, f_new);
#pragma omp parallel for schedule(static)
      for (int j = 0; j < n; ++j)
        g_new[j] = -eps * row_lse(Ct.row(j), f.data(), src.log_mass.data(), m, inv_eps);
      std::swap(g, g_new);
      if (delta * inv_eps <= kLogSumTol) break;
      if (it >= kIterCapPerLevel)
        throw ConvergenceError(
            "sinkhorn failed to converge",
            "eps=" + std::to_string(eps) + " iterations=" + std::to_string(it) +
                " marginal-log-error=" + std::to_string(delta * inv_eps) +
                " target=" + std::to_string(kLogSumTol));
    }
  }

  if (state_out) {
    state_out->f.assign(nv, 0.0);
    state_out->g.assign(nv, 0.0);
    for (int i = 0; i < m; ++i) state_out->f[src.idx[i]] = f[i];
    for (int j = 0; j < n; ++j) state_out->g[tgt.idx[j]] = g[j];
  }

  SinkhornResult out;
  out.eps = eps_final;
  out.iterations = total_iters;
  const double inv_eps = 1.0 / eps_final;

  // Entropic plan on the compact support: x_ij = p_i q_j exp((f+g-C)/eps).
  auto plan_entry = [&](int i, int j) {
    return src.mass[i] * tgt.mass[j] *
           std::exp((f[i] + g[j] - Cc.data[static_cast<std::size_t>(i) * n + j]) * inv_eps);
  };

  if (want_plan) {
    std::vector<double> X(static_cast<std::size_t>(m) * n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) X[static_cast<std::size_t>(i) * n + j] = plan_entry(i, j);

    // Two-sided rounding to the transport polytope: scale rows down to their
    // budget, then columns, then patch the deficit with a rank-one term.
    std::vector<double> rsum(m, 0.0), csum(n, 0.0);
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      const double* row = &X[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) s += row[j];
      rsum[i] = s;
    }
    for (int i = 0; i < m; ++i) {
      const double a = rsum[i] > 0.0 ? std::min(1.0, src.mass[i] / rsum[i]) : 0.0;
      double* row = &X[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) row[j] *= a;
    }
    for (int i = 0; i < m; ++i) {
      const double* row = &X[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) csum[j] += row[j];
    }
    std::vector<double> colscale(n);
    for (int j = 0; j < n; ++j)
      colscale[j] = csum[j] > 0.0 ? std::min(1.0, tgt.mass[j] / csum[j]) : 0.0;
    for (int i = 0; i < m; ++i) {
      double* row = &X[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) row[j] *= colscale[j];
    }
    std::vector<double> err_r(m, 0.0), err_c(n, 0.0);
    double deficit = 0.0;
    std::fill(rsum.begin(), rsum.end(), 0.0);
    std::fill(csum.begin(), csum.end(), 0.0);
    for (int i = 0; i < m; ++i) {
      const double* row = &X[static_cast<std::size_t>(i) * n];
      double s = 0.0;
      for (int j = 0; j < n; ++j) {
        s += row[j];
        csum[j] += row[j];
      }
      rsum[i] = s;
    }
    for (int i = 0; i < m; ++i) {
      err_r[i] = std::max(0.0, src.mass[i] - rsum[i]);
      deficit += err_r[i];
    }
    for (int j = 0; j < n; ++j) err_c[j] = std::max(0.0, tgt.mass[j] - csum[j]);
    if (deficit > 0.0) {
      for (int i = 0; i < m; ++i) {
        const double a = err_r[i] / deficit;
        double* row = &X[static_cast<std::size_t>(i) * n];
        for (int j = 0; j < n; ++j) row[j] += a * err_c[j];
      }
    }

    out.plan.rows = nv;
    out.plan.cols = nv;
    out.plan.data.assign(static_cast<std::size_t>(nv) * nv, 0.0);
    for (int i = 0; i < m; ++i) {
      const double* row = &X[static_cast<std::size_t>(i) * n];
      double* full = &out.plan.data[static_cast<std::size_t>(src.idx[i]) * nv];
      for (int j = 0; j < n; ++j) full[tgt.idx[j]] = row[j];
    }
    out.primal_cost = chunked_sum(m, [&](int i) {
      const double* row = &X[static_cast<std::size_t>(i) * n];
      const double* crow = Cc.row(i);
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += row[j] * crow[j];
      return s;
    });
  } else {
    out.primal_cost = chunked_sum(m, [&](int i) {
      const double* crow = Cc.row(i);
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += plan_entry(i, j) * crow[j];
      return s;
    });
  }

  // Potentials on the full vertex set: scatter, extend by c-transform to the
  // zero-mass vertices, shift into feasibility, anchor psi at the smallest
  // target with mass.
  out.potentials.phi.assign(nv, 0.0);
  out.potentials.psi.assign(nv, 0.0);
  std::vector<char> sa(nv, 0), ta(nv, 0);
  for (int i = 0; i < m; ++i) {
    out.potentials.phi[src.idx[i]] = f[i];
    sa[src.idx[i]] = 1;
  }
  for (int j = 0; j < n; ++j) {
    out.potentials.psi[tgt.idx[j]] = g[j];
    ta[tgt.idx[j]] = 1;
  }
  for (int i = 0; i < nv; ++i) {
    if (sa[i]) continue;
    double best = std::numeric_limits<double>::infinity();
    const double* row = C.row(i);
    for (int j = 0; j < n; ++j)
      best = std::min(best, row[tgt.idx[j]] - out.potentials.psi[tgt.idx[j]]);
    out.potentials.phi[i] = best;
  }
  for (int j = 0; j < nv; ++j) {
    if (ta[j]) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < nv; ++i) best = std::min(best, C(i, j) - out.potentials.phi[i]);
    out.potentials.psi[j] = best;
  }
  double violation = 0.0;
  for (int i = 0; i < nv; ++i) {
    const double* row = C.row(i);
    const double phi = out.potentials.phi[i];
    for (int j = 0; j < nv; ++j)
      violation = std::max(violation, phi + out.potentials.psi[j] - row[j]);
  }
  if (violation > 0.0)
    for (double& v : out.potentials.phi) v -= violation;
  const int anchor = tgt.idx[0];
  const double shift = out.potentials.psi[anchor];
  for (double& v : out.potentials.psi) v -= shift;
  for (double& v : out.potentials.phi) v += shift;
  out.potentials.anchor = anchor;
  return out;
}

}  // namespace fgi
