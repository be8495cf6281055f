#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fgi/manifold.hpp"

namespace fgi {

// Per-vertex probability density with respect to the vertex weights.
struct DensityField {
  const Manifold* M = nullptr;
  std::vector<double> rho;

  double mass(int i) const { return rho[i] * M->vertex_weights[i]; }
  double total_mass() const;
  double min_density() const;
  void validate(const char* what) const;  // nonnegative, unit mass within 1e-12
};

// values are densities w.r.t. vertex weights; normalize rescales to unit mass
DensityField make_density(const Manifold& M, std::vector<double> values, bool normalize = true);

struct TransportPlan {
  struct Entry {
    int i, j;
    double mass;
  };
  int n_rows = 0, n_cols = 0;
  std::vector<Entry> entries;  // sorted by (i, j), strictly positive masses
  std::vector<double> row_marginal, col_marginal;

  void rebuild_marginals();
  double cost_against(const DenseMatrix& C) const;
  double total_mass() const;
};

struct PotentialPair {
  std::vector<double> phi, psi;
  int anchor = 0;  // psi[anchor] == 0 by construction
};

struct ExactResult {
  TransportPlan plan;
  PotentialPair potentials;
  double cost = 0.0;
  long pivots = 0;
};

// Transportation simplex (north-west-corner start, block pricing with a
// Bland's-rule anti-cycling fallback). Deterministic; duals from the final
// basis, anchored at the smallest-index target with mass.
ExactResult solve_exact(const DensityField& mu, const DensityField& nu, const DenseMatrix& C);

// Same solver on a capped problem: sources carry capacities instead of exact
// supplies (realized with a zero-cost overflow column). Returns the plan on
// the real targets plus duals and the duality gap of the flow LP.
struct CappedResult {
  TransportPlan plan;
  PotentialPair potentials;
  double cost = 0.0;
  double gap = 0.0;
};
CappedResult solve_capped(const std::vector<double>& supply_caps,
                          const std::vector<double>& demands, const DenseMatrix& C);

struct SinkhornState {
  std::vector<double> f, g;  // log-domain potentials on the active sets
};

struct SinkhornResult {
  DenseMatrix plan;  // rounded to the transport polytope; empty if !want_plan
  PotentialPair potentials;
  double primal_cost = 0.0;  // cost of the rounded plan
  double eps = 0.0;
  long iterations = 0;
};

// Log-domain Sinkhorn with epsilon-halving from max(C)/4 down to eps_final.
// `halvings` counts the levels before the final one (0 = run at eps_final
// directly). Optional warm state skips the ladder when already near a fixed
// point for eps_final.
SinkhornResult sinkhorn(const DensityField& mu, const DensityField& nu, const DenseMatrix& C,
                        double eps_final, int halvings, const SinkhornState* warm = nullptr,
                        SinkhornState* state_out = nullptr, bool want_plan = true);

int default_halvings(const DenseMatrix& C, double eps_final);

// (chi^c)_j = min_i (C_ij - chi_i)
std::vector<double> c_transform(const std::vector<double>& chi, const DenseMatrix& C);
// row-side transform: result_i = min_j (C_ij - chi_j)
std::vector<double> c_transform_rows(const std::vector<double>& chi, const DenseMatrix& C);

double duality_gap(const TransportPlan& plan, const PotentialPair& pot, const DenseMatrix& C,
                   const DensityField& mu, const DensityField& nu);

double support_slackness(const TransportPlan& plan, const PotentialPair& pot,
                         const DenseMatrix& C);

// T(x) = exp_x(lambda^{-1}(-grad phi)); identity where the gradient vanishes
std::vector<Vec3> recover_map(const PotentialPair& pot, const Manifold& M, const CostSpec& c,
                              const DensityField& mu);

}  // namespace fgi
