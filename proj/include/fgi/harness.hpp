#pragma once

// Five-gradients harness: discrete vertex gradients, the isotropic action of
// an increasing convex profile on tangent vectors, both sides of the
// inequality, its directional variant on the torus, and the proof-mechanism
// competitor diagnostics.

#include <array>
#include <string>
#include <vector>

#include "fgi/manifold.hpp"
#include "fgi/ot.hpp"

namespace fgi {

// Increasing convex profile ell with ell(0) = 0 and nondecreasing ell'.
struct EllSpec {
  enum class Family { Linear, Power, Quadratic, ShiftedQuadratic };
  Family family = Family::Quadratic;
  double p = 2.0;    // Power exponent (> 1)
  double t0 = 0.5;   // ShiftedQuadratic activation threshold

  double ell(double t) const;
  double ell_prime(double t) const;
  // Odd extension: f(t) = ell(|t|), f'(t) = sign(t) ell'(|t|), f'(0) = 0.
  double f_prime(double t) const;
  const char* family_name() const;

  static EllSpec linear() { return {Family::Linear, 2.0, 0.5}; }
  static EllSpec quadratic() { return {Family::Quadratic, 2.0, 0.5}; }
  static EllSpec power(double p);
  static EllSpec shifted_quadratic(double t0);
};

// Per-vertex tangent vectors stored as coefficients in the vertex frames.
struct TangentField {
  const Manifold* M = nullptr;
  std::vector<std::array<double, 2>> coeff;

  Vec3 ambient(int i) const {
    return coeff[i][0] * M->frames[i][0] + coeff[i][1] * M->frames[i][1];
  }
  double norm(int i) const;
  double dot(const TangentField& other, int i) const;
  int n_vertices() const { return static_cast<int>(coeff.size()); }
};

// Least-squares 1-ring gradient (exact central differences on the torus
// grid, which is what makes the summed-directional identity exact).
TangentField vertex_gradient(const Manifold& M, const std::vector<double>& field);

// Isotropic action: v -> ell'(\|v\|) v / \|v\|, zero at zero.
std::array<double, 2> ell_prime_vec(const EllSpec& l, const std::array<double, 2>& v);

enum class FgiSolver { Exact, Sinkhorn };

struct CutLocusNote {
  int i = -1, j = -1;
  double mass = 0.0;
};

struct FgiReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // lhs - rhs
  int n_vertices = 0;
  std::string cost_family;
  std::string ell_family;
  std::string solver;
  double K = 0.0;
  double excluded_mass = 0.0;  // plan mass on cut-locus pairs, dropped from rhs
  std::vector<CutLocusNote> cut_locus;
};

FgiReport check_five_gradients(const Manifold& M, const DensityField& mu,
                               const DensityField& nu, const CostSpec& c, const EllSpec& l,
                               FgiSolver solver, double sinkhorn_eps = 1e-3);
// Same evaluation against an already-solved plan/potential pair.
FgiReport five_gradients_from_solution(const Manifold& M, const DensityField& mu,
                                       const DensityField& nu, const CostSpec& c,
                                       const EllSpec& l, const TransportPlan& plan,
                                       const PotentialPair& pot, const char* solver_name);

// Directional inequality on the torus: X is the periodic central difference
// along coordinate axis 0 or 1; returns
//   -sum_i w_i [f'(X phi)(i) X mu(i) + f'(X psi)(i) X nu(i)],
// which the continuum statement bounds by 0 from above.
double directional_fgi(const Manifold& T, int axis, const EllSpec& f, const DensityField& mu,
                       const DensityField& nu, const CostSpec& h, FgiSolver solver,
                       double sinkhorn_eps = 1e-3);
double directional_value_from_potentials(const Manifold& T, int axis, const EllSpec& f,
                                         const DensityField& mu, const DensityField& nu,
                                         const PotentialPair& pot);

struct CompetitorReport {
  double second_diff = 0.0;           // E(v) + E(-v) - 2E(0), <= 0 up to 1e-10
  double feasibility_residual = 0.0;  // max over supp gamma of (phit+psit-C)_+
  double mono_residual = 0.0;         // max sampled (f'(t)+f'(s))_+ over t+s <= 0
};

// Shift competitors built from optimal potentials on the torus; v must be a
// lattice translation (integer multiples of the grid spacings).
CompetitorReport competitor_defect(const Manifold& T, const PotentialPair& pot,
                                   const TransportPlan& plan, const DenseMatrix& C,
                                   const std::array<double, 2>& v, const EllSpec& f);

// L1 error of the flow difference quotient (f(x + t X) - f(x))/t against the
// sampled analytic derivative, for each t in the ladder (t = integer multiple
// of the grid spacing).
std::vector<double> difference_quotient_l1(const Manifold& T, const std::vector<double>& field,
                                           int axis, const std::vector<double>& t_ladder,
                                           const std::vector<double>& analytic_deriv);

}  // namespace fgi
