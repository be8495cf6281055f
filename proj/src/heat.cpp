#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "fgi/experiments.hpp"
#include "fgi/parallel.hpp"

namespace fgi {

struct HeatOperator::Impl {
  Eigen::SparseMatrix<double> stiffness;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
};

HeatOperator::~HeatOperator() = default;
HeatOperator::HeatOperator(HeatOperator&&) noexcept = default;
HeatOperator& HeatOperator::operator=(HeatOperator&&) noexcept = default;

HeatOperator::HeatOperator(const Manifold& M, double dt)
    : impl_(new Impl), M_(&M), dt_(dt) {
  if (!(dt > 0.0)) throw ArgumentError("HeatOperator: dt must be positive");
  const int nv = M.n_vertices();

  // Cotangent weights accumulated per off-diagonal pair; the diagonal is set
  // to minus the row sum afterwards so rows sum to zero exactly.
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(M.triangles.size() * 12);
  std::vector<double> diag(nv, 0.0);
  auto add_pair = [&](int a, int b, double w) {
    trips.emplace_back(a, b, -w);
    trips.emplace_back(b, a, -w);
    diag[a] += w;
    diag[b] += w;
  };
  for (const auto& tri : M.triangles) {
    for (int corner = 0; corner < 3; ++corner) {
      const int ia = tri[corner], ib = tri[(corner + 1) % 3], ic = tri[(corner + 2) % 3];
      const Vec3 u = M.vertices[ib] - M.vertices[ia];
      const Vec3 v = M.vertices[ic] - M.vertices[ia];
      const double cross = u.cross(v).norm();
      if (cross <= 0.0) throw MeshQualityError("HeatOperator: degenerate triangle");
      const double cot = u.dot(v) / cross;
      add_pair(ib, ic, 0.5 * cot);
    }
  }
  for (int i = 0; i < nv; ++i) trips.emplace_back(i, i, diag[i]);
  impl_->stiffness.resize(nv, nv);
  impl_->stiffness.setFromTriplets(trips.begin(), trips.end());

  Eigen::SparseMatrix<double> system = impl_->stiffness * dt;
  for (int i = 0; i < nv; ++i) system.coeffRef(i, i) += M.vertex_weights[i];
  impl_->solver.compute(system);
  if (impl_->solver.info() != Eigen::Success)
    throw NumericalError("HeatOperator: factorization of the implicit system failed");
}

double HeatOperator::stiffness_row_sum_max() const {
  const auto& S = impl_->stiffness;
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(S.rows());
  return (S * ones).cwiseAbs().maxCoeff();
}

DensityField HeatOperator::step(const DensityField& rho, double* clamp_log) const {
  rho.validate("heat_step");
  if (rho.M != M_) throw ArgumentError("heat_step: density from a different manifold");
  const int nv = M_->n_vertices();
  Eigen::VectorXd rhs(nv);
  for (int i = 0; i < nv; ++i) rhs[i] = M_->vertex_weights[i] * rho.rho[i];
  const double mass_in = rhs.sum();
  Eigen::VectorXd next = impl_->solver.solve(rhs);
  if (impl_->solver.info() != Eigen::Success)
    throw NumericalError("heat_step: linear solve failed");

  DensityField out;
  out.M = M_;
  out.rho.resize(nv);
  double clamped = 0.0, mass_out = 0.0;
  for (int i = 0; i < nv; ++i) {
    double v = next[i];
    if (v < 0.0) {
      clamped += M_->vertex_weights[i] * (-v);
      v = 0.0;
    }
    out.rho[i] = v;
    mass_out += M_->vertex_weights[i] * v;
  }
  if (clamp_log) *clamp_log += clamped;
  if (mass_out <= 0.0) throw NumericalError("heat_step: density vanished after clamping");
  const double scale = mass_in / mass_out;
  for (double& v : out.rho) v *= scale;
  return out;
}

DensityField heat_step(const HeatOperator& H, const DensityField& rho, double* clamp_log) {
  return H.step(rho, clamp_log);
}

std::vector<ContractionPoint> contraction_experiment(const Manifold& M, const DensityField& mu0,
                                                     const DensityField& nu0, double t_final,
                                                     double dt, const CostSpec& c) {
  if (c.family != CostSpec::Family::Quadratic)
    throw ArgumentError("contraction_experiment: quadratic cost required (W2 convention)");
  if (!(t_final > 0.0) || !(dt > 0.0) || t_final < dt)
    throw ArgumentError("contraction_experiment: need 0 < dt <= t_final");
  const DenseMatrix C = cost_matrix(M, c);
  const HeatOperator H(M, dt);

  // Warm-up step so both densities are strictly positive.
  DensityField mu = H.step(mu0);
  DensityField nu = H.step(nu0);

  const int steps = static_cast<int>(std::round(t_final / dt));
  std::vector<ContractionPoint> curve;
  curve.reserve(steps + 1);
  auto w2 = [&](const DensityField& a, const DensityField& b) {
    int step_index = static_cast<int>(curve.size());
    try {
      return std::sqrt(2.0 * solve_exact(a, b, C).cost);
    } catch (const SolverError& err) {
      throw SolverError("contraction_experiment: step " + std::to_string(step_index) + ": " +
                        err.what());
    }
  };
  const double w2_0 = w2(mu, nu);
  curve.push_back({0.0, w2_0, w2_0});
  for (int k = 1; k <= steps; ++k) {
    mu = H.step(mu);
    nu = H.step(nu);
    const double t = k * dt;
    curve.push_back({t, w2(mu, nu), std::exp(-M.K * t) * w2_0});
  }
  return curve;
}

}  // namespace fgi
