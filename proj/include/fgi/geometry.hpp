#pragma once

// Geometry lab: parallel transport along geodesic paths, first and second
// variation of arc length with a finite-difference cross-check, interpolated
// frames between endpoint bases, and randomized curvature-algebra bounds.

#include <array>
#include <vector>

#include "fgi/manifold.hpp"

namespace fgi {

// Tangent field along a path, stored as coefficients in the per-sample
// parallel frame {tangent, normals2}. Coefficient derivatives therefore equal
// covariant derivatives along the path.
struct VariationField {
  const GeodesicPath* P = nullptr;
  std::vector<std::array<double, 2>> coeff;

  Vec3 ambient(int k) const {
    return coeff[k][0] * P->tangents[k] + coeff[k][1] * P->normals2[k];
  }
  int n_samples() const { return static_cast<int>(coeff.size()); }
};

// Constant-coefficient (parallel) field along P.
VariationField parallel_field(const GeodesicPath& P, double along, double perp);
// Field from explicit per-sample ambient vectors (projected onto the frame;
// rejects vectors that are not tangent within 1e-9 relative).
VariationField variation_from_ambient(const GeodesicPath& P, const std::vector<Vec3>& vecs);

// Two tangent vectors per sample, in path-frame coefficients; sigma is the
// measured worst orthonormality defect across samples.
struct FrameField {
  const GeodesicPath* P = nullptr;
  std::vector<std::array<std::array<double, 2>, 2>> coeff;  // [sample][vector]
  double sigma = 0.0;

  Vec3 ambient(int k, int which) const {
    return coeff[k][which][0] * P->tangents[k] + coeff[k][which][1] * P->normals2[k];
  }
};

// Transport of a start-tangent vector to the end of the path. Sphere and
// torus use the analytic parallel frame; generic meshes use Schild's ladder
// over the samples.
Vec3 parallel_transport(const GeodesicPath& P, const Vec3& v_start);

// g(xi, gamma_dot) evaluated at the endpoints (end minus start).
double first_variation(const GeodesicPath& P, const VariationField& xi);

// -(first variation)^2 + integral of ||D_t xi||^2 - g(R(xi,T)T, xi) dt by
// trapezoid; the curvature term uses the constant-curvature formula.
double second_variation_upper(const GeodesicPath& P, const VariationField& xi);

struct FdVariation {
  double first_fd = 0.0;
  double second_fd = 0.0;
};

// Lengths of exp-perturbed polylines gamma_{+s}, gamma_{-s}; h = nullptr
// means the identity (raw length).
FdVariation finite_difference_length_variation(const GeodesicPath& P, const VariationField& xi,
                                               double s, const CostSpec* h = nullptr);

// Smoothstep blend between the transports of endpoint frames V and W.
FrameField interpolated_frame(const GeodesicPath& P, const std::array<Vec3, 2>& V,
                              const std::array<Vec3, 2>& W);

struct CurvatureCheck {
  std::string check;
  long trials = 0;
  double max_ratio = 0.0;  // observed / bound, worst case
  double bound = 0.0;      // bound constant (7*Ktilde resp. 4n^2*sigma*||A|| normalizer)
  bool pass = false;
};

struct CurvatureReport {
  CurvatureCheck riemann;
  CurvatureCheck trace;
  std::uint64_t seed = 0;
};

// Randomized verification of the curvature-algebra bounds at seeded vertices:
// |g(R(u,v)w,z)| <= 7*Ktilde*prod(norms) and the near-orthonormal trace bound
// |tr A - sum <A X_i, X_i>| <= 4 n^2 sigma ||A||, n = 2. sigma_target must
// stay below 1/(2n).
CurvatureReport curvature_algebra_checks(const Manifold& M, long trials, std::uint64_t seed,
                                         double sigma_target = 0.2);

}  // namespace fgi
