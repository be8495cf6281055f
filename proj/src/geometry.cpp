#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fgi/geometry.hpp"
#include "fgi/rng.hpp"

namespace fgi {

namespace {

// Closest point on triangle abc to p (standard region-walk construction).
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

struct SurfaceHit {
  Vec3 point;
  Vec3 face_normal;
};

SurfaceHit project_to_mesh(const Manifold& M, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  SurfaceHit hit{p, Vec3(0, 0, 1)};
  for (const auto& tri : M.triangles) {
    const Vec3& a = M.vertices[tri[0]];
    const Vec3& b = M.vertices[tri[1]];
    const Vec3& c = M.vertices[tri[2]];
    const Vec3 q = closest_on_triangle(p, a, b, c);
    const double d2 = (q - p).squaredNorm();
    if (d2 < best) {
      best = d2;
      hit.point = q;
      Vec3 n = (b - a).cross(c - a);
      const double nn = n.norm();
      hit.face_normal = nn > 0.0 ? Vec3(n / nn) : Vec3(0, 0, 1);
    }
  }
  return hit;
}

// Exponential map at an arbitrary surface point (not only mesh vertices).
Vec3 ambient_exp(const Manifold& M, const Vec3& p, const Vec3& v) {
  switch (M.kind) {
    case ManifoldKind::Sphere: {
      const double r = M.radius;
      const double vn = v.norm();
      if (vn == 0.0) return p;
      const double theta = vn / r;
      const Vec3 u = v / vn;
      return std::cos(theta) * p + std::sin(theta) * r * u;
    }
    case ManifoldKind::FlatTorus:
      return M.wrap(p + v);
    case ManifoldKind::GenericMesh:
      return project_to_mesh(M, p + v).point;
  }
  return p + v;
}

double ambient_dist(const Manifold& M, const Vec3& p, const Vec3& q) {
  switch (M.kind) {
    case ManifoldKind::Sphere: {
      const double r = M.radius;
      const double c = std::clamp(p.dot(q) / (r * r), -1.0, 1.0);
      return r * std::acos(c);
    }
    case ManifoldKind::FlatTorus: {
      double dx = std::abs(p.x() - q.x()), dy = std::abs(p.y() - q.y());
      dx = std::min(dx, M.Lx - dx);
      dy = std::min(dy, M.Ly - dy);
      return std::hypot(dx, dy);
    }
    case ManifoldKind::GenericMesh:
      return (p - q).norm();
  }
  return (p - q).norm();
}

double polyline_length(const Manifold& M, const std::vector<Vec3>& pts) {
  double L = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) L += ambient_dist(M, pts[k - 1], pts[k]);
  return L;
}

}  // namespace

VariationField parallel_field(const GeodesicPath& P, double along, double perp) {
  VariationField xi;
  xi.P = &P;
  xi.coeff.assign(P.samples.size(), {along, perp});
  return xi;
}

VariationField variation_from_ambient(const GeodesicPath& P, const std::vector<Vec3>& vecs) {
  if (vecs.size() != P.samples.size())
    throw ArgumentError("variation_from_ambient: sample count mismatch");
  VariationField xi;
  xi.P = &P;
  xi.coeff.resize(vecs.size());
  for (std::size_t k = 0; k < vecs.size(); ++k) {
    const double a = vecs[k].dot(P.tangents[k]);
    const double b = vecs[k].dot(P.normals2[k]);
    const Vec3 resid = vecs[k] - a * P.tangents[k] - b * P.normals2[k];
    if (resid.norm() > 1e-9 * std::max(1.0, vecs[k].norm()))
      throw ArgumentError("variation_from_ambient: vector not tangent at sample " +
                          std::to_string(k));
    xi.coeff[k] = {a, b};
  }
  return xi;
}

Vec3 parallel_transport(const GeodesicPath& P, const Vec3& v_start) {
  const Manifold& M = *P.M;
  const Vec3 t0 = P.tangents.front(), n0 = P.normals2.front();
  const double a = v_start.dot(t0), b = v_start.dot(n0);
  const Vec3 resid = v_start - a * t0 - b * n0;
  if (resid.norm() > 1e-9 * std::max(1.0, v_start.norm()))
    throw ArgumentError("parallel_transport: vector not tangent at the path start");
  if (M.kind != ManifoldKind::GenericMesh) {
    // The stored frames are parallel along the path; coefficients carry over.
    return a * P.tangents.back() + b * P.normals2.back();
  }
  // Schild's ladder along the samples, with chord midpoints projected back to
  // the surface.
  Vec3 w = a * t0 + b * n0;
  const int m = static_cast<int>(P.samples.size()) - 1;
  for (int k = 0; k < m; ++k) {
    const Vec3& A = P.samples[k];
    const Vec3& B = P.samples[k + 1];
    const Vec3 X = project_to_mesh(M, A + w).point;
    const Vec3 mid = project_to_mesh(M, 0.5 * (X + B)).point;
    const Vec3 Y = project_to_mesh(M, A + 2.0 * (mid - A)).point;
    const SurfaceHit hb = project_to_mesh(M, B);
    w = Y - B;
    w -= w.dot(hb.face_normal) * hb.face_normal;
  }
  // Express in the end frame to strip any residual normal component.
  const Vec3 te = P.tangents.back(), ne = P.normals2.back();
  return w.dot(te) * te + w.dot(ne) * ne;
}

double first_variation(const GeodesicPath& P, const VariationField& xi) {
  if (xi.P != &P || xi.coeff.size() != P.samples.size())
    throw ArgumentError("first_variation: field does not match the path");
  return xi.coeff.back()[0] - xi.coeff.front()[0];
}

double second_variation_upper(const GeodesicPath& P, const VariationField& xi) {
  if (xi.P != &P || xi.coeff.size() != P.samples.size())
    throw ArgumentError("second_variation_upper: field does not match the path");
  const int m = static_cast<int>(P.samples.size()) - 1;
  const double dt = P.length / m;
  const double Kt = P.M->Ktilde;
  auto deriv = [&](int k, int comp) {
    if (k == 0) return (xi.coeff[1][comp] - xi.coeff[0][comp]) / dt;
    if (k == m) return (xi.coeff[m][comp] - xi.coeff[m - 1][comp]) / dt;
    return (xi.coeff[k + 1][comp] - xi.coeff[k - 1][comp]) / (2.0 * dt);
  };
  double integral = 0.0;
  for (int k = 0; k <= m; ++k) {
    const double da = deriv(k, 0), db = deriv(k, 1);
    // g(R(xi,T)T,xi) = Ktilde (|xi|^2 - <xi,T>^2) = Ktilde * b^2
    const double curv = Kt * xi.coeff[k][1] * xi.coeff[k][1];
    const double integrand = da * da + db * db - curv;
    integral += (k == 0 || k == m) ? 0.5 * integrand : integrand;
  }
  integral *= dt;
  const double fv = first_variation(P, xi);
  return -fv * fv + integral;
}

FdVariation finite_difference_length_variation(const GeodesicPath& P, const VariationField& xi,
                                               double s, const CostSpec* h) {
  if (!(s > 0.0)) throw ArgumentError("finite_difference_length_variation: step must be > 0");
  if (xi.P != &P || xi.coeff.size() != P.samples.size())
    throw ArgumentError("finite_difference_length_variation: field does not match the path");
  const Manifold& M = *P.M;
  const std::size_t n = P.samples.size();
  std::vector<Vec3> plus(n), minus(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3 v = xi.ambient(static_cast<int>(k));
    plus[k] = ambient_exp(M, P.samples[k], s * v);
    minus[k] = ambient_exp(M, P.samples[k], -s * v);
  }
  const double L0 = polyline_length(M, P.samples);
  const double Lp = polyline_length(M, plus);
  const double Lm = polyline_length(M, minus);
  auto apply = [&](double L) { return h ? h->h(L) : L; };
  FdVariation out;
  out.first_fd = (Lp - Lm) / (2.0 * s);
  out.second_fd = (apply(Lp) + apply(Lm) - 2.0 * apply(L0)) / (s * s);
  return out;
}

FrameField interpolated_frame(const GeodesicPath& P, const std::array<Vec3, 2>& V,
                              const std::array<Vec3, 2>& W) {
  const Vec3 t0 = P.tangents.front(), n0 = P.normals2.front();
  const Vec3 te = P.tangents.back(), ne = P.normals2.back();
  std::array<std::array<double, 2>, 2> vc, wc;
  for (int i = 0; i < 2; ++i) {
    vc[i] = {V[i].dot(t0), V[i].dot(n0)};
    wc[i] = {W[i].dot(te), W[i].dot(ne)};
    if ((V[i] - vc[i][0] * t0 - vc[i][1] * n0).norm() > 1e-8)
      throw ArgumentError("interpolated_frame: start frame vector not tangent");
    if ((W[i] - wc[i][0] * te - wc[i][1] * ne).norm() > 1e-8)
      throw ArgumentError("interpolated_frame: end frame vector not tangent");
  }
  auto defect2 = [](const std::array<std::array<double, 2>, 2>& f) {
    double worst = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const double dot = f[i][0] * f[j][0] + f[i][1] * f[j][1];
        worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
      }
    return worst;
  };
  if (defect2(vc) > 1e-8 || defect2(wc) > 1e-8)
    throw ArgumentError("interpolated_frame: endpoint frames not orthonormal");

  const int m = static_cast<int>(P.samples.size()) - 1;
  FrameField F;
  F.P = &P;
  F.coeff.resize(m + 1);
  double sigma = 0.0;
  for (int k = 0; k <= m; ++k) {
    const double u = static_cast<double>(k) / m;
    const double eta = u * u * (3.0 - 2.0 * u);
    std::array<std::array<double, 2>, 2> x;
    for (int i = 0; i < 2; ++i)
      x[i] = {(1.0 - eta) * vc[i][0] + eta * wc[i][0], (1.0 - eta) * vc[i][1] + eta * wc[i][1]};
    // Exact endpoint frames, immune to round-off in eta.
    if (k == 0) x = vc;
    if (k == m) x = wc;
    F.coeff[k] = x;
    sigma = std::max(sigma, defect2(x));
  }
  F.sigma = sigma;
  return F;
}

CurvatureReport curvature_algebra_checks(const Manifold& M, long trials, std::uint64_t seed,
                                         double sigma_target) {
  if (trials < 1) throw ArgumentError("curvature_algebra_checks: trials must be >= 1");
  constexpr int n = 2;  // tangent dimension
  if (!(sigma_target >= 0.0) || sigma_target >= 1.0 / (2.0 * n))
    throw ArgumentError("curvature_algebra_checks: sigma must satisfy sigma * n < 1/2");
  const double Kt = M.Ktilde;

  double riemann_worst = 0.0, trace_worst = 0.0;
  bool riemann_ok = true, trace_ok = true;

#pragma omp parallel for schedule(static) \
    reduction(max : riemann_worst, trace_worst) reduction(&& : riemann_ok, trace_ok)
  for (long t = 0; t < trials; ++t) {
    SplitMix64 rng(sub_seed(seed, static_cast<std::uint64_t>(t)));
    // Berger-type bound on the curvature tensor, constant-curvature algebra.
    double comp[8];
    for (double& v : comp) v = rng.normal();
    const double uw = comp[0] * comp[4] + comp[1] * comp[5];
    const double uz = comp[0] * comp[6] + comp[1] * comp[7];
    const double vw = comp[2] * comp[4] + comp[3] * comp[5];
    const double vz = comp[2] * comp[6] + comp[3] * comp[7];
    const double g_val = Kt * (vw * uz - uw * vz);
    const double norms = std::hypot(comp[0], comp[1]) * std::hypot(comp[2], comp[3]) *
                         std::hypot(comp[4], comp[5]) * std::hypot(comp[6], comp[7]);
    const double rb = 7.0 * Kt * norms;
    if (std::abs(g_val) > rb) riemann_ok = false;
    if (rb > 0.0) riemann_worst = std::max(riemann_worst, std::abs(g_val) / rb);

    // Trace bound with a sigma-orthonormal basis X = I + c D.
    double D[4];
    for (double& v : D) v = rng.uniform(-1.0, 1.0);
    double c = sigma_target / 4.0;
    auto defect_at = [&](double cc, double X[4]) {
      X[0] = 1.0 + cc * D[0];
      X[1] = cc * D[1];
      X[2] = cc * D[2];
      X[3] = 1.0 + cc * D[3];
      const double g00 = X[0] * X[0] + X[1] * X[1];
      const double g01 = X[0] * X[2] + X[1] * X[3];
      const double g11 = X[2] * X[2] + X[3] * X[3];
      return std::max({std::abs(g00 - 1.0), std::abs(g01), std::abs(g11 - 1.0)});
    };
    double X[4];
    double sigma = defect_at(c, X);
    for (int rescale = 0; rescale < 4 && sigma > sigma_target; ++rescale) {
      c *= 0.5 * sigma_target / sigma;
      sigma = defect_at(c, X);
    }
    double A[4];
    for (double& v : A) v = rng.normal();
    const double tr = A[0] + A[3];
    // sum_i <A X_i, X_i> with X_i the columns of X
    double approx = 0.0;
    {
      const double x0 = X[0], x1 = X[1];  // X_1
      approx += (A[0] * x0 + A[1] * x1) * x0 + (A[2] * x0 + A[3] * x1) * x1;
      const double y0 = X[2], y1 = X[3];  // X_2
      approx += (A[0] * y0 + A[1] * y1) * y0 + (A[2] * y0 + A[3] * y1) * y1;
    }
    const double err = std::abs(tr - approx);
    const double gram_t = A[0] * A[0] + A[1] * A[1] + A[2] * A[2] + A[3] * A[3];
    const double det = A[0] * A[3] - A[1] * A[2];
    const double disc = std::max(0.0, gram_t * gram_t - 4.0 * det * det);
    const double opnorm = std::sqrt(0.5 * (gram_t + std::sqrt(disc)));
    const double tb = 4.0 * n * n * sigma * opnorm;
    if (err > tb && err > 1e-13) trace_ok = false;
    if (tb > 0.0) trace_worst = std::max(trace_worst, err / tb);
  }

  CurvatureReport rep;
  rep.seed = seed;
  rep.riemann = {"riemann-berger", trials, riemann_worst, 7.0 * Kt, riemann_ok};
  rep.trace = {"near-orthonormal-trace", trials, trace_worst, 4.0 * n * n, trace_ok};
  return rep;
}

}  // namespace fgi
