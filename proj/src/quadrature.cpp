#include "hdglab/quadrature.hpp"

#include <cmath>
#include <string>

#include "hdglab/errors.hpp"

namespace hdglab {

EdgeRule gauss_legendre_01(int npoints) {
  if (npoints < 1) fail(ErrorCode::invalid_parameter, "need at least one quadrature point");
  EdgeRule rule;
  rule.t.resize(npoints);
  rule.w.resize(npoints);
  rule.exactness = 2 * npoints - 1;
  const int n = npoints;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton iteration on P_n over [-1,1], Chebyshev-like initial guess.
    double xi = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = xi;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (xi * p1 - p0) / (xi * xi - 1.0);
      const double dx = p1 / pp;
      xi -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double wi = 2.0 / ((1.0 - xi * xi) * pp * pp);
    rule.t[i] = 0.5 * (1.0 - xi);  // descending xi -> ascending t
    rule.w[i] = 0.5 * wi;
    rule.t[n - 1 - i] = 0.5 * (1.0 + xi);
    rule.w[n - 1 - i] = 0.5 * wi;
  }
  return rule;
}

EdgeRule edge_quadrature(int exactness_degree) {
  if (exactness_degree < 0) fail(ErrorCode::invalid_parameter, "negative exactness degree");
  if (exactness_degree > 41)
    fail(ErrorCode::unsupported_degree, "edge rule table capped at degree 41");
  EdgeRule rule = gauss_legendre_01((exactness_degree + 2) / 2);
  rule.exactness = exactness_degree;
  return rule;
}

TriangleRule triangle_quadrature(int exactness_degree) {
  if (exactness_degree < 0) fail(ErrorCode::invalid_parameter, "negative exactness degree");
  if (exactness_degree > 20)
    fail(ErrorCode::unsupported_degree,
         "triangle rule table capped at degree 20, requested " + std::to_string(exactness_degree));
  const int d = exactness_degree;
  // Collapsed-coordinate product rule: x = s(1-t), y = t with Jacobian (1-t).
  // A monomial x^a y^b, a+b <= d, becomes degree a <= d in s and degree
  // a+b+1 <= d+1 in t, so these point counts integrate it exactly.
  const EdgeRule gs = gauss_legendre_01((d + 2) / 2);
  const EdgeRule gt = gauss_legendre_01((d + 3) / 2);
  TriangleRule rule;
  rule.exactness = d;
  rule.x.reserve(static_cast<std::size_t>(gs.size()) * gt.size());
  rule.y.reserve(rule.x.capacity());
  rule.w.reserve(rule.x.capacity());
  for (int j = 0; j < gt.size(); ++j) {
    for (int i = 0; i < gs.size(); ++i) {
      const double t = gt.t[j];
      const double s = gs.t[i];
      rule.x.push_back(s * (1.0 - t));
      rule.y.push_back(t);
      rule.w.push_back(gs.w[i] * gt.w[j] * (1.0 - t));
    }
  }
  return rule;
}

double triangle_monomial_integral(int a, int b) {
  // a! b! / (a+b+2)! computed as a product to avoid factorial overflow.
  double value = 1.0;
  for (int i = 1; i <= b; ++i) value *= static_cast<double>(i) / (a + i);
  for (int i = a + b + 1; i <= a + b + 2; ++i) value /= i;
  return value;
}

}  // namespace hdglab
