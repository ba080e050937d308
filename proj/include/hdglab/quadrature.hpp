// Quadrature on the reference triangle T = {x,y >= 0, x+y <= 1} and the
// reference edge [0,1], with certified polynomial exactness degree.
#pragma once

#include <vector>

namespace hdglab {

struct TriangleRule {
  std::vector<double> x, y, w;
  int exactness = 0;
  int size() const { return static_cast<int>(w.size()); }
};

struct EdgeRule {
  std::vector<double> t, w;  // on [0,1]
  int exactness = 0;
  int size() const { return static_cast<int>(w.size()); }
};

/// Gauss-Legendre nodes/weights on [0,1], exact for degree <= 2n-1.
EdgeRule gauss_legendre_01(int npoints);

/// Rule exact for all polynomials of total degree <= exactness_degree.
/// Supported up to degree 20; higher requests raise unsupported-degree.
TriangleRule triangle_quadrature(int exactness_degree);

/// Gauss-Legendre rule on [0,1] exact to the requested degree (cap 41).
EdgeRule edge_quadrature(int exactness_degree);

/// Exact value of the monomial integral over the reference triangle,
/// a! b! / (a+b+2)!.
double triangle_monomial_integral(int a, int b);

}  // namespace hdglab
