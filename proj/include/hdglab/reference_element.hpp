// Reference-element machinery: P^k bases on the reference triangle and the
// reference edge, gradients, quadrature tables, and affine-map utilities.
//
// The triangle basis is an orthonormalized (modified Gram-Schmidt under
// quadrature) monomial basis, hierarchical by total degree: the first
// (l+1)(l+2)/2 functions span P^l for every l <= k. The edge basis is the
// orthonormal shifted Legendre family on [0,1].
#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "hdglab/linalg.hpp"
#include "hdglab/quadrature.hpp"

namespace hdglab {

inline constexpr int triangle_space_dim(int degree) { return (degree + 1) * (degree + 2) / 2; }

/// Affine map from the reference triangle to a physical triangle.
struct AffineMap {
  double x0 = 0.0, y0 = 0.0;         // image of (0,0)
  double j00 = 1, j01 = 0, j10 = 0, j11 = 1;
  double det = 1.0;                  // = 2 * area for counterclockwise triangles
  double i00 = 1, i01 = 0, i10 = 0, i11 = 1;  // inverse of J

  static AffineMap from_triangle(const std::array<double, 2>& v0, const std::array<double, 2>& v1,
                                 const std::array<double, 2>& v2);

  std::array<double, 2> map(double xhat, double yhat) const {
    return {x0 + j00 * xhat + j01 * yhat, y0 + j10 * xhat + j11 * yhat};
  }
  std::array<double, 2> pull_back(double x, double y) const {
    const double dx = x - x0, dy = y - y0;
    return {i00 * dx + i01 * dy, i10 * dx + i11 * dy};
  }
  /// Physical gradient from a reference gradient: J^{-T} grad_hat.
  std::array<double, 2> push_gradient(double gx_hat, double gy_hat) const {
    return {i00 * gx_hat + i10 * gy_hat, i01 * gx_hat + i11 * gy_hat};
  }
};

class ReferenceElement {
public:
  /// quad_exactness 0 selects the default 2k+3.
  explicit ReferenceElement(int degree, int quad_exactness = 0);

  int degree() const { return degree_; }
  int dim() const { return dim_; }            // (k+1)(k+2)/2
  int edge_dim() const { return degree_ + 1; }

  const TriangleRule& triangle_rule() const { return tri_rule_; }
  const EdgeRule& edge_rule() const { return edge_rule_; }

  /// Values of all triangle basis functions at the given reference points,
  /// as an (npoints x dim) matrix.
  DenseMatrix eval_basis(std::span<const double> xhat, std::span<const double> yhat) const;
  /// Reference gradients, returned as the pair (d/dx values, d/dy values).
  std::pair<DenseMatrix, DenseMatrix> eval_grad_basis(std::span<const double> xhat,
                                                      std::span<const double> yhat) const;
  /// Values of the edge basis at parameters in [0,1], (npoints x k+1).
  DenseMatrix eval_edge_basis(std::span<const double> t) const;

  // Tables cached at this element's own quadrature rules.
  const DenseMatrix& basis_at_quad() const { return basis_at_quad_; }
  const DenseMatrix& gradx_at_quad() const { return gradx_at_quad_; }
  const DenseMatrix& grady_at_quad() const { return grady_at_quad_; }
  /// Triangle basis traced on local edge `e` (0:(0,0)->(1,0), 1:(1,0)->(0,1),
  /// 2:(0,1)->(0,0)) at the edge-rule points, traversed forward or reversed.
  const DenseMatrix& basis_at_edge_quad(int local_edge, bool reversed) const {
    return basis_at_edge_quad_[local_edge][reversed ? 1 : 0];
  }
  const DenseMatrix& edge_basis_at_quad() const { return edge_basis_at_quad_; }

  /// Reference coordinates of the edge-rule points on a local edge.
  std::pair<std::vector<double>, std::vector<double>> edge_points(int local_edge, bool reversed) const;

private:
  int degree_;
  int dim_;
  TriangleRule tri_rule_;
  EdgeRule edge_rule_;
  std::vector<std::array<int, 2>> exponents_;  // monomial exponents by total degree
  DenseMatrix coeff_;                          // basis i = sum_j coeff_(i,j) * monomial_j

  DenseMatrix basis_at_quad_;
  DenseMatrix gradx_at_quad_, grady_at_quad_;
  std::array<std::array<DenseMatrix, 2>, 3> basis_at_edge_quad_;
  DenseMatrix edge_basis_at_quad_;
};

}  // namespace hdglab
