#include "hdglab/reference_element.hpp"

#include <cmath>

#include "hdglab/errors.hpp"

namespace hdglab {

AffineMap AffineMap::from_triangle(const std::array<double, 2>& v0, const std::array<double, 2>& v1,
                                   const std::array<double, 2>& v2) {
  AffineMap m;
  m.x0 = v0[0];
  m.y0 = v0[1];
  m.j00 = v1[0] - v0[0];
  m.j10 = v1[1] - v0[1];
  m.j01 = v2[0] - v0[0];
  m.j11 = v2[1] - v0[1];
  m.det = m.j00 * m.j11 - m.j01 * m.j10;
  if (std::abs(m.det) < 2e-14)
    fail(ErrorCode::degenerate_element, "triangle area below 1e-14");
  const double inv = 1.0 / m.det;
  m.i00 = m.j11 * inv;
  m.i01 = -m.j01 * inv;
  m.i10 = -m.j10 * inv;
  m.i11 = m.j00 * inv;
  return m;
}

namespace {

// Monomial values at points, (npts x nmono).
DenseMatrix eval_monomials(const std::vector<std::array<int, 2>>& exps, std::span<const double> xs,
                           std::span<const double> ys) {
  const int npts = static_cast<int>(xs.size());
  const int nm = static_cast<int>(exps.size());
  DenseMatrix m(npts, nm);
  for (int p = 0; p < npts; ++p)
    for (int j = 0; j < nm; ++j)
      m(p, j) = std::pow(xs[p], exps[j][0]) * std::pow(ys[p], exps[j][1]);
  return m;
}

std::pair<DenseMatrix, DenseMatrix> eval_monomial_grads(const std::vector<std::array<int, 2>>& exps,
                                                        std::span<const double> xs,
                                                        std::span<const double> ys) {
  const int npts = static_cast<int>(xs.size());
  const int nm = static_cast<int>(exps.size());
  DenseMatrix gx(npts, nm), gy(npts, nm);
  for (int p = 0; p < npts; ++p) {
    for (int j = 0; j < nm; ++j) {
      const int a = exps[j][0], b = exps[j][1];
      gx(p, j) = a == 0 ? 0.0 : a * std::pow(xs[p], a - 1) * std::pow(ys[p], b);
      gy(p, j) = b == 0 ? 0.0 : b * std::pow(xs[p], a) * std::pow(ys[p], b - 1);
    }
  }
  return {std::move(gx), std::move(gy)};
}

}  // namespace

ReferenceElement::ReferenceElement(int degree, int quad_exactness)
    : degree_(degree), dim_(triangle_space_dim(degree)) {
  if (degree < 0) fail(ErrorCode::invalid_parameter, "polynomial degree must be nonnegative");
  const int exact = quad_exactness > 0 ? quad_exactness : 2 * degree + 3;
  tri_rule_ = triangle_quadrature(exact);
  edge_rule_ = edge_quadrature(exact);

  for (int d = 0; d <= degree; ++d)
    for (int a = d; a >= 0; --a) exponents_.push_back({a, d - a});

  // Orthonormalize the monomials under a rule exact for degree-2k products,
  // independently of the carried rule, so Gram matrices stay near identity.
  const TriangleRule given = triangle_quadrature(std::max(2 * degree, exact));
  const DenseMatrix mono = eval_monomials(exponents_, given.x, given.y);
  const int nm = dim_;
  coeff_ = DenseMatrix::identity(nm);
  auto inner = [&](int i, int j) {
    // (basis_i, basis_j) under the rule, via monomial values.
    double s = 0.0;
    for (int p = 0; p < given.size(); ++p) {
      double vi = 0.0, vj = 0.0;
      for (int c = 0; c < nm; ++c) {
        vi += coeff_(i, c) * mono(p, c);
        vj += coeff_(j, c) * mono(p, c);
      }
      s += given.w[p] * vi * vj;
    }
    return s;
  };
  for (int i = 0; i < nm; ++i) {
    for (int pass = 0; pass < 2; ++pass) {  // re-orthogonalize for stability
      for (int j = 0; j < i; ++j) {
        const double proj = inner(i, j);
        for (int c = 0; c < nm; ++c) coeff_(i, c) -= proj * coeff_(j, c);
      }
    }
    const double norm = std::sqrt(inner(i, i));
    if (!(norm > 1e-14)) fail(ErrorCode::projection_failure, "basis orthonormalization degenerated");
    for (int c = 0; c < nm; ++c) coeff_(i, c) /= norm;
  }

  basis_at_quad_ = eval_basis(tri_rule_.x, tri_rule_.y);
  auto grads = eval_grad_basis(tri_rule_.x, tri_rule_.y);
  gradx_at_quad_ = std::move(grads.first);
  grady_at_quad_ = std::move(grads.second);
  for (int e = 0; e < 3; ++e) {
    for (int rev = 0; rev < 2; ++rev) {
      auto [xs, ys] = edge_points(e, rev == 1);
      basis_at_edge_quad_[e][rev] = eval_basis(xs, ys);
    }
  }
  edge_basis_at_quad_ = eval_edge_basis(edge_rule_.t);
}

DenseMatrix ReferenceElement::eval_basis(std::span<const double> xhat,
                                         std::span<const double> yhat) const {
  const DenseMatrix mono = eval_monomials(exponents_, xhat, yhat);
  const int npts = mono.rows();
  DenseMatrix out(npts, dim_);
  for (int p = 0; p < npts; ++p)
    for (int i = 0; i < dim_; ++i) {
      double v = 0.0;
      for (int c = 0; c < dim_; ++c) v += coeff_(i, c) * mono(p, c);
      out(p, i) = v;
    }
  return out;
}

std::pair<DenseMatrix, DenseMatrix> ReferenceElement::eval_grad_basis(
    std::span<const double> xhat, std::span<const double> yhat) const {
  auto [mgx, mgy] = eval_monomial_grads(exponents_, xhat, yhat);
  const int npts = mgx.rows();
  DenseMatrix gx(npts, dim_), gy(npts, dim_);
  for (int p = 0; p < npts; ++p)
    for (int i = 0; i < dim_; ++i) {
      double sx = 0.0, sy = 0.0;
      for (int c = 0; c < dim_; ++c) {
        sx += coeff_(i, c) * mgx(p, c);
        sy += coeff_(i, c) * mgy(p, c);
      }
      gx(p, i) = sx;
      gy(p, i) = sy;
    }
  return {std::move(gx), std::move(gy)};
}

DenseMatrix ReferenceElement::eval_edge_basis(std::span<const double> t) const {
  const int npts = static_cast<int>(t.size());
  DenseMatrix out(npts, edge_dim());
  for (int p = 0; p < npts; ++p) {
    const double s = 2.0 * t[p] - 1.0;
    double p0 = 1.0, p1 = s;
    for (int j = 0; j <= degree_; ++j) {
      double pj;
      if (j == 0) pj = p0;
      else if (j == 1) pj = p1;
      else {
        pj = ((2.0 * j - 1.0) * s * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = pj;
      }
      out(p, j) = std::sqrt(2.0 * j + 1.0) * pj;
    }
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> ReferenceElement::edge_points(
    int local_edge, bool reversed) const {
  static constexpr std::array<std::array<double, 2>, 3> kVerts = {{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}};
  const auto& a = kVerts[local_edge];
  const auto& b = kVerts[(local_edge + 1) % 3];
  std::vector<double> xs(edge_rule_.size()), ys(edge_rule_.size());
  for (int p = 0; p < edge_rule_.size(); ++p) {
    const double t = reversed ? 1.0 - edge_rule_.t[p] : edge_rule_.t[p];
    xs[p] = a[0] + t * (b[0] - a[0]);
    ys[p] = a[1] + t * (b[1] - a[1]);
  }
  return {std::move(xs), std::move(ys)};
}

}  // namespace hdglab
