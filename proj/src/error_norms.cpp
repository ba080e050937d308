#include "hdglab/error_norms.hpp"

#include <algorithm>
#include <cmath>

#include "hdglab/errors.hpp"
#include "hdglab/quadrature.hpp"

namespace hdglab {

DiscreteScalar u_view(const FieldSolution& s) { return {&s.u, s.ref.get(), s.m(), 0}; }
DiscreteScalar qx_view(const FieldSolution& s) { return {&s.q, s.ref.get(), 2 * s.m(), 0}; }
DiscreteScalar qy_view(const FieldSolution& s) { return {&s.q, s.ref.get(), 2 * s.m(), s.m()}; }
DiscreteScalar ustar_view(const FieldSolution& s) {
  if (!s.has_ustar()) fail(ErrorCode::invalid_parameter, "solution has no postprocessed field");
  return {&s.ustar, s.ref_star.get(), s.mstar(), 0};
}

namespace {

struct SampleSet {
  std::vector<double> x, y;  // reference coordinates
  DenseMatrix basis;         // rows per sample, one column per basis function
};

SampleSet build_samples(const ReferenceElement& ref, const SamplingSpec& spec) {
  SampleSet s;
  const int exact = spec.quad_exactness > 0 ? spec.quad_exactness : 2 * ref.degree() + 3;
  const TriangleRule rule = triangle_quadrature(exact);
  s.x = rule.x;
  s.y = rule.y;
  if (spec.include_vertices) {
    const double vx[3] = {0.0, 1.0, 0.0};
    const double vy[3] = {0.0, 0.0, 1.0};
    for (int v = 0; v < 3; ++v) {
      s.x.push_back(vx[v]);
      s.y.push_back(vy[v]);
    }
  }
  constexpr std::array<std::array<double, 2>, 3> kVerts = {{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}};
  for (int e = 0; e < 3; ++e) {
    const auto& a = kVerts[e];
    const auto& b = kVerts[(e + 1) % 3];
    for (int i = 1; i <= spec.edge_interior_points; ++i) {
      const double t = static_cast<double>(i) / (spec.edge_interior_points + 1);
      s.x.push_back(a[0] + t * (b[0] - a[0]));
      s.y.push_back(a[1] + t * (b[1] - a[1]));
    }
  }
  s.basis = ref.eval_basis(s.x, s.y);
  return s;
}

double field_value(const DiscreteScalar& f, const DenseMatrix& basis, int row, int element) {
  double v = 0.0;
  for (int i = 0; i < f.ref->dim(); ++i) v += f.coeff(element, i) * basis(row, i);
  return v;
}

}  // namespace

double linf_error(const Mesh& mesh, const DiscreteScalar& field, const ScalarField& exact,
                  const SamplingSpec& sampling) {
  const SampleSet s = build_samples(*field.ref, sampling);
  double worst = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto verts = mesh.triangle_vertices(e);
    const AffineMap map = AffineMap::from_triangle(verts[0], verts[1], verts[2]);
    for (std::size_t p = 0; p < s.x.size(); ++p) {
      const auto xy = map.map(s.x[p], s.y[p]);
      const double diff = field_value(field, s.basis, static_cast<int>(p), e) - exact(xy[0], xy[1]);
      worst = std::max(worst, std::abs(diff));
    }
  }
  return worst;
}

double linf_error(const Mesh& mesh, const DiscreteScalar& fx, const DiscreteScalar& fy,
                  const VectorField& exact, const SamplingSpec& sampling) {
  const SampleSet s = build_samples(*fx.ref, sampling);
  double worst = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto verts = mesh.triangle_vertices(e);
    const AffineMap map = AffineMap::from_triangle(verts[0], verts[1], verts[2]);
    for (std::size_t p = 0; p < s.x.size(); ++p) {
      const auto xy = map.map(s.x[p], s.y[p]);
      const auto ev = exact(xy[0], xy[1]);
      const int row = static_cast<int>(p);
      worst = std::max(worst, std::abs(field_value(fx, s.basis, row, e) - ev[0]));
      worst = std::max(worst, std::abs(field_value(fy, s.basis, row, e) - ev[1]));
    }
  }
  return worst;
}

namespace {

template <typename SqIntegrand>
double l2_over_elements(const Mesh& mesh, const ReferenceElement& ref, const SqIntegrand& sq) {
  const TriangleRule& tq = ref.triangle_rule();
  const DenseMatrix& B = ref.basis_at_quad();
  double total = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto verts = mesh.triangle_vertices(e);
    const AffineMap map = AffineMap::from_triangle(verts[0], verts[1], verts[2]);
    for (int p = 0; p < tq.size(); ++p) {
      const auto xy = map.map(tq.x[p], tq.y[p]);
      total += tq.w[p] * map.det * sq(e, p, B, xy[0], xy[1]);
    }
  }
  return std::sqrt(total);
}

}  // namespace

double l2_error(const Mesh& mesh, const DiscreteScalar& field, const ScalarField& exact) {
  return l2_over_elements(mesh, *field.ref,
                          [&](int e, int p, const DenseMatrix& B, double x, double y) {
                            const double d = field_value(field, B, p, e) - exact(x, y);
                            return d * d;
                          });
}

double l2_error(const Mesh& mesh, const DiscreteScalar& fx, const DiscreteScalar& fy,
                const VectorField& exact) {
  return l2_over_elements(mesh, *fx.ref,
                          [&](int e, int p, const DenseMatrix& B, double x, double y) {
                            const auto ev = exact(x, y);
                            const double dx = field_value(fx, B, p, e) - ev[0];
                            const double dy = field_value(fy, B, p, e) - ev[1];
                            return dx * dx + dy * dy;
                          });
}

namespace {

template <typename SqIntegrand>
double l2_over_faces(const Mesh& mesh, std::span<const int> faces, const ReferenceElement& ref,
                     const SqIntegrand& sq) {
  if (faces.empty()) fail(ErrorCode::invalid_parameter, "empty face set in interface norm");
  const EdgeRule& eq = ref.edge_rule();
  double total = 0.0;
  for (int f : faces) {
    const Face& face = mesh.faces[f];
    const int e = face.left;
    int le = 0;
    while (mesh.element_faces[e][le] != f) ++le;
    const bool reversed = mesh.element_face_sign[e][le] < 0;  // left element: false by construction
    const DenseMatrix& phi = ref.basis_at_edge_quad(le, reversed);
    const auto& a = mesh.vertices[face.v0];
    const auto& b = mesh.vertices[face.v1];
    for (int p = 0; p < eq.size(); ++p) {
      const double t = eq.t[p];
      const double px = a[0] + t * (b[0] - a[0]);
      const double py = a[1] + t * (b[1] - a[1]);
      total += eq.w[p] * face.length * sq(e, p, phi, px, py);
    }
  }
  return std::sqrt(total);
}

}  // namespace

double l2_error_interface(const Mesh& mesh, std::span<const int> faces, const DiscreteScalar& field,
                          const ScalarField& exact) {
  return l2_over_faces(mesh, faces, *field.ref,
                       [&](int e, int p, const DenseMatrix& phi, double x, double y) {
                         const double d = field_value(field, phi, p, e) - exact(x, y);
                         return d * d;
                       });
}

double l2_error_interface(const Mesh& mesh, std::span<const int> faces, const DiscreteScalar& fx,
                          const DiscreteScalar& fy, const VectorField& exact) {
  return l2_over_faces(mesh, faces, *fx.ref,
                       [&](int e, int p, const DenseMatrix& phi, double x, double y) {
                         const auto ev = exact(x, y);
                         const double dx = field_value(fx, phi, p, e) - ev[0];
                         const double dy = field_value(fy, phi, p, e) - ev[1];
                         return dx * dx + dy * dy;
                       });
}

std::vector<double> rates(std::span<const double> errors) {
  std::vector<double> out;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!(errors[i] > 0.0))
      fail(ErrorCode::invalid_parameter, "convergence rates need positive errors");
    if (i > 0) out.push_back(std::log2(errors[i - 1] / errors[i]));
  }
  return out;
}

std::vector<std::vector<double>> ErrorReport::rate_table() const {
  std::vector<std::vector<double>> table;
  for (std::size_t l = 1; l < levels.size(); ++l) {
    std::vector<double> row;
    for (std::size_t q = 0; q < quantities.size(); ++q)
      row.push_back(std::log2(levels[l - 1].errors[q] / levels[l].errors[q]));
    table.push_back(std::move(row));
  }
  return table;
}

}  // namespace hdglab
