#include "hdglab/hdg_local.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <tuple>

#include "hdglab/errors.hpp"

namespace hdglab {

LocalOperators build_local_operators(const Mesh& mesh, int element, const ReferenceElement& ref,
                                     const Coefficient& c, const StabilizationSpec& tau) {
  if (element < 0 || element >= mesh.n_elements())
    fail(ErrorCode::invalid_parameter, "element index out of range");
  if (!(tau.tau > 0.0)) fail(ErrorCode::invalid_parameter, "stabilization parameter must be positive");

  LocalOperators ops;
  ops.element = element;
  ops.m = ref.dim();
  ops.nf = ref.edge_dim();
  const auto verts = mesh.triangle_vertices(element);
  ops.map = AffineMap::from_triangle(verts[0], verts[1], verts[2]);

  const int m = ops.m, nf = ops.nf;
  const TriangleRule& tq = ref.triangle_rule();
  const DenseMatrix& B = ref.basis_at_quad();

  ops.A_qq = DenseMatrix(2 * m, 2 * m);
  ops.A_qu = DenseMatrix(2 * m, m);
  ops.A_qhat = DenseMatrix(2 * m, 3 * nf);
  ops.A_uu = DenseMatrix(m, m);
  ops.A_uhat = DenseMatrix(m, 3 * nf);
  ops.A_hathat = DenseMatrix(3 * nf, 3 * nf);

  // Volume terms.
  std::vector<double> gpx(m), gpy(m);
  for (int p = 0; p < tq.size(); ++p) {
    const double wq = tq.w[p] * ops.map.det;
    const auto xy = ops.map.map(tq.x[p], tq.y[p]);
    const auto cv = c(xy[0], xy[1]);
    for (int i = 0; i < m; ++i) {
      const auto g = ops.map.push_gradient(ref.gradx_at_quad()(p, i), ref.grady_at_quad()(p, i));
      gpx[i] = g[0];
      gpy[i] = g[1];
    }
    for (int i = 0; i < m; ++i) {
      const double bi = B(p, i);
      for (int j = 0; j < m; ++j) {
        const double bj = B(p, j);
        ops.A_qq(i, j) += wq * cv[0] * bi * bj;              // xx
        ops.A_qq(i, m + j) += wq * cv[1] * bi * bj;          // xy
        ops.A_qq(m + i, j) += wq * cv[2] * bi * bj;          // yx
        ops.A_qq(m + i, m + j) += wq * cv[3] * bi * bj;      // yy
        ops.A_qu(i, j) -= wq * bj * gpx[i];
        ops.A_qu(m + i, j) -= wq * bj * gpy[i];
      }
    }
  }

  // Face terms, in each face's canonical parameterization.
  const EdgeRule& eq = ref.edge_rule();
  const DenseMatrix& psi = ref.edge_basis_at_quad();
  for (int le = 0; le < 3; ++le) {
    const int fidx = mesh.element_faces[element][le];
    const Face& face = mesh.faces[fidx];
    const bool reversed = mesh.element_face_sign[element][le] < 0;
    const auto n = mesh.outward_normal(element, le);
    const DenseMatrix& phi = ref.basis_at_edge_quad(le, reversed);
    for (int p = 0; p < eq.size(); ++p) {
      const double wq = eq.w[p] * face.length;
      for (int i = 0; i < m; ++i) {
        const double bi = phi(p, i);
        for (int j = 0; j < nf; ++j) {
          const double pj = psi(p, j);
          ops.A_qhat(i, le * nf + j) += wq * bi * pj * n[0];
          ops.A_qhat(m + i, le * nf + j) += wq * bi * pj * n[1];
          ops.A_uhat(i, le * nf + j) += wq * tau.tau * bi * pj;
        }
        for (int j = 0; j < m; ++j) ops.A_uu(i, j) += wq * tau.tau * bi * phi(p, j);
      }
      for (int i = 0; i < nf; ++i)
        for (int j = 0; j < nf; ++j)
          ops.A_hathat(le * nf + i, le * nf + j) += wq * tau.tau * psi(p, i) * psi(p, j);
    }
  }

  // Interior system and Schur complement.
  const int ni = 3 * m;
  DenseMatrix A(ni, ni);
  for (int i = 0; i < 2 * m; ++i) {
    for (int j = 0; j < 2 * m; ++j) A(i, j) = ops.A_qq(i, j);
    for (int j = 0; j < m; ++j) A(i, 2 * m + j) = ops.A_qu(i, j);
  }
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < 2 * m; ++j) A(2 * m + i, j) = -ops.A_qu(j, i);
    for (int j = 0; j < m; ++j) A(2 * m + i, 2 * m + j) = ops.A_uu(i, j);
  }
  DenseMatrix Bmat(ni, 3 * nf);
  for (int j = 0; j < 3 * nf; ++j) {
    for (int i = 0; i < 2 * m; ++i) Bmat(i, j) = ops.A_qhat(i, j);
    for (int i = 0; i < m; ++i) Bmat(2 * m + i, j) = -ops.A_uhat(i, j);
  }
  ops.cmat = DenseMatrix(3 * nf, ni);
  for (int r = 0; r < 3 * nf; ++r) {
    for (int i = 0; i < 2 * m; ++i) ops.cmat(r, i) = ops.A_qhat(i, r);
    for (int i = 0; i < m; ++i) ops.cmat(r, 2 * m + i) = ops.A_uhat(i, r);
  }
  try {
    ops.interior_lu = LuFactor(std::move(A));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::singular_matrix)
      fail(ErrorCode::degenerate_element, "interior HDG block is singular");
    throw;
  }
  ops.ainv_b = ops.interior_lu.solve(Bmat);
  ops.schur = ops.cmat * ops.ainv_b;
  for (int i = 0; i < 3 * nf; ++i)
    for (int j = 0; j < 3 * nf; ++j) ops.schur(i, j) += ops.A_hathat(i, j);
  return ops;
}

Condensed condense(const LocalOperators& ops, std::span<const double> local_load) {
  if (static_cast<int>(local_load.size()) != ops.n_interior())
    fail(ErrorCode::invalid_parameter, "condense: load size mismatch");
  const std::vector<double> ainv_f = ops.interior_lu.solve(local_load);
  return {ops.schur, ops.cmat.apply(ainv_f)};
}

RecoveredElement recover(const LocalOperators& ops, std::span<const double> local_load,
                         std::span<const double> uhat) {
  if (static_cast<int>(uhat.size()) != ops.n_trace())
    fail(ErrorCode::invalid_parameter, "recover: trace size mismatch");
  std::vector<double> x = ops.interior_lu.solve(local_load);
  for (int i = 0; i < ops.n_interior(); ++i) {
    double s = 0.0;
    for (int j = 0; j < ops.n_trace(); ++j) s += ops.ainv_b(i, j) * uhat[j];
    x[i] -= s;
  }
  RecoveredElement out;
  out.q.assign(x.begin(), x.begin() + 2 * ops.m);
  out.u.assign(x.begin() + 2 * ops.m, x.end());
  return out;
}

HdgProjection hdg_project(const Mesh& mesh, int element, const ReferenceElement& ref,
                          const VectorField& q_exact, const ScalarField& u_exact, double tau) {
  if (!(tau > 0.0)) fail(ErrorCode::invalid_parameter, "stabilization parameter must be positive");
  const int k = ref.degree();
  const int m = ref.dim();
  const int nf = ref.edge_dim();
  const int msub = k * (k + 1) / 2;  // dim P^{k-1}
  const auto verts = mesh.triangle_vertices(element);
  const AffineMap map = AffineMap::from_triangle(verts[0], verts[1], verts[2]);

  DenseMatrix P(3 * m, 3 * m);
  std::vector<double> rhs(3 * m, 0.0);

  const TriangleRule& tq = ref.triangle_rule();
  const DenseMatrix& B = ref.basis_at_quad();
  for (int p = 0; p < tq.size(); ++p) {
    const double wq = tq.w[p] * map.det;
    const auto xy = map.map(tq.x[p], tq.y[p]);
    const auto qv = q_exact(xy[0], xy[1]);
    const double uv = u_exact(xy[0], xy[1]);
    for (int j = 0; j < msub; ++j) {
      const double bj = B(p, j);
      for (int i = 0; i < m; ++i) {
        const double mass = wq * B(p, i) * bj;
        P(j, i) += mass;                  // x-component moments
        P(msub + j, m + i) += mass;       // y-component moments
        P(2 * msub + j, 2 * m + i) += mass;
      }
      rhs[j] += wq * qv[0] * bj;
      rhs[msub + j] += wq * qv[1] * bj;
      rhs[2 * msub + j] += wq * uv * bj;
    }
  }

  const EdgeRule& eq = ref.edge_rule();
  const DenseMatrix& psi = ref.edge_basis_at_quad();
  for (int le = 0; le < 3; ++le) {
    const int fidx = mesh.element_faces[element][le];
    const Face& face = mesh.faces[fidx];
    const bool reversed = mesh.element_face_sign[element][le] < 0;
    const auto n = mesh.outward_normal(element, le);
    const DenseMatrix& phi = ref.basis_at_edge_quad(le, reversed);
    const auto& a = mesh.vertices[face.v0];
    const auto& b = mesh.vertices[face.v1];
    for (int p = 0; p < eq.size(); ++p) {
      const double wq = eq.w[p] * face.length;
      const double t = eq.t[p];
      const double px = a[0] + t * (b[0] - a[0]);
      const double py = a[1] + t * (b[1] - a[1]);
      const auto qv = q_exact(px, py);
      const double uv = u_exact(px, py);
      for (int j = 0; j < nf; ++j) {
        const int row = 3 * msub + le * nf + j;
        const double pj = psi(p, j);
        for (int i = 0; i < m; ++i) {
          P(row, i) += wq * phi(p, i) * pj * n[0];
          P(row, m + i) += wq * phi(p, i) * pj * n[1];
          P(row, 2 * m + i) += wq * tau * phi(p, i) * pj;
        }
        rhs[row] += wq * (qv[0] * n[0] + qv[1] * n[1] + tau * uv) * pj;
      }
    }
  }

  std::vector<double> x;
  try {
    x = dense_solve(P, rhs);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::singular_matrix)
      fail(ErrorCode::projection_failure, "HDG projection system is singular");
    throw;
  }
  HdgProjection out;
  out.q.assign(x.begin(), x.begin() + 2 * m);
  out.u.assign(x.begin() + 2 * m, x.end());
  return out;
}

std::vector<double> l2_project_element(const ScalarField& f, const Mesh& mesh, int element,
                                       const ReferenceElement& ref) {
  const int m = ref.dim();
  const auto verts = mesh.triangle_vertices(element);
  const AffineMap map = AffineMap::from_triangle(verts[0], verts[1], verts[2]);
  const TriangleRule& tq = ref.triangle_rule();
  const DenseMatrix& B = ref.basis_at_quad();
  DenseMatrix G(m, m);
  std::vector<double> rhs(m, 0.0);
  for (int p = 0; p < tq.size(); ++p) {
    const double wq = tq.w[p] * map.det;
    const auto xy = map.map(tq.x[p], tq.y[p]);
    const double fv = f(xy[0], xy[1]);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) G(i, j) += wq * B(p, i) * B(p, j);
      rhs[i] += wq * fv * B(p, i);
    }
  }
  return dense_solve(G, rhs);
}

std::vector<double> l2_project_face(const ScalarField& f, const Mesh& mesh, int face,
                                    const ReferenceElement& ref) {
  const Face& fc = mesh.faces[face];
  const auto& a = mesh.vertices[fc.v0];
  const auto& b = mesh.vertices[fc.v1];
  const int nf = ref.edge_dim();
  const EdgeRule& eq = ref.edge_rule();
  const DenseMatrix& psi = ref.edge_basis_at_quad();
  DenseMatrix G(nf, nf);
  std::vector<double> rhs(nf, 0.0);
  for (int p = 0; p < eq.size(); ++p) {
    const double wq = eq.w[p] * fc.length;
    const double t = eq.t[p];
    const double fv = f(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]));
    for (int i = 0; i < nf; ++i) {
      for (int j = 0; j < nf; ++j) G(i, j) += wq * psi(p, i) * psi(p, j);
      rhs[i] += wq * fv * psi(p, i);
    }
  }
  return dense_solve(G, rhs);
}

LocalOperatorSet::LocalOperatorSet(const Mesh& mesh, const ReferenceElement& ref,
                                   const Coefficient& c, const StabilizationSpec& tau) {
  per_element_.resize(mesh.n_elements());
  if (!c.is_constant()) {
    // Position-dependent coefficient: nothing to share.
    for (int e = 0; e < mesh.n_elements(); ++e)
      per_element_[e] = std::make_shared<LocalOperators>(build_local_operators(mesh, e, ref, c, tau));
    distinct_ = mesh.n_elements();
    return;
  }
  // Structured meshes contain a handful of element classes: same Jacobian and
  // same face traversal directions give identical local operators up to the
  // load, which lives outside LocalOperators.
  using Key = std::array<std::uint64_t, 5>;
  auto bits = [](double v) { return std::bit_cast<std::uint64_t>(v); };
  std::map<Key, std::shared_ptr<const LocalOperators>> cache;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto verts = mesh.triangle_vertices(e);
    const double j00 = verts[1][0] - verts[0][0], j10 = verts[1][1] - verts[0][1];
    const double j01 = verts[2][0] - verts[0][0], j11 = verts[2][1] - verts[0][1];
    std::uint64_t orient = 0;
    for (int le = 0; le < 3; ++le)
      if (mesh.element_face_sign[e][le] < 0) orient |= std::uint64_t{1} << le;
    const Key key{bits(j00), bits(j01), bits(j10), bits(j11), orient};
    auto it = cache.find(key);
    if (it == cache.end()) {
      auto ops = std::make_shared<LocalOperators>(build_local_operators(mesh, e, ref, c, tau));
      it = cache.emplace(key, std::move(ops)).first;
    }
    per_element_[e] = it->second;
  }
  distinct_ = static_cast<int>(cache.size());
}

}  // namespace hdglab
