// Independent quadrature evaluation of the HDG bilinear form and a dense
// uncondensed assembly built on it. This is the oracle side of the dual-route
// checks: it never touches LocalOperators or the condensed solver path.
#pragma once

#include <array>
#include <random>
#include <vector>

#include "hdglab/fields.hpp"
#include "hdglab/hdg_local.hpp"
#include "hdglab/linalg.hpp"
#include "hdglab/mesh.hpp"
#include "hdglab/reference_element.hpp"

namespace hdglab::testsupport {

struct DiscreteTriple {
  std::vector<double> q;     // 2m per element
  std::vector<double> u;     // m per element
  std::vector<double> uhat;  // nf per face
};

inline DiscreteTriple zero_triple(const Mesh& mesh, const ReferenceElement& ref) {
  DiscreteTriple t;
  t.q.assign(static_cast<std::size_t>(mesh.n_elements()) * 2 * ref.dim(), 0.0);
  t.u.assign(static_cast<std::size_t>(mesh.n_elements()) * ref.dim(), 0.0);
  t.uhat.assign(static_cast<std::size_t>(mesh.n_faces()) * ref.edge_dim(), 0.0);
  return t;
}

inline DiscreteTriple random_triple(const Mesh& mesh, const ReferenceElement& ref, std::mt19937& rng,
                                    bool zero_boundary_trace = false) {
  DiscreteTriple t = zero_triple(mesh, ref);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (double& v : t.q) v = unif(rng);
  for (double& v : t.u) v = unif(rng);
  for (double& v : t.uhat) v = unif(rng);
  if (zero_boundary_trace)
    for (int f : mesh.boundary_faces)
      for (int i = 0; i < ref.edge_dim(); ++i) t.uhat[static_cast<std::size_t>(f) * ref.edge_dim() + i] = 0.0;
  return t;
}

/// Direct quadrature of the HDG bilinear form
///   B(q,u,uhat; v,w,what) = (c q, v) - (u, div v) + <uhat, v.n>
///                           - (div q, w) - <tau (u - uhat), w - what> + <q.n, what>
/// summed over all elements; `trial` supplies (q,u,uhat), `test` (v,w,what).
inline double eval_bform(const Mesh& mesh, const ReferenceElement& ref, double tau,
                         const Coefficient& c, const DiscreteTriple& trial,
                         const DiscreteTriple& test) {
  const int m = ref.dim();
  const int nf = ref.edge_dim();
  double total = 0.0;
  const TriangleRule& tq = ref.triangle_rule();
  const DenseMatrix& B = ref.basis_at_quad();
  const EdgeRule& eq = ref.edge_rule();
  const DenseMatrix& psi = ref.edge_basis_at_quad();
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto verts = mesh.triangle_vertices(e);
    const AffineMap map = AffineMap::from_triangle(verts[0], verts[1], verts[2]);
    const double* qT = trial.q.data() + static_cast<std::size_t>(e) * 2 * m;
    const double* uT = trial.u.data() + static_cast<std::size_t>(e) * m;
    const double* qS = test.q.data() + static_cast<std::size_t>(e) * 2 * m;
    const double* uS = test.u.data() + static_cast<std::size_t>(e) * m;
    for (int p = 0; p < tq.size(); ++p) {
      const double wq = tq.w[p] * map.det;
      double qTx = 0, qTy = 0, qSx = 0, qSy = 0, uTv = 0, uSv = 0;
      double divT = 0, divS = 0;
      for (int i = 0; i < m; ++i) {
        const double bi = B(p, i);
        qTx += qT[i] * bi;
        qTy += qT[m + i] * bi;
        qSx += qS[i] * bi;
        qSy += qS[m + i] * bi;
        uTv += uT[i] * bi;
        uSv += uS[i] * bi;
        const auto g = map.push_gradient(ref.gradx_at_quad()(p, i), ref.grady_at_quad()(p, i));
        divT += qT[i] * g[0] + qT[m + i] * g[1];
        divS += qS[i] * g[0] + qS[m + i] * g[1];
      }
      const auto xy = map.map(tq.x[p], tq.y[p]);
      const auto cv = c(xy[0], xy[1]);
      const double cqx = cv[0] * qTx + cv[1] * qTy;
      const double cqy = cv[2] * qTx + cv[3] * qTy;
      total += wq * (cqx * qSx + cqy * qSy);  // (c q, v)
      total -= wq * uTv * divS;               // -(u, div v)
      total -= wq * divT * uSv;               // -(div q, w)
    }
    for (int le = 0; le < 3; ++le) {
      const int fidx = mesh.element_faces[e][le];
      const Face& face = mesh.faces[fidx];
      const bool reversed = mesh.element_face_sign[e][le] < 0;
      const auto n = mesh.outward_normal(e, le);
      const DenseMatrix& phi = ref.basis_at_edge_quad(le, reversed);
      const double* hT = trial.uhat.data() + static_cast<std::size_t>(fidx) * nf;
      const double* hS = test.uhat.data() + static_cast<std::size_t>(fidx) * nf;
      for (int p = 0; p < eq.size(); ++p) {
        const double wq = eq.w[p] * face.length;
        double qTn = 0, qSn = 0, uTv = 0, uSv = 0, hTv = 0, hSv = 0;
        for (int i = 0; i < m; ++i) {
          const double bi = phi(p, i);
          const double* qTe = trial.q.data() + static_cast<std::size_t>(e) * 2 * m;
          const double* qSe = test.q.data() + static_cast<std::size_t>(e) * 2 * m;
          qTn += (qTe[i] * n[0] + qTe[m + i] * n[1]) * bi;
          qSn += (qSe[i] * n[0] + qSe[m + i] * n[1]) * bi;
          uTv += trial.u[static_cast<std::size_t>(e) * m + i] * bi;
          uSv += test.u[static_cast<std::size_t>(e) * m + i] * bi;
        }
        for (int i = 0; i < nf; ++i) {
          hTv += hT[i] * psi(p, i);
          hSv += hS[i] * psi(p, i);
        }
        total += wq * hTv * qSn;                                // <uhat, v.n>
        total -= wq * tau * (uTv - hTv) * (uSv - hSv);          // -<tau(u-uhat), w-what>
        total += wq * qTn * hSv;                                // <q.n, what>
      }
    }
  }
  return total;
}

/// Right side of the energy identity: (c q, q) + <tau (u - uhat), u - uhat>.
inline double energy_rhs(const Mesh& mesh, const ReferenceElement& ref, double tau,
                         const Coefficient& c, const DiscreteTriple& t) {
  const int m = ref.dim();
  const int nf = ref.edge_dim();
  double total = 0.0;
  const TriangleRule& tq = ref.triangle_rule();
  const DenseMatrix& B = ref.basis_at_quad();
  const EdgeRule& eq = ref.edge_rule();
  const DenseMatrix& psi = ref.edge_basis_at_quad();
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto verts = mesh.triangle_vertices(e);
    const AffineMap map = AffineMap::from_triangle(verts[0], verts[1], verts[2]);
    const double* qe = t.q.data() + static_cast<std::size_t>(e) * 2 * m;
    for (int p = 0; p < tq.size(); ++p) {
      double qx = 0, qy = 0;
      for (int i = 0; i < m; ++i) {
        qx += qe[i] * B(p, i);
        qy += qe[m + i] * B(p, i);
      }
      const auto xy = map.map(tq.x[p], tq.y[p]);
      const auto cv = c(xy[0], xy[1]);
      total += tq.w[p] * map.det * (qx * (cv[0] * qx + cv[1] * qy) + qy * (cv[2] * qx + cv[3] * qy));
    }
    for (int le = 0; le < 3; ++le) {
      const int fidx = mesh.element_faces[e][le];
      const DenseMatrix& phi = ref.basis_at_edge_quad(le, mesh.element_face_sign[e][le] < 0);
      for (int p = 0; p < eq.size(); ++p) {
        double uv = 0, hv = 0;
        for (int i = 0; i < m; ++i) uv += t.u[static_cast<std::size_t>(e) * m + i] * phi(p, i);
        for (int i = 0; i < nf; ++i)
          hv += t.uhat[static_cast<std::size_t>(fidx) * nf + i] * psi(p, i);
        total += eq.w[p] * mesh.faces[fidx].length * tau * (uv - hv) * (uv - hv);
      }
    }
  }
  return total;
}

/// Flip the sign of the scalar and trace parts: the energy-identity test
/// function (q, -u, -uhat).
inline DiscreteTriple flip_scalar_parts(const DiscreteTriple& t) {
  DiscreteTriple out = t;
  for (double& v : out.u) v = -v;
  for (double& v : out.uhat) v = -v;
  return out;
}

/// Unknown layout of the uncondensed system: all q, then all u, then the
/// trace coefficients of interior faces.
struct UncondensedLayout {
  int m = 0, nf = 0, n_elem = 0;
  std::vector<int> interior_faces;
  std::vector<int> face_slot;  // face -> slot among interior faces, or -1

  UncondensedLayout(const Mesh& mesh, const ReferenceElement& ref)
      : m(ref.dim()), nf(ref.edge_dim()), n_elem(mesh.n_elements()), face_slot(mesh.n_faces(), -1) {
    for (int f = 0; f < mesh.n_faces(); ++f)
      if (!mesh.faces[f].is_boundary()) {
        face_slot[f] = static_cast<int>(interior_faces.size());
        interior_faces.push_back(f);
      }
  }

  int n_q() const { return n_elem * 2 * m; }
  int n_u() const { return n_elem * m; }
  int n_hat() const { return static_cast<int>(interior_faces.size()) * nf; }
  int size() const { return n_q() + n_u() + n_hat(); }

  DiscreteTriple unit(const Mesh& mesh, const ReferenceElement& ref, int index) const {
    DiscreteTriple t = zero_triple(mesh, ref);
    if (index < n_q()) {
      t.q[index] = 1.0;
    } else if (index < n_q() + n_u()) {
      t.u[index - n_q()] = 1.0;
    } else {
      const int h = index - n_q() - n_u();
      const int f = interior_faces[h / nf];
      t.uhat[static_cast<std::size_t>(f) * nf + (h % nf)] = 1.0;
    }
    return t;
  }

  DiscreteTriple from_vector(const Mesh& mesh, const ReferenceElement& ref,
                             std::span<const double> x,
                             std::span<const double> boundary_uhat_full = {}) const {
    DiscreteTriple t = zero_triple(mesh, ref);
    std::copy(x.begin(), x.begin() + n_q(), t.q.begin());
    std::copy(x.begin() + n_q(), x.begin() + n_q() + n_u(), t.u.begin());
    for (std::size_t s = 0; s < interior_faces.size(); ++s)
      for (int i = 0; i < nf; ++i)
        t.uhat[static_cast<std::size_t>(interior_faces[s]) * nf + i] = x[n_q() + n_u() + s * nf + i];
    if (!boundary_uhat_full.empty())
      for (int f : mesh.boundary_faces)
        for (int i = 0; i < nf; ++i)
          t.uhat[static_cast<std::size_t>(f) * nf + i] = boundary_uhat_full[static_cast<std::size_t>(f) * nf + i];
    return t;
  }
};

/// Dense uncondensed HDG system assembled purely from bilinear-form
/// evaluations: row i, column j is B(unit_j; unit_i); the right-hand side is
/// -(f, w_i) minus the lift of the boundary datum.
struct DenseHdgSystem {
  UncondensedLayout layout;
  DenseMatrix matrix;
  std::vector<double> rhs;

  DenseHdgSystem(const Mesh& mesh, const ReferenceElement& ref, double tau, const Coefficient& c,
                 const ScalarField& f, const DiscreteTriple& boundary_data)
      : layout(mesh, ref), matrix(layout.size(), layout.size()), rhs(layout.size(), 0.0) {
    const int n = layout.size();
    std::vector<DiscreteTriple> units;
    units.reserve(n);
    for (int j = 0; j < n; ++j) units.push_back(layout.unit(mesh, ref, j));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) matrix(i, j) = eval_bform(mesh, ref, tau, c, units[j], units[i]);

    // -(f, w_i) for scalar test rows, then subtract the boundary lift.
    const TriangleRule& tq = ref.triangle_rule();
    const DenseMatrix& B = ref.basis_at_quad();
    for (int e = 0; e < mesh.n_elements(); ++e) {
      const auto verts = mesh.triangle_vertices(e);
      const AffineMap map = AffineMap::from_triangle(verts[0], verts[1], verts[2]);
      for (int p = 0; p < tq.size(); ++p) {
        const auto xy = map.map(tq.x[p], tq.y[p]);
        const double wf = tq.w[p] * map.det * f(xy[0], xy[1]);
        for (int i = 0; i < layout.m; ++i)
          rhs[layout.n_q() + e * layout.m + i] -= wf * B(p, i);
      }
    }
    for (int i = 0; i < n; ++i)
      rhs[i] -= eval_bform(mesh, ref, tau, c, boundary_data, units[i]);
  }

  DiscreteTriple solve(const Mesh& mesh, const ReferenceElement& ref,
                       const DiscreteTriple& boundary_data) const {
    const std::vector<double> x = dense_solve(matrix, rhs);
    DiscreteTriple t = layout.from_vector(mesh, ref, x, boundary_data.uhat);
    return t;
  }
};

}  // namespace hdglab::testsupport
