#include "hdglab/hdg_solver.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hdglab/errors.hpp"

namespace hdglab {

HdgSystem::HdgSystem(const Mesh& mesh, int degree, Coefficient c, StabilizationSpec tau)
    : mesh_(&mesh),
      ref_(std::make_shared<ReferenceElement>(degree)),
      c_(std::move(c)),
      tau_(tau),
      locals_(mesh, *ref_, c_, tau_) {
  const int nf = ref_->edge_dim();
  face_dof_.assign(mesh.n_faces(), -1);
  int counter = 0;
  for (int f = 0; f < mesh.n_faces(); ++f)
    if (!mesh.faces[f].is_boundary()) face_dof_[f] = nf * counter++;
  n_dofs_ = nf * counter;

  // Elementwise Schur scatter; only the lower triangle in global indexing is
  // emitted, with the tiny elementwise asymmetry averaged away.
  std::vector<int> ti, tj;
  std::vector<double> tv;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const LocalOperators& ops = locals_[e];
    const DenseMatrix& S = ops.schur;
    const double scale = std::max(S.max_abs(), 1e-300);
    for (int a = 0; a < 3; ++a) {
      const int fa = mesh.element_faces[e][a];
      if (face_dof_[fa] < 0) continue;
      for (int b = 0; b < 3; ++b) {
        const int fb = mesh.element_faces[e][b];
        if (face_dof_[fb] < 0) continue;
        for (int i = 0; i < nf; ++i) {
          for (int j = 0; j < nf; ++j) {
            const int gi = face_dof_[fa] + i;
            const int gj = face_dof_[fb] + j;
            if (gi < gj) continue;
            const double sij = S(a * nf + i, b * nf + j);
            const double sji = S(b * nf + j, a * nf + i);
            if (std::abs(sij - sji) > 1e-12 * scale)
              fail(ErrorCode::not_spd, "element Schur block lost symmetry");
            tv.push_back(0.5 * (sij + sji));
            ti.push_back(gi);
            tj.push_back(gj);
          }
        }
      }
    }
  }
  matrix_ = sparse_from_triplets(n_dofs_, ti, tj, tv);
}

HdgSystem::ElementLoad HdgSystem::load_from_function(const ScalarField& f) const {
  const Mesh* mesh = mesh_;
  auto ref = ref_;
  return [mesh, ref, f](int e, std::span<double> w_load) {
    const auto verts = mesh->triangle_vertices(e);
    const AffineMap map = AffineMap::from_triangle(verts[0], verts[1], verts[2]);
    const TriangleRule& tq = ref->triangle_rule();
    const DenseMatrix& B = ref->basis_at_quad();
    std::fill(w_load.begin(), w_load.end(), 0.0);
    for (int p = 0; p < tq.size(); ++p) {
      const auto xy = map.map(tq.x[p], tq.y[p]);
      const double wf = tq.w[p] * map.det * f(xy[0], xy[1]);
      for (std::size_t i = 0; i < w_load.size(); ++i) w_load[i] += wf * B(p, static_cast<int>(i));
    }
  };
}

HdgSystem::ElementLoad HdgSystem::load_from_coefficients(std::span<const double> coeffs,
                                                         double scale) const {
  // The reference basis is orthonormal, so (field, phi_i)_K = det * coeff_i.
  const Mesh* mesh = mesh_;
  const double* data = coeffs.data();
  const int m = ref_->dim();
  return [mesh, data, m, scale](int e, std::span<double> w_load) {
    const auto verts = mesh->triangle_vertices(e);
    const AffineMap map = AffineMap::from_triangle(verts[0], verts[1], verts[2]);
    for (int i = 0; i < m; ++i) w_load[i] = scale * map.det * data[static_cast<std::size_t>(e) * m + i];
  };
}

HdgSystem::ElementLoad HdgSystem::load_from_difference(std::span<const double> coeffs,
                                                       const ScalarField& minus) const {
  ElementLoad direct = load_from_coefficients(coeffs, 1.0);
  ElementLoad fn = load_from_function(minus);
  const int m = ref_->dim();
  return [direct, fn, m](int e, std::span<double> w_load) {
    direct(e, w_load);
    std::vector<double> sub(m);
    fn(e, sub);
    for (int i = 0; i < m; ++i) w_load[i] -= sub[i];
  };
}

std::vector<double> HdgSystem::project_boundary_datum(const ScalarField& g) const {
  const int nf = ref_->edge_dim();
  std::vector<double> out(mesh_->boundary_faces.size() * static_cast<std::size_t>(nf));
  for (std::size_t b = 0; b < mesh_->boundary_faces.size(); ++b) {
    const auto coeffs = l2_project_face(g, *mesh_, mesh_->boundary_faces[b], *ref_);
    std::copy(coeffs.begin(), coeffs.end(), out.begin() + b * nf);
  }
  return out;
}

namespace {

// Gather the 3-face trace vector of an element: skeleton values on interior
// faces, supplied data on boundary faces.
void gather_uhat(const Mesh& mesh, const std::vector<int>& face_dof, int nf, int e,
                 std::span<const double> skeleton, std::span<const double> boundary_uhat,
                 std::span<const int> boundary_index, std::span<double> out) {
  for (int le = 0; le < 3; ++le) {
    const int f = mesh.element_faces[e][le];
    if (face_dof[f] >= 0) {
      for (int i = 0; i < nf; ++i) out[le * nf + i] = skeleton[face_dof[f] + i];
    } else {
      const int b = boundary_index[f];
      for (int i = 0; i < nf; ++i)
        out[le * nf + i] = boundary_uhat.empty() ? 0.0 : boundary_uhat[b * nf + i];
    }
  }
}

std::vector<int> build_boundary_index(const Mesh& mesh) {
  std::vector<int> idx(mesh.n_faces(), -1);
  for (std::size_t b = 0; b < mesh.boundary_faces.size(); ++b)
    idx[mesh.boundary_faces[b]] = static_cast<int>(b);
  return idx;
}

}  // namespace

std::vector<double> HdgSystem::assemble_rhs(const ElementLoad& load,
                                            std::span<const double> boundary_uhat) const {
  const int nf = ref_->edge_dim();
  const int m = ref_->dim();
  std::vector<double> rhs(n_dofs_, 0.0);
  const std::vector<int> bindex = build_boundary_index(*mesh_);
  if (!boundary_uhat.empty() &&
      static_cast<int>(boundary_uhat.size()) != n_boundary_dofs())
    fail(ErrorCode::invalid_parameter, "boundary data size mismatch");

  std::vector<double> local_load(3 * m, 0.0);
  std::vector<double> gk;
  for (int e = 0; e < mesh_->n_elements(); ++e) {
    bool has_interior = false, has_boundary = false;
    for (int le = 0; le < 3; ++le) {
      if (face_dof_[mesh_->element_faces[e][le]] >= 0) has_interior = true;
      else has_boundary = true;
    }
    if (!has_interior) continue;
    const bool need_load = static_cast<bool>(load);
    const bool need_lift = has_boundary && !boundary_uhat.empty();
    if (!need_load && !need_lift) continue;

    const LocalOperators& ops = locals_[e];
    if (need_load) {
      std::fill(local_load.begin(), local_load.end(), 0.0);
      load(e, std::span<double>(local_load.data() + 2 * m, static_cast<std::size_t>(m)));
      gk = condense(ops, local_load).g;
    } else {
      gk.assign(3 * nf, 0.0);
    }
    for (int a = 0; a < 3; ++a) {
      const int fa = mesh_->element_faces[e][a];
      if (face_dof_[fa] < 0) continue;
      for (int i = 0; i < nf; ++i) {
        double v = gk[a * nf + i];
        if (need_lift) {
          for (int b = 0; b < 3; ++b) {
            const int fb = mesh_->element_faces[e][b];
            if (face_dof_[fb] >= 0) continue;
            const int bi = bindex[fb];
            for (int j = 0; j < nf; ++j)
              v -= ops.schur(a * nf + i, b * nf + j) * boundary_uhat[bi * nf + j];
          }
        }
        rhs[face_dof_[fa] + i] += v;
      }
    }
  }
  return rhs;
}

std::vector<double> HdgSystem::solve_skeleton(std::span<const double> rhs, double tol,
                                              SpdReport* report) const {
  SpdOptions opts;
  opts.tol = tol;
  opts.block_size = ref_->edge_dim();
  return spd_solve(matrix_, rhs, opts, report);
}

FieldSolution HdgSystem::recover_fields(const ElementLoad& load, std::span<const double> skeleton,
                                        std::span<const double> boundary_uhat,
                                        std::span<const int> elements) const {
  const int m = ref_->dim();
  const int nf = ref_->edge_dim();
  FieldSolution sol;
  sol.mesh = mesh_;
  sol.ref = ref_;
  sol.degree = ref_->degree();
  sol.tau = tau_.tau;
  sol.q.assign(static_cast<std::size_t>(mesh_->n_elements()) * 2 * m, 0.0);
  sol.u.assign(static_cast<std::size_t>(mesh_->n_elements()) * m, 0.0);
  sol.uhat.assign(static_cast<std::size_t>(mesh_->n_faces()) * nf, 0.0);

  const std::vector<int> bindex = build_boundary_index(*mesh_);
  for (int f = 0; f < mesh_->n_faces(); ++f) {
    if (face_dof_[f] >= 0) {
      for (int i = 0; i < nf; ++i) sol.uhat[static_cast<std::size_t>(f) * nf + i] = skeleton[face_dof_[f] + i];
    } else if (!boundary_uhat.empty()) {
      for (int i = 0; i < nf; ++i)
        sol.uhat[static_cast<std::size_t>(f) * nf + i] = boundary_uhat[bindex[f] * nf + i];
    }
  }

  std::vector<int> all;
  if (elements.empty()) {
    all.resize(mesh_->n_elements());
    for (int e = 0; e < mesh_->n_elements(); ++e) all[e] = e;
    elements = all;
  }
  const int count = static_cast<int>(elements.size());
#ifdef _OPENMP
  omp_set_num_threads(worker_thread_count());
#pragma omp parallel
#endif
  {
    std::vector<double> local_load(3 * m, 0.0);
    std::vector<double> uhat_local(3 * nf);
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
    for (int idx = 0; idx < count; ++idx) {
      const int e = elements[idx];
      std::fill(local_load.begin(), local_load.end(), 0.0);
      if (load) load(e, std::span<double>(local_load.data() + 2 * m, static_cast<std::size_t>(m)));
      for (int le = 0; le < 3; ++le) {
        const int f = mesh_->element_faces[e][le];
        for (int i = 0; i < nf; ++i)
          uhat_local[le * nf + i] = sol.uhat[static_cast<std::size_t>(f) * nf + i];
      }
      const RecoveredElement rec = recover(locals_[e], local_load, uhat_local);
      std::copy(rec.q.begin(), rec.q.end(), sol.q.begin() + static_cast<std::size_t>(e) * 2 * m);
      std::copy(rec.u.begin(), rec.u.end(), sol.u.begin() + static_cast<std::size_t>(e) * m);
    }
  }
  return sol;
}

FieldSolution HdgSystem::solve(const ElementLoad& load, std::span<const double> boundary_uhat,
                               double tol, SpdReport* report) const {
  const std::vector<double> rhs = assemble_rhs(load, boundary_uhat);
  const std::vector<double> skeleton = solve_skeleton(rhs, tol, report);
  return recover_fields(load, skeleton, boundary_uhat);
}

FieldSolution solve_poisson(const Mesh& mesh, const ProblemData& data, SpdReport* report) {
  HdgSystem sys(mesh, data.degree, data.c, data.tau);
  const std::vector<double> bdata = sys.project_boundary_datum(data.g);
  return sys.solve(sys.load_from_function(data.f), bdata, 1e-12, report);
}

SkeletonSystem assemble_skeleton(const Mesh& mesh, const ProblemData& data) {
  HdgSystem sys(mesh, data.degree, data.c, data.tau);
  SkeletonSystem out;
  out.matrix = sys.matrix();
  out.rhs = sys.assemble_rhs(sys.load_from_function(data.f), sys.project_boundary_datum(data.g));
  out.face_dof = sys.face_dof();
  return out;
}

double max_local_conservation_residual(const FieldSolution& sol, const ScalarField& f) {
  const Mesh& mesh = *sol.mesh;
  const ReferenceElement& ref = *sol.ref;
  const int m = ref.dim();
  const int nf = ref.edge_dim();
  double worst = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto verts = mesh.triangle_vertices(e);
    const AffineMap map = AffineMap::from_triangle(verts[0], verts[1], verts[2]);
    double f_int = 0.0;
    const TriangleRule& tq = ref.triangle_rule();
    for (int p = 0; p < tq.size(); ++p) {
      const auto xy = map.map(tq.x[p], tq.y[p]);
      f_int += tq.w[p] * map.det * f(xy[0], xy[1]);
    }
    double flux = 0.0, scale = std::abs(f_int);
    const EdgeRule& eq = ref.edge_rule();
    const DenseMatrix& psi = ref.edge_basis_at_quad();
    const auto qe = sol.q_elem(e);
    const auto ue = sol.u_elem(e);
    for (int le = 0; le < 3; ++le) {
      const int fidx = mesh.element_faces[e][le];
      const bool reversed = mesh.element_face_sign[e][le] < 0;
      const auto n = mesh.outward_normal(e, le);
      const DenseMatrix& phi = ref.basis_at_edge_quad(le, reversed);
      const auto uh = sol.uhat_face(fidx);
      const double len = mesh.faces[fidx].length;
      for (int p = 0; p < eq.size(); ++p) {
        double qn = 0.0, uv = 0.0, hv = 0.0;
        for (int i = 0; i < m; ++i) {
          qn += (qe[i] * n[0] + qe[m + i] * n[1]) * phi(p, i);
          uv += ue[i] * phi(p, i);
        }
        for (int i = 0; i < nf; ++i) hv += uh[i] * psi(p, i);
        const double qhat_n = qn + sol.tau * (uv - hv);
        flux += eq.w[p] * len * qhat_n;
        scale += eq.w[p] * len * std::abs(qhat_n);
      }
    }
    worst = std::max(worst, std::abs(flux - f_int) / std::max(scale, 1e-30));
  }
  return worst;
}

double max_flux_continuity_residual(const FieldSolution& sol) {
  const Mesh& mesh = *sol.mesh;
  const ReferenceElement& ref = *sol.ref;
  const int m = ref.dim();
  const int nf = ref.edge_dim();
  std::vector<double> moments(static_cast<std::size_t>(mesh.n_faces()) * nf, 0.0);
  double scale = 0.0;
  const EdgeRule& eq = ref.edge_rule();
  const DenseMatrix& psi = ref.edge_basis_at_quad();
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto qe = sol.q_elem(e);
    const auto ue = sol.u_elem(e);
    for (int le = 0; le < 3; ++le) {
      const int fidx = mesh.element_faces[e][le];
      if (mesh.faces[fidx].is_boundary()) continue;
      const bool reversed = mesh.element_face_sign[e][le] < 0;
      const auto n = mesh.outward_normal(e, le);
      const DenseMatrix& phi = ref.basis_at_edge_quad(le, reversed);
      const auto uh = sol.uhat_face(fidx);
      const double len = mesh.faces[fidx].length;
      for (int p = 0; p < eq.size(); ++p) {
        double qn = 0.0, uv = 0.0, hv = 0.0;
        for (int i = 0; i < m; ++i) {
          qn += (qe[i] * n[0] + qe[m + i] * n[1]) * phi(p, i);
          uv += ue[i] * phi(p, i);
        }
        for (int i = 0; i < nf; ++i) hv += uh[i] * psi(p, i);
        const double qhat_n = qn + sol.tau * (uv - hv);
        for (int j = 0; j < nf; ++j)
          moments[static_cast<std::size_t>(fidx) * nf + j] += eq.w[p] * len * qhat_n * psi(p, j);
        scale = std::max(scale, std::abs(qhat_n) * len);
      }
    }
  }
  double worst = 0.0;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    if (mesh.faces[f].is_boundary()) continue;
    for (int j = 0; j < nf; ++j)
      worst = std::max(worst, std::abs(moments[static_cast<std::size_t>(f) * nf + j]));
  }
  return worst / std::max(scale, 1e-30);
}

}  // namespace hdglab
