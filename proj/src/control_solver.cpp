#include "hdglab/control_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hdglab/errors.hpp"
#include "hdglab/linalg.hpp"

namespace hdglab {

ControlProblemData manufactured_control_data(const ExactScalar& u_exact, const ExactScalar& z_exact,
                                             double gamma) {
  if (!(gamma > 0.0)) fail(ErrorCode::invalid_parameter, "regularization weight must be positive");
  // Boundary sample points of the unit square with outward normals.
  constexpr int per_side = 25;
  double worst = 0.0;
  for (int i = 0; i < per_side; ++i) {
    const double t = (i + 0.5) / per_side;
    const struct { double x, y, nx, ny; } samples[4] = {
        {t, 0.0, 0.0, -1.0}, {1.0, t, 1.0, 0.0}, {t, 1.0, 0.0, 1.0}, {0.0, t, -1.0, 0.0}};
    for (const auto& s : samples) {
      const auto gz = z_exact.gradient(s.x, s.y);
      const double dn_z = gz[0] * s.nx + gz[1] * s.ny;
      worst = std::max(worst, std::abs(z_exact.value(s.x, s.y)));
      worst = std::max(worst, std::abs(u_exact.value(s.x, s.y) - dn_z / gamma));
    }
  }
  if (worst > 1e-10)
    throw Error(ErrorCode::inconsistent_manufactured_data,
                "optimality system inconsistent at boundary samples, defect " + std::to_string(worst));

  ControlProblemData data;
  data.gamma = gamma;
  data.f = [lap = u_exact.laplacian](double x, double y) { return -lap(x, y); };
  data.u_d = [uv = u_exact.value, lz = z_exact.laplacian](double x, double y) {
    return uv(x, y) + lz(x, y);
  };
  data.exact = ControlExact{u_exact.value, z_exact.value, u_exact.gradient, z_exact.gradient};
  return data;
}

double exact_control_on_face(const Mesh& mesh, int face, const ControlExact& exact, double gamma,
                             double x, double y) {
  const Face& f = mesh.faces[face];
  const auto gz = exact.grad_z(x, y);
  return (gz[0] * f.nx + gz[1] * f.ny) / gamma;  // boundary normals point outward
}

namespace {

// Moments <p.n + tau z, psi_j>_F on every boundary face, traced from the
// adjacent element. This is the numerical flux of the adjoint since its
// boundary trace is zero.
std::vector<double> boundary_flux_moments(const HdgSystem& sys, const FieldSolution& adj) {
  const Mesh& mesh = sys.mesh();
  const ReferenceElement& ref = sys.ref();
  const int m = ref.dim();
  const int nf = ref.edge_dim();
  const double tau = sys.tau().tau;
  const EdgeRule& eq = ref.edge_rule();
  const DenseMatrix& psi = ref.edge_basis_at_quad();
  std::vector<double> out(mesh.boundary_faces.size() * static_cast<std::size_t>(nf), 0.0);
  for (std::size_t b = 0; b < mesh.boundary_faces.size(); ++b) {
    const int fidx = mesh.boundary_faces[b];
    const Face& face = mesh.faces[fidx];
    const int e = face.left;
    int le = 0;
    while (mesh.element_faces[e][le] != fidx) ++le;
    const auto n = mesh.outward_normal(e, le);
    const DenseMatrix& phi = ref.basis_at_edge_quad(le, mesh.element_face_sign[e][le] < 0);
    const auto pe = adj.q_elem(e);
    const auto ze = adj.u_elem(e);
    for (int p = 0; p < eq.size(); ++p) {
      double pn = 0.0, zv = 0.0;
      for (int i = 0; i < m; ++i) {
        pn += (pe[i] * n[0] + pe[m + i] * n[1]) * phi(p, i);
        zv += ze[i] * phi(p, i);
      }
      const double w = eq.w[p] * face.length * (pn + tau * zv);
      for (int j = 0; j < nf; ++j) out[b * nf + j] += w * psi(p, j);
    }
  }
  return out;
}

// Boundary mass matrix action and its exact block inverse.
struct BoundaryMass {
  int nf = 0;
  std::vector<DenseMatrix> grams;
  std::vector<LuFactor> inv;

  explicit BoundaryMass(const HdgSystem& sys) {
    const Mesh& mesh = sys.mesh();
    const ReferenceElement& ref = sys.ref();
    nf = ref.edge_dim();
    const EdgeRule& eq = ref.edge_rule();
    const DenseMatrix& psi = ref.edge_basis_at_quad();
    for (int fidx : mesh.boundary_faces) {
      DenseMatrix G(nf, nf);
      for (int p = 0; p < eq.size(); ++p)
        for (int i = 0; i < nf; ++i)
          for (int j = 0; j < nf; ++j)
            G(i, j) += eq.w[p] * mesh.faces[fidx].length * psi(p, i) * psi(p, j);
      grams.push_back(G);
      inv.emplace_back(G);
    }
  }

  std::vector<double> apply(std::span<const double> g) const {
    std::vector<double> out(g.size(), 0.0);
    for (std::size_t b = 0; b < grams.size(); ++b)
      for (int i = 0; i < nf; ++i)
        for (int j = 0; j < nf; ++j) out[b * nf + i] += grams[b](i, j) * g[b * nf + j];
    return out;
  }

  void solve_in_place(std::span<double> r) const {
    for (std::size_t b = 0; b < inv.size(); ++b)
      inv[b].solve_in_place(r.subspan(b * nf, nf));
  }
};

std::vector<int> boundary_elements(const Mesh& mesh) {
  std::vector<int> out;
  for (int f : mesh.boundary_faces) out.push_back(mesh.faces[f].left);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// gamma M g + adjoint flux moments of the state driven by g alone.
std::vector<double> apply_reduced_impl(const HdgSystem& sys, const BoundaryMass& mass,
                                       std::span<const int> belems,
                                       std::span<const double> zero_boundary, double gamma,
                                       std::span<const double> g) {
  const std::vector<double> state_rhs = sys.assemble_rhs(nullptr, g);
  const std::vector<double> state_skel = sys.solve_skeleton(state_rhs, 1e-12);
  const FieldSolution state = sys.recover_fields(nullptr, state_skel, g);
  const auto adj_load = sys.load_from_coefficients(state.u, 1.0);
  const std::vector<double> adj_rhs = sys.assemble_rhs(adj_load, zero_boundary);
  const std::vector<double> adj_skel = sys.solve_skeleton(adj_rhs, 1e-12);
  const FieldSolution adj = sys.recover_fields(adj_load, adj_skel, zero_boundary, belems);
  std::vector<double> out = boundary_flux_moments(sys, adj);
  const std::vector<double> mg = mass.apply(g);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += gamma * mg[i];
  return out;
}

}  // namespace

ControlSolution solve_control(const Mesh& mesh, const ControlProblemData& data,
                              SpdReport* inner_report) {
  if (!(data.gamma > 0.0)) fail(ErrorCode::invalid_parameter, "regularization weight must be positive");
  const HdgSystem sys(mesh, data.degree, Coefficient::identity(), data.tau);
  const int nb = sys.n_boundary_dofs();
  const BoundaryMass mass(sys);
  const std::vector<int> belems = boundary_elements(mesh);
  const std::vector<double> zero_boundary(nb, 0.0);

  SpdReport last_inner{};

  // Affine part: state driven by f with zero control, then the adjoint moment
  // load it induces.
  const auto f_load = sys.load_from_function(data.f);
  const FieldSolution u_f = sys.solve(f_load, zero_boundary, 1e-12, &last_inner);
  std::vector<double> lambda_f;
  {
    const auto adj_load = sys.load_from_difference(u_f.u, data.u_d);
    const std::vector<double> rhs = sys.assemble_rhs(adj_load, zero_boundary);
    const std::vector<double> skel = sys.solve_skeleton(rhs, 1e-12, &last_inner);
    const FieldSolution adj = sys.recover_fields(adj_load, skel, zero_boundary, belems);
    lambda_f = boundary_flux_moments(sys, adj);
  }
  std::vector<double> b(nb);
  for (int i = 0; i < nb; ++i) b[i] = -lambda_f[i];

  auto apply_reduced = [&](std::span<const double> g) {
    return apply_reduced_impl(sys, mass, belems, zero_boundary, data.gamma, g);
  };

  // Conjugate gradients on the reduced SPD system, preconditioned by the
  // exact boundary mass.
  std::vector<double> g(nb, 0.0), r(b), z(nb), p(nb), Hp;
  const double bnorm = std::sqrt(dot(b, b));
  int iterations = 0;
  if (bnorm > 0.0) {
    auto precondition = [&](std::span<const double> rin, std::span<double> zout) {
      std::copy(rin.begin(), rin.end(), zout.begin());
      mass.solve_in_place(zout);
      for (double& v : zout) v /= data.gamma;
    };
    precondition(r, z);
    p = z;
    double rz = dot(r, z);
    const int cap = 200 + 2 * static_cast<int>(std::sqrt(static_cast<double>(nb)));
    bool converged = false;
    for (int it = 1; it <= cap; ++it) {
      Hp = apply_reduced(p);
      const double php = dot(p, Hp);
      if (php <= 0.0) fail(ErrorCode::not_spd, "reduced control operator lost positivity");
      const double alpha = rz / php;
      for (int i = 0; i < nb; ++i) {
        g[i] += alpha * p[i];
        r[i] -= alpha * Hp[i];
      }
      iterations = it;
      if (std::sqrt(dot(r, r)) <= 1e-10 * bnorm) {
        converged = true;
        break;
      }
      precondition(r, z);
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (int i = 0; i < nb; ++i) p[i] = z[i] + beta * p[i];
    }
    if (!converged)
      throw IterativeFailure("reduced control CG stalled", std::sqrt(dot(r, r)) / bnorm, iterations);
  }

  // Final state and adjoint at the computed control.
  ControlSolution out;
  out.g = g;
  out.gamma = data.gamma;
  out.reduced_iterations = iterations;
  out.state = sys.solve(f_load, g, 1e-12, &last_inner);
  const auto adj_load = sys.load_from_difference(out.state.u, data.u_d);
  out.adjoint = sys.solve(adj_load, zero_boundary, 1e-12, &last_inner);
  if (inner_report) *inner_report = last_inner;

  // Optimality residual: moments of gamma g_h + p_h.n + tau z_h over the
  // boundary, relative to the size of its two parts.
  const std::vector<double> flux = boundary_flux_moments(sys, out.adjoint);
  const std::vector<double> mg = mass.apply(g);
  double res = 0.0, scale = 0.0;
  for (int i = 0; i < nb; ++i) {
    res += (data.gamma * mg[i] + flux[i]) * (data.gamma * mg[i] + flux[i]);
    scale = std::max({scale, std::abs(flux[i]), std::abs(data.gamma * mg[i])});
  }
  scale = std::max({scale, bnorm, 1e-30});
  out.optimality_residual = std::sqrt(res) / scale;
  return out;
}

std::vector<double> reduced_operator_apply(const Mesh& mesh, const ControlProblemData& data,
                                           std::span<const double> g_coeffs) {
  const HdgSystem sys(mesh, data.degree, Coefficient::identity(), data.tau);
  if (static_cast<int>(g_coeffs.size()) != sys.n_boundary_dofs())
    fail(ErrorCode::invalid_parameter, "control coefficient size mismatch");
  const BoundaryMass mass(sys);
  const std::vector<int> belems = boundary_elements(mesh);
  const std::vector<double> zero_boundary(sys.n_boundary_dofs(), 0.0);
  return apply_reduced_impl(sys, mass, belems, zero_boundary, data.gamma, g_coeffs);
}

double control_objective(const Mesh& mesh, const ControlProblemData& data,
                         std::span<const double> g_coeffs) {
  const HdgSystem sys(mesh, data.degree, Coefficient::identity(), data.tau);
  if (static_cast<int>(g_coeffs.size()) != sys.n_boundary_dofs())
    fail(ErrorCode::invalid_parameter, "control coefficient size mismatch");
  const FieldSolution state = sys.solve(sys.load_from_function(data.f), g_coeffs);

  const ReferenceElement& ref = sys.ref();
  const int m = ref.dim();
  const TriangleRule& tq = ref.triangle_rule();
  const DenseMatrix& B = ref.basis_at_quad();
  double misfit = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto verts = mesh.triangle_vertices(e);
    const AffineMap map = AffineMap::from_triangle(verts[0], verts[1], verts[2]);
    const auto ue = state.u_elem(e);
    for (int p = 0; p < tq.size(); ++p) {
      double uv = 0.0;
      for (int i = 0; i < m; ++i) uv += ue[i] * B(p, i);
      const auto xy = map.map(tq.x[p], tq.y[p]);
      const double d = uv - data.u_d(xy[0], xy[1]);
      misfit += tq.w[p] * map.det * d * d;
    }
  }
  const BoundaryMass mass(sys);
  const std::vector<double> mg = mass.apply(g_coeffs);
  double greg = 0.0;
  for (std::size_t i = 0; i < g_coeffs.size(); ++i) greg += g_coeffs[i] * mg[i];
  return 0.5 * misfit + 0.5 * data.gamma * greg;
}

}  // namespace hdglab
