// Global assembly of the condensed skeleton system, Dirichlet data
// imposition, solve, and elementwise recovery of (q_h, u_h).
#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "hdglab/fields.hpp"
#include "hdglab/hdg_local.hpp"
#include "hdglab/linalg.hpp"
#include "hdglab/mesh.hpp"
#include "hdglab/reference_element.hpp"

namespace hdglab {

struct ProblemData {
  Coefficient c;
  ScalarField f;
  ScalarField g;  // Dirichlet datum on the boundary
  StabilizationSpec tau;
  int degree = 1;
};

struct FieldSolution {
  const Mesh* mesh = nullptr;
  std::shared_ptr<const ReferenceElement> ref;       // P^k tables
  std::shared_ptr<const ReferenceElement> ref_star;  // P^{k+1} tables once postprocessed
  int degree = 0;
  double tau = 1.0;
  std::vector<double> q;      // 2m per element, x block then y block
  std::vector<double> u;      // m per element
  std::vector<double> uhat;   // k+1 per face; boundary faces carry the datum
  std::vector<double> ustar;  // (k+2)(k+3)/2 per element after postprocessing

  int m() const { return triangle_space_dim(degree); }
  int nf() const { return degree + 1; }
  int mstar() const { return triangle_space_dim(degree + 1); }
  bool has_ustar() const { return !ustar.empty(); }

  std::span<const double> q_elem(int e) const { return {q.data() + static_cast<std::size_t>(e) * 2 * m(), static_cast<std::size_t>(2 * m())}; }
  std::span<const double> u_elem(int e) const { return {u.data() + static_cast<std::size_t>(e) * m(), static_cast<std::size_t>(m())}; }
  std::span<const double> uhat_face(int f) const { return {uhat.data() + static_cast<std::size_t>(f) * nf(), static_cast<std::size_t>(nf())}; }
  std::span<const double> ustar_elem(int e) const { return {ustar.data() + static_cast<std::size_t>(e) * mstar(), static_cast<std::size_t>(mstar())}; }
};

/// Reusable condensed system for one (mesh, degree, c, tau): the sparse
/// skeleton matrix is assembled once and solved for many right-hand sides,
/// which the boundary-control solver leans on.
class HdgSystem {
public:
  HdgSystem(const Mesh& mesh, int degree, Coefficient c, StabilizationSpec tau);

  const Mesh& mesh() const { return *mesh_; }
  const ReferenceElement& ref() const { return *ref_; }
  std::shared_ptr<const ReferenceElement> ref_ptr() const { return ref_; }
  const LocalOperatorSet& locals() const { return locals_; }
  const StabilizationSpec& tau() const { return tau_; }
  const Coefficient& coefficient() const { return c_; }

  int n_dofs() const { return n_dofs_; }
  const SparseSymmetric& matrix() const { return matrix_; }
  /// face index -> skeleton dof base, or -1 for boundary faces.
  const std::vector<int>& face_dof() const { return face_dof_; }

  /// Volume load: fills the m moments (source, phi_i)_K for an element.
  /// A null load means zero source.
  using ElementLoad = std::function<void(int element, std::span<double> w_load)>;
  ElementLoad load_from_function(const ScalarField& f) const;
  /// Moments of a discrete P^k field given by coefficients (m per element).
  ElementLoad load_from_coefficients(std::span<const double> coeffs, double scale) const;
  /// Moments of (discrete field - analytic field), the adjoint source shape.
  ElementLoad load_from_difference(std::span<const double> coeffs, const ScalarField& minus) const;

  /// L2-projected Dirichlet datum, one block of k+1 coefficients per
  /// boundary face in mesh.boundary_faces order.
  std::vector<double> project_boundary_datum(const ScalarField& g) const;
  int n_boundary_dofs() const { return static_cast<int>(mesh_->boundary_faces.size()) * ref_->edge_dim(); }

  std::vector<double> assemble_rhs(const ElementLoad& load, std::span<const double> boundary_uhat) const;
  std::vector<double> solve_skeleton(std::span<const double> rhs, double tol = 1e-12,
                                     SpdReport* report = nullptr) const;
  FieldSolution recover_fields(const ElementLoad& load, std::span<const double> skeleton,
                               std::span<const double> boundary_uhat,
                               std::span<const int> elements = {}) const;

  FieldSolution solve(const ElementLoad& load, std::span<const double> boundary_uhat,
                      double tol = 1e-12, SpdReport* report = nullptr) const;

private:
  const Mesh* mesh_;
  std::shared_ptr<const ReferenceElement> ref_;
  Coefficient c_;
  StabilizationSpec tau_;
  LocalOperatorSet locals_;
  std::vector<int> face_dof_;
  int n_dofs_ = 0;
  SparseSymmetric matrix_;
};

/// Spec entry points.
FieldSolution solve_poisson(const Mesh& mesh, const ProblemData& data, SpdReport* report = nullptr);

struct SkeletonSystem {
  SparseSymmetric matrix;
  std::vector<double> rhs;
  std::vector<int> face_dof;
};
SkeletonSystem assemble_skeleton(const Mesh& mesh, const ProblemData& data);

/// Max over elements of the relative residual of <qhat.n, 1>_dK = (f, 1)_K.
double max_local_conservation_residual(const FieldSolution& sol, const ScalarField& f);
/// Max relative moment residual of the flux-continuity equation on interior faces.
double max_flux_continuity_residual(const FieldSolution& sol);

}  // namespace hdglab
