// Per-element HDG machinery: local blocks of the HDG bilinear form, static
// condensation onto the face trace, the HDG projection, and local L2
// projections.
//
// Local unknown layout: q coefficients (2m, x-component block then
// y-component block), then u coefficients (m), with m = dim P^k(K). Trace
// coefficients are grouped per local edge, k+1 each, in the face's canonical
// parameterization (from Face::v0 to Face::v1).
#pragma once

#include <memory>
#include <span>
#include <vector>

#include "hdglab/fields.hpp"
#include "hdglab/linalg.hpp"
#include "hdglab/mesh.hpp"
#include "hdglab/reference_element.hpp"

namespace hdglab {

struct StabilizationSpec {
  double tau = 1.0;
};

struct LocalOperators {
  int element = -1;
  int m = 0;   // dim P^k(K)
  int nf = 0;  // k+1 trace functions per face
  AffineMap map;

  DenseMatrix A_qq;      // (c q, v)_K                     2m x 2m
  DenseMatrix A_qu;      // -(u, div v)_K                  2m x m
  DenseMatrix A_qhat;    // <uhat, v.n>_dK                 2m x 3nf
  DenseMatrix A_uu;      // <tau u, w>_dK                   m x m
  DenseMatrix A_uhat;    // <tau uhat, w>_dK                m x 3nf
  DenseMatrix A_hathat;  // <tau uhat, what>_dK           3nf x 3nf

  // Condensation data for the interior system A x = F - B uhat with
  // A = [[A_qq, A_qu], [-A_qu^T, A_uu]] and B = [[A_qhat], [-A_uhat]].
  LuFactor interior_lu;
  DenseMatrix ainv_b;  // A^{-1} B
  DenseMatrix cmat;    // C = [A_qhat^T  A_uhat^T]
  DenseMatrix schur;   // S_K = C A^{-1} B + A_hathat

  int n_interior() const { return 3 * m; }
  int n_trace() const { return 3 * nf; }
};

/// Assemble all local blocks and the condensation maps for one element.
LocalOperators build_local_operators(const Mesh& mesh, int element, const ReferenceElement& ref,
                                     const Coefficient& c, const StabilizationSpec& tau);

struct Condensed {
  const DenseMatrix& S;   // Schur block, symmetric
  std::vector<double> g;  // C A^{-1} F
};

/// Schur complement pieces for a given interior load (3m entries).
Condensed condense(const LocalOperators& ops, std::span<const double> local_load);

/// Interior solve (q, u) = A^{-1}(F - B uhat); uhat covers all three faces.
struct RecoveredElement {
  std::vector<double> q;  // 2m
  std::vector<double> u;  // m
};
RecoveredElement recover(const LocalOperators& ops, std::span<const double> local_load,
                         std::span<const double> uhat);

/// HDG projection of a smooth pair (q, u): volume moments against P^{k-1}
/// plus the face moment condition on q.n + tau u. For k = 0 only the face
/// conditions apply.
struct HdgProjection {
  std::vector<double> q;  // 2m
  std::vector<double> u;  // m
};
HdgProjection hdg_project(const Mesh& mesh, int element, const ReferenceElement& ref,
                          const VectorField& q_exact, const ScalarField& u_exact, double tau);

/// L2 projection onto P^l(K); the degree is that of `ref`.
std::vector<double> l2_project_element(const ScalarField& f, const Mesh& mesh, int element,
                                       const ReferenceElement& ref);

/// L2 projection onto P^k(F) in the face's canonical parameterization.
std::vector<double> l2_project_face(const ScalarField& f, const Mesh& mesh, int face,
                                    const ReferenceElement& ref);

/// Shared-geometry provider: elements with identical Jacobians and face
/// traversal directions reuse one LocalOperators instance when the diffusion
/// coefficient is constant. Shared instances keep the representative
/// element's index and translation, so position-dependent work must use the
/// actual element's affine map, not the stored one.
class LocalOperatorSet {
public:
  LocalOperatorSet(const Mesh& mesh, const ReferenceElement& ref, const Coefficient& c,
                   const StabilizationSpec& tau);

  const LocalOperators& operator[](int element) const { return *per_element_[element]; }
  int distinct_count() const { return distinct_; }

private:
  std::vector<std::shared_ptr<const LocalOperators>> per_element_;
  int distinct_ = 0;
};

}  // namespace hdglab
