// Element-by-element superconvergent postprocessing: u*_h in P^{k+1}(K)
// solves the local Neumann-type stiffness system driven by -c q_h, pinned by
// matching the mean of u_h.
#pragma once

#include <memory>

#include "hdglab/fields.hpp"
#include "hdglab/hdg_solver.hpp"
#include "hdglab/reference_element.hpp"

namespace hdglab {

/// Augments `solution` with u*_h coefficients. `ref_star` must have degree
/// k+1; pass nullptr to build one (quadrature exactness 2(k+1)+1 or better).
void postprocess(const Mesh& mesh, std::shared_ptr<const ReferenceElement> ref_star,
                 FieldSolution& solution, const Coefficient& c);

}  // namespace hdglab
