// HDG discretization of the Dirichlet boundary-control optimality system,
// solved by conjugate gradients on the reduced control unknown: each operator
// application performs one state solve and one adjoint solve on the shared
// condensed system.
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hdglab/fields.hpp"
#include "hdglab/hdg_solver.hpp"
#include "hdglab/mesh.hpp"

namespace hdglab {

struct ExactScalar {
  ScalarField value;
  VectorField gradient;
  ScalarField laplacian;
};

struct ControlExact {
  ScalarField u, z;
  VectorField grad_u, grad_z;  // fluxes: q = -grad u, p = -grad z
};

struct ControlProblemData {
  ScalarField f;
  ScalarField u_d;
  double gamma = 1.0;
  StabilizationSpec tau;
  int degree = 1;
  std::optional<ControlExact> exact;  // attached by the manufactured generator
};

/// Build consistent control-problem data from exact (u, z) on the unit
/// square: f = -lap u, u_d = u + lap z, g = gamma^{-1} dn z. Requires z = 0
/// and u = gamma^{-1} dn z on the boundary, checked at sample points.
ControlProblemData manufactured_control_data(const ExactScalar& u_exact, const ExactScalar& z_exact,
                                             double gamma);

struct ControlSolution {
  FieldSolution state;    // (q_h, u_h, uhat_h); boundary traces carry g_h
  FieldSolution adjoint;  // (p_h, z_h, zhat_h); boundary traces are zero
  std::vector<double> g;  // k+1 coefficients per boundary face
  double gamma = 1.0;
  int reduced_iterations = 0;
  double optimality_residual = 0.0;  // relative moment residual of the gradient equation
};

ControlSolution solve_control(const Mesh& mesh, const ControlProblemData& data,
                              SpdReport* inner_report = nullptr);

/// Discrete objective J(g) = 1/2 |u_h(g) - u_d|^2 + gamma/2 |g|^2_boundary,
/// with u_h(g) the HDG state for control g. Drives the descent property test.
double control_objective(const Mesh& mesh, const ControlProblemData& data,
                         std::span<const double> g_coeffs);

/// One application of the reduced operator gamma M g + S^T M S g (one state
/// solve, one adjoint solve). Exposed for the operator-symmetry diagnostic.
std::vector<double> reduced_operator_apply(const Mesh& mesh, const ControlProblemData& data,
                                           std::span<const double> g_coeffs);

/// Exact control g = gamma^{-1} dn z evaluated on a boundary face.
double exact_control_on_face(const Mesh& mesh, int face, const ControlExact& exact, double gamma,
                             double x, double y);

}  // namespace hdglab
