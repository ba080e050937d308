// Error measurement in the maximum norm over a dense element sample set, the
// L2 norm over the domain, the L2 norm over a set of faces, and observed
// convergence rates.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "hdglab/fields.hpp"
#include "hdglab/hdg_solver.hpp"
#include "hdglab/mesh.hpp"

namespace hdglab {

/// View of one scalar component of a broken polynomial field.
struct DiscreteScalar {
  const std::vector<double>* coeffs = nullptr;
  const ReferenceElement* ref = nullptr;
  int stride = 0;
  int offset = 0;

  double coeff(int element, int i) const {
    return (*coeffs)[static_cast<std::size_t>(element) * stride + offset + i];
  }
};

DiscreteScalar u_view(const FieldSolution& s);
DiscreteScalar qx_view(const FieldSolution& s);
DiscreteScalar qy_view(const FieldSolution& s);
DiscreteScalar ustar_view(const FieldSolution& s);

/// Sample set for the maximum-norm estimate: a volume quadrature rule plus
/// element vertices and interior points of each edge.
struct SamplingSpec {
  int quad_exactness = 0;  // 0 -> 2*degree+3 of the measured field
  bool include_vertices = true;
  int edge_interior_points = 4;
};

double linf_error(const Mesh& mesh, const DiscreteScalar& field, const ScalarField& exact,
                  const SamplingSpec& sampling = {});
double linf_error(const Mesh& mesh, const DiscreteScalar& fx, const DiscreteScalar& fy,
                  const VectorField& exact, const SamplingSpec& sampling = {});

double l2_error(const Mesh& mesh, const DiscreteScalar& field, const ScalarField& exact);
double l2_error(const Mesh& mesh, const DiscreteScalar& fx, const DiscreteScalar& fy,
                const VectorField& exact);

/// L2 error over a face set; fields are traced from each face's left element.
/// For vector fields both components enter the squared integrand.
double l2_error_interface(const Mesh& mesh, std::span<const int> faces, const DiscreteScalar& field,
                          const ScalarField& exact);
double l2_error_interface(const Mesh& mesh, std::span<const int> faces, const DiscreteScalar& fx,
                          const DiscreteScalar& fy, const VectorField& exact);

/// Observed orders log2(e_prev / e_curr) for an n-doubling family.
std::vector<double> rates(std::span<const double> errors);

struct LevelRecord {
  int n = 0;
  double h_over_sqrt2 = 0.0;
  std::vector<double> errors;  // aligned with ErrorReport::quantities
  std::string failure;         // "FAILED:<code>" when the level aborted
};

struct ErrorReport {
  std::vector<std::string> quantities;
  std::vector<LevelRecord> levels;

  /// rates()[l][q] is defined for l >= 1.
  std::vector<std::vector<double>> rate_table() const;
};

}  // namespace hdglab
