#pragma once

#include <array>
#include <functional>

namespace hdglab {

using ScalarField = std::function<double(double, double)>;
using VectorField = std::function<std::array<double, 2>(double, double)>;
using MatrixField = std::function<std::array<double, 4>(double, double)>;  // row-major 2x2

/// SPD matrix-valued diffusion coefficient; a constant value unless a
/// position-dependent callable is supplied.
struct Coefficient {
  std::array<double, 4> constant_value{1.0, 0.0, 0.0, 1.0};
  MatrixField fn;

  bool is_constant() const { return !fn; }
  std::array<double, 4> operator()(double x, double y) const {
    return fn ? fn(x, y) : constant_value;
  }

  static Coefficient identity() { return {}; }
  static Coefficient isotropic(double c) { return Coefficient{{c, 0.0, 0.0, c}, nullptr}; }
  static Coefficient variable(MatrixField f) { return Coefficient{{}, std::move(f)}; }
};

}  // namespace hdglab
