#pragma once

#include <functional>
#include <optional>
#include <string>

#include "pdekf/galerkin.hpp"

namespace pdekf {

struct ModelParameters {
  double diffusion = 0.0;  // m^2/s
  double kappa = 0.0;
  double gamma = 0.0;
  double L0 = 0.0;  // m
};

/// Galerkin realisation of z' = A z + F(z, t) + B u + G w, y = C z, stored in
/// mass-weighted form M z' = -K z + M (F + B u + G w). F, DF, B and G are in
/// standard (nodal coefficient) form so that A = -M^{-1} K.
struct DiscreteSemilinearModel {
  using Nonlinearity = std::function<Vector(const Vector& z, double t)>;
  using Jacobian = std::function<Matrix(const Vector& z, double t)>;

  std::string name;
  Mesh mesh{1, 1, 1.0};
  SymMatrix mass;
  SymMatrix stiffness;
  Matrix input_map;        // B, n x m
  Matrix disturbance_map;  // G, n x q
  Matrix output_map;       // C, p x n
  Nonlinearity nonlinearity;
  Jacobian jacobian;
  bool linear = false;
  ModelParameters params;

  Index order() const { return mass.order(); }
  Index outputs() const { return output_map.rows(); }
  Index inputs() const { return input_map.cols(); }
  Index disturbances() const { return disturbance_map.cols(); }

  /// Dense A = -M^{-1} K.
  Matrix generator() const;
  Vector F(const Vector& z, double t) const;
  Matrix DF(const Vector& z, double t) const;

  /// Throws Shape when the blocks are inconsistent.
  void validate() const;
};

}  // namespace pdekf
