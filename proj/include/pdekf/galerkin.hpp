#pragma once

#include <array>
#include <functional>
#include <utility>

#include "pdekf/numerics.hpp"

namespace pdekf {

/// Uniform mesh of [-L0, L0]^dimension with cells_per_axis cells per axis.
/// Nodes are numbered lexicographically, r fastest.
class Mesh {
 public:
  Mesh(int dimension, Index cells_per_axis, double L0);

  int dimension() const { return dimension_; }
  Index cells_per_axis() const { return cells_; }
  double L0() const { return L0_; }
  double spacing() const { return 2.0 * L0_ / static_cast<double>(cells_); }
  Index nodes_per_axis() const { return cells_ + 1; }
  Index node_count() const;
  Index cell_count() const;
  double area() const;

  /// Coordinates (r, s) of node k; s = 0 in 1D.
  std::array<double, 2> node(Index k) const;
  Vector coordinate(int axis) const;

  bool same_domain(const Mesh& other) const;
  bool operator==(const Mesh& other) const = default;

 private:
  int dimension_;
  Index cells_;
  double L0_;
};

struct NodalField {
  Mesh mesh;
  Vector values;

  NodalField(Mesh m, Vector v);
  static NodalField constant(const Mesh& m, double value);
  static NodalField from_function(const Mesh& m, const std::function<double(double, double)>& f);
};

/// Coefficients of the scalar potentials whose gradients form the columns of
/// Q_c. Row order: r, s, r^2 + s^2, r s, r^2 - s^2.
inline constexpr Index kPotentialTerms = 5;

/// Gradient of potential column `col` of `potentials` at (r, s).
std::array<double, 2> potential_gradient(const Matrix& potentials, Index col, double r, double s);

struct AssembledOperators {
  SymMatrix mass;
  SymMatrix stiffness;
  Matrix output;
  Matrix input_map;
};

/// Consistent mass matrix and stiffness D * int grad(phi_i) . grad(phi_j),
/// natural (homogeneous Neumann) boundary.
std::pair<SymMatrix, SymMatrix> assemble_mass_stiffness(const Mesh& mesh, double diffusion);

/// Rows int r c, int s c, int c on 2D meshes; a single row int c on 1D meshes.
Matrix assemble_output(const Mesh& mesh);

/// Matrix V with V(i, j) = int phi_j v . grad(phi_i) for a vector field v.
Matrix assemble_flux_pairing(const Mesh& mesh, const std::function<std::array<double, 2>(double, double)>& v);

/// Load matrix of -div(gamma c_e Q_c I): column k is int gamma c_e q_k . grad(phi_i).
Matrix assemble_input_map(const Mesh& mesh, const NodalField& c_e, double gamma, const Matrix& qc_potentials);

/// Evaluates the piecewise (bi)linear interpolant of `field` at the nodes of `target`.
NodalField interpolate(const NodalField& field, const Mesh& target);

/// Dense interpolation operator from `source` nodal values to `target` nodes.
Matrix interpolation_matrix(const Mesh& source, const Mesh& target);

NodalField nodal_nonlinearity(const NodalField& field, const std::function<double(double)>& f);

}  // namespace pdekf
