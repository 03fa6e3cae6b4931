#include "pdekf/galerkin.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pdekf {

Mesh::Mesh(int dimension, Index cells_per_axis, double L0) : dimension_(dimension), cells_(cells_per_axis), L0_(L0) {
  if (dimension != 1 && dimension != 2) throw Error(ErrorKind::Parameter, "mesh dimension must be 1 or 2");
  if (cells_per_axis < 1) throw Error(ErrorKind::Parameter, "mesh needs at least one cell per axis");
  if (!(L0 > 0.0) || !std::isfinite(L0)) throw Error(ErrorKind::Parameter, "mesh half-width L0 must be positive");
}

Index Mesh::node_count() const { return dimension_ == 1 ? cells_ + 1 : (cells_ + 1) * (cells_ + 1); }
Index Mesh::cell_count() const { return dimension_ == 1 ? cells_ : cells_ * cells_; }
double Mesh::area() const { return dimension_ == 1 ? 2.0 * L0_ : 4.0 * L0_ * L0_; }

std::array<double, 2> Mesh::node(Index k) const {
  const double h = spacing();
  if (dimension_ == 1) return {-L0_ + h * static_cast<double>(k), 0.0};
  const Index ix = k % (cells_ + 1);
  const Index iy = k / (cells_ + 1);
  return {-L0_ + h * static_cast<double>(ix), -L0_ + h * static_cast<double>(iy)};
}

Vector Mesh::coordinate(int axis) const {
  Vector v(node_count());
  for (Index k = 0; k < node_count(); ++k) v(k) = node(k)[axis];
  return v;
}

bool Mesh::same_domain(const Mesh& other) const {
  return dimension_ == other.dimension_ && std::abs(L0_ - other.L0_) <= 1e-12 * std::max(L0_, other.L0_);
}

NodalField::NodalField(Mesh m, Vector v) : mesh(std::move(m)), values(std::move(v)) {
  if (values.size() != mesh.node_count()) {
    throw Error(ErrorKind::Shape, "nodal field has " + std::to_string(values.size()) + " values for " +
                                      std::to_string(mesh.node_count()) + " nodes");
  }
}

NodalField NodalField::constant(const Mesh& m, double value) {
  return NodalField(m, Vector::Constant(m.node_count(), value));
}

NodalField NodalField::from_function(const Mesh& m, const std::function<double(double, double)>& f) {
  Vector v(m.node_count());
  for (Index k = 0; k < m.node_count(); ++k) {
    const auto x = m.node(k);
    v(k) = f(x[0], x[1]);
  }
  return NodalField(m, std::move(v));
}

std::array<double, 2> potential_gradient(const Matrix& potentials, Index col, double r, double s) {
  const auto c = potentials.col(col);
  return {c(0) + 2.0 * r * c(2) + s * c(3) + 2.0 * r * c(4), c(1) + 2.0 * s * c(2) + r * c(3) - 2.0 * s * c(4)};
}

namespace {

/// Shape data at one quadrature point of one cell.
struct QuadPoint {
  double r, s, weight;
  int local_count;
  std::array<Index, 4> dof;
  std::array<double, 4> phi;
  std::array<std::array<double, 2>, 4> grad;
};

/// Visits every 2-point (1D) or 2x2 (2D) Gauss point of the mesh in a fixed order.
template <typename Visitor>
void for_each_quad_point(const Mesh& mesh, Visitor&& visit) {
  const double h = mesh.spacing();
  const double L0 = mesh.L0();
  const double g[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  const Index n = mesh.cells_per_axis();
  QuadPoint q{};
  if (mesh.dimension() == 1) {
    q.local_count = 2;
    for (Index c = 0; c < n; ++c) {
      const double x0 = -L0 + h * static_cast<double>(c);
      for (double xi : g) {
        q.r = x0 + h * xi;
        q.s = 0.0;
        q.weight = 0.5 * h;
        q.dof = {c, c + 1, 0, 0};
        q.phi = {1.0 - xi, xi, 0.0, 0.0};
        q.grad = {{{-1.0 / h, 0.0}, {1.0 / h, 0.0}, {0.0, 0.0}, {0.0, 0.0}}};
        visit(q);
      }
    }
    return;
  }
  q.local_count = 4;
  const Index stride = n + 1;
  for (Index cy = 0; cy < n; ++cy) {
    for (Index cx = 0; cx < n; ++cx) {
      const double x0 = -L0 + h * static_cast<double>(cx);
      const double y0 = -L0 + h * static_cast<double>(cy);
      const Index base = cx + stride * cy;
      q.dof = {base, base + 1, base + stride, base + stride + 1};
      for (double eta : g) {
        for (double xi : g) {
          q.r = x0 + h * xi;
          q.s = y0 + h * eta;
          q.weight = 0.25 * h * h;
          q.phi = {(1 - xi) * (1 - eta), xi * (1 - eta), (1 - xi) * eta, xi * eta};
          q.grad = {{{-(1 - eta) / h, -(1 - xi) / h},
                     {(1 - eta) / h, -xi / h},
                     {-eta / h, (1 - xi) / h},
                     {eta / h, xi / h}}};
          visit(q);
        }
      }
    }
  }
}

double interpolate_at(const Mesh& mesh, const Vector& values, double r, double s) {
  const double h = mesh.spacing();
  const Index n = mesh.cells_per_axis();
  auto locate = [&](double x, Index& cell, double& t) {
    const double u = (x + mesh.L0()) / h;
    cell = std::clamp<Index>(static_cast<Index>(std::floor(u)), 0, n - 1);
    t = std::clamp(u - static_cast<double>(cell), 0.0, 1.0);
  };
  Index cx = 0;
  double tx = 0.0;
  locate(r, cx, tx);
  if (mesh.dimension() == 1) return (1 - tx) * values(cx) + tx * values(cx + 1);
  Index cy = 0;
  double ty = 0.0;
  locate(s, cy, ty);
  const Index stride = n + 1;
  const Index b = cx + stride * cy;
  return (1 - tx) * (1 - ty) * values(b) + tx * (1 - ty) * values(b + 1) + (1 - tx) * ty * values(b + stride) +
         tx * ty * values(b + stride + 1);
}

}  // namespace

std::pair<SymMatrix, SymMatrix> assemble_mass_stiffness(const Mesh& mesh, double diffusion) {
  if (!(diffusion > 0.0)) throw Error(ErrorKind::Parameter, "diffusion coefficient must be positive");
  const Index n = mesh.node_count();
  Matrix m = Matrix::Zero(n, n);
  Matrix k = Matrix::Zero(n, n);
  for_each_quad_point(mesh, [&](const QuadPoint& q) {
    for (int a = 0; a < q.local_count; ++a) {
      for (int b = 0; b < q.local_count; ++b) {
        m(q.dof[a], q.dof[b]) += q.weight * q.phi[a] * q.phi[b];
        k(q.dof[a], q.dof[b]) +=
            q.weight * diffusion * (q.grad[a][0] * q.grad[b][0] + q.grad[a][1] * q.grad[b][1]);
      }
    }
  });
  return {symmetrize(m), symmetrize(k)};
}

Matrix assemble_output(const Mesh& mesh) {
  const Index n = mesh.node_count();
  const bool planar = mesh.dimension() == 2;
  Matrix c = Matrix::Zero(planar ? 3 : 1, n);
  for_each_quad_point(mesh, [&](const QuadPoint& q) {
    for (int a = 0; a < q.local_count; ++a) {
      const double w = q.weight * q.phi[a];
      if (planar) {
        c(0, q.dof[a]) += w * q.r;
        c(1, q.dof[a]) += w * q.s;
        c(2, q.dof[a]) += w;
      } else {
        c(0, q.dof[a]) += w;
      }
    }
  });
  return c;
}

Matrix assemble_flux_pairing(const Mesh& mesh, const std::function<std::array<double, 2>(double, double)>& v) {
  const Index n = mesh.node_count();
  Matrix out = Matrix::Zero(n, n);
  for_each_quad_point(mesh, [&](const QuadPoint& q) {
    const auto field = v(q.r, q.s);
    for (int i = 0; i < q.local_count; ++i) {
      const double dot = field[0] * q.grad[i][0] + field[1] * q.grad[i][1];
      for (int j = 0; j < q.local_count; ++j) out(q.dof[i], q.dof[j]) += q.weight * q.phi[j] * dot;
    }
  });
  return out;
}

Matrix assemble_input_map(const Mesh& mesh, const NodalField& c_e, double gamma, const Matrix& qc_potentials) {
  if (c_e.mesh != mesh) throw Error(ErrorKind::Shape, "assemble_input_map: c_e lives on a different mesh");
  if (qc_potentials.rows() != kPotentialTerms) {
    throw Error(ErrorKind::Shape, "assemble_input_map: Q_c needs " + std::to_string(kPotentialTerms) +
                                      " potential rows, got " + std::to_string(qc_potentials.rows()));
  }
  const Index n = mesh.node_count();
  const Index m = qc_potentials.cols();
  Matrix b = Matrix::Zero(n, m);
  const bool planar = mesh.dimension() == 2;
  for_each_quad_point(mesh, [&](const QuadPoint& q) {
    double ce = 0.0;
    for (int a = 0; a < q.local_count; ++a) ce += q.phi[a] * c_e.values(q.dof[a]);
    if (ce == 0.0) return;
    for (Index k = 0; k < m; ++k) {
      if (qc_potentials.col(k).isZero(0.0)) continue;
      auto g = potential_gradient(qc_potentials, k, q.r, q.s);
      if (!planar) g[1] = 0.0;
      for (int i = 0; i < q.local_count; ++i) {
        b(q.dof[i], k) += q.weight * gamma * ce * (g[0] * q.grad[i][0] + g[1] * q.grad[i][1]);
      }
    }
  });
  return b;
}

NodalField interpolate(const NodalField& field, const Mesh& target) {
  if (!field.mesh.same_domain(target)) {
    std::ostringstream os;
    os << "interpolate: source domain L0=" << field.mesh.L0() << " (dim " << field.mesh.dimension()
       << ") does not match target L0=" << target.L0() << " (dim " << target.dimension() << ")";
    throw Error(ErrorKind::Domain, os.str());
  }
  if (field.mesh == target) return field;
  Vector out(target.node_count());
  for (Index k = 0; k < target.node_count(); ++k) {
    const auto x = target.node(k);
    out(k) = interpolate_at(field.mesh, field.values, x[0], x[1]);
  }
  return NodalField(target, std::move(out));
}

Matrix interpolation_matrix(const Mesh& source, const Mesh& target) {
  if (!source.same_domain(target)) throw Error(ErrorKind::Domain, "interpolation_matrix: domains differ");
  const Index ns = source.node_count();
  Matrix out(target.node_count(), ns);
  Vector unit = Vector::Zero(ns);
  for (Index j = 0; j < ns; ++j) {
    unit(j) = 1.0;
    out.col(j) = interpolate(NodalField(source, unit), target).values;
    unit(j) = 0.0;
  }
  return out;
}

NodalField nodal_nonlinearity(const NodalField& field, const std::function<double(double)>& f) {
  Vector out(field.values.size());
  for (Index k = 0; k < out.size(); ++k) {
    out(k) = f(field.values(k));
    if (!std::isfinite(out(k))) {
      throw Error(ErrorKind::Numeric, "nonlinearity returned non-finite value at node " + std::to_string(k));
    }
  }
  return NodalField(field.mesh, std::move(out));
}

}  // namespace pdekf
