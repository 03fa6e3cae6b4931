#include "pdekf/evolution.hpp"

#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

namespace pdekf {

Matrix DiscreteSemilinearModel::generator() const {
  return -solve_spd(mass, stiffness.dense());
}

Vector DiscreteSemilinearModel::F(const Vector& z, double t) const {
  if (linear || !nonlinearity) return Vector::Zero(z.size());
  return nonlinearity(z, t);
}

Matrix DiscreteSemilinearModel::DF(const Vector& z, double t) const {
  if (linear || !jacobian) return Matrix::Zero(z.size(), z.size());
  return jacobian(z, t);
}

void DiscreteSemilinearModel::validate() const {
  const Index n = order();
  auto fail = [&](const std::string& what) { throw Error(ErrorKind::Shape, name + ": " + what); };
  if (stiffness.order() != n) fail("stiffness order differs from mass order");
  if (input_map.rows() != n) fail("input map rows differ from state dimension");
  if (disturbance_map.rows() != n) fail("disturbance map rows differ from state dimension");
  if (output_map.cols() != n) fail("output map columns differ from state dimension");
  if (!linear && (!nonlinearity || !jacobian)) fail("nonlinear model without F/DF callbacks");
}

TimeGrid::TimeGrid(double t0, double tf, Index steps) : t0_(t0), tf_(tf), steps_(steps) {
  if (!(tf > t0)) throw Error(ErrorKind::Parameter, "time grid needs tf > t0");
  if (steps < 1) throw Error(ErrorKind::Parameter, "time grid needs at least one step");
}

ImexStepper::ImexStepper(const SymMatrix& mass, const Matrix& a_lin, double dt) : mass_(mass.dense()), dt_(dt) {
  if (a_lin.rows() != mass.order() || a_lin.cols() != mass.order()) {
    throw Error(ErrorKind::Shape, "IMEX: linear operator does not match mass matrix");
  }
  lu_.compute(mass_ - dt * a_lin);
  const double rc = lu_.rcond();
  if (!(rc > 1e-14)) {
    std::ostringstream os;
    os << "implicit matrix (M - dt A) is singular to working precision (rcond " << rc << ") at dt=" << dt
       << "; retry with dt <= " << 0.5 * dt;
    throw Error(ErrorKind::StepFailure, os.str());
  }
}

Vector ImexStepper::step(const Vector& state, const Vector& forcing) const {
  return lu_.solve(mass_ * state + dt_ * forcing);
}

Vector ImexStepper::step_standard(const Vector& state, const Vector& rhs) const {
  return lu_.solve(mass_ * (state + dt_ * rhs));
}

Vector imex_step(const Vector& state, const SymMatrix& mass, const Matrix& a_lin, const Vector& forcing, double dt) {
  return ImexStepper(mass, a_lin, dt).step(state, forcing);
}

const Vector& series_at(const StepSeries& s, Index k, const Vector& zero) {
  if (s.empty()) return zero;
  if (s.size() == 1) return s.front();
  if (k >= static_cast<Index>(s.size())) {
    throw Error(ErrorKind::Shape, "step series has " + std::to_string(s.size()) + " entries, step " +
                                      std::to_string(k) + " requested");
  }
  return s[static_cast<std::size_t>(k)];
}

Trajectory evolve_mild(const DiscreteSemilinearModel& model, const Vector& z0, const StepSeries& inputs,
                       const StepSeries& disturbance, const TimeGrid& grid) {
  model.validate();
  if (z0.size() != model.order()) throw Error(ErrorKind::Shape, "evolve_mild: initial state has wrong size");
  const ImexStepper stepper(model.mass, -model.stiffness.dense(), grid.dt());
  const Vector no_input = Vector::Zero(model.inputs());
  const Vector no_disturbance = Vector::Zero(model.disturbances());

  Trajectory out{grid, {}};
  out.states.reserve(static_cast<std::size_t>(grid.nodes()));
  out.states.push_back(z0);
  Vector z = z0;
  for (Index k = 0; k < grid.steps(); ++k) {
    const double t = grid.time(k);
    Vector rhs = model.F(z, t);
    const Vector& u = series_at(inputs, k, no_input);
    const Vector& w = series_at(disturbance, k, no_disturbance);
    if (u.size() > 0) rhs.noalias() += model.input_map * u;
    if (w.size() > 0) rhs.noalias() += model.disturbance_map * w;
    z = stepper.step_standard(z, rhs);
    if (!z.allFinite()) {
      throw Error(ErrorKind::Divergence, model.name + ": non-finite state at step " + std::to_string(k + 1));
    }
    out.states.push_back(z);
  }
  return out;
}

void EvolutionTable::check_limits(Index order, Index steps) {
  if (order > kMaxOrder) {
    throw Error(ErrorKind::SizeLimit, "evolution table order " + std::to_string(order) + " exceeds cap " +
                                          std::to_string(kMaxOrder));
  }
  if (steps > kMaxSteps) {
    throw Error(ErrorKind::SizeLimit, "evolution table steps " + std::to_string(steps) + " exceed cap " +
                                          std::to_string(kMaxSteps));
  }
  const Index entries = (steps + 1) * (steps + 2) / 2 * order * order;
  if (entries > kMaxEntries) {
    throw Error(ErrorKind::SizeLimit, "evolution table would hold " + std::to_string(entries) +
                                          " entries (cap " + std::to_string(kMaxEntries) + ")");
  }
}

EvolutionTable::EvolutionTable(TimeGrid grid, Index order) : grid_(grid), order_(order) {
  check_limits(order, grid.steps());
  const Index nodes = grid.nodes();
  blocks_.resize(static_cast<std::size_t>(nodes * (nodes + 1) / 2));
}

double EvolutionTable::diagonal_defect() const {
  double worst = 0.0;
  const Matrix eye = Matrix::Identity(order_, order_);
  for (Index i = 0; i < grid_.nodes(); ++i) worst = std::max(worst, (at(i, i) - eye).norm());
  return worst;
}

double EvolutionTable::composition_defect() const {
  double worst = 0.0;
  const Index nodes = grid_.nodes();
  for (Index i = 0; i < nodes; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const double scale = std::max(1.0, at(i, j).norm());
      for (Index k = j; k <= i; ++k) worst = std::max(worst, (at(i, j) - at(i, k) * at(k, j)).norm() / scale);
    }
  }
  return worst;
}

EvolutionTable evolution_table(const Matrix& a, const GeneratorSeries& d, const TimeGrid& grid,
                               PropagationScheme scheme) {
  const Index n = a.rows();
  EvolutionTable table(grid, n);
  const double dt = grid.dt();
  const Matrix eye = Matrix::Identity(n, n);
  for (Index i = 0; i < grid.nodes(); ++i) {
    table.at(i, i) = eye;
    if (i == 0) continue;
    Matrix gen = a;
    if (d) gen += d(i - 1);
    Matrix phi;
    if (scheme == PropagationScheme::Exponential) {
      phi = (dt * gen).exp();
    } else {
      Eigen::PartialPivLU<Matrix> lu(eye - dt * gen);
      if (!(lu.rcond() > 1e-14)) {
        throw Error(ErrorKind::StepFailure, "evolution_table: singular implicit matrix at step " + std::to_string(i));
      }
      phi = lu.inverse();
    }
    for (Index j = 0; j < i; ++j) table.at(i, j).noalias() = phi * table.at(i - 1, j);
  }
  return table;
}

EvolutionTable perturb_table(const EvolutionTable& base, const std::vector<Matrix>& feedback) {
  const TimeGrid& grid = base.grid();
  const Index n = base.order();
  const Index nodes = grid.nodes();
  if (static_cast<Index>(feedback.size()) < nodes - 1) {
    throw Error(ErrorKind::Shape, "perturb_table: feedback needs one matrix per grid step");
  }
  for (const auto& k : feedback) {
    if (k.rows() != n || k.cols() != n) throw Error(ErrorKind::Shape, "perturb_table: feedback has wrong order");
  }
  const double dt = grid.dt();
  EvolutionTable out(grid, n);
  // kp(r, j) = K(t_r) U_P(t_r, t_j), cached once U_P(t_r, t_j) is known.
  EvolutionTable kp(grid, n);
  for (Index i = 0; i < nodes; ++i) {
    for (Index j = 0; j <= i; ++j) {
      Matrix v = base.at(i, j);
      for (Index r = j; r < i; ++r) v.noalias() += dt * base.at(i, r) * kp.at(r, j);
      out.at(i, j) = std::move(v);
      if (i < nodes - 1) kp.at(i, j).noalias() = feedback[static_cast<std::size_t>(i)] * out.at(i, j);
    }
  }
  return out;
}

EvolutionTable shift_table(const EvolutionTable& base, double beta) {
  const TimeGrid& grid = base.grid();
  EvolutionTable out(grid, base.order());
  for (Index i = 0; i < grid.nodes(); ++i) {
    for (Index j = 0; j <= i; ++j) out.at(i, j) = std::exp(beta * (grid.time(i) - grid.time(j))) * base.at(i, j);
  }
  return out;
}

}  // namespace pdekf
