#include "pdekf/riccati.hpp"

#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

namespace pdekf {

namespace {

const SymMatrix& pick(const std::vector<SymMatrix>& v, Index k, const char* what) {
  if (v.empty()) throw Error(ErrorKind::Parameter, std::string("noise spec: ") + what + " is empty");
  if (v.size() == 1) return v.front();
  if (k >= static_cast<Index>(v.size())) {
    throw Error(ErrorKind::Shape, std::string("noise spec: ") + what + " has no entry for step " + std::to_string(k));
  }
  return v[static_cast<std::size_t>(k)];
}

double inf_norm(const Matrix& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

Matrix output_weight(const Matrix& c, const SymMatrix& r) {
  if (c.rows() == 0) return Matrix::Zero(c.cols(), c.cols());
  Eigen::LLT<Matrix> llt(r.dense());
  return c.transpose() * llt.solve(c);
}

}  // namespace

const SymMatrix& NoiseSpec::W_at(Index k) const { return pick(W, k, "W"); }
const SymMatrix& NoiseSpec::R_at(Index k) const { return pick(R, k, "R"); }

NoiseSpec NoiseSpec::constant(SymMatrix p0, SymMatrix w, SymMatrix r) {
  NoiseSpec s;
  s.P0 = std::move(p0);
  s.W = {std::move(w)};
  s.delta0 = r.order() > 0 ? min_eigenvalue(r) : 1.0;
  s.R = {std::move(r)};
  return s;
}

void NoiseSpec::validate(Index state_dim, Index output_dim) const {
  if (P0.order() != state_dim) throw Error(ErrorKind::Shape, "noise spec: P0 order differs from state dimension");
  // P0 = 0 is admitted (it is the invariant zero solution); negative directions are not.
  const double p0_min = P0.order() > 0 ? min_eigenvalue(P0) : 0.0;
  if (p0_min < -1e-12 * std::max(1.0, spectral_norm(P0))) {
    std::ostringstream os;
    os << "noise spec: P0 is not positive semidefinite (min eigenvalue " << p0_min << ")";
    throw Error(ErrorKind::PsdFailure, os.str());
  }
  if (W.empty() || R.empty()) throw Error(ErrorKind::Parameter, "noise spec: W and R are required");
  for (std::size_t k = 0; k < W.size(); ++k) {
    if (W[k].order() != state_dim) throw Error(ErrorKind::Shape, "noise spec: W order differs from state dimension");
    const double wmin = min_eigenvalue(W[k]);
    if (wmin < -1e-12 * std::max(1.0, spectral_norm(W[k]))) {
      throw Error(ErrorKind::PsdFailure, "noise spec: W(t_" + std::to_string(k) + ") is not PSD");
    }
  }
  if (!(delta0 > 0.0)) throw Error(ErrorKind::Parameter, "noise spec: coercivity floor delta0 must be positive");
  for (std::size_t k = 0; k < R.size(); ++k) {
    if (R[k].order() != output_dim) throw Error(ErrorKind::Shape, "noise spec: R order differs from output dimension");
    if (output_dim == 0) continue;
    const double rmin = min_eigenvalue(R[k]);
    if (rmin < delta0 * (1.0 - 1e-12)) {
      std::ostringstream os;
      os << "noise spec: R(t_" << k << ") min eigenvalue " << rmin << " below coercivity floor " << delta0;
      throw Error(ErrorKind::Parameter, os.str());
    }
  }
}

SymMatrix dre_step(const SymMatrix& p, const Matrix& a_d, const Matrix& c, const SymMatrix& r, const SymMatrix& w,
                   double dt) {
  const Index n = p.order();
  const Matrix& pd = p.dense();
  Matrix contracted = pd + dt * w.dense();
  if (c.rows() > 0) {
    const Matrix pct = pd * c.transpose();
    Matrix innovation = r.dense() + dt * (c * pct);
    Eigen::LLT<Matrix> llt(symmetrize(innovation).dense());
    contracted.noalias() -= dt * pct * llt.solve(pct.transpose());
  }
  Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n, n) - dt * a_d);
  const Matrix half = lu.solve(contracted);
  const Matrix next = lu.solve(half.transpose());
  return symmetrize(next);
}

void check_covariance(const SymMatrix& p, Index step, const DreOptions& opts) {
  const Matrix& pd = p.dense();
  if (!pd.allFinite()) throw Error(ErrorKind::Divergence, "Riccati: non-finite P at step " + std::to_string(step));
  const double norm = inf_norm(pd);
  if (norm > opts.blowup_norm) {
    std::ostringstream os;
    os << "Riccati: ||P|| = " << norm << " exceeds " << opts.blowup_norm << " at step " << step;
    throw Error(ErrorKind::Divergence, os.str());
  }
  if (!opts.check_psd || norm == 0.0) return;
  const Index n = p.order();
  Eigen::LLT<Matrix> llt(pd + opts.psd_tolerance * norm * Matrix::Identity(n, n));
  if (llt.info() != Eigen::Success) {
    std::ostringstream os;
    os << "Riccati: P lost positive semidefiniteness at step " << step << " (min eigenvalue " << min_eigenvalue(p)
       << ", ||P|| " << norm << ")";
    throw Error(ErrorKind::PsdFailure, os.str());
  }
}

RiccatiTrajectory dre_propagate(const GeneratorSeries& a_d, const Matrix& c, const NoiseSpec& spec,
                                const TimeGrid& grid, double alpha, const DreOptions& opts) {
  const Index n = spec.P0.order();
  spec.validate(n, c.rows());
  if (c.cols() != n) throw Error(ErrorKind::Shape, "dre_propagate: C columns differ from state dimension");
  RiccatiTrajectory out{grid, {}, alpha};
  out.P.reserve(static_cast<std::size_t>(grid.nodes()));
  out.P.push_back(spec.P0);
  const double dt = grid.dt();
  for (Index k = 0; k < grid.steps(); ++k) {
    const Matrix a = a_d(k);
    if (a.rows() != n || a.cols() != n) throw Error(ErrorKind::Shape, "dre_propagate: generator has wrong order");
    out.P.push_back(dre_step(out.P.back(), a, c, spec.R_at(k), spec.W_at(k), dt));
    check_covariance(out.P.back(), k + 1, opts);
  }
  return out;
}

RiccatiTrajectory integral_riccati_oracle(const GeneratorSeries& a_d, const Matrix& c, const NoiseSpec& spec,
                                          const TimeGrid& grid, double alpha, IntegralRiccatiStats* stats) {
  const Index n = spec.P0.order();
  spec.validate(n, c.rows());
  EvolutionTable::check_limits(n, 0);
  const Index nodes = grid.nodes();
  const double dt = grid.dt();
  const Matrix eye = Matrix::Identity(n, n);

  // Row i of the tables, stored as n x n(i+1) block rows:
  //   up_row : U_P(t_i, t_j)          v_row : U(t_i, t_j) W(t_j)
  Matrix up_row = eye;
  Matrix v_row = spec.W_at(0).dense();
  Matrix u0 = eye;  // U(t_i, 0)
  const Matrix& p0 = spec.P0.dense();

  RiccatiTrajectory out{grid, {}, alpha};
  out.P.reserve(static_cast<std::size_t>(nodes));
  out.P.push_back(spec.P0);
  Matrix q_prev = output_weight(c, spec.R_at(0));
  IntegralRiccatiStats local;

  for (Index i = 1; i < nodes; ++i) {
    const Matrix phi = (dt * a_d(i - 1)).exp();
    const Matrix q = output_weight(c, spec.R_at(i));
    const Matrix& w_i = spec.W_at(i).dense();
    const Matrix& p_prev = out.P.back().dense();

    // U(t_i, t_j) = Phi U(t_{i-1}, t_j); the table is a composition of one-step maps.
    Matrix v_next(n, n * (i + 1));
    v_next.leftCols(n * i).noalias() = phi * v_row;
    v_next.rightCols(n) = w_i;
    u0 = phi * u0;

    // Trapezoidal Volterra relation on [t_j, t_i], reduced with the composition
    // property: (I + dt/2 P_i Q_i) U_P(t_i,t_j) = Phi (I - dt/2 P_{i-1} Q_{i-1}) U_P(t_{i-1},t_j).
    const Matrix pre = phi * (eye - 0.5 * dt * p_prev * q_prev);

    // Quadrature of P(t_i) excluding the U_P(t_i, t_i) = I endpoint:
    //   U_P(t_i,0) P0 U(t_i,0)^T + dt sum_{j<i} w_j U_P(t_i,t_j) W_j U(t_i,t_j)^T
    // with U_P(t_i,t_j) = M_i * pre * U_P(t_{i-1},t_j).
    Matrix weighted = up_row;
    weighted.leftCols(n) *= 0.5;
    Matrix tail = weighted * v_next.leftCols(n * i).transpose();
    tail *= dt;
    tail.noalias() += up_row.leftCols(n) * p0 * u0.transpose();
    const Matrix t_total = pre * tail;

    Matrix p_i = p_prev;
    Index sweeps = 0;
    for (;; ++sweeps) {
      if (sweeps >= 100) {
        throw Error(ErrorKind::NonConvergence,
                    "integral Riccati oracle: endpoint iteration did not converge at step " + std::to_string(i));
      }
      Eigen::PartialPivLU<Matrix> lu(eye + 0.5 * dt * p_i * q);
      Matrix candidate = lu.solve(t_total) + 0.5 * dt * w_i;
      candidate = symmetrize(candidate).dense();
      const double change = (candidate - p_i).cwiseAbs().maxCoeff();
      const double scale = std::max(1.0, candidate.cwiseAbs().maxCoeff());
      p_i = std::move(candidate);
      local.worst_increment = std::max(local.worst_increment, change / scale);
      if (change <= 1e-10 * scale) break;
    }
    local.max_sweeps = std::max(local.max_sweeps, sweeps + 1);

    Eigen::PartialPivLU<Matrix> lu(eye + 0.5 * dt * p_i * q);
    const Matrix step_map = lu.solve(pre);
    Matrix up_next(n, n * (i + 1));
    up_next.leftCols(n * i).noalias() = step_map * up_row;
    up_next.rightCols(n) = eye;
    up_row = std::move(up_next);
    v_row = std::move(v_next);
    q_prev = q;
    out.P.push_back(symmetrize(p_i));
    if (!p_i.allFinite()) throw Error(ErrorKind::Divergence, "integral Riccati oracle: non-finite P at step " + std::to_string(i));
  }
  if (stats) *stats = local;
  return out;
}

GeneratorSeries linearized_generator(const DiscreteSemilinearModel& model, const Trajectory& estimate, double alpha) {
  const Matrix a = model.generator();
  return [a, alpha, &model, &estimate](Index k) {
    const double t = estimate.grid.time(k);
    Matrix g = a + model.DF(estimate.states[static_cast<std::size_t>(k)], t);
    g.diagonal().array() += alpha;
    return g;
  };
}

RiccatiTrajectory integral_riccati_oracle(const Trajectory& estimate, const DiscreteSemilinearModel& model,
                                          const NoiseSpec& spec, double alpha) {
  return integral_riccati_oracle(linearized_generator(model, estimate, alpha), model.output_map, spec,
                                 estimate.grid, alpha);
}

Trajectory g1_observer_map(const RiccatiTrajectory& p, const DiscreteSemilinearModel& model, const NoiseSpec& spec,
                           const StepSeries& y, const StepSeries& u, const Vector& z0) {
  model.validate();
  const TimeGrid& grid = p.grid;
  const ImexStepper stepper(model.mass, -model.stiffness.dense(), grid.dt());
  const Matrix& c = model.output_map;
  const Vector no_input = Vector::Zero(model.inputs());
  const Vector no_output = Vector::Zero(model.outputs());
  Trajectory out{grid, {}};
  out.states.reserve(static_cast<std::size_t>(grid.nodes()));
  out.states.push_back(z0);
  Vector z = z0;
  for (Index k = 0; k < grid.steps(); ++k) {
    const double t = grid.time(k);
    Vector rhs = model.F(z, t);
    const Vector& uk = series_at(u, k, no_input);
    if (uk.size() > 0) rhs.noalias() += model.input_map * uk;
    if (c.rows() > 0) {
      const Vector innovation = series_at(y, k, no_output) - c * z;
      Eigen::LLT<Matrix> llt(spec.R_at(k).dense());
      rhs.noalias() += p.P[static_cast<std::size_t>(k)].dense() * (c.transpose() * llt.solve(innovation));
    }
    z = stepper.step_standard(z, rhs);
    if (!z.allFinite()) throw Error(ErrorKind::Divergence, "observer map: non-finite state at step " + std::to_string(k + 1));
    out.states.push_back(z);
  }
  return out;
}

double sup_distance(const RiccatiTrajectory& a, const RiccatiTrajectory& b) {
  if (a.P.size() != b.P.size()) throw Error(ErrorKind::Shape, "sup_distance: trajectories differ in length");
  double d = 0.0;
  for (std::size_t k = 0; k < a.P.size(); ++k) d = std::max(d, (a.P[k].dense() - b.P[k].dense()).cwiseAbs().maxCoeff());
  return d;
}

PicardResult picard_fixed_point(const DiscreteSemilinearModel& model, const StepSeries& y, const StepSeries& u,
                                const NoiseSpec& spec, double alpha, const TimeGrid& grid, const Vector& z0,
                                double tol, Index max_iter, PicardStart start, const DreOptions& opts) {
  const Index n = model.order();
  spec.validate(n, model.outputs());
  const SymMatrix initial = start == PicardStart::Zero ? SymMatrix::Zero(n) : spec.P0;
  RiccatiTrajectory current{grid, std::vector<SymMatrix>(static_cast<std::size_t>(grid.nodes()), initial), alpha};

  PicardResult result{current, Trajectory{grid, {}}, {}, 0};
  for (Index k = 1; k <= max_iter; ++k) {
    Trajectory estimate = g1_observer_map(current, model, spec, y, u, z0);
    RiccatiTrajectory next =
        dre_propagate(linearized_generator(model, estimate, alpha), model.output_map, spec, grid, alpha, opts);
    const double d = sup_distance(next, current);
    result.distances.push_back(d);
    current = std::move(next);
    if (d <= tol) {
      result.iterations = k - 1;
      result.P = current;
      result.estimate = g1_observer_map(current, model, spec, y, u, z0);
      return result;
    }
  }
  std::ostringstream os;
  os << "Picard iteration did not reach tol " << tol << " in " << max_iter << " iterations; distances:";
  for (double d : result.distances) os << ' ' << d;
  throw Error(ErrorKind::NonConvergence, os.str());
}

}  // namespace pdekf
