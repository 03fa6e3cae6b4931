#include "pdekf/ekf.hpp"

#include <cmath>
#include <sstream>

namespace pdekf {

namespace {

double operator_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  // ||L||_2 from the small Gram matrix L^T L.
  const Matrix gram = m.transpose() * m;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

void audit(CovarianceAudit& a, const SymMatrix& p) {
  const Matrix& d = p.dense();
  a.max_asymmetry = std::max(a.max_asymmetry, (d - d.transpose()).cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Matrix> es(d, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  const double ratio = top > 0.0 ? es.eigenvalues()(0) / top : 0.0;
  a.worst_min_eig_ratio = a.audited_steps == 0 ? ratio : std::min(a.worst_min_eig_ratio, ratio);
  ++a.audited_steps;
}

void record(ObserverRun& run, const ObserverConfig& config, const DiscreteSemilinearModel& model, Index k,
            const Vector& z, const SymMatrix& p) {
  run.estimate.states.push_back(z);
  run.predicted.push_back(model.output_map * z);
  const SymMatrix& r = config.spec.R_at(k);
  run.gain_norm.push_back(model.outputs() > 0 ? operator_norm(gain(p, model.output_map, r)) : 0.0);
  run.p_trace.push_back(p.dense().trace());
  if (config.keep_covariance) run.P->P.push_back(p);
  if (config.structure_check_stride > 0 && k % config.structure_check_stride == 0) audit(run.audit, p);
  run.last_valid_step = k;
}

ObserverRun start_run(std::shared_ptr<const TruthRun> truth, const DiscreteSemilinearModel& observer,
                      const ObserverConfig& config) {
  observer.validate();
  const TimeGrid& grid = truth->truth.grid;
  config.spec.validate(observer.order(), observer.outputs());
  if (config.initial_estimate.size() != observer.order()) {
    throw Error(ErrorKind::Shape, "observer initial estimate has wrong dimension");
  }
  if (!truth->y.empty() && truth->y.front().size() != observer.outputs()) {
    throw Error(ErrorKind::Shape, "measurement dimension " + std::to_string(truth->y.front().size()) +
                                      " differs from observer output dimension " +
                                      std::to_string(observer.outputs()));
  }
  if (!(config.alpha >= 0.0)) throw Error(ErrorKind::Parameter, "alpha must be nonnegative");
  ObserverRun run{truth, Trajectory{grid, {}}, std::nullopt, {}, {}, {}, {}, std::nullopt, 0};
  const auto n = static_cast<std::size_t>(grid.nodes());
  run.estimate.states.reserve(n);
  run.predicted.reserve(n);
  if (config.keep_covariance) {
    run.P = RiccatiTrajectory{grid, {}, config.alpha};
    run.P->P.reserve(n);
  }
  return run;
}

}  // namespace

Matrix gain(const SymMatrix& p, const Matrix& c, const SymMatrix& r, double delta0) {
  if (c.cols() != p.order() || r.order() != c.rows()) throw Error(ErrorKind::Shape, "gain: inconsistent P, C, R");
  if (c.rows() == 0) return Matrix::Zero(p.order(), 0);
  Eigen::LLT<Matrix> llt(r.dense());
  if (llt.info() != Eigen::Success || (delta0 > 0.0 && min_eigenvalue(r) < delta0)) {
    throw Error(ErrorKind::Parameter, "gain: R is not coercive");
  }
  // P C^T R^{-1} = (R^{-1} C P)^T
  return llt.solve(c * p.dense()).transpose();
}

ExtendedKalmanFilter::ExtendedKalmanFilter(const DiscreteSemilinearModel& model, const ObserverConfig& config,
                                           const TimeGrid& grid)
    : model_(model),
      config_(config),
      a_(model.generator()),
      stepper_(model.mass, -model.stiffness.dense(), grid.dt()),
      grid_(grid) {}

EkfState ExtendedKalmanFilter::step(const EkfState& state, const Vector& y, const Vector& u, Index k) const {
  const double t = grid_.time(k);
  const Matrix& c = model_.output_map;
  const SymMatrix& r = config_.spec.R_at(k);

  Matrix a_d = a_ + model_.DF(state.z, t);
  a_d.diagonal().array() += config_.alpha;

  Vector rhs = model_.F(state.z, t);
  if (u.size() > 0) rhs.noalias() += model_.input_map * u;
  if (c.rows() > 0) rhs.noalias() += gain(state.P, c, r) * (y - c * state.z);

  EkfState next{stepper_.step_standard(state.z, rhs), dre_step(state.P, a_d, c, r, config_.spec.W_at(k), grid_.dt())};
  if (!next.z.allFinite()) throw Error(ErrorKind::Divergence, "EKF: non-finite estimate at step " + std::to_string(k + 1));
  check_covariance(next.P, k + 1, config_.riccati);
  return next;
}

EkfState ekf_step(const DiscreteSemilinearModel& model, const ObserverConfig& config, const EkfState& state,
                  const Vector& y, const Vector& u, Index k, const TimeGrid& grid) {
  return ExtendedKalmanFilter(model, config, grid).step(state, y, u, k);
}

TruthRun simulate_truth(const DiscreteSemilinearModel& model, const Vector& z0, const StepSeries& inputs,
                        const StepSeries& process_noise, const StepSeries& output_noise, const TimeGrid& grid,
                        std::uint64_t seed) {
  TruthRun run{evolve_mild(model, z0, inputs, process_noise, grid), inputs, {}, process_noise, output_noise, seed};
  const Vector no_noise = Vector::Zero(model.outputs());
  run.y.reserve(static_cast<std::size_t>(grid.nodes()));
  for (Index k = 0; k < grid.nodes(); ++k) {
    run.y.push_back(model.output_map * run.truth.states[static_cast<std::size_t>(k)] +
                    series_at(output_noise, k, no_noise));
  }
  return run;
}

ObserverRun run_ekf_partial(std::shared_ptr<const TruthRun> truth, const DiscreteSemilinearModel& observer,
                            const ObserverConfig& config) {
  ObserverRun run = start_run(truth, observer, config);
  const TimeGrid& grid = truth->truth.grid;
  const ExtendedKalmanFilter filter(observer, config, grid);
  const Vector no_input = Vector::Zero(observer.inputs());
  EkfState state{config.initial_estimate, config.spec.P0};
  record(run, config, observer, 0, state.z, state.P);
  for (Index k = 0; k < grid.steps(); ++k) {
    try {
      state = filter.step(state, truth->y[static_cast<std::size_t>(k)], series_at(truth->inputs, k, no_input), k);
    } catch (const Error& e) {
      run.failure = std::string(e.what()) + " (last valid step " + std::to_string(k) + ")";
      return run;
    }
    record(run, config, observer, k + 1, state.z, state.P);
  }
  return run;
}

ObserverRun run_ekf(std::shared_ptr<const TruthRun> truth, const DiscreteSemilinearModel& observer,
                    const ObserverConfig& config) {
  ObserverRun run = run_ekf_partial(std::move(truth), observer, config);
  if (run.failure) throw Error(ErrorKind::Divergence, *run.failure);
  return run;
}

ObserverRun run_kf(std::shared_ptr<const TruthRun> truth, const DiscreteSemilinearModel& linear_observer,
                   const ObserverConfig& config) {
  if (!linear_observer.linear) {
    throw Error(ErrorKind::Misuse, "run_kf requires a linear model (F = 0), got " + linear_observer.name);
  }
  ObserverRun run = start_run(truth, linear_observer, config);
  const TimeGrid& grid = truth->truth.grid;
  const double dt = grid.dt();
  const Index n = linear_observer.order();
  const Matrix& c = linear_observer.output_map;
  const Matrix& b = linear_observer.input_map;

  // Time-invariant pieces, factored once.
  Matrix a_shift = linear_observer.generator();
  a_shift.diagonal().array() += config.alpha;
  const Eigen::PartialPivLU<Matrix> riccati_lu(Matrix::Identity(n, n) - dt * a_shift);
  const Matrix& mass = linear_observer.mass.dense();
  const Eigen::PartialPivLU<Matrix> state_lu(mass + dt * linear_observer.stiffness.dense());

  Vector z = config.initial_estimate;
  Matrix p = config.spec.P0.dense();
  record(run, config, linear_observer, 0, z, config.spec.P0);
  for (Index k = 0; k < grid.steps(); ++k) {
    const Matrix& r = config.spec.R_at(k).dense();
    const Matrix& w = config.spec.W_at(k).dense();
    const Matrix r_inv = r.inverse();
    const Matrix l = p * c.transpose() * r_inv;
    Vector drift = l * (truth->y[static_cast<std::size_t>(k)] - c * z);
    if (b.cols() > 0) drift += b * series_at(truth->inputs, k, Vector::Zero(b.cols()));
    z = state_lu.solve(mass * (z + dt * drift));

    const Matrix pct = p * c.transpose();
    const Matrix s = r + dt * c * pct;
    const Matrix middle = p + dt * w - dt * pct * s.inverse() * pct.transpose();
    p = riccati_lu.solve(riccati_lu.solve(middle).transpose());
    const SymMatrix ps = symmetrize(p);
    p = ps.dense();
    if (!z.allFinite() || !p.allFinite()) {
      run.failure = "KF: non-finite state (last valid step " + std::to_string(k) + ")";
      throw Error(ErrorKind::Divergence, *run.failure);
    }
    record(run, config, linear_observer, k + 1, z, ps);
  }
  return run;
}

}  // namespace pdekf
