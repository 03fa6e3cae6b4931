#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "pdekf/riccati.hpp"

namespace pdekf {

struct ObserverConfig {
  double alpha = 0.0;  // 1/s, enters the Riccati generator only
  NoiseSpec spec;
  Vector initial_estimate;
  DreOptions riccati;
  bool keep_covariance = false;   // store P(t_k) for every grid node
  Index structure_check_stride = 0;  // 0 disables the per-step eigenvalue audit of P
};

/// Truth simulation with the measurement stream the observers consume.
struct TruthRun {
  Trajectory truth;
  StepSeries inputs;
  StepSeries y;               // C z + eta, one per grid node
  StepSeries process_noise;   // omega per step (empty: none)
  StepSeries output_noise;    // eta per grid node (empty: none)
  std::uint64_t seed = 0;
};

TruthRun simulate_truth(const DiscreteSemilinearModel& model, const Vector& z0, const StepSeries& inputs,
                        const StepSeries& process_noise, const StepSeries& output_noise, const TimeGrid& grid,
                        std::uint64_t seed = 0);

struct CovarianceAudit {
  double max_asymmetry = 0.0;        // max_k max_ij |P - P^T|
  double worst_min_eig_ratio = 0.0;  // min_k lambda_min(P) / ||P||_2
  Index audited_steps = 0;
};

struct ObserverRun {
  std::shared_ptr<const TruthRun> truth;
  Trajectory estimate;
  std::optional<RiccatiTrajectory> P;
  StepSeries predicted;  // C zhat
  std::vector<double> gain_norm;
  std::vector<double> p_trace;
  CovarianceAudit audit;
  std::optional<std::string> failure;
  Index last_valid_step = 0;
};

/// L = P C^T R^{-1}. Throws Parameter if R falls below the coercivity floor.
Matrix gain(const SymMatrix& p, const Matrix& c, const SymMatrix& r, double delta0 = 0.0);

struct EkfState {
  Vector z;
  SymMatrix P;
};

/// Coupled observer/Riccati stepper for one observer model.
class ExtendedKalmanFilter {
 public:
  ExtendedKalmanFilter(const DiscreteSemilinearModel& model, const ObserverConfig& config, const TimeGrid& grid);

  /// DF at the current estimate, gain from the current P, then both updates.
  EkfState step(const EkfState& state, const Vector& y, const Vector& u, Index k) const;

  const Matrix& generator() const { return a_; }

 private:
  const DiscreteSemilinearModel& model_;
  const ObserverConfig& config_;
  Matrix a_;
  ImexStepper stepper_;
  TimeGrid grid_;
};

EkfState ekf_step(const DiscreteSemilinearModel& model, const ObserverConfig& config, const EkfState& state,
                  const Vector& y, const Vector& u, Index k, const TimeGrid& grid);

/// Runs the EKF against a truth run; on divergence the run is returned
/// truncated with `failure` set.
ObserverRun run_ekf_partial(std::shared_ptr<const TruthRun> truth, const DiscreteSemilinearModel& observer,
                            const ObserverConfig& config);

/// As run_ekf_partial, but throws Divergence naming the last valid step.
ObserverRun run_ekf(std::shared_ptr<const TruthRun> truth, const DiscreteSemilinearModel& observer,
                    const ObserverConfig& config);

/// Linear Kalman-Bucy filter on the same discretization, written against the
/// fixed generator A + alpha I. Throws Misuse for a nonlinear model.
ObserverRun run_kf(std::shared_ptr<const TruthRun> truth, const DiscreteSemilinearModel& linear_observer,
                   const ObserverConfig& config);

}  // namespace pdekf
