#pragma once

#include <optional>
#include <vector>

#include "pdekf/evolution.hpp"

namespace pdekf {

/// Initial covariance, process weight W(t), output weight R(t) and the
/// coercivity floor delta0 of R. W and R hold either one matrix (constant in
/// time) or one matrix per grid node.
struct NoiseSpec {
  SymMatrix P0;
  std::vector<SymMatrix> W;
  std::vector<SymMatrix> R;
  double delta0 = 0.0;

  const SymMatrix& W_at(Index k) const;
  const SymMatrix& R_at(Index k) const;

  /// Throws Parameter/PsdFailure if P0 or W is not PSD,
  /// or R falls below delta0 > 0, and Shape on dimension mismatch.
  void validate(Index state_dim, Index output_dim) const;

  static NoiseSpec constant(SymMatrix p0, SymMatrix w, SymMatrix r);
};

struct RiccatiTrajectory {
  TimeGrid grid;
  std::vector<SymMatrix> P;
  double alpha = 0.0;
};

struct DreOptions {
  double psd_tolerance = 1e-8;  // relative to ||P||
  double blowup_norm = 1e12;
  bool check_psd = true;
};

/// One first-order step of P' = A_d P + P A_d^T - P C^T R^{-1} C P + W:
/// measurement contraction P - dt P C^T (R + dt C P C^T)^{-1} C P, then the
/// linear part implicitly on both sides, then symmetrization.
SymMatrix dre_step(const SymMatrix& p, const Matrix& a_d, const Matrix& c, const SymMatrix& r, const SymMatrix& w,
                   double dt);

/// Applies the PSD and blow-up checks of `opts` to P(t_k).
void check_covariance(const SymMatrix& p, Index step, const DreOptions& opts);

/// Propagates the differential filter Riccati equation; a_d(k) is the full
/// generator A + alpha I + DF(zhat(t_k), t_k) on [t_k, t_k+1].
RiccatiTrajectory dre_propagate(const GeneratorSeries& a_d, const Matrix& c, const NoiseSpec& spec,
                                const TimeGrid& grid, double alpha = 0.0, const DreOptions& opts = {});

struct IntegralRiccatiStats {
  Index max_sweeps = 0;
  double worst_increment = 0.0;
};

/// Integral-form oracle: builds U_alpha from exp(dt a_d(k)) steps, then marches
/// the coupled pair U_P(t,s) = U(t,s) - int U(t,r) P(r) C^T R^{-1} C U_P(r,s) dr and
/// P(t) = U_P(t,0) P0 U^*(t,0) + int U_P(t,s) W(s) U^*(t,s) ds forward in time with
/// trapezoidal quadrature, closing the implicit endpoint by fixed-point sweeps.
RiccatiTrajectory integral_riccati_oracle(const GeneratorSeries& a_d, const Matrix& c, const NoiseSpec& spec,
                                          const TimeGrid& grid, double alpha = 0.0,
                                          IntegralRiccatiStats* stats = nullptr);

/// Generator A + alpha I + DF(zhat(t_k), t_k) along an estimate trajectory.
GeneratorSeries linearized_generator(const DiscreteSemilinearModel& model, const Trajectory& estimate, double alpha);

RiccatiTrajectory integral_riccati_oracle(const Trajectory& estimate, const DiscreteSemilinearModel& model,
                                          const NoiseSpec& spec, double alpha);

/// Observer state for a prescribed P(t): IMEX integration with the gain
/// forcing P(t_k) C^T R^{-1} (y_k - C zhat_k). No alpha shift in the drift.
Trajectory g1_observer_map(const RiccatiTrajectory& p, const DiscreteSemilinearModel& model, const NoiseSpec& spec,
                           const StepSeries& y, const StepSeries& u, const Vector& z0);

struct PicardResult {
  RiccatiTrajectory P;
  Trajectory estimate;
  std::vector<double> distances;  // d_k = max_t max_ij |P^k - P^{k-1}|
  Index iterations = 0;           // applications of G before the confirming one
};

enum class PicardStart { InitialCovariance, Zero };

/// Iterates P^{k+1} = G2(G1(P^k)) from a constant-in-time start until the
/// sup-norm increment is at most `tol`. Throws NonConvergence (listing the
/// distance sequence) after `max_iter` iterations.
PicardResult picard_fixed_point(const DiscreteSemilinearModel& model, const StepSeries& y, const StepSeries& u,
                                const NoiseSpec& spec, double alpha, const TimeGrid& grid, const Vector& z0,
                                double tol = 1e-8, Index max_iter = 50,
                                PicardStart start = PicardStart::InitialCovariance, const DreOptions& opts = {});

double sup_distance(const RiccatiTrajectory& a, const RiccatiTrajectory& b);

}  // namespace pdekf
