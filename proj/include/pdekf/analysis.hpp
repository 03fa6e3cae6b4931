#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pdekf/ekf.hpp"

namespace pdekf {

struct ErrorSeries {
  TimeGrid grid{0.0, 1.0, 1};
  std::vector<double> l2_error;      // sqrt(e^T M e) on the truth mesh
  std::vector<double> relative;      // l2_error / ||z||_M
  std::vector<double> output_error;  // ||y_k - C zhat_k||_2
  StepSeries output_residual;        // y_k - C zhat_k componentwise
};

/// Differences the observer estimate against the truth after interpolating
/// the field block of the estimate onto the truth mesh. Extra (non-field)
/// state entries, such as augmented currents, are ignored.
ErrorSeries error_series(const ObserverRun& run, const DiscreteSemilinearModel& observer,
                         const DiscreteSemilinearModel& truth_model);

/// Lower-level form on raw trajectories sharing a grid.
ErrorSeries error_series(const Trajectory& truth, const Mesh& truth_mesh, const SymMatrix& truth_mass,
                         const Trajectory& estimate, const Mesh& estimate_mesh, const StepSeries& y,
                         const StepSeries& predicted);

struct DecayFit {
  double M_e = 0.0;
  double alpha_e = 0.0;  // positive for decay
  std::pair<double, double> window;
  double residual = 0.0;  // rms misfit of log values
};

/// Least squares of log(values) = log(M_e) - alpha_e (t - t0) over `window`
/// (default [0.1 tf, 0.6 tf] relative to t0).
DecayFit fit_exponential(const TimeGrid& grid, const std::vector<double>& values,
                         std::optional<std::pair<double, double>> window = std::nullopt);
DecayFit fit_exponential(const ErrorSeries& series, std::optional<std::pair<double, double>> window = std::nullopt);

using VectorMap = std::function<Vector(const Vector&)>;
using JacobianMap = std::function<Matrix(const Vector&)>;

/// phi(e) = F(z) - F(z - e) - DF(z - e) e.
Vector phi_remainder(const VectorMap& f, const JacobianMap& df, const Vector& z, const Vector& e);

struct RemainderProbe {
  std::vector<double> e_norms;
  std::vector<double> phi_norms;
  std::optional<double> m;  // absent when the regression is degenerate or too noisy
  double delta_phi = 0.0;
  double epsilon_phi = 0.0;
  double residual = 0.0;
  std::string note;
};

/// Pools ||phi(r d)|| against ||r d|| over all directions d and radii r, in the
/// norm induced by `mass` when given, and fits the log-log slope.
RemainderProbe estimate_remainder_exponent(const VectorMap& f, const JacobianMap& df, const Vector& z,
                                           const std::vector<Vector>& directions, const std::vector<double>& radii,
                                           const std::optional<SymMatrix>& mass = std::nullopt,
                                           double residual_threshold = 1e-2);

struct DetectabilityReport {
  DecayFit fit;                  // decay of ||U_L(t, t0)||
  double delta_Y = 0.0;          // max_{s <= t} ||U_L(t, s)||
  std::vector<double> norms;     // ||U_L(t_k, t0)||
};

/// Closed-loop evolution of the error generator a_d(k) - L(t_k) C where L is
/// the gain of the Riccati flow driven by a_d(k) + alpha I. Norms are taken in
/// the mass-weighted sense when `mass` is supplied.
DetectabilityReport detectability_probe(const GeneratorSeries& a_d, const Matrix& c, const NoiseSpec& spec,
                                        double alpha, const TimeGrid& grid,
                                        const std::optional<SymMatrix>& mass = std::nullopt,
                                        const DreOptions& opts = {});

struct BoundednessVerdict {
  bool bounded = false;
  double tail_sup = 0.0;
  double ratio = 0.0;  // tail_sup / undisturbed tail_sup
  Index rising_windows = 0;
  Index windows = 0;
  std::string verdict;  // "bounded" or "unbounded trend"
};

/// Windowed-mean sign test over the final `tail_fraction` of the run.
BoundednessVerdict disturbance_bound_check(const std::vector<double>& series, const std::vector<double>& undisturbed,
                                           double tail_fraction = 0.25, Index windows = 8);

/// ||(F(z + h e) - F(z))/h - DF(z) e|| for each h.
std::vector<double> jacobian_fd_errors(const DiscreteSemilinearModel& model, const Vector& z, const Vector& e,
                                       const std::vector<double>& hs, double t = 0.0);

/// sqrt(v^T M v).
double mass_norm(const SymMatrix& mass, const Vector& v);

}  // namespace pdekf
