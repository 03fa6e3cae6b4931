#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pdekf/evolution.hpp"

namespace pdekf {

/// Number of entries of the current-product vector I_t.
inline constexpr Index kCurrentProducts = 45;

struct MagneticParameters {
  double diffusion = 1e-8;  // m^2/s
  double kappa = 2.5e-7;
  double gamma = 6.6e-5;
  double L0 = 0.01;              // m
  double ce_width = 6.25e-5;     // m^2, exponent scale of the linearization profile
  std::optional<Matrix> qc;      // kPotentialTerms x m potential coefficients
};

/// Synthetic Q_c: gradients of `scale` (r^2 + s^2) in column 10 and `scale` r s
/// in column 15 (1-based), zero elsewhere.
Matrix default_qc_surrogate(double scale = 1e4, Index columns = kCurrentProducts);

MagneticParameters default_magnetic_parameters();

/// Reads a whitespace-separated real matrix, one row per line; blank lines and
/// lines starting with '#' are skipped.
Matrix load_matrix_file(const std::string& path);

DiscreteSemilinearModel build_linear_heat(const Mesh& mesh, double diffusion);
DiscreteSemilinearModel build_semilinear_heat_1d(const Mesh& mesh, double diffusion, double kappa);

/// Linearization profile c_r exp(-(r^2 + s^2)/width) normalised so its
/// interpolant integrates to the domain area.
NodalField linearization_profile(const Mesh& mesh, double width);

DiscreteSemilinearModel build_magnetic_simplified(const Mesh& mesh, const MagneticParameters& params);

/// State (c, I_t) in L2 x R^m with F = -div(kappa c^2 1 + gamma c Q_c I_t),
/// I_t' = U_t + omega_2 (omega_2 drives the first four currents).
/// F is not globally Lipschitz on the state space.
DiscreteSemilinearModel build_magnetic_augmented(const Mesh& mesh, const MagneticParameters& params,
                                                 Index m_currents = kCurrentProducts);

/// I_t(t): slot 10 is 0.8 sin(20t)/20, slot 15 is 16 sin(40t)/40 (1-based).
Vector input_signal_It(double t);
/// U_t(t) = d/dt I_t(t).
Vector input_signal_Ut(double t);

StepSeries sample_inputs(Vector (*signal)(double), const TimeGrid& grid);

struct DisturbanceSpec {
  SymMatrix process_cov;  // omega
  SymMatrix output_cov;   // eta
  double hold_interval = 0.0;  // s; 0 means one draw per step
  std::uint64_t seed = 0;
};

struct DisturbanceStreams {
  StepSeries omega;  // one per step
  StepSeries eta;    // one per grid node
};

/// Piecewise-constant Gaussian samples, one draw per hold interval, from
/// independent substreams for omega and eta.
DisturbanceStreams disturbance_stream(const DisturbanceSpec& spec, const TimeGrid& grid);

std::vector<std::string> model_names();

}  // namespace pdekf
