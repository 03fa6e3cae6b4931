#pragma once

#include <functional>
#include <vector>

#include <Eigen/LU>

#include "pdekf/model.hpp"

namespace pdekf {

class TimeGrid {
 public:
  TimeGrid(double t0, double tf, Index steps);

  double t0() const { return t0_; }
  double tf() const { return tf_; }
  Index steps() const { return steps_; }
  double dt() const { return (tf_ - t0_) / static_cast<double>(steps_); }
  double time(Index k) const { return t0_ + dt() * static_cast<double>(k); }
  Index nodes() const { return steps_ + 1; }

  bool operator==(const TimeGrid& o) const = default;

 private:
  double t0_;
  double tf_;
  Index steps_;
};

struct Trajectory {
  TimeGrid grid;
  std::vector<Vector> states;
};

/// Per-step sequence; an empty sequence means zero, a single entry is held
/// constant over the grid.
using StepSeries = std::vector<Vector>;

/// Factored implicit matrix (M - dt A_lin) for repeated first-order IMEX steps.
class ImexStepper {
 public:
  ImexStepper(const SymMatrix& mass, const Matrix& a_lin, double dt);

  /// Solves (M - dt A_lin) z+ = M z + dt forcing.
  Vector step(const Vector& state, const Vector& forcing) const;
  /// Same step with a standard-form right-hand side: forcing = M rhs.
  Vector step_standard(const Vector& state, const Vector& rhs) const;
  double dt() const { return dt_; }

 private:
  Matrix mass_;
  Eigen::PartialPivLU<Matrix> lu_;
  double dt_;
};

/// One IMEX step; throws StepFailure if (M - dt A_lin) is numerically singular.
Vector imex_step(const Vector& state, const SymMatrix& mass, const Matrix& a_lin, const Vector& forcing, double dt);

/// Semi-implicit mild-solution integrator: stiff -K implicit, F, inputs and
/// disturbances explicit at the step start.
Trajectory evolve_mild(const DiscreteSemilinearModel& model, const Vector& z0, const StepSeries& inputs,
                       const StepSeries& disturbance, const TimeGrid& grid);

const Vector& series_at(const StepSeries& s, Index k, const Vector& zero);

enum class PropagationScheme {
  Imex,         // (I - dt (A + D_k))^{-1}
  Exponential,  // exp(dt (A + D_k)), exact for piecewise-constant generators
};

/// Dense samples U(t_i, t_j), 0 <= j <= i <= steps, of an evolution operator.
class EvolutionTable {
 public:
  static constexpr Index kMaxOrder = 64;
  static constexpr Index kMaxSteps = 4096;
  static constexpr Index kMaxEntries = Index(1) << 25;

  EvolutionTable(TimeGrid grid, Index order);

  const TimeGrid& grid() const { return grid_; }
  Index order() const { return order_; }
  Matrix& at(Index i, Index j) { return blocks_[offset(i, j)]; }
  const Matrix& at(Index i, Index j) const { return blocks_[offset(i, j)]; }

  /// max ||U(i,i) - I|| over the diagonal.
  double diagonal_defect() const;
  /// max ||U(i,j) - U(i,k) U(k,j)|| / max(1, ||U(i,j)||) over all j <= k <= i.
  double composition_defect() const;

  static void check_limits(Index order, Index steps);

 private:
  Index offset(Index i, Index j) const { return i * (i + 1) / 2 + j; }
  TimeGrid grid_;
  Index order_;
  std::vector<Matrix> blocks_;
};

using GeneratorSeries = std::function<Matrix(Index step)>;

/// Evolution operator generated by A + D(t_k), built by propagating the
/// identity from every t_j with the chosen one-step map.
EvolutionTable evolution_table(const Matrix& a, const GeneratorSeries& d, const TimeGrid& grid,
                               PropagationScheme scheme = PropagationScheme::Imex);

/// Solves U_P(t,s) = U(t,s) + int_s^t U(t,r) K(r) U_P(r,s) dr with left-rectangle
/// quadrature; `feedback` holds K(t_k) (e.g. -P C^T R^{-1} C) per grid node.
EvolutionTable perturb_table(const EvolutionTable& base, const std::vector<Matrix>& feedback);

/// Returns exp(beta (t_i - t_j)) U(t_i, t_j).
EvolutionTable shift_table(const EvolutionTable& base, double beta);

}  // namespace pdekf
