#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pdekf/analysis.hpp"
#include "pdekf/systems.hpp"

using namespace pdekf;

namespace {

SymMatrix inverse_of(const SymMatrix& m) { return symmetrize(solve_spd(m, Matrix::Identity(m.order(), m.order()))); }

DiscreteSemilinearModel scalar_model(double k) {
  DiscreteSemilinearModel m;
  m.name = "scalar";
  m.mass = SymMatrix::Identity(1);
  m.stiffness = SymMatrix::Identity(1) * k;
  m.input_map = Matrix::Zero(1, 0);
  m.disturbance_map = Matrix::Identity(1, 1);
  m.output_map = Matrix::Ones(1, 1);
  m.linear = true;
  return m;
}

ObserverConfig config_for(const DiscreteSemilinearModel& m, double alpha, const Vector& z0) {
  ObserverConfig oc;
  oc.alpha = alpha;
  oc.spec = NoiseSpec::constant(inverse_of(m.mass), inverse_of(m.mass), SymMatrix::Identity(m.outputs()));
  oc.initial_estimate = z0;
  return oc;
}

// ||M^{1/2} X M^{-1/2}||_2
double mass_operator_norm(const SymMatrix& mass, const Matrix& x) {
  const Eigen::LLT<Matrix> llt(mass.dense());
  const Matrix lt = llt.matrixU();
  const Matrix y = lt * x * lt.triangularView<Eigen::Upper>().solve(Matrix::Identity(x.rows(), x.cols()));
  return Eigen::JacobiSVD<Matrix>(y).singularValues()(0);
}

}  // namespace

TEST_CASE("gain examples") {
  CHECK(gain(SymMatrix::Zero(2), Matrix::Identity(2, 2), SymMatrix::Identity(2)).norm() == 0.0);
  CHECK((gain(SymMatrix::Identity(2), Matrix::Identity(2, 2), SymMatrix::Identity(2)) - Matrix::Identity(2, 2)).norm() == 0.0);
  Matrix p(2, 2);
  p << 2, 1, 1, 1;
  const Matrix l = gain(symmetrize(p), (Matrix(1, 2) << 1, 0).finished(), SymMatrix::Identity(1) * 4.0);
  CHECK(l(0, 0) == doctest::Approx(0.5));
  CHECK(l(1, 0) == doctest::Approx(0.25));
  CHECK_THROWS_AS(gain(SymMatrix::Identity(1), Matrix::Ones(1, 1), SymMatrix::Identity(1) * 0.1, 1.0), Error);
}

TEST_CASE("ekf_step: zero innovation with A = 0 and F = 0 keeps the estimate") {
  const auto m = scalar_model(0.0);
  const TimeGrid grid(0.0, 1.0, 10);
  const auto oc = config_for(m, 0.0, Vector::Ones(1));
  const EkfState s{Vector::Constant(1, 3.0), SymMatrix::Identity(1)};
  const auto next = ekf_step(m, oc, s, Vector::Constant(1, 3.0), Vector(), 0, grid);
  CHECK(next.z(0) == 3.0);
}

TEST_CASE("ekf_step: scalar Kalman-Bucy discretization") {
  const double k = 0.7, alpha = 0.3, w = 0.4, r = 2.0, dt = 0.01;
  auto m = scalar_model(k);
  const TimeGrid grid(0.0, 1.0, 100);
  ObserverConfig oc;
  oc.alpha = alpha;
  oc.spec = NoiseSpec::constant(SymMatrix::Identity(1), SymMatrix::Identity(1) * w, SymMatrix::Identity(1) * r);
  EkfState s{Vector::Constant(1, 0.0), SymMatrix::Identity(1)};
  double z = 0.0, p = 1.0;
  for (Index i = 0; i < 100; ++i) {
    const double y = std::sin(grid.time(i));
    s = ekf_step(m, oc, s, Vector::Constant(1, y), Vector(), i, grid);
    const double l = p / r;
    z = (z + dt * l * (y - z)) / (1.0 + dt * k);
    const double contracted = p - dt * p * p / (r + dt * p) + dt * w;
    p = contracted / ((1.0 - dt * (alpha - k)) * (1.0 - dt * (alpha - k)));
    CHECK(s.z(0) == doctest::Approx(z).epsilon(1e-12));
    CHECK(s.P(0, 0) == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("ekf_step: two half steps vs one full step differ at O(dt^2)") {
  const Mesh mesh(1, 8, 1.0);
  const auto model = build_semilinear_heat_1d(mesh, 1.0, 1.0);
  const auto oc = config_for(model, 0.5, Vector::Ones(9));
  const EkfState s{NodalField::from_function(mesh, [](double r, double) { return 1.0 + 0.3 * r; }).values,
                   inverse_of(model.mass)};
  const Vector y = Vector::Constant(1, 1.5);
  const auto defect = [&](double dt) {
    const TimeGrid full(0.0, dt, 1), half(0.0, dt, 2);
    const auto one = ekf_step(model, oc, s, y, Vector(), 0, full);
    const auto two = ekf_step(model, oc, ekf_step(model, oc, s, y, Vector(), 0, half), y, Vector(), 1, half);
    return (one.z - two.z).norm() + (one.P.dense() - two.P.dense()).norm();
  };
  const double d1 = defect(1e-3), d2 = defect(5e-4);
  CHECK(d1 / d2 == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("run_ekf: zero initial error stays zero without disturbances") {
  const Mesh mesh(1, 16, 1.0);
  const auto model = build_semilinear_heat_1d(mesh, 1.0, 1.0);
  const Vector z0 = NodalField::from_function(mesh, [](double r, double) { return 1.0 + 0.5 * std::cos(std::numbers::pi * r); }).values;
  const TimeGrid grid(0.0, 1.0, 500);
  auto truth = std::make_shared<const TruthRun>(simulate_truth(model, z0, {}, {}, {}, grid));
  const auto run = run_ekf(truth, model, config_for(model, 0.5, z0));
  const auto series = error_series(run, model, model);
  for (double e : series.l2_error) CHECK(e <= 1e-12);
}

TEST_CASE("run_ekf equals run_kf on linear models") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Mesh mesh(1, 31, 1.0);
    const auto model = build_linear_heat(mesh, 0.2);
    const TimeGrid grid(0.0, 0.5, 250);
    const auto dist = disturbance_stream({SymMatrix::Identity(32) * 0.01, SymMatrix::Identity(1) * 0.01, 0.0, seed}, grid);
    auto truth = std::make_shared<const TruthRun>(simulate_truth(model, Vector::Ones(32), {}, dist.omega, dist.eta, grid, seed));
    auto oc = config_for(model, 0.5, Vector::Zero(32));
    const auto ekf = run_ekf(truth, model, oc);
    const auto kf = run_kf(truth, model, oc);
    for (std::size_t k = 0; k < kf.estimate.states.size(); ++k) {
      CHECK((ekf.estimate.states[k] - kf.estimate.states[k]).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK(std::abs(ekf.gain_norm[k] - kf.gain_norm[k]) <= 1e-8 * std::max(1.0, kf.gain_norm[k]));
    }
  }
}

TEST_CASE("run_kf rejects nonlinear models") {
  const Mesh mesh(1, 4, 1.0);
  const auto model = build_semilinear_heat_1d(mesh, 1.0, 1.0);
  const TimeGrid grid(0.0, 0.1, 10);
  auto truth = std::make_shared<const TruthRun>(simulate_truth(model, Vector::Ones(5), {}, {}, {}, grid));
  try {
    run_kf(truth, model, config_for(model, 0.0, Vector::Zero(5)));
    FAIL("expected Misuse");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Misuse);
  }
}

TEST_CASE("run_ekf with C = 0 equals the open-loop simulation") {
  const Mesh mesh(1, 8, 1.0);
  auto model = build_semilinear_heat_1d(mesh, 1.0, 1.0);
  model.output_map = Matrix::Zero(0, 9);
  const TimeGrid grid(0.0, 0.5, 100);
  const Vector z0 = Vector::LinSpaced(9, 0.5, 1.0);
  auto truth = std::make_shared<const TruthRun>(simulate_truth(model, Vector::Ones(9), {}, {}, {}, grid));
  ObserverConfig oc;
  oc.spec = NoiseSpec::constant(SymMatrix::Identity(9), SymMatrix::Identity(9), SymMatrix::Identity(0));
  oc.spec.delta0 = 1.0;
  oc.initial_estimate = z0;
  const auto run = run_ekf(truth, model, oc);
  const auto open = evolve_mild(model, z0, {}, {}, grid);
  for (std::size_t k = 0; k < open.states.size(); ++k) CHECK((run.estimate.states[k] - open.states[k]).norm() == 0.0);
}

TEST_CASE("run_ekf is bit-reproducible") {
  const Mesh mesh(1, 16, 1.0);
  const auto model = build_semilinear_heat_1d(mesh, 1.0, 1.0);
  const TimeGrid grid(0.0, 0.5, 200);
  const auto make = [&] {
    const auto dist = disturbance_stream({SymMatrix::Identity(17) * 0.01, SymMatrix::Identity(1) * 0.01, 0.0, 9}, grid);
    auto truth = std::make_shared<const TruthRun>(simulate_truth(model, Vector::Ones(17), {}, dist.omega, dist.eta, grid, 9));
    return run_ekf(truth, model, config_for(model, 0.5, Vector::Zero(17)));
  };
  const auto a = make(), b = make();
  for (std::size_t k = 0; k < a.estimate.states.size(); ++k) {
    CHECK((a.estimate.states[k] - b.estimate.states[k]).norm() == 0.0);
    CHECK(a.p_trace[k] == b.p_trace[k]);
  }
}

TEST_CASE("run_ekf_partial truncates on divergence and run_ekf throws") {
  const Mesh mesh(1, 4, 1.0);
  const auto model = build_linear_heat(mesh, 1.0);
  const TimeGrid grid(0.0, 2.0, 200);
  auto truth = std::make_shared<const TruthRun>(simulate_truth(model, Vector::Ones(5), {}, {}, {}, grid));
  auto oc = config_for(model, 20.0, Vector::Zero(5));
  oc.riccati.blowup_norm = 1e6;
  const auto partial = run_ekf_partial(truth, model, oc);
  REQUIRE(partial.failure.has_value());
  CHECK(partial.last_valid_step < grid.steps());
  CHECK(partial.estimate.states.size() == static_cast<std::size_t>(partial.last_valid_step + 1));
  try {
    run_ekf(truth, model, oc);
    FAIL("expected Divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Divergence);
  }
}

TEST_CASE("reduced-order observer on the magnetic model reduces the error") {
  const MagneticParameters params = default_magnetic_parameters();
  MagneticParameters with_qc = params;
  with_qc.qc = default_qc_surrogate();
  const auto truth_model = build_magnetic_simplified(Mesh(2, 10, 0.01), with_qc);
  const auto observer = build_magnetic_simplified(Mesh(2, 4, 0.01), with_qc);
  const TimeGrid grid(0.0, 2.0, 2000);
  auto truth = std::make_shared<const TruthRun>(simulate_truth(truth_model, Vector::Ones(truth_model.order()),
                                                               sample_inputs(input_signal_It, grid), {}, {}, grid));
  ObserverConfig oc;
  oc.alpha = 8.0;
  oc.spec = NoiseSpec::constant(inverse_of(observer.mass), inverse_of(observer.mass), SymMatrix::Identity(3) * 100.0);
  oc.initial_estimate = Vector::Zero(observer.order());
  oc.riccati.blowup_norm = 1e40;
  const auto run = run_ekf(truth, observer, oc);
  const auto series = error_series(run, observer, truth_model);
  CHECK(series.relative.front() == doctest::Approx(1.0));
  CHECK(series.relative.back() < 0.1);
}

TEST_CASE("closed-loop error transition is bounded by the probe's delta_Y") {
  const Mesh mesh(1, 8, 1.0);
  const auto model = build_linear_heat(mesh, 1.0);
  const TimeGrid grid(0.0, 1.0, 100);
  auto oc = config_for(model, 0.0, Vector::Zero(9));
  oc.keep_covariance = true;
  auto truth = std::make_shared<const TruthRun>(simulate_truth(model, Vector::Ones(9), {}, {}, {}, grid));
  const auto run = run_ekf(truth, model, oc);

  const Matrix a = model.generator();
  const Matrix& c = model.output_map;
  const Matrix step = (model.mass.dense() + grid.dt() * model.stiffness.dense()).lu().solve(model.mass.dense());
  Matrix phi = Matrix::Identity(9, 9);
  double worst = 1.0;
  for (Index k = 0; k < grid.steps(); ++k) {
    const Matrix l = gain(run.P->P[k], c, oc.spec.R_at(k));
    phi = step * (Matrix::Identity(9, 9) - grid.dt() * l * c) * phi;
    worst = std::max(worst, mass_operator_norm(model.mass, phi));
  }
  const auto report = detectability_probe([&a](Index) { return a; }, c, oc.spec, 0.0, grid, model.mass);
  CHECK(std::isfinite(report.delta_Y));
  CHECK(worst <= report.delta_Y * 1.1);
}
