#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "pdekf/analysis.hpp"
#include "pdekf/systems.hpp"

using namespace pdekf;

namespace {

MagneticParameters paper_parameters() {
  MagneticParameters p = default_magnetic_parameters();
  p.qc = default_qc_surrogate();
  return p;
}

bool fd_check_passes(const DiscreteSemilinearModel& m, const Vector& z, const Vector& e) {
  const auto errs = jacobian_fd_errors(m, z, e, {1e-3, 1e-4, 1e-5, 1e-6});
  const double scale = (m.DF(z, 0.0) * e).norm() + m.F(z, 0.0).norm();
  for (std::size_t i = 1; i < errs.size(); ++i) {
    if (errs[i] <= 1e-12 * std::max(scale, 1e-300)) continue;
    const double ratio = errs[i] / errs[i - 1];
    if (ratio < 0.08 || ratio > 0.12) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("linear heat model") {
  const Mesh mesh(1, 16, 1.0);
  const auto m = build_linear_heat(mesh, 0.5);
  CHECK(m.F(Vector::LinSpaced(17, -3, 3), 0.0).norm() == 0.0);
  CHECK(m.inputs() == 0);
  CHECK(m.disturbances() == 17);
  CHECK(m.outputs() == 1);

  const TimeGrid grid(0.0, 1.0, 100);
  const auto flat = evolve_mild(m, Vector::Constant(17, 2.0), {}, {}, grid);
  CHECK((flat.states.back() - Vector::Constant(17, 2.0)).cwiseAbs().maxCoeff() <= 1e-12);

  // Lowest nonconstant generalized eigenpair K v = lambda M v.
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(m.stiffness.dense(), m.mass.dense());
  const double lambda = ges.eigenvalues()(1);
  const Vector v = ges.eigenvectors().col(1);
  const auto traj = evolve_mild(m, v, {}, {}, grid);
  // Implicit Euler multiplies the mode by 1 / (1 + dt lambda) per step.
  const double expected = std::pow(1.0 + grid.dt() * lambda, -100.0);
  CHECK(traj.states.back().dot(m.mass.dense() * v) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("semilinear heat model") {
  const Mesh mesh(1, 8, 1.0);
  const auto m = build_semilinear_heat_1d(mesh, 1.0, 2.5e-7);
  CHECK(m.F(Vector::Zero(9), 0.0).norm() == 0.0);
  CHECK((m.F(Vector::Ones(9), 0.0).array() + 2.5e-7).abs().maxCoeff() == 0.0);
  const auto strong = build_semilinear_heat_1d(mesh, 1.0, 1.0);
  CHECK(fd_check_passes(strong, Vector::Ones(9), Vector::LinSpaced(9, -1, 1)));
}

TEST_CASE("magnetic simplified model") {
  const Mesh mesh(2, 10, 0.01);
  const auto m = build_magnetic_simplified(mesh, paper_parameters());
  CHECK(m.order() == 121);
  CHECK(m.inputs() == kCurrentProducts);

  const NodalField ce = linearization_profile(mesh, 6.25e-5);
  const double integral = Vector::Ones(121).dot(m.mass.dense() * ce.values);
  CHECK(std::abs(integral - mesh.area()) <= 1e-6 * mesh.area());

  const Vector y0 = m.output_map * Vector::Ones(121);
  CHECK(std::abs(y0(0)) < 1e-18);
  CHECK(std::abs(y0(1)) < 1e-18);
  CHECK(y0(2) == doctest::Approx(4e-4).epsilon(1e-12));

  // Without inputs the -kappa z^2 sink removes mass every step.
  const TimeGrid grid(0.0, 2.0, 200);
  const auto traj = evolve_mild(m, Vector::Ones(121), {}, {}, grid);
  const Vector ones = Vector::Ones(121);
  double prev = ones.dot(m.mass.dense() * traj.states[0]);
  for (std::size_t k = 1; k < traj.states.size(); ++k) {
    const double total = ones.dot(m.mass.dense() * traj.states[k]);
    CHECK(total < prev);
    prev = total;
  }

  MagneticParameters missing = default_magnetic_parameters();
  missing.qc.reset();
  try {
    build_magnetic_simplified(mesh, missing);
    FAIL("expected Config");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK(std::string(e.what()).find("default_qc_surrogate") != std::string::npos);
  }
}

TEST_CASE("magnetic simplified with diffusion only conserves mass") {
  const Mesh mesh(2, 8, 0.01);
  MagneticParameters p = default_magnetic_parameters();
  p.kappa = 0.0;
  p.qc = Matrix::Zero(kPotentialTerms, kCurrentProducts);
  const auto m = build_magnetic_simplified(mesh, p);
  CHECK(m.input_map.norm() == 0.0);
  const Vector z0 = NodalField::from_function(mesh, [](double r, double s) { return 1.0 + 50 * r - 30 * s * s * 1e2; }).values;
  const auto traj = evolve_mild(m, z0, {}, {}, TimeGrid(0.0, 2.0, 200));
  const Vector ones = Vector::Ones(m.order());
  const double m0 = ones.dot(m.mass.dense() * z0);
  for (const auto& s : traj.states) CHECK(std::abs(ones.dot(m.mass.dense() * s) - m0) <= 1e-10 * std::abs(m0));
}

TEST_CASE("truth outputs are stable under mesh refinement") {
  const auto p = paper_parameters();
  const auto m35 = build_magnetic_simplified(Mesh(2, 34, 0.01), p);
  const auto m45 = build_magnetic_simplified(Mesh(2, 44, 0.01), p);
  const TimeGrid grid(0.0, 2.0, 2000);
  const auto u = sample_inputs(input_signal_It, grid);
  const auto t35 = simulate_truth(m35, Vector::Ones(m35.order()), u, {}, {}, grid);
  const auto t45 = simulate_truth(m45, Vector::Ones(m45.order()), u, {}, {}, grid);
  double diff = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < t35.y.size(); ++k) {
    diff = std::max(diff, (t35.y[k] - t45.y[k]).cwiseAbs().maxCoeff());
    scale = std::max(scale, t45.y[k].cwiseAbs().maxCoeff());
  }
  CHECK(diff <= 0.02 * scale);
}

TEST_CASE("magnetic augmented model") {
  const Mesh mesh(2, 4, 0.01);
  const auto m = build_magnetic_augmented(mesh, paper_parameters());
  const Index nc = mesh.node_count();
  CHECK(m.order() == nc + kCurrentProducts);
  CHECK(m.disturbances() == 5);

  Vector z = Vector::Zero(m.order());
  z.tail(kCurrentProducts).setConstant(3.0);
  CHECK(m.F(z, 0.0).norm() == 0.0);

  RngStream rng(8);
  Vector smooth = Vector::NullaryExpr(m.order(), [&rng](Index) { return 1.0 + 0.1 * rng.next_normal(); });
  Vector dir = Vector::NullaryExpr(m.order(), [&rng](Index) { return rng.next_normal(); });
  CHECK(fd_check_passes(m, smooth, dir));

  // Current block integrates U_t; with U_t = 0 and no disturbance the currents hold.
  const TimeGrid grid(0.0, 0.5, 50);
  Vector z0 = Vector::Ones(m.order());
  z0.tail(kCurrentProducts) = Vector::LinSpaced(kCurrentProducts, -1.0, 1.0);
  const auto traj = evolve_mild(m, z0, {}, {}, grid);
  CHECK((traj.states.back().tail(kCurrentProducts) - z0.tail(kCurrentProducts)).cwiseAbs().maxCoeff() <= 1e-12);

  CHECK_THROWS_AS(build_magnetic_augmented(mesh, paper_parameters(), 10), Error);
}

TEST_CASE("every catalog model satisfies F(0) = 0 and the DF check at random states") {
  RngStream rng(99);
  const Mesh line(1, 6, 1.0), square(2, 4, 0.01);
  const std::vector<DiscreteSemilinearModel> models{
      build_linear_heat(line, 1.0), build_semilinear_heat_1d(line, 1.0, 1.0),
      build_magnetic_simplified(square, paper_parameters()), build_magnetic_augmented(square, paper_parameters())};
  for (const auto& m : models) {
    CHECK(m.F(Vector::Zero(m.order()), 0.0).norm() == 0.0);
    for (int trial = 0; trial < 5; ++trial) {
      const Vector z = Vector::NullaryExpr(m.order(), [&rng](Index) { return rng.next_normal(); });
      const Vector e = Vector::NullaryExpr(m.order(), [&rng](Index) { return rng.next_normal(); });
      CHECK(fd_check_passes(m, z, e));
    }
  }
}

TEST_CASE("input signals") {
  CHECK(input_signal_It(0.0).norm() == 0.0);
  CHECK(input_signal_It(0.0).size() == kCurrentProducts);
  const Vector it = input_signal_It(std::numbers::pi / 40.0);
  CHECK(it(9) == doctest::Approx(0.04));
  CHECK(it(14) == doctest::Approx(16.0 * std::sin(std::numbers::pi / 1.0) / 40.0).epsilon(1e-12));
  for (Index i = 0; i < kCurrentProducts; ++i) {
    if (i != 9 && i != 14) CHECK(it(i) == 0.0);
  }

  for (double h : {1e-3, 1e-4}) {
    const double t = 0.3;
    const Vector fd = (input_signal_It(t + h) - input_signal_It(t)) / h;
    CHECK((fd - input_signal_Ut(t)).cwiseAbs().maxCoeff() <= 20.0 * h * 16.0 * 40.0 / 2.0);
  }

  const TimeGrid grid(0.0, 1.0, 10);
  const auto samples = sample_inputs(input_signal_It, grid);
  CHECK(samples.size() == 11);
  CHECK((samples[3] - input_signal_It(grid.time(3))).norm() == 0.0);
}

TEST_CASE("disturbance streams") {
  const TimeGrid grid(0.0, 1.0, 100);
  const auto zero = disturbance_stream({SymMatrix::Zero(2), SymMatrix::Zero(3), 0.0, 1}, grid);
  for (const auto& w : zero.omega) CHECK(w.norm() == 0.0);
  for (const auto& e : zero.eta) CHECK(e.norm() == 0.0);
  CHECK(zero.omega.size() == 100);
  CHECK(zero.eta.size() == 101);

  const DisturbanceSpec spec{SymMatrix::Identity(1) * 0.1, SymMatrix::Diagonal(Eigen::Vector3d(5e-3, 5e-3, 5e-4)), 0.0, 7};
  const auto a = disturbance_stream(spec, grid);
  const auto b = disturbance_stream(spec, grid);
  for (std::size_t k = 0; k < a.eta.size(); ++k) CHECK((a.eta[k] - b.eta[k]).norm() == 0.0);

  const TimeGrid big(0.0, 100.0, 100000);
  const auto s = disturbance_stream(spec, big);
  Eigen::Vector3d sq = Eigen::Vector3d::Zero();
  double wsq = 0.0;
  for (const auto& e : s.eta) sq += e.cwiseProduct(e);
  for (const auto& w : s.omega) wsq += w(0) * w(0);
  sq /= static_cast<double>(s.eta.size());
  CHECK(std::abs(sq(0) - 5e-3) <= 0.1 * 5e-3);
  CHECK(std::abs(sq(1) - 5e-3) <= 0.1 * 5e-3);
  CHECK(std::abs(sq(2) - 5e-4) <= 0.1 * 5e-4);
  CHECK(std::abs(wsq / 100000.0 - 0.1) <= 0.01);

  // Holding over several steps repeats each draw.
  const auto held = disturbance_stream({SymMatrix::Identity(1), SymMatrix::Identity(1), 0.05, 3}, grid);
  CHECK(held.omega[0](0) == held.omega[4](0));
  CHECK(held.omega[0](0) != held.omega[5](0));
}

TEST_CASE("load_matrix_file") {
  const auto path = std::filesystem::temp_directory_path() / "pdekf_qc_test.txt";
  {
    std::ofstream out(path);
    out << "# potentials\n1 2 3\n\n4 5 6\n";
  }
  const Matrix m = load_matrix_file(path.string());
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 2) == 6.0);
  {
    std::ofstream out(path);
    out << "1 2\n3\n";
  }
  try {
    load_matrix_file(path.string());
    FAIL("expected Config");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("default Q_c surrogate layout") {
  const Matrix qc = default_qc_surrogate(2.0);
  CHECK(qc.rows() == kPotentialTerms);
  CHECK(qc.cols() == kCurrentProducts);
  CHECK(qc(2, 9) == 2.0);
  CHECK(qc(3, 14) == 2.0);
  CHECK(qc.cwiseAbs().sum() == 4.0);
  CHECK(model_names().size() == 4);
}
