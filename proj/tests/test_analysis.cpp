#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pdekf/harness.hpp"

using namespace pdekf;

namespace {

SymMatrix inverse_of(const SymMatrix& m) { return symmetrize(solve_spd(m, Matrix::Identity(m.order(), m.order()))); }

DiscreteSemilinearModel catalog_model(const std::string& name, Index order) {
  ExperimentConfig cfg;
  cfg.model = name;
  if (name.find("heat") != std::string::npos) {
    cfg.diffusion = 1.0;
    cfg.kappa = 1.0;
    cfg.L0 = 1.0;
  }
  return build_experiment_model(cfg, order);
}

Trajectory constant_trajectory(const TimeGrid& grid, const Vector& v) {
  return Trajectory{grid, std::vector<Vector>(static_cast<std::size_t>(grid.nodes()), v)};
}

}  // namespace

TEST_CASE("error_series examples") {
  const Mesh mesh(2, 6, 0.01);
  const auto [mass, stiff] = assemble_mass_stiffness(mesh, 1.0);
  const Matrix c = assemble_output(mesh);
  const TimeGrid grid(0.0, 1.0, 4);
  const Vector z = Vector::LinSpaced(mesh.node_count(), 0.0, 2.0);
  const auto truth = constant_trajectory(grid, z);
  const StepSeries y(5, c * z);

  const auto same = error_series(truth, mesh, mass, truth, mesh, y, StepSeries(5, c * z));
  for (double e : same.l2_error) CHECK(e == 0.0);
  for (double e : same.output_error) CHECK(e == 0.0);

  const double d = 0.3;
  const Vector shifted = z + Vector::Constant(z.size(), d);
  StepSeries predicted(5, c * shifted);
  const auto off = error_series(truth, mesh, mass, constant_trajectory(grid, shifted), mesh, y, predicted);
  CHECK(off.l2_error[2] == doctest::Approx(d * std::sqrt(mesh.area())).epsilon(1e-12));
  CHECK(off.output_error[2] == doctest::Approx((y[2] - predicted[2]).norm()).epsilon(1e-14));

  // Coarser estimate is interpolated onto the truth mesh first.
  const Mesh coarse(2, 3, 0.01);
  const auto coarse_off = error_series(truth, mesh, mass, constant_trajectory(grid, Vector::Constant(16, d)), coarse, y, predicted);
  const Vector diff = z - Vector::Constant(z.size(), d);
  CHECK(coarse_off.l2_error[0] == doctest::Approx(std::sqrt(diff.dot(mass.dense() * diff))).epsilon(1e-12));

  try {
    error_series(truth, mesh, mass, truth, Mesh(2, 6, 0.02), y, y);
    FAIL("expected Domain");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Domain);
  }
}

TEST_CASE("fit_exponential examples") {
  const TimeGrid grid(0.0, 2.0, 200);
  std::vector<double> exact, noisy, flat;
  RngStream rng(12);
  for (Index k = 0; k < grid.nodes(); ++k) {
    const double v = 3.0 * std::exp(-2.0 * grid.time(k));
    exact.push_back(v);
    noisy.push_back(v * (1.0 + 0.01 * rng.next_normal()));
    flat.push_back(0.7);
  }
  const auto f = fit_exponential(grid, exact);
  CHECK(f.M_e == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(f.alpha_e == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(f.residual <= 1e-12);
  CHECK(f.window.first == doctest::Approx(0.2));
  CHECK(f.window.second == doctest::Approx(1.2));

  CHECK(std::abs(fit_exponential(grid, noisy).alpha_e - 2.0) <= 0.05 * 2.0);
  CHECK(std::abs(fit_exponential(grid, flat).alpha_e) <= 1e-12);

  flat[50] = 0.0;
  try {
    fit_exponential(grid, flat);
    FAIL("expected Domain");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Domain);
  }
}

TEST_CASE("phi_remainder examples") {
  const VectorMap lin = [](const Vector& v) { return Vector(3.0 * v); };
  const JacobianMap dlin = [](const Vector& v) { return Matrix(3.0 * Matrix::Identity(v.size(), v.size())); };
  CHECK(phi_remainder(lin, dlin, Vector::Constant(2, 1.0), Vector::Constant(2, 0.4)).norm() == 0.0);

  const double kappa = 1.0;
  const VectorMap quad = [kappa](const Vector& v) { return Vector(-kappa * v.array().square()); };
  const JacobianMap dquad = [kappa](const Vector& v) { return Matrix((-2.0 * kappa * v).asDiagonal()); };
  CHECK(phi_remainder(quad, dquad, Vector::Constant(1, 2.0), Vector::Constant(1, 0.5))(0) == doctest::Approx(-0.25));
  CHECK(phi_remainder(quad, dquad, Vector::Constant(1, 2.0), Vector::Zero(1)).norm() == 0.0);
}

TEST_CASE("estimate_remainder_exponent examples") {
  RngStream rng(5);
  std::vector<Vector> dirs;
  for (int i = 0; i < 3; ++i) dirs.push_back(Vector::NullaryExpr(4, [&rng](Index) { return rng.next_normal(); }));
  const std::vector<double> radii{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  const Vector z = Vector::Constant(4, 1.2);

  const VectorMap quad = [](const Vector& v) { return Vector(-v.array().square()); };
  const JacobianMap dquad = [](const Vector& v) { return Matrix((-2.0 * v).asDiagonal()); };
  const auto q = estimate_remainder_exponent(quad, dquad, z, dirs, radii);
  REQUIRE(q.m.has_value());
  CHECK(*q.m >= 1.95);
  CHECK(*q.m <= 2.05);
  CHECK(q.delta_phi > 0.0);
  CHECK(q.e_norms.size() == dirs.size() * radii.size());

  const VectorMap lin = [](const Vector& v) { return Vector(2.0 * v); };
  const JacobianMap dlin = [](const Vector& v) { return Matrix(2.0 * Matrix::Identity(v.size(), v.size())); };
  const auto l = estimate_remainder_exponent(lin, dlin, z, dirs, radii);
  CHECK_FALSE(l.m.has_value());
  CHECK_FALSE(l.note.empty());

  const VectorMap cube = [](const Vector& v) { return Vector(v.array().cube()); };
  const JacobianMap dcube = [](const Vector& v) { return Matrix((3.0 * v.array().square()).matrix().asDiagonal()); };
  const auto c = estimate_remainder_exponent(cube, dcube, Vector::Zero(4), dirs, radii);
  REQUIRE(c.m.has_value());
  CHECK(*c.m >= 2.95);
  CHECK(*c.m <= 3.05);
}

TEST_CASE("catalog remainder invariants") {
  RngStream rng(21);
  for (const auto& name : model_names()) {
    const auto m = catalog_model(name, 5);
    const Vector z = Vector::NullaryExpr(m.order(), [&rng](Index) { return 1.0 + 0.2 * rng.next_normal(); });
    const VectorMap f = [&m](const Vector& v) { return m.F(v, 0.0); };
    const JacobianMap df = [&m](const Vector& v) { return m.DF(v, 0.0); };
    CHECK(phi_remainder(f, df, z, Vector::Zero(m.order())).norm() == 0.0);
  }
  // Nodal collocation makes the quadratic remainder exactly -kappa e^2.
  const auto heat = catalog_model("semilinear_heat_1d", 9);
  const Vector z = Vector::LinSpaced(9, 0.5, 1.5);
  const Vector e = Vector::LinSpaced(9, -0.1, 0.2);
  const Vector phi = phi_remainder([&heat](const Vector& v) { return heat.F(v, 0.0); },
                                   [&heat](const Vector& v) { return heat.DF(v, 0.0); }, z, e);
  const Vector expected = -1.0 * e.array().square();
  CHECK(mass_norm(heat.mass, phi) == doctest::Approx(mass_norm(heat.mass, expected)).epsilon(1e-12));
}

TEST_CASE("DF finite-difference check on every catalog model") {
  RngStream rng(31);
  const std::vector<double> hs{1e-3, 1e-4, 1e-5, 1e-6};
  for (const auto& name : model_names()) {
    const auto m = catalog_model(name, 5);
    for (int trial = 0; trial < 5; ++trial) {
      const Vector z = Vector::NullaryExpr(m.order(), [&rng](Index) { return rng.next_normal(); });
      const Vector e = Vector::NullaryExpr(m.order(), [&rng](Index) { return rng.next_normal(); });
      const auto errs = jacobian_fd_errors(m, z, e, hs);
      const double scale = (m.DF(z, 0.0) * e).norm() + m.F(z, 0.0).norm();
      for (std::size_t i = 1; i < errs.size(); ++i) {
        if (errs[i] <= 1e-12 * std::max(scale, 1e-300)) continue;
        CHECK(errs[i] / errs[i - 1] == doctest::Approx(0.1).epsilon(0.2));
      }
    }
  }
}

TEST_CASE("detectability_probe examples") {
  const TimeGrid grid(0.0, 2.0, 200);
  const auto stable = detectability_probe([](Index) { return Matrix::Constant(1, 1, -1.0); }, Matrix::Zero(0, 1),
                                          NoiseSpec::constant(SymMatrix::Identity(1) * 1e-3, SymMatrix::Zero(1), SymMatrix::Identity(0)),
                                          0.0, grid);
  CHECK(stable.fit.alpha_e == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(stable.delta_Y == doctest::Approx(1.0));

  const double alpha = 2.0;
  const auto stabilized = detectability_probe([alpha](Index) { return Matrix::Constant(1, 1, alpha); }, Matrix::Ones(1, 1),
                                              NoiseSpec::constant(SymMatrix::Identity(1), SymMatrix::Identity(1) * 25.0, SymMatrix::Identity(1)),
                                              0.0, grid);
  CHECK(stabilized.fit.alpha_e > 0.0);

  const auto unstable = detectability_probe([](Index) { return Matrix::Constant(1, 1, 1.0); }, Matrix::Zero(0, 1),
                                            NoiseSpec::constant(SymMatrix::Identity(1) * 1e-3, SymMatrix::Zero(1), SymMatrix::Identity(0)),
                                            0.0, grid);
  CHECK(unstable.fit.alpha_e < 0.0);

  CHECK_THROWS_AS(detectability_probe([](Index) { return Matrix::Zero(65, 65); }, Matrix::Zero(0, 65),
                                      NoiseSpec::constant(SymMatrix::Identity(65), SymMatrix::Zero(65), SymMatrix::Identity(0)), 0.0,
                                      TimeGrid(0.0, 1.0, 4)),
                  Error);
}

TEST_CASE("detectability_probe delta_Y is stable under grid refinement on the 1D example") {
  const auto m = catalog_model("semilinear_heat_1d", 17);
  const Matrix a = m.generator() + m.DF(Vector::Ones(17), 0.0);
  const NoiseSpec spec = NoiseSpec::constant(inverse_of(m.mass), inverse_of(m.mass), SymMatrix::Identity(1));
  const auto probe = [&](Index steps) {
    return detectability_probe([&a](Index) { return a; }, m.output_map, spec, 0.5, TimeGrid(0.0, 2.0, steps), m.mass);
  };
  const auto coarse = probe(100), fine = probe(200);
  CHECK(std::isfinite(coarse.delta_Y));
  CHECK(std::abs(fine.delta_Y - coarse.delta_Y) <= 0.1 * coarse.delta_Y);
  CHECK(coarse.fit.alpha_e >= 0.0);
}

TEST_CASE("disturbance_bound_check examples") {
  std::vector<double> converged, growing;
  for (int k = 0; k < 400; ++k) {
    converged.push_back(0.01 + std::exp(-0.05 * k));
    growing.push_back(0.01 * (k + 1));
  }
  const auto ok = disturbance_bound_check(converged, converged);
  CHECK(ok.bounded);
  CHECK(ok.verdict == "bounded");
  CHECK(ok.ratio == doctest::Approx(1.0));

  const auto bad = disturbance_bound_check(growing, converged);
  CHECK_FALSE(bad.bounded);
  CHECK(bad.verdict == "unbounded trend");

  std::vector<double> blown = converged;
  blown.back() = std::numeric_limits<double>::infinity();
  CHECK_FALSE(disturbance_bound_check(blown, converged).bounded);
}
