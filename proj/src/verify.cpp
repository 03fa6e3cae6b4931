#include <algorithm>
#include <cmath>
#include <memory>

#include "pdekf/harness.hpp"

namespace pdekf {

namespace {

CheckResult at_most(std::string name, double measured, double tolerance) {
  return {std::move(name), measured, tolerance, std::isfinite(measured) && measured <= tolerance};
}

Matrix random_matrix(RngStream& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.next_normal();
  }
  return m;
}

SymMatrix random_spd(RngStream& rng, Index n, double floor) {
  const Matrix x = random_matrix(rng, n, n);
  Matrix s = x * x.transpose() / static_cast<double>(n);
  s.diagonal().array() += floor;
  return symmetrize(s);
}

/// Constant generator with spectrum in the open left half plane.
Matrix random_stable(RngStream& rng, Index n) {
  Matrix a = random_matrix(rng, n, n) * 0.5;
  a.diagonal().array() -= 1.5;
  return a;
}

double relative_sup_gap(const RiccatiTrajectory& a, const RiccatiTrajectory& b) {
  double scale = 0.0;
  for (const auto& p : b.P) scale = std::max(scale, p.dense().cwiseAbs().maxCoeff());
  return sup_distance(a, b) / std::max(scale, 1e-300);
}

std::vector<CheckResult> riccati_suite() {
  std::vector<CheckResult> out;
  const Matrix one = Matrix::Ones(1, 1);
  {
    const TimeGrid grid(0.0, 2.0, 20000);
    const NoiseSpec spec = NoiseSpec::constant(SymMatrix::Zero(1), SymMatrix::Identity(1), SymMatrix::Identity(1));
    const auto p = dre_propagate([](Index) { return Matrix::Zero(1, 1); }, one, spec, grid);
    out.push_back(at_most("riccati.tanh_closed_form", std::abs(p.P.back()(0, 0) - std::tanh(2.0)), 1e-3));
  }
  {
    const double a = -0.5, w = 1.0, p0 = 0.3, tf = 0.5;
    const TimeGrid grid(0.0, tf, 500000);
    const NoiseSpec spec = NoiseSpec::constant(SymMatrix::Identity(1) * p0, SymMatrix::Identity(1) * w, SymMatrix::Identity(0));
    const auto p = dre_propagate([a](Index) { return Matrix::Constant(1, 1, a); }, Matrix::Zero(0, 1), spec, grid);
    double worst = 0.0;
    for (Index k = 0; k < grid.nodes(); k += 5000) {
      const double t = grid.time(k);
      const double exact = std::exp(2 * a * t) * p0 + w * (std::exp(2 * a * t) - 1.0) / (2 * a);
      worst = std::max(worst, std::abs(p.P[static_cast<std::size_t>(k)](0, 0) - exact));
    }
    out.push_back(at_most("riccati.lyapunov_closed_form", worst, 1e-6));
  }
  {
    RngStream rng(20240611);
    const Matrix a = random_stable(rng, 3);
    const Matrix c = random_matrix(rng, 2, 3);
    const NoiseSpec spec = NoiseSpec::constant(random_spd(rng, 3, 0.5), random_spd(rng, 3, 0.1), random_spd(rng, 2, 0.5));
    const TimeGrid grid(0.0, 1.0, 10000);
    const GeneratorSeries gen = [&a](Index) { return a; };
    const auto dre = dre_propagate(gen, c, spec, grid);
    const auto oracle = integral_riccati_oracle(gen, c, spec, grid);
    out.push_back(at_most("riccati.integral_vs_differential", relative_sup_gap(dre, oracle), 1e-3));
  }
  return out;
}

std::vector<CheckResult> shift_suite() {
  std::vector<CheckResult> out;
  RngStream rng(77);
  const Matrix a = random_stable(rng, 3);
  const double beta = 0.7;
  const TimeGrid grid(0.0, 0.02, 200);
  const GeneratorSeries none = [](Index) { return Matrix::Zero(3, 3); };
  const auto base = evolution_table(a, none, grid, PropagationScheme::Exponential);
  const Matrix shifted_a = a + beta * Matrix::Identity(3, 3);
  const auto direct = evolution_table(shifted_a, none, grid, PropagationScheme::Exponential);
  const auto shifted = shift_table(base, beta);
  const auto back = shift_table(shifted, -beta);
  double dev = 0.0, group = 0.0;
  for (Index i = 0; i < grid.nodes(); ++i) {
    for (Index j = 0; j <= i; ++j) {
      dev = std::max(dev, (shifted.at(i, j) - direct.at(i, j)).cwiseAbs().maxCoeff());
      group = std::max(group, (back.at(i, j) - base.at(i, j)).cwiseAbs().maxCoeff());
    }
  }
  out.push_back(at_most("shift.lemma_direct_rebuild", dev, 1e-8));
  out.push_back(at_most("shift.group_inverse", group, 1e-14));
  out.push_back(at_most("shift.table_composition", base.composition_defect(), 1e-12));
  return out;
}

std::vector<CheckResult> kf_suite() {
  RngStream rng(4242);
  const Mesh mesh(1, 16, 1.0);
  const auto model = build_linear_heat(mesh, 0.05);
  const Index n = model.order();
  const TimeGrid grid(0.0, 1.0, 1000);
  Vector z0 = NodalField::from_function(mesh, [](double r, double) { return 1.0 + 0.5 * std::cos(3.14159265358979 * r); }).values;
  DisturbanceSpec ds{SymMatrix::Identity(n) * 1e-2, SymMatrix::Identity(1) * 1e-3, 0.0, 99};
  const auto streams = disturbance_stream(ds, grid);
  auto truth = std::make_shared<const TruthRun>(simulate_truth(model, z0, {}, streams.omega, streams.eta, grid, 99));

  ObserverConfig oc;
  oc.alpha = 0.3;
  oc.spec = NoiseSpec::constant(random_spd(rng, n, 0.2), random_spd(rng, n, 0.05), SymMatrix::Identity(1) * 0.5);
  oc.initial_estimate = Vector::Zero(n);
  const auto ekf = run_ekf(truth, model, oc);
  const auto kf = run_kf(truth, model, oc);
  double gap = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < ekf.estimate.states.size(); ++k) {
    gap = std::max(gap, (ekf.estimate.states[k] - kf.estimate.states[k]).cwiseAbs().maxCoeff());
    scale = std::max(scale, kf.estimate.states[k].cwiseAbs().maxCoeff());
  }
  return {at_most("kf.ekf_equals_kf_linear", gap / scale, 1e-8)};
}

std::vector<CheckResult> remainder_suite() {
  std::vector<CheckResult> out;
  RngStream rng(31337);
  const Mesh mesh(1, 16, 1.0);
  const auto model = build_semilinear_heat_1d(mesh, 1.0, 1.0);
  const Vector z = Vector::Constant(model.order(), 1.5);
  std::vector<Vector> dirs;
  for (int i = 0; i < 5; ++i) dirs.push_back(random_matrix(rng, model.order(), 1));
  const auto probe = estimate_remainder_exponent([&model](const Vector& v) { return model.F(v, 0.0); },
                                                 [&model](const Vector& v) { return model.DF(v, 0.0); }, z, dirs,
                                                 {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}, model.mass);
  out.push_back(at_most("remainder.quadratic_exponent", probe.m ? std::abs(*probe.m - 2.0) : INFINITY, 0.05));

  // Finite-difference Frechet check over the catalog at random states.
  double worst = 0.0;
  ExperimentConfig cfg;
  for (const auto& name : model_names()) {
    cfg.model = name;
    cfg.diffusion = name.find("heat") != std::string::npos ? 1.0 : 1e-8;
    cfg.kappa = name.find("heat") != std::string::npos ? 1.0 : 2.5e-7;
    cfg.L0 = name.find("heat") != std::string::npos ? 1.0 : 0.01;
    const auto m = build_experiment_model(cfg, 5);
    for (int trial = 0; trial < 5; ++trial) {
      const Vector state = random_matrix(rng, m.order(), 1);
      const Vector dir = random_matrix(rng, m.order(), 1);
      const auto errs = jacobian_fd_errors(m, state, dir, {1e-3, 1e-4, 1e-5, 1e-6});
      const double scale = (m.DF(state, 0.0) * dir).norm() + m.F(state, 0.0).norm() + 1e-300;
      worst = std::max(worst, errs.back() / scale);
    }
  }
  out.push_back(at_most("remainder.fd_jacobian_catalog", worst, 1e-4));
  return out;
}

std::vector<CheckResult> detectability_suite() {
  std::vector<CheckResult> out;
  const TimeGrid grid(0.0, 2.0, 200);
  {
    const NoiseSpec spec = NoiseSpec::constant(SymMatrix::Identity(1) * 1e-3, SymMatrix::Zero(1), SymMatrix::Identity(0));
    const auto rep = detectability_probe([](Index) { return Matrix::Constant(1, 1, -1.0); }, Matrix::Zero(0, 1), spec, 0.0, grid);
    out.push_back(at_most("detectability.stable_scalar_rate", std::abs(rep.fit.alpha_e - 1.0), 0.05));
  }
  {
    const NoiseSpec spec = NoiseSpec::constant(SymMatrix::Identity(1) * 1e-3, SymMatrix::Zero(1), SymMatrix::Identity(0));
    const auto rep = detectability_probe([](Index) { return Matrix::Constant(1, 1, 1.0); }, Matrix::Zero(0, 1), spec, 0.0, grid);
    out.push_back({"detectability.unobserved_growth_flagged", rep.fit.alpha_e, 0.0, rep.fit.alpha_e < 0.0});
  }
  {
    ExperimentConfig cfg;
    const auto model = build_experiment_model(cfg, 7);
    const Index n = model.order();
    const Matrix mass_inv = solve_spd(model.mass, Matrix::Identity(n, n));
    const NoiseSpec spec = NoiseSpec::constant(symmetrize(mass_inv), symmetrize(mass_inv), SymMatrix::Identity(3) * 100.0);
    const Matrix a = model.generator() + model.DF(Vector::Ones(n), 0.0);
    DreOptions opts;
    opts.blowup_norm = cfg.blowup_norm;
    const auto rep = detectability_probe([&a](Index) { return a; }, model.output_map, spec, cfg.alpha,
                                         TimeGrid(0.0, 2.0, 100), model.mass, opts);
    out.push_back({"detectability.magnetic_7x7_delta_Y", rep.delta_Y, INFINITY, std::isfinite(rep.delta_Y)});
    out.push_back({"detectability.magnetic_7x7_rate", rep.fit.alpha_e, 0.0, rep.fit.alpha_e >= 0.0});
  }
  return out;
}

}  // namespace

std::vector<std::string> verify_suites() { return {"riccati", "shift", "kf", "remainder", "detectability"}; }

std::vector<CheckResult> run_verify(const std::string& suite) {
  if (suite == "all") {
    std::vector<CheckResult> all;
    for (const auto& s : verify_suites()) {
      auto part = run_verify(s);
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  if (suite == "riccati") return riccati_suite();
  if (suite == "shift") return shift_suite();
  if (suite == "kf") return kf_suite();
  if (suite == "remainder") return remainder_suite();
  if (suite == "detectability") return detectability_suite();
  throw Error(ErrorKind::Misuse, "unknown verify suite '" + suite + "' (expected riccati, shift, kf, remainder, detectability or all)");
}

std::string format_check(const CheckResult& r) {
  return r.name + " measured=" + format_double(r.measured, false) + " tolerance=" + format_double(r.tolerance, false) +
         " " + (r.pass ? "PASS" : "FAIL");
}

}  // namespace pdekf
