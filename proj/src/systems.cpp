#include "pdekf/systems.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace pdekf {

Matrix default_qc_surrogate(double scale, Index columns) {
  if (columns < 15) throw Error(ErrorKind::Shape, "Q_c surrogate needs at least 15 columns");
  Matrix qc = Matrix::Zero(kPotentialTerms, columns);
  qc(2, 9) = scale;   // r^2 + s^2
  qc(3, 14) = scale;  // r s
  return qc;
}

MagneticParameters default_magnetic_parameters() {
  MagneticParameters p;
  p.qc = default_qc_surrogate();
  return p;
}

Matrix load_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open matrix file " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) {
        throw Error(ErrorKind::Config, path + ":" + std::to_string(lineno) + ": not a real number: '" + tok + "'");
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorKind::Config, path + ":" + std::to_string(lineno) + ": row has " + std::to_string(row.size()) +
                                         " entries, expected " + std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::Config, path + ": empty matrix file");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

namespace {

DiscreteSemilinearModel heat_base(const std::string& name, const Mesh& mesh, double diffusion) {
  auto [m, k] = assemble_mass_stiffness(mesh, diffusion);
  DiscreteSemilinearModel model;
  model.name = name;
  model.mesh = mesh;
  const Index n = mesh.node_count();
  model.mass = std::move(m);
  model.stiffness = std::move(k);
  model.input_map = Matrix::Zero(n, 0);
  model.disturbance_map = Matrix::Identity(n, n);
  model.output_map = assemble_output(mesh);
  model.params.diffusion = diffusion;
  model.params.L0 = mesh.L0();
  return model;
}

void attach_quadratic_sink(DiscreteSemilinearModel& model, double kappa) {
  model.params.kappa = kappa;
  model.linear = false;
  model.nonlinearity = [kappa](const Vector& z, double) -> Vector { return -kappa * z.array().square().matrix(); };
  model.jacobian = [kappa](const Vector& z, double) -> Matrix { return Matrix((-2.0 * kappa * z).asDiagonal()); };
}

}  // namespace

DiscreteSemilinearModel build_linear_heat(const Mesh& mesh, double diffusion) {
  DiscreteSemilinearModel model = heat_base("linear_heat", mesh, diffusion);
  model.linear = true;
  return model;
}

DiscreteSemilinearModel build_semilinear_heat_1d(const Mesh& mesh, double diffusion, double kappa) {
  if (mesh.dimension() != 1) throw Error(ErrorKind::Parameter, "semilinear heat model is one-dimensional");
  DiscreteSemilinearModel model = heat_base("semilinear_heat_1d", mesh, diffusion);
  attach_quadratic_sink(model, kappa);
  return model;
}

NodalField linearization_profile(const Mesh& mesh, double width) {
  NodalField g = NodalField::from_function(mesh, [width](double r, double s) { return std::exp(-(r * r + s * s) / width); });
  const auto [m, k] = assemble_mass_stiffness(mesh, 1.0);
  const double integral = Vector::Ones(mesh.node_count()).dot(m.dense() * g.values);
  g.values *= mesh.area() / integral;
  return g;
}

DiscreteSemilinearModel build_magnetic_simplified(const Mesh& mesh, const MagneticParameters& params) {
  if (!params.qc) {
    throw Error(ErrorKind::Config, "Q_c is not configured; use default_qc_surrogate() or load a potential matrix");
  }
  if (mesh.dimension() != 2) throw Error(ErrorKind::Parameter, "magnetic model lives on a 2D mesh");
  DiscreteSemilinearModel model = heat_base("magnetic_simplified", mesh, params.diffusion);
  attach_quadratic_sink(model, params.kappa);
  model.params.gamma = params.gamma;
  const NodalField ce = linearization_profile(mesh, params.ce_width);
  const Matrix load = assemble_input_map(mesh, ce, params.gamma, *params.qc);
  model.input_map = solve_spd(model.mass, load);
  model.disturbance_map = Vector::Ones(mesh.node_count());
  return model;
}

DiscreteSemilinearModel build_magnetic_augmented(const Mesh& mesh, const MagneticParameters& params,
                                                 Index m_currents) {
  if (!params.qc) {
    throw Error(ErrorKind::Config, "Q_c is not configured; use default_qc_surrogate() or load a potential matrix");
  }
  const Matrix& qc = *params.qc;
  if (qc.cols() != m_currents) {
    throw Error(ErrorKind::Shape, "Q_c has " + std::to_string(qc.cols()) + " columns for " +
                                      std::to_string(m_currents) + " currents");
  }
  if (mesh.dimension() != 2) throw Error(ErrorKind::Parameter, "magnetic model lives on a 2D mesh");
  const Index nc = mesh.node_count();
  const Index n = nc + m_currents;
  auto [mc, kc] = assemble_mass_stiffness(mesh, params.diffusion);

  DiscreteSemilinearModel model;
  model.name = "magnetic_augmented";
  model.mesh = mesh;
  model.params = {params.diffusion, params.kappa, params.gamma, params.L0};
  Matrix mass = Matrix::Identity(n, n);
  mass.topLeftCorner(nc, nc) = mc.dense();
  Matrix stiff = Matrix::Zero(n, n);
  stiff.topLeftCorner(nc, nc) = kc.dense();
  model.mass = symmetrize(mass);
  model.stiffness = symmetrize(stiff);

  model.input_map = Matrix::Zero(n, m_currents);
  model.input_map.bottomRows(m_currents).setIdentity();
  const Index noisy_currents = std::min<Index>(4, m_currents);
  model.disturbance_map = Matrix::Zero(n, 1 + noisy_currents);
  model.disturbance_map.col(0).head(nc).setOnes();
  model.disturbance_map.block(nc, 1, noisy_currents, noisy_currents).setIdentity();
  model.output_map = Matrix::Zero(3, n);
  model.output_map.leftCols(nc) = assemble_output(mesh);

  // Standard-form flux operators: M^{-1} int phi_j v . grad(phi_i).
  const Matrix square_flux =
      params.kappa * solve_spd(mc, assemble_flux_pairing(mesh, [](double, double) { return std::array<double, 2>{1.0, 1.0}; }));
  std::vector<std::pair<Index, Matrix>> current_flux;
  for (Index k = 0; k < m_currents; ++k) {
    if (qc.col(k).isZero(0.0)) continue;
    const double gamma = params.gamma;
    Matrix pairing = assemble_flux_pairing(mesh, [&qc, k, gamma](double r, double s) {
      auto g = potential_gradient(qc, k, r, s);
      return std::array<double, 2>{gamma * g[0], gamma * g[1]};
    });
    current_flux.emplace_back(k, solve_spd(mc, pairing));
  }

  model.linear = false;
  model.nonlinearity = [nc, n, square_flux, current_flux](const Vector& z, double) -> Vector {
    Vector f = Vector::Zero(n);
    const auto c = z.head(nc);
    f.head(nc).noalias() = square_flux * c.array().square().matrix();
    for (const auto& [k, flux] : current_flux) f.head(nc).noalias() += z(nc + k) * (flux * c);
    return f;
  };
  model.jacobian = [nc, n, square_flux, current_flux](const Vector& z, double) -> Matrix {
    Matrix j = Matrix::Zero(n, n);
    const auto c = z.head(nc);
    j.topLeftCorner(nc, nc).noalias() = square_flux * (2.0 * c).asDiagonal();
    for (const auto& [k, flux] : current_flux) {
      j.topLeftCorner(nc, nc) += z(nc + k) * flux;
      j.col(nc + k).head(nc).noalias() = flux * c;
    }
    return j;
  };
  return model;
}

Vector input_signal_It(double t) {
  Vector v = Vector::Zero(kCurrentProducts);
  v(9) = 0.8 * std::sin(20.0 * t) / 20.0;
  v(14) = 16.0 * std::sin(40.0 * t) / 40.0;
  return v;
}

Vector input_signal_Ut(double t) {
  Vector v = Vector::Zero(kCurrentProducts);
  v(9) = 0.8 * std::cos(20.0 * t);
  v(14) = 16.0 * std::cos(40.0 * t);
  return v;
}

StepSeries sample_inputs(Vector (*signal)(double), const TimeGrid& grid) {
  StepSeries s;
  s.reserve(static_cast<std::size_t>(grid.nodes()));
  for (Index k = 0; k < grid.nodes(); ++k) s.push_back(signal(grid.time(k)));
  return s;
}

DisturbanceStreams disturbance_stream(const DisturbanceSpec& spec, const TimeGrid& grid) {
  const double dt = grid.dt();
  Index hold = 1;
  if (spec.hold_interval > 0.0) {
    const double ratio = spec.hold_interval / dt;
    hold = static_cast<Index>(std::llround(ratio));
    if (hold < 1 || std::abs(ratio - static_cast<double>(hold)) > 1e-9 * ratio) {
      throw Error(ErrorKind::Parameter, "disturbance hold interval must be a positive multiple of dt");
    }
  }
  const CovarianceFactor process(spec.process_cov);
  const CovarianceFactor output(spec.output_cov);
  const RngStream root(spec.seed);
  RngStream omega_rng = root.substream(1);
  RngStream eta_rng = root.substream(2);

  DisturbanceStreams out;
  out.omega.reserve(static_cast<std::size_t>(grid.steps()));
  out.eta.reserve(static_cast<std::size_t>(grid.nodes()));
  Vector omega, eta;
  for (Index k = 0; k < grid.nodes(); ++k) {
    if (k % hold == 0) {
      omega = process.sample(omega_rng);
      eta = output.sample(eta_rng);
    }
    if (k < grid.steps()) out.omega.push_back(omega);
    out.eta.push_back(eta);
  }
  return out;
}

std::vector<std::string> model_names() {
  return {"linear_heat_1d", "semilinear_heat_1d", "magnetic_simplified", "magnetic_augmented"};
}

}  // namespace pdekf
