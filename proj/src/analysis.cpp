#include "pdekf/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pdekf {

double mass_norm(const SymMatrix& mass, const Vector& v) {
  return std::sqrt(std::max(0.0, v.dot(mass.dense() * v)));
}

ErrorSeries error_series(const Trajectory& truth, const Mesh& truth_mesh, const SymMatrix& truth_mass,
                         const Trajectory& estimate, const Mesh& estimate_mesh, const StepSeries& y,
                         const StepSeries& predicted) {
  if (!truth_mesh.same_domain(estimate_mesh)) {
    throw Error(ErrorKind::Domain, "error_series: estimate and truth meshes cover different domains");
  }
  if (estimate.states.size() > truth.states.size()) {
    throw Error(ErrorKind::Shape, "error_series: estimate is longer than the truth run");
  }
  const Index nt = truth_mesh.node_count();
  const Index ne = estimate_mesh.node_count();
  const bool same_mesh = truth_mesh == estimate_mesh;
  const Matrix transfer = same_mesh ? Matrix() : interpolation_matrix(estimate_mesh, truth_mesh);

  ErrorSeries out{estimate.grid, {}, {}, {}, {}};
  const std::size_t count = estimate.states.size();
  out.l2_error.reserve(count);
  out.relative.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const Vector& z = truth.states[k];
    const Vector& zh = estimate.states[k];
    if (z.size() < nt || zh.size() < ne) throw Error(ErrorKind::Shape, "error_series: state shorter than its mesh");
    Vector e = z.head(nt);
    if (same_mesh) {
      e -= zh.head(ne);
    } else {
      e.noalias() -= transfer * zh.head(ne);
    }
    const double err = mass_norm(truth_mass, e);
    const double ref = mass_norm(truth_mass, z.head(nt));
    out.l2_error.push_back(err);
    out.relative.push_back(ref > 0.0 ? err / ref : err);
    if (k < y.size() && k < predicted.size()) {
      Vector r = y[k] - predicted[k];
      out.output_error.push_back(r.norm());
      out.output_residual.push_back(std::move(r));
    }
  }
  return out;
}

ErrorSeries error_series(const ObserverRun& run, const DiscreteSemilinearModel& observer,
                         const DiscreteSemilinearModel& truth_model) {
  if (!run.truth) throw Error(ErrorKind::Misuse, "error_series: observer run has no truth attached");
  const Index nt = truth_model.mesh.node_count();
  SymMatrix mass = truth_model.mass;
  if (mass.order() != nt) mass = symmetrize(truth_model.mass.dense().topLeftCorner(nt, nt));
  return error_series(run.truth->truth, truth_model.mesh, mass, run.estimate, observer.mesh, run.truth->y,
                      run.predicted);
}

DecayFit fit_exponential(const TimeGrid& grid, const std::vector<double>& values,
                         std::optional<std::pair<double, double>> window) {
  const double t0 = grid.t0();
  const double span = grid.tf() - t0;
  const auto w = window.value_or(std::make_pair(t0 + 0.1 * span, t0 + 0.6 * span));
  const double tol = 1e-9 * std::max(1.0, std::abs(span));
  double st = 0, sy = 0, stt = 0, sty = 0;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double t = grid.time(static_cast<Index>(k));
    if (t < w.first - tol || t > w.second + tol) continue;
    if (!(values[k] > 0.0) || !std::isfinite(values[k])) {
      std::ostringstream os;
      os << "fit_exponential: nonpositive value " << values[k] << " at t = " << t << " inside the fit window";
      throw Error(ErrorKind::Domain, os.str());
    }
    pts.emplace_back(t - t0, std::log(values[k]));
  }
  if (pts.size() < 2) throw Error(ErrorKind::Domain, "fit_exponential: fewer than two samples in the window");
  for (const auto& [t, l] : pts) {
    st += t;
    sy += l;
    stt += t * t;
    sty += t * l;
  }
  const double n = static_cast<double>(pts.size());
  const double denom = n * stt - st * st;
  const double slope = (n * sty - st * sy) / denom;
  const double intercept = (sy - slope * st) / n;
  double sq = 0.0;
  for (const auto& [t, l] : pts) sq += std::pow(l - (intercept + slope * t), 2);
  return DecayFit{std::exp(intercept), -slope, w, std::sqrt(sq / n)};
}

DecayFit fit_exponential(const ErrorSeries& series, std::optional<std::pair<double, double>> window) {
  return fit_exponential(series.grid, series.l2_error, window);
}

Vector phi_remainder(const VectorMap& f, const JacobianMap& df, const Vector& z, const Vector& e) {
  const Vector base = z - e;
  return f(z) - f(base) - df(base) * e;
}

RemainderProbe estimate_remainder_exponent(const VectorMap& f, const JacobianMap& df, const Vector& z,
                                           const std::vector<Vector>& directions, const std::vector<double>& radii,
                                           const std::optional<SymMatrix>& mass, double residual_threshold) {
  if (radii.empty() || directions.empty()) throw Error(ErrorKind::Parameter, "remainder probe needs radii and directions");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0) || (i > 0 && !(radii[i] < radii[i - 1]))) {
      throw Error(ErrorKind::Parameter, "remainder probe radii must be positive and strictly decreasing");
    }
  }
  const auto norm = [&mass](const Vector& v) { return mass ? mass_norm(*mass, v) : v.norm(); };

  RemainderProbe probe;
  probe.epsilon_phi = radii.front();
  for (const Vector& d : directions) {
    const double dn = norm(d);
    if (!(dn > 0.0)) throw Error(ErrorKind::Parameter, "remainder probe direction has zero norm");
    for (double r : radii) {
      const Vector e = (r / dn) * d;
      probe.e_norms.push_back(norm(e));
      probe.phi_norms.push_back(norm(phi_remainder(f, df, z, e)));
    }
  }

  // A remainder at rounding level relative to the increment carries no exponent.
  // Each direction gets its own intercept; the exponent is the common slope.
  const double fscale = std::max(1.0, norm(f(z)));
  const std::size_t per_dir = radii.size();
  double sxx = 0.0, sxy = 0.0;
  std::vector<std::pair<double, double>> centred;
  for (std::size_t d = 0; d < directions.size(); ++d) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = d * per_dir; i < (d + 1) * per_dir; ++i) {
      if (probe.phi_norms[i] > 1e-13 * fscale) pts.emplace_back(std::log(probe.e_norms[i]), std::log(probe.phi_norms[i]));
    }
    if (pts.size() < 2) continue;
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
      mx += x;
      my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    for (const auto& [x, y] : pts) {
      centred.emplace_back(x - mx, y - my);
      sxx += (x - mx) * (x - mx);
      sxy += (x - mx) * (y - my);
    }
  }
  if (centred.empty()) {
    probe.note = "degenerate: remainder vanishes to rounding, no exponent";
    return probe;
  }
  if (!(sxx > 0.0)) {
    probe.note = "degenerate: all sampled increments have the same norm";
    return probe;
  }
  const double slope = sxy / sxx;
  double sq = 0.0;
  for (const auto& [x, y] : centred) sq += std::pow(y - slope * x, 2);
  probe.residual = std::sqrt(sq / static_cast<double>(centred.size()));
  for (std::size_t i = 0; i < probe.e_norms.size(); ++i) {
    probe.delta_phi = std::max(probe.delta_phi, probe.phi_norms[i] / std::pow(probe.e_norms[i], slope));
  }
  if (probe.residual <= residual_threshold) {
    probe.m = slope;
    probe.note = "ok";
  } else {
    std::ostringstream os;
    os << "log-log residual " << probe.residual << " above threshold " << residual_threshold;
    probe.note = os.str();
  }
  return probe;
}

DetectabilityReport detectability_probe(const GeneratorSeries& a_d, const Matrix& c, const NoiseSpec& spec,
                                        double alpha, const TimeGrid& grid, const std::optional<SymMatrix>& mass,
                                        const DreOptions& opts) {
  const Index n = spec.P0.order();
  EvolutionTable::check_limits(n, grid.steps());
  const GeneratorSeries shifted = [&a_d, alpha](Index k) {
    Matrix a = a_d(k);
    a.diagonal().array() += alpha;
    return a;
  };
  const RiccatiTrajectory p = dre_propagate(shifted, c, spec, grid, alpha, opts);

  // Closed-loop generator a_d - L C with L = P C^T R^{-1}, piecewise constant.
  std::vector<Matrix> closed(static_cast<std::size_t>(grid.steps()));
  for (Index k = 0; k < grid.steps(); ++k) {
    Matrix g = a_d(k);
    if (c.rows() > 0) g.noalias() -= gain(p.P[static_cast<std::size_t>(k)], c, spec.R_at(k)) * c;
    closed[static_cast<std::size_t>(k)] = std::move(g);
  }
  const EvolutionTable table = evolution_table(
      Matrix::Zero(n, n), [&closed](Index k) { return closed[static_cast<std::size_t>(k)]; }, grid,
      PropagationScheme::Exponential);

  // ||M^{1/2} U M^{-1/2}||_2 = ||L^T U L^{-T}||_2 for M = L L^T.
  std::optional<Eigen::LLT<Matrix>> chol;
  if (mass) {
    chol.emplace(mass->dense());
    if (chol->info() != Eigen::Success) throw Error(ErrorKind::PsdFailure, "detectability probe: mass is not SPD");
  }
  const auto op_norm = [&chol](const Matrix& u) {
    Matrix w = u;
    if (chol) {
      const Matrix lt = chol->matrixU();
      w = lt * u;
      w = chol->matrixL().solve(w.transpose()).transpose();
    }
    Eigen::JacobiSVD<Matrix> svd(w);
    return svd.singularValues()(0);
  };

  DetectabilityReport report;
  for (Index i = 0; i < grid.nodes(); ++i) {
    report.norms.push_back(op_norm(table.at(i, 0)));
    for (Index j = 0; j <= i; ++j) {
      const double v = j == 0 ? report.norms.back() : op_norm(table.at(i, j));
      report.delta_Y = std::max(report.delta_Y, v);
    }
  }
  report.fit = fit_exponential(grid, report.norms, std::make_pair(grid.t0(), grid.tf()));
  return report;
}

BoundednessVerdict disturbance_bound_check(const std::vector<double>& series, const std::vector<double>& undisturbed,
                                           double tail_fraction, Index windows) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0) || windows < 2) {
    throw Error(ErrorKind::Parameter, "boundedness check needs tail_fraction in (0, 1] and at least two windows");
  }
  BoundednessVerdict v;
  v.windows = windows;
  const auto tail_start = [tail_fraction](std::size_t size) {
    return size - std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(tail_fraction * static_cast<double>(size))));
  };
  const auto sup_tail = [&](const std::vector<double>& s) {
    if (s.empty()) return 0.0;
    double m = 0.0;
    for (std::size_t k = tail_start(s.size()); k < s.size(); ++k) m = std::isfinite(s[k]) ? std::max(m, s[k]) : INFINITY;
    return m;
  };
  v.tail_sup = sup_tail(series);
  const double ref = sup_tail(undisturbed);
  v.ratio = ref > 0.0 ? v.tail_sup / ref : (v.tail_sup == 0.0 ? 1.0 : INFINITY);
  if (!std::isfinite(v.tail_sup)) {
    v.verdict = "unbounded trend";
    return v;
  }

  const std::size_t start = tail_start(series.size());
  const std::size_t len = series.size() - start;
  std::vector<double> means;
  for (Index w = 0; w < windows; ++w) {
    const std::size_t a = start + len * static_cast<std::size_t>(w) / static_cast<std::size_t>(windows);
    const std::size_t b = start + len * static_cast<std::size_t>(w + 1) / static_cast<std::size_t>(windows);
    if (b <= a) continue;
    double s = 0.0;
    for (std::size_t k = a; k < b; ++k) s += series[k];
    means.push_back(s / static_cast<double>(b - a));
  }
  for (std::size_t i = 1; i < means.size(); ++i) v.rising_windows += means[i] > means[i - 1] ? 1 : 0;
  // Every window rising and a visible net increase is read as a growth trend.
  const bool monotone = means.size() >= 2 && v.rising_windows == static_cast<Index>(means.size()) - 1;
  const bool grows = means.size() >= 2 && means.back() > 1.1 * means.front();
  v.bounded = !(monotone && grows);
  v.verdict = v.bounded ? "bounded" : "unbounded trend";
  return v;
}

std::vector<double> jacobian_fd_errors(const DiscreteSemilinearModel& model, const Vector& z, const Vector& e,
                                       const std::vector<double>& hs, double t) {
  const Vector f0 = model.F(z, t);
  const Vector de = model.DF(z, t) * e;
  std::vector<double> out;
  out.reserve(hs.size());
  for (double h : hs) out.push_back(((model.F(z + h * e, t) - f0) / h - de).norm());
  return out;
}

}  // namespace pdekf
