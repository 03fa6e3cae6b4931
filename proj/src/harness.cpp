#include "pdekf/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <numbers>
#include <sstream>

namespace pdekf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::invalid_argument("expected a finite real number, got '" + s + "'");
  }
  return v;
}

template <class Int>
Int parse_int(const std::string& s) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("expected an integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "on" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "off" || s == "no" || s == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> read;
  std::function<std::string(const ExperimentConfig&)> write;
};

Field make_field(std::string section, std::string key, std::string ExperimentConfig::*m) {
  return {std::move(section), std::move(key), [m](ExperimentConfig& c, const std::string& v) { c.*m = v; },
          [m](const ExperimentConfig& c) { return c.*m; }};
}
Field make_field(std::string section, std::string key, double ExperimentConfig::*m) {
  return {std::move(section), std::move(key), [m](ExperimentConfig& c, const std::string& v) { c.*m = parse_double(v); },
          [m](const ExperimentConfig& c) { return format_double(c.*m, false); }};
}
Field make_field(std::string section, std::string key, Index ExperimentConfig::*m) {
  return {std::move(section), std::move(key),
          [m](ExperimentConfig& c, const std::string& v) { c.*m = parse_int<Index>(v); },
          [m](const ExperimentConfig& c) { return std::to_string(c.*m); }};
}
Field make_field(std::string section, std::string key, std::uint64_t ExperimentConfig::*m) {
  return {std::move(section), std::move(key),
          [m](ExperimentConfig& c, const std::string& v) { c.*m = parse_int<std::uint64_t>(v); },
          [m](const ExperimentConfig& c) { return std::to_string(c.*m); }};
}
Field make_field(std::string section, std::string key, bool ExperimentConfig::*m) {
  return {std::move(section), std::move(key), [m](ExperimentConfig& c, const std::string& v) { c.*m = parse_bool(v); },
          [m](const ExperimentConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}
Field make_field(std::string section, std::string key, std::vector<Index> ExperimentConfig::*m) {
  return {std::move(section), std::move(key),
          [m](ExperimentConfig& c, const std::string& v) {
            (c.*m).clear();
            for (const auto& item : split_list(v)) (c.*m).push_back(parse_int<Index>(item));
          },
          [m](const ExperimentConfig& c) {
            std::string s;
            for (Index v : c.*m) s += (s.empty() ? "" : ", ") + std::to_string(v);
            return s;
          }};
}
Field make_field(std::string section, std::string key, std::vector<double> ExperimentConfig::*m) {
  return {std::move(section), std::move(key),
          [m](ExperimentConfig& c, const std::string& v) {
            (c.*m).clear();
            for (const auto& item : split_list(v)) (c.*m).push_back(parse_double(item));
          },
          [m](const ExperimentConfig& c) {
            std::string s;
            for (double v : c.*m) s += (s.empty() ? "" : ", ") + format_double(v, false);
            return s;
          }};
}

const std::vector<Field>& schema() {
  using C = ExperimentConfig;
  static const std::vector<Field> fields = {
      make_field("experiment", "model", &C::model),
      make_field("experiment", "truth_order", &C::truth_order),
      make_field("experiment", "observer_orders", &C::observer_orders),
      make_field("experiment", "optional_orders", &C::optional_orders),
      make_field("experiment", "run_optional", &C::run_optional),
      make_field("experiment", "t_final", &C::t_final),
      make_field("experiment", "dt", &C::dt),
      make_field("experiment", "seed", &C::seed),
      make_field("experiment", "output_dir", &C::output_dir),
      make_field("model", "diffusion", &C::diffusion),
      make_field("model", "kappa", &C::kappa),
      make_field("model", "gamma", &C::gamma),
      make_field("model", "L0", &C::L0),
      make_field("model", "qc_scale", &C::qc_scale),
      make_field("model", "qc_file", &C::qc_file),
      make_field("model", "initial_state", &C::initial_state),
      make_field("model", "initial_cosine", &C::initial_cosine),
      make_field("observer", "alpha", &C::alpha),
      make_field("observer", "p0_scale", &C::p0_scale),
      make_field("observer", "w_scale", &C::w_scale),
      make_field("observer", "r_scale", &C::r_scale),
      make_field("observer", "initial_estimate", &C::initial_estimate),
      make_field("observer", "blowup_norm", &C::blowup_norm),
      make_field("observer", "audit_stride", &C::audit_stride),
      make_field("disturbance", "enabled", &C::disturbance),
      make_field("disturbance", "process_variance", &C::process_variance),
      make_field("disturbance", "output_variance", &C::output_variance),
      make_field("disturbance", "hold_interval", &C::hold_interval),
  };
  return fields;
}

bool is_two_dimensional(const std::string& model) {
  return model == "magnetic_simplified" || model == "magnetic_augmented";
}

void validate(const ExperimentConfig& c, const std::string& source, const std::map<std::string, int>& lines) {
  const auto fail = [&](const std::string& key, const std::string& msg) {
    const auto it = lines.find(key);
    const std::string where = it == lines.end() ? source : source + ":" + std::to_string(it->second);
    throw Error(ErrorKind::Config, where + ": " + msg);
  };
  const auto names = model_names();
  if (std::find(names.begin(), names.end(), c.model) == names.end()) {
    fail("experiment.model", "unknown model '" + c.model + "'");
  }
  if (c.truth_order < 2) fail("experiment.truth_order", "truth order must be at least 2");
  if (c.observer_orders.empty()) fail("experiment.observer_orders", "at least one observer order is required");
  const auto check_orders = [&](const std::vector<Index>& orders, const std::string& key) {
    for (Index o : orders) {
      if (o < 2) fail(key, "observer order " + std::to_string(o) + " must be at least 2");
      if (o > c.truth_order) {
        fail(key, "observer order " + std::to_string(o) + " exceeds truth order " + std::to_string(c.truth_order));
      }
    }
  };
  check_orders(c.observer_orders, "experiment.observer_orders");
  if (c.run_optional) check_orders(c.optional_orders, "experiment.optional_orders");
  if (!(c.t_final > 0.0)) fail("experiment.t_final", "t_final must be positive");
  if (!(c.dt > 0.0)) fail("experiment.dt", "dt must be positive");
  const double ratio = c.t_final / c.dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio || std::round(ratio) < 1.0) {
    fail("experiment.dt", "dt must divide t_final");
  }
  if (c.hold_interval < 0.0) fail("disturbance.hold_interval", "hold interval must be nonnegative");
  if (c.hold_interval > 0.0) {
    const double h = c.hold_interval / c.dt;
    if (std::abs(h - std::round(h)) > 1e-9 * h || std::round(h) < 1.0) {
      fail("disturbance.hold_interval", "hold interval must be a multiple of dt");
    }
  }
  if (!(c.diffusion > 0.0)) fail("model.diffusion", "diffusion must be positive");
  if (!(c.L0 > 0.0)) fail("model.L0", "L0 must be positive");
  if (!(c.alpha >= 0.0)) fail("observer.alpha", "alpha must be nonnegative");
  if (!(c.p0_scale > 0.0)) fail("observer.p0_scale", "p0_scale must be positive");
  if (!(c.w_scale >= 0.0)) fail("observer.w_scale", "w_scale must be nonnegative");
  if (!(c.r_scale > 0.0)) fail("observer.r_scale", "r_scale must be positive");
  if (!(c.blowup_norm > 0.0)) fail("observer.blowup_norm", "blowup_norm must be positive");
  if (c.audit_stride < 0) fail("observer.audit_stride", "audit_stride must be nonnegative");
  if (!(c.process_variance >= 0.0)) fail("disturbance.process_variance", "variance must be nonnegative");
  const std::size_t outputs = is_two_dimensional(c.model) ? 3 : 1;
  if (c.disturbance && c.output_variance.size() != outputs) {
    fail("disturbance.output_variance", "expected " + std::to_string(outputs) + " output variances for model " + c.model);
  }
  for (double v : c.output_variance) {
    if (!(v >= 0.0)) fail("disturbance.output_variance", "variances must be nonnegative");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::string csv_for(const OrderResult& r, const ObserverRun& run) {
  const Index p = run.truth->y.empty() ? 0 : run.truth->y.front().size();
  std::string s = "t,l2_error";
  for (Index i = 1; i <= p; ++i) s += ",output_error_" + std::to_string(i);
  s += ",gain_norm,P_trace\n";
  const TimeGrid& grid = run.estimate.grid;
  for (std::size_t k = 0; k < r.errors.l2_error.size(); ++k) {
    s += format_double(grid.time(static_cast<Index>(k)));
    s += ',' + format_double(r.errors.l2_error[k]);
    for (Index i = 0; i < p; ++i) s += ',' + format_double(std::abs(r.errors.output_residual[k](i)));
    s += ',' + format_double(run.gain_norm[k]);
    s += ',' + format_double(run.p_trace[k]);
    s += '\n';
  }
  return s;
}

Vector truth_initial_state(const ExperimentConfig& c, const DiscreteSemilinearModel& model) {
  const double l0 = c.L0;
  const NodalField field = NodalField::from_function(model.mesh, [&c, l0](double r, double) {
    return c.initial_state + c.initial_cosine * std::cos(std::numbers::pi * r / l0);
  });
  Vector z = Vector::Zero(model.order());
  z.head(field.values.size()) = field.values;
  if (c.model == "magnetic_augmented") z.tail(kCurrentProducts) = input_signal_It(0.0);
  return z;
}

}  // namespace

Index ExperimentConfig::steps() const { return static_cast<Index>(std::llround(t_final / dt)); }

std::vector<Index> ExperimentConfig::active_orders() const {
  std::vector<Index> out;
  if (run_optional) out = optional_orders;
  for (Index o : observer_orders) {
    if (std::find(out.begin(), out.end(), o) == out.end()) out.push_back(o);
  }
  return out;
}

std::string format_double(double v, bool fixed17) {
  char buf[64];
  const auto res = fixed17 ? std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17)
                           : std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
  ExperimentConfig config;
  std::map<std::string, int> lines;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorKind::Config, where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "experiment" && section != "model" && section != "observer" && section != "disturbance" &&
          section != "manifest") {
        throw Error(ErrorKind::Config, where + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Config, where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) throw Error(ErrorKind::Config, where + "key '" + key + "' outside a section");
    if (section == "manifest") continue;  // run records, not inputs
    const auto& fields = schema();
    const auto it = std::find_if(fields.begin(), fields.end(),
                                 [&](const Field& f) { return f.section == section && f.key == key; });
    if (it == fields.end()) throw Error(ErrorKind::Config, where + "unknown key '" + key + "' in [" + section + "]");
    try {
      it->read(config, value);
    } catch (const std::invalid_argument& e) {
      throw Error(ErrorKind::Config, where + key + ": " + e.what());
    } catch (const std::out_of_range&) {
      throw Error(ErrorKind::Config, where + key + ": value out of range");
    }
    lines[section + "." + key] = lineno;
  }
  validate(config, source, lines);
  return config;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::Io, "config file not found: " + path.string());
  return parse_config_text(read_file(path), path.string());
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : schema()) {
    if (f.section != section) {
      out += (section.empty() ? "[" : "\n[") + f.section + "]\n";
      section = f.section;
    }
    out += f.key + " = " + f.write(config) + "\n";
  }
  return out;
}

DiscreteSemilinearModel build_experiment_model(const ExperimentConfig& c, Index order) {
  if (order < 2) throw Error(ErrorKind::Parameter, "mesh order must be at least 2");
  if (c.model == "linear_heat_1d") return build_linear_heat(Mesh(1, order - 1, c.L0), c.diffusion);
  if (c.model == "semilinear_heat_1d") return build_semilinear_heat_1d(Mesh(1, order - 1, c.L0), c.diffusion, c.kappa);
  MagneticParameters params;
  params.diffusion = c.diffusion;
  params.kappa = c.kappa;
  params.gamma = c.gamma;
  params.L0 = c.L0;
  params.qc = c.qc_file.empty() ? default_qc_surrogate(c.qc_scale) : load_matrix_file(c.qc_file);
  if (params.qc->rows() != kPotentialTerms) {
    throw Error(ErrorKind::Config, "Q_c potential matrix needs " + std::to_string(kPotentialTerms) + " rows");
  }
  const Mesh mesh(2, order - 1, c.L0);
  if (c.model == "magnetic_simplified") return build_magnetic_simplified(mesh, params);
  if (c.model == "magnetic_augmented") return build_magnetic_augmented(mesh, params, params.qc->cols());
  throw Error(ErrorKind::Config, "unknown model '" + c.model + "'");
}

std::string git_blob_hash(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx, content.data(), content.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error(ErrorKind::Io, "SHA-1 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate(config, "<config>", {});
  const TimeGrid grid(0.0, config.t_final, config.steps());
  const DiscreteSemilinearModel truth_model = build_experiment_model(config, config.truth_order);

  const bool augmented = config.model == "magnetic_augmented";
  StepSeries inputs;
  if (config.model == "magnetic_simplified") inputs = sample_inputs(&input_signal_It, grid);
  if (augmented) inputs = sample_inputs(&input_signal_Ut, grid);

  StepSeries omega, eta;
  if (config.disturbance) {
    Vector out_var = Eigen::Map<const Vector>(config.output_variance.data(),
                                              static_cast<Index>(config.output_variance.size()));
    DisturbanceSpec ds{SymMatrix::Identity(truth_model.disturbances()) * config.process_variance,
                       SymMatrix::Diagonal(out_var), config.hold_interval, config.seed};
    auto streams = disturbance_stream(ds, grid);
    omega = std::move(streams.omega);
    eta = std::move(streams.eta);
  }
  auto truth = std::make_shared<const TruthRun>(
      simulate_truth(truth_model, truth_initial_state(config, truth_model), inputs, omega, eta, grid, config.seed));

  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);

  ExperimentResult result;
  result.directory = dir;
  const auto orders = config.active_orders();
  const auto run_order = [&config, &truth, &truth_model, &dir, augmented](Index order) {
    OrderResult r;
    r.order = order;
    const DiscreteSemilinearModel observer = build_experiment_model(config, order);
    const Index n = observer.order();
    const Matrix mass_inv = solve_spd(observer.mass, Matrix::Identity(n, n));
    ObserverConfig oc;
    oc.alpha = config.alpha;
    oc.spec = NoiseSpec::constant(symmetrize(config.p0_scale * mass_inv), symmetrize(config.w_scale * mass_inv),
                                  SymMatrix::Identity(observer.outputs()) * config.r_scale);
    oc.initial_estimate = Vector::Zero(n);
    oc.initial_estimate.head(observer.mesh.node_count()).setConstant(config.initial_estimate);
    if (augmented) oc.initial_estimate.tail(kCurrentProducts) = input_signal_It(0.0);
    oc.riccati.blowup_norm = config.blowup_norm;
    oc.structure_check_stride = config.audit_stride;

    ObserverRun run = run_ekf_partial(truth, observer, oc);
    r.failure = run.failure;
    r.audit = run.audit;
    r.errors = error_series(run, observer, truth_model);
    r.csv = dir / ("order_" + std::to_string(order) + ".csv");
    write_file(r.csv, csv_for(r, run));
    return r;
  };

  std::vector<std::future<OrderResult>> jobs;
  for (Index order : orders) jobs.push_back(std::async(std::launch::async, run_order, order));
  for (auto& job : jobs) {
    result.orders.push_back(job.get());
    if (result.orders.back().failure) result.ok = false;
  }

  std::string manifest = serialize_config(config);
  manifest += "\n[manifest]\n";
  manifest += "seed = " + std::to_string(config.seed) + "\n";
  manifest += "steps = " + std::to_string(grid.steps()) + "\n";
  manifest += "truth_nodes = " + std::to_string(truth_model.mesh.node_count()) + "\n";
  for (const auto& r : result.orders) {
    manifest += "file." + r.csv.filename().string() + " = " + git_blob_hash(read_file(r.csv)) + "\n";
    manifest += "status." + std::to_string(r.order) + " = " + (r.failure ? "diverged: " + *r.failure : "ok") + "\n";
  }
  result.manifest = dir / "manifest.ini";
  write_file(result.manifest, manifest);
  return result;
}

}  // namespace pdekf
