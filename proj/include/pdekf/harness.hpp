#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pdekf/analysis.hpp"
#include "pdekf/systems.hpp"

namespace pdekf {

/// Experiment description. Orders count nodes (basis functions) per axis, so
/// an order-9 observer on the square has 81 unknowns.
struct ExperimentConfig {
  // [experiment]
  std::string model = "magnetic_simplified";
  Index truth_order = 35;
  std::vector<Index> observer_orders{9, 7};
  std::vector<Index> optional_orders{25, 18};
  bool run_optional = false;
  double t_final = 2.0;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  std::string output_dir = "runs/default";

  // [model]
  double diffusion = 1e-8;
  double kappa = 2.5e-7;
  double gamma = 6.6e-5;
  double L0 = 0.01;
  double qc_scale = 1e4;
  std::string qc_file;
  double initial_state = 1.0;
  double initial_cosine = 0.0;  // adds initial_cosine * cos(pi r / L0) to the truth initial state

  // [observer]
  double alpha = 8.0;
  double p0_scale = 1.0;
  double w_scale = 1.0;
  double r_scale = 100.0;
  double initial_estimate = 0.0;
  double blowup_norm = 1e40;
  Index audit_stride = 1;

  // [disturbance]
  bool disturbance = false;
  double process_variance = 0.1;
  std::vector<double> output_variance{5e-3, 5e-3, 5e-4};
  double hold_interval = 0.0;  // 0 means dt

  bool operator==(const ExperimentConfig&) const = default;

  Index steps() const;
  /// Observer orders actually run: the optional orders when enabled, then the mandatory ones.
  std::vector<Index> active_orders() const;
};

/// Parses the sectioned key = value format. Unknown keys, malformed values and
/// invariant breaches raise Config errors prefixed with "<source>:<line>:".
ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "<config>");
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Writes every key; parse_config_text(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Builds the model named in the config on a mesh with `order` nodes per axis.
DiscreteSemilinearModel build_experiment_model(const ExperimentConfig& config, Index order);

struct OrderResult {
  Index order = 0;
  std::filesystem::path csv;
  ErrorSeries errors;
  CovarianceAudit audit;
  std::optional<std::string> failure;
};

struct ExperimentResult {
  std::filesystem::path directory;
  std::filesystem::path manifest;
  std::vector<OrderResult> orders;
  bool ok = true;
};

/// One truth run, then one EKF per observer order against the same
/// measurement stream; writes order_<k>.csv per order and manifest.ini last.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Git blob hash (SHA-1 of "blob <size>\0" + content), lowercase hex.
std::string git_blob_hash(const std::string& content);

/// Shortest round-trip decimal form, or 17 significant digits when `fixed17`.
std::string format_double(double v, bool fixed17 = true);

/// SVG line plot of `column` against t, one curve per CSV. Throws Shape when
/// the CSVs do not share the same t column.
void emit_plot(const std::vector<std::filesystem::path>& csvs, const std::filesystem::path& out,
               bool log_scale = true, const std::string& column = "l2_error");

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

std::vector<std::string> verify_suites();

/// Runs an oracle suite ("riccati", "shift", "kf", "remainder",
/// "detectability" or "all"). Throws Misuse for an unknown selector.
std::vector<CheckResult> run_verify(const std::string& suite);

std::string format_check(const CheckResult& r);

}  // namespace pdekf
