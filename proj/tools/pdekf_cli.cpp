// Command-line front end: run experiments, plot CSV series, run oracle suites.

#include <CLI11.hpp>

#include <iostream>

#include "pdekf/harness.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::optional<std::uint64_t>& seed,
            const std::optional<std::string>& output) {
  pdekf::ExperimentConfig config = pdekf::parse_config(config_path);
  if (seed) config.seed = *seed;
  if (output) config.output_dir = *output;
  const auto result = pdekf::run_experiment(config);
  for (const auto& r : result.orders) {
    std::cout << "order " << r.order << ": " << r.csv.string();
    if (r.failure) {
      std::cout << "  DIVERGED: " << *r.failure;
    } else if (!r.errors.relative.empty()) {
      std::cout << "  relative L2 error " << r.errors.relative.front() << " -> " << r.errors.relative.back();
    }
    std::cout << '\n';
  }
  std::cout << "manifest: " << result.manifest.string() << '\n';
  return result.ok ? 0 : 1;
}

int cmd_verify(const std::string& suite) {
  const auto checks = pdekf::run_verify(suite);
  bool ok = true;
  for (const auto& c : checks) {
    std::cout << pdekf::format_check(c) << '\n';
    ok = ok && c.pass;
  }
  return ok ? 0 : 1;
}

int cmd_list_models() {
  static const char* summary[] = {
      "linear heat equation on [-L0, L0], F = 0, C = int c (Kalman filter reference)",
      "1D heat equation with -kappa z^2 sink, C = int c",
      "2D diffusion with -kappa z^2 sink and current-driven flux input, 3 moment outputs",
      "2D model with the current products appended to the state, U_t as input",
  };
  const auto names = pdekf::model_names();
  for (std::size_t i = 0; i < names.size(); ++i) std::cout << names[i] << "  " << summary[i] << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extended Kalman filter experiments for semilinear PDE models"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a truth simulation and the configured observers");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  run->add_option("config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the disturbance seed");
  run->add_option("--output", output, "Override the output directory");

  auto* plot = app.add_subcommand("plot", "Plot one column of result CSVs as SVG");
  std::vector<std::string> csvs;
  std::string out_file;
  std::string column = "l2_error";
  bool linear = false;
  plot->add_option("csv", csvs, "CSV files sharing a time grid")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", out_file, "Output SVG path")->required();
  plot->add_option("--column", column, "Column to plot");
  plot->add_flag("--linear", linear, "Linear instead of logarithmic value axis");

  auto* verify = app.add_subcommand("verify", "Run the oracle suites");
  std::string suite = "all";
  verify->add_option("suite", suite, "riccati, shift, kf, remainder, detectability or all");

  app.add_subcommand("list-models", "List the model catalog");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help requests exit cleanly, every other parse error is a usage error
  }

  try {
    if (*run) return cmd_run(config_path, seed, output);
    if (*plot) {
      std::vector<std::filesystem::path> paths(csvs.begin(), csvs.end());
      pdekf::emit_plot(paths, out_file, !linear, column);
      return 0;
    }
    if (*verify) {
      const auto suites = pdekf::verify_suites();
      if (suite != "all" && std::find(suites.begin(), suites.end(), suite) == suites.end()) {
        std::cerr << "usage error: unknown suite '" << suite << "'\n";
        return 2;
      }
      return cmd_verify(suite);
    }
    return cmd_list_models();
  } catch (const pdekf::Error& e) {
    std::cerr << "error (" << pdekf::to_string(e.kind()) << "): " << e.what() << '\n';
    return 1;
  }
}
