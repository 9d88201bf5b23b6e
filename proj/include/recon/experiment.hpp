#pragma once

#include <cstdint>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

namespace recon {

inline constexpr int config_schema_version = 1;
inline constexpr const char* module_version = "0.1.0";

/// A declarative experiment. Field-by-field defaults are documented in
/// configs/README.md; unknown fields are rejected.
struct ExperimentConfig {
  std::string experiment;
  std::size_t dimension = 1;
  std::vector<int> scaling;  // empty: canonical

  std::string basis_family = "daubechies";
  int moments = 2;
  int cascade_resolution = 12;

  int grid_exponent = 12;  // 2^J cells per unit on every axis
  std::vector<int> grid_exponents;  // per-axis override, defaults to grid_exponent
  std::vector<double> noise_lo, noise_hi;

  // Germ.
  std::string germ = "noise-product";  // noise-product | young | ito | additive
  double holder_exponent = 0.75;
  std::vector<std::size_t> adapted_axes;
  std::size_t stochastic_dim = 1;
  double field_radius = 1.0;
  int taylor_order = 0;
  std::string prefactor = "constant";  // young: constant | linear | sine
  double prefactor_value = 1.0;
  std::string driver = "noise";  // young: noise | density

  std::vector<double> psi_center, psi_radius;
  int n_min = 4, n_max = 10;
  std::vector<double> lambdas;
  std::vector<std::vector<double>> points;
  std::string mode = "plain";
  std::string variant = "one-sided";
  bool conditional = false;

  std::size_t paths = 100;
  double p = 2.0;
  std::uint64_t seed = 1;
  int workers = 0;  // 0: all cores
  std::string output = "results";

  // bdg
  std::vector<std::string> families;
  std::vector<std::size_t> sizes;
  std::vector<double> moments_p;
  // kolmogorov
  double alpha = -0.55;
  double kappa = 0.05;
  std::vector<int> level_caps;
  // sewing
  double horizon = 1.0;
  int sew_level = 12;
  std::vector<int> sew_levels;
  // homogeneity
  std::size_t space_dim = 1;
  std::string kernel = "white";

  nlohmann::json canonical;  // validated config, used for the hash
};

/// Validation errors name the offending field.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// SHA-256 of the canonical config without output and worker fields.
std::string config_hash(const ExperimentConfig& config);

struct ResultRecord {
  std::string experiment;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;
  nlohmann::json details;
  std::string csv;  // table body with header comments
  double wall_time = 0.0;

  nlohmann::json to_json() const;
};

/// Runs the pipeline; with write = true stores <output>/<experiment>.csv and .json.
ResultRecord run_experiment(const ExperimentConfig& config, bool write = true);

struct ReportSummary {
  std::size_t records = 0;
  std::size_t metrics = 0;
  std::string table;  // one row per record: its primary metric against theory
};

/// Aggregates every record in a directory: summary.csv (one row per record),
/// metrics.csv (every metric) and <experiment>_plot.csv (points with the
/// fitted line). Records without metrics are skipped.
ReportSummary report(const std::string& directory);

}  // namespace recon
