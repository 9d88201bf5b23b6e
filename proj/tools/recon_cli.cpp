// recon: run declarative experiments and summarize their records.
#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>

#include "recon/error.hpp"
#include "recon/experiment.hpp"

namespace {

int exit_code(recon::ErrorKind kind) {
  switch (kind) {
    case recon::ErrorKind::validation:
      return 2;
    case recon::ErrorKind::capability:
      return 3;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic reconstruction experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<std::string> out;
  std::optional<int> workers;
  auto* run = app.add_subcommand("run", "run the experiment described by a JSON config");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--seed", seed, "override the master seed");
  run->add_option("--paths", paths, "override the number of Monte Carlo paths");
  run->add_option("--out", out, "override the output directory");
  run->add_option("--workers", workers, "worker threads (0: all cores)");

  std::string dir;
  auto* rep = app.add_subcommand("report", "summarize the records in a directory");
  rep->add_option("dir", dir, "directory with result records")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      std::ifstream in(config_path);
      if (!in) recon::fail(recon::ErrorKind::validation, "cannot open config " + config_path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        recon::fail(recon::ErrorKind::validation, std::string("config is not valid JSON: ") + e.what());
      }
      if (j.is_object()) {
        if (seed) j["seed"] = *seed;
        if (paths) j["paths"] = *paths;
        if (out) j["output"] = *out;
        if (workers) j["workers"] = *workers;
      }
      const recon::ExperimentConfig config = recon::parse_config(j);
      const recon::ResultRecord r = recon::run_experiment(config);
      std::cout << r.experiment << " config_hash=" << r.config_hash << " seed=" << r.seed << "\n";
      for (const auto& [k, v] : r.metrics) std::cout << "  " << k << " = " << v << "\n";
      if (r.details.contains("warning")) std::cerr << "warning: " << r.details["warning"].get<std::string>() << "\n";
      std::cout << "wrote " << config.output << "/" << r.experiment << ".{csv,json} in " << r.wall_time << " s\n";
      if (r.metrics.empty()) {
        std::cerr << "no metrics\n";
        return 1;
      }
      return 0;
    }
    const recon::ReportSummary s = recon::report(dir);
    std::cout << s.table;  // ends in "no metrics" when nothing was found
    return s.metrics == 0 ? 1 : 0;
  } catch (const recon::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
