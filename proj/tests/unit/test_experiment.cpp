#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "recon/error.hpp"
#include "recon/experiment.hpp"

using namespace recon;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const json& j, std::string* message = nullptr) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  FAIL("config was accepted");
  return ErrorKind::numeric;
}

json rate_config(const fs::path& out, int workers) {
  return json{{"schema_version", 1},
              {"experiment", "reconstruction-rate"},
              {"grid_exponent", 10},
              {"noise", {{"lo", {0.5}}, {"hi", {3.0}}}},
              {"germ", {{"kind", "noise-product"}, {"holder_exponent", 0.75}, {"adapted_axes", {0}}, {"stochastic_dim", 1}}},
              {"levels", {{"min", 4}, {"max", 6}}},
              {"lambdas", {0.25, 0.125}},
              {"points", {{1.0}}},
              {"paths", 24},
              {"seed", 5},
              {"workers", workers},
              {"output", out.string()}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("minimal configs take the documented defaults") {
  const ExperimentConfig c = parse_config(json{{"schema_version", 1}, {"experiment", "homogeneity"}});
  CHECK(c.dimension == 1);
  CHECK(c.paths == 100);
  CHECK(c.seed == 1);
  CHECK(c.scaling == std::vector<int>{1});
  CHECK(c.canonical["schema_version"] == 1);
  CHECK_FALSE(c.canonical.dump().empty());
}

TEST_CASE("config validation errors") {
  std::string msg;
  CHECK(kind_of(json{{"experiment", "bdg"}}) == ErrorKind::validation);
  CHECK(kind_of(json{{"schema_version", 2}, {"experiment", "bdg"}}) == ErrorKind::validation);
  CHECK(kind_of(json{{"schema_version", 1}, {"experiment", "bdg"}, {"colour", "red"}}, &msg) == ErrorKind::validation);
  CHECK(msg.find("colour") != std::string::npos);
  CHECK(kind_of(json{{"schema_version", 1}, {"experiment", "bdg"}, {"germ", {{"kind", "ito"}, {"bogus", 1}}}}, &msg) ==
        ErrorKind::validation);
  CHECK(msg.find("germ.bogus") != std::string::npos);
  CHECK(kind_of(json{{"schema_version", 1}, {"experiment", "bdg"}, {"paths", "many"}}, &msg) == ErrorKind::validation);
  CHECK(msg.find("paths") != std::string::npos);
  CHECK(kind_of(json{{"schema_version", 1}, {"experiment", "teleport"}}) == ErrorKind::validation);
  CHECK(kind_of(json::array()) == ErrorKind::validation);
  CHECK(kind_of(json{{"schema_version", 1}, {"experiment", "bdg"}, {"paths", 0}}) == ErrorKind::validation);
}

TEST_CASE("conditional coherence of a non-adapted germ is a capability error") {
  const json j{{"schema_version", 1},
               {"experiment", "coherence-fit"},
               {"germ", {{"kind", "noise-product"}, {"adapted_axes", json::array()}, {"stochastic_dim", 1}}},
               {"mode", "conditional"}};
  CHECK(kind_of(j) == ErrorKind::capability);
}

TEST_CASE("config hash ignores workers and output") {
  const json a = rate_config("one", 1);
  json b = rate_config("two", 7);
  const std::string h = config_hash(parse_config(a));
  CHECK(h.size() == 64);
  CHECK(h == config_hash(parse_config(b)));
  b["seed"] = 6;
  CHECK(h != config_hash(parse_config(b)));
  // defaults spelled out hash like defaults left implicit
  json c = a;
  c["p"] = 2.0;
  CHECK(h == config_hash(parse_config(c)));
}

TEST_CASE("experiment output is byte-identical across worker counts") {
  TempDir dir("recon_experiment_workers");
  const ResultRecord one = run_experiment(parse_config(rate_config(dir.path / "w1", 1)));
  const ResultRecord three = run_experiment(parse_config(rate_config(dir.path / "w3", 3)));
  CHECK(one.metrics == three.metrics);
  const std::string a = slurp(dir.path / "w1" / "reconstruction-rate.csv");
  CHECK_FALSE(a.empty());
  CHECK(a == slurp(dir.path / "w3" / "reconstruction-rate.csv"));
  CHECK(a.find("# config_hash=" + one.config_hash) != std::string::npos);
  const json rec = json::parse(slurp(dir.path / "w1" / "reconstruction-rate.json"));
  CHECK(rec["format"] == "recon-result");
  CHECK(rec["seed"] == 5);
}

TEST_CASE("bdg experiment with a deterministic family") {
  TempDir dir("recon_experiment_bdg");
  const json j{{"schema_version", 1},
               {"experiment", "bdg"},
               {"bdg", {{"families", {"constant"}}, {"sizes", {4, 16, 64}}, {"p", {2.0, 4.0}}}},
               {"paths", 20},
               {"output", dir.path.string()}};
  const ResultRecord r = run_experiment(parse_config(j));
  REQUIRE(r.metrics.count("constant_p2_max_ratio"));
  CHECK(r.metrics.at("constant_p2_max_ratio") <= 1.0 + 1e-12);
  CHECK(r.metrics.at("constant_p4_max_ratio") <= 1.0 + 1e-12);
}

TEST_CASE("report summarizes records and flags empty directories") {
  TempDir dir("recon_experiment_report");
  const ReportSummary empty = report(dir.path.string());
  CHECK(empty.records == 0);
  CHECK(empty.metrics == 0);
  CHECK(empty.table.find("no metrics") != std::string::npos);

  const json j{{"schema_version", 1},
               {"experiment", "homogeneity"},
               {"grid_exponent", 8},
               {"lambdas", {1.0, 0.5, 0.25}},
               {"seed", 3},
               {"output", dir.path.string()}};
  const ResultRecord r = run_experiment(parse_config(j));
  const ReportSummary s = report(dir.path.string());
  CHECK(s.records == 1);
  CHECK(s.metrics == r.metrics.size());
  std::istringstream lines(s.table);
  std::string header, row, extra;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(header == "experiment,config_hash,seed,metric,value,theory,deviation");
  CHECK(row.rfind("homogeneity," + r.config_hash.substr(0, 16) + ",3,slope,", 0) == 0);
  CHECK_FALSE(std::getline(lines, extra));
  CHECK(fs::exists(dir.path / "homogeneity_plot.csv"));
  CHECK_THROWS_AS(report((dir.path / "missing").string()), Error);
}
