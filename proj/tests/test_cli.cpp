#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

// Drives the moran executable end to end and reads every output back
// through the library parsers.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "moran/backward.hpp"
#include "moran/expectation.hpp"
#include "moran/forward.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace moran;

namespace {

const fs::path kWork = fs::path(MORAN_TEST_WORKDIR) / "cli";

struct Result {
  int code;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const std::string& body) {
  fs::create_directories(kWork);
  const fs::path p = kWork / name;
  std::ofstream(p) << body;
  return p;
}

Result run(const std::string& args) {
  fs::create_directories(kWork);
  const fs::path out = kWork / "stdout.txt", err = kWork / "stderr.txt";
  const std::string cmd = "cd '" + kWork.string() + "' && '" + std::string(MORAN_CLI) + "' " + args + " >'" +
                          out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

const char* kTwoSite = R"({
  "alphabet_sizes": [2, 2],
  "crossover_probs": [0.2],
  "initial_population": {"00": 5, "01": 2, "11": 3},
  "t_end": 1.0,
  "grid": 4,
  "replicates": 10000,
  "seed": 11,
  "trajectory_files": false
})";

}  // namespace

TEST_CASE("duality-check passes for n=2, N=3, r=0.3") {
  const auto cfg = write_config("dual.json", R"({"alphabet_sizes": [2, 2], "N": 3, "crossover_probs": [0.3]})");
  const auto r = run("duality-check --config " + cfg.string() + " --out dual");
  CHECK(r.code == 0);
  CHECK(r.out.find("< 1e-10") != std::string::npos);
  const std::string report = slurp(kWork / "dual" / "duality.txt");
  CHECK(report.find("PASS") != std::string::npos);
  CHECK(report.find("# config_hash fnv1a64:") != std::string::npos);
}

TEST_CASE("validation errors name the file and line; exit code 2") {
  const auto cfg = write_config("bad.json", "{\n  \"alphabet_sizes\": [2, 2],\n  \"N\": 4,\n  \"crossover_probs\": [1.5]\n}\n");
  const auto r = run("expectations --config " + cfg.string());
  CHECK(r.code == 2);
  CHECK(r.err.find("bad.json:4:") != std::string::npos);

  const auto syntax = write_config("syntax.json", "{\n  \"alphabet_sizes\": [2, 2]\n  \"N\": 4\n}\n");
  const auto s = run("expectations --config " + syntax.string());
  CHECK(s.code == 2);
  CHECK(s.err.find("syntax.json:3:") != std::string::npos);

  const auto flag = run("expectations --config " + cfg.string() + " --grid 0");
  CHECK(flag.code == 2);

  CHECK(run("no-such-command").code == 2);
}

TEST_CASE("size caps exit with code 3 and a hint") {
  const auto cfg = write_config("cap.json", R"({"alphabet_sizes": [2, 2, 2, 2, 2], "N": 40,
                                                "crossover_probs": [0.1, 0.1, 0.1, 0.1]})");
  const auto r = run("duality-check --config " + cfg.string());
  CHECK(r.code == 3);
  CHECK(r.err.find("hint:") != std::string::npos);
}

TEST_CASE("simulate-forward: mean H_𝟏 at t = 1 agrees with the exact expectation") {
  const auto cfg = write_config("fwd.json", kTwoSite);
  const auto r = run("simulate-forward --config " + cfg.string() + " --out fwd");
  REQUIRE(r.code == 0);
  std::ifstream in(kWork / "fwd" / "summary.csv");
  const auto rows = read_expectation_csv(in);
  CHECK(rows.size() == 5 * 2 * 4);  // grid points × partitions × types

  const SiteSpace space({2, 2});
  const auto z0 = PopulationState::from_counts(space, {5, 2, 0, 3});
  const auto exact = expected_sampling(BackwardModel::finite(10, RecombinationDistribution({0.2})), z0, {1.0});
  const MeasureD want = exact.at(0, parse_partition("1,2"));

  // read_expectation_csv drops the stderr column, so split those rows by hand.
  std::istringstream text(slurp(kWork / "fwd" / "summary.csv"));
  std::string line;
  int checked = 0;
  while (std::getline(text, line)) {
    if (line.rfind("1,\"1,2\",", 0) != 0) continue;
    std::vector<std::string> f;
    std::stringstream ls(line.substr(8));
    for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
    REQUIRE(f.size() == 3);
    const double mean = std::stod(f[1]), se = std::stod(f[2]);
    const double target = want.at(parse_type_label(f[0]));
    CHECK(std::abs(mean - target) <= 3.0 * se + 1e-12);
    ++checked;
  }
  CHECK(checked == 4);
}

TEST_CASE("simulate-forward: determinism, zero replicates and trajectory files") {
  const auto cfg = write_config("fwd_small.json", R"({
    "alphabet_sizes": [2, 3], "crossover_probs": [0.5], "initial_population": [2, 0, 1, 0, 3, 1],
    "t_end": 2.0, "grid": 4, "replicates": 12, "seed": 5})");
  REQUIRE(run("simulate-forward --config " + cfg.string() + " --out a").code == 0);
  REQUIRE(run("simulate-forward --config " + cfg.string() + " --out b --seed 5").code == 0);
  CHECK(slurp(kWork / "a" / "summary.csv") == slurp(kWork / "b" / "summary.csv"));
  CHECK(slurp(kWork / "a" / "forward" / "rep_000007.csv") == slurp(kWork / "b" / "forward" / "rep_000007.csv"));

  const SiteSpace space({2, 3});
  std::ifstream in(kWork / "a" / "forward" / "rep_000003.csv");
  const auto tr = read_forward_trajectory_csv(in, space);
  const auto z0 = PopulationState::from_counts(space, {2, 0, 1, 0, 3, 1});
  CHECK(tr.initial == z0);
  const auto again = simulate_forward(ForwardModel(space, 7, RecombinationDistribution({0.5})), z0, 2.0, 5, 3);
  CHECK(tr.state_at(2.0) == again.state_at(2.0));
  CHECK(tr.events.size() == again.events.size());

  REQUIRE(run("simulate-forward --config " + cfg.string() + " --out zero --reps 0").code == 0);
  std::ifstream zin(kWork / "zero" / "summary.csv");
  const auto rows = read_expectation_csv(zin);
  REQUIRE(!rows.empty());
  for (const auto& row : rows) CHECK(row.time == 0.0);
  CHECK(!fs::exists(kWork / "zero" / "forward"));
}

TEST_CASE("simulate-backward: variant-specific path structure") {
  const auto cfg = write_config("bwd.json", R"({
    "alphabet_sizes": [2, 2, 2, 2], "crossover_probs": [0.2, 0.2, 0.2], "rho": [1.0, 2.0, 1.5], "N": 6,
    "t_end": 3.0, "grid": 3, "replicates": 40, "seed": 9})");
  auto read_all = [](const fs::path& dir) {
    std::vector<std::vector<PartitionEvent>> out;
    for (int k = 0; k < 40; ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "rep_%06d.csv", k);
      std::ifstream in(dir / "backward" / name);
      out.push_back(read_partition_trajectory_csv(in));
    }
    return out;
  };

  REQUIRE(run("simulate-backward --config " + cfg.string() + " --variant deterministic --out det").code == 0);
  for (const auto& path : read_all(kWork / "det"))
    for (std::size_t k = 1; k < path.size(); ++k) {
      CHECK(refines(path[k].state, path[k - 1].state));
      CHECK(path[k].state.size() == path[k - 1].state.size() + 1);
    }

  REQUIRE(run("simulate-backward --config " + cfg.string() + " --variant diffusion --out diff").code == 0);
  for (const auto& path : read_all(kWork / "diff"))
    for (std::size_t k = 1; k < path.size(); ++k) {
      const auto& a = path[k - 1].state;
      const auto& b = path[k].state;
      const bool split = refines(b, a) && b.size() == a.size() + 1;
      const bool merge = refines(a, b) && a.size() == b.size() + 1;
      CHECK((split || merge));
    }

  const auto bottom_cfg = write_config("bwd0.json", R"({
    "alphabet_sizes": [2, 2, 2], "crossover_probs": [0.2, 0.2], "initial_partition": "1|2|3",
    "variant": "deterministic_limit", "replicates": 2, "seed": 1})");
  REQUIRE(run("simulate-backward --config " + bottom_cfg.string() + " --out bottom").code == 0);
  std::ifstream in(kWork / "bottom" / "backward" / "rep_000000.csv");
  const auto rows = read_partition_trajectory_csv(in);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].state == parse_partition("1|2|3"));

  const auto summary = slurp(kWork / "det" / "summary.csv");
  CHECK(summary.find("time,partition,frequency,stderr,exact") != std::string::npos);
}

TEST_CASE("expectations and lde outputs") {
  const auto cfg = write_config("three.json", R"({
    "alphabet_sizes": [2, 2, 2], "crossover_probs": [0.1, 0.25], "rho": [1.0, 2.5],
    "initial_population": {"000": 5, "010": 2, "101": 1, "111": 2}, "t_end": 2.0, "grid": 4})");
  REQUIRE(run("expectations --config " + cfg.string() + " --out exp").code == 0);
  std::ifstream in(kWork / "exp" / "expectations.csv");
  const auto rows = read_expectation_csv(in);
  const SiteSpace space({2, 2, 2});
  const auto z0 = PopulationState::from_counts(space, {5, 0, 2, 0, 0, 1, 0, 2});
  const auto e = expected_sampling(BackwardModel::finite(10, RecombinationDistribution({0.1, 0.25})), z0,
                                   {0.0, 0.5, 1.0, 1.5, 2.0});
  REQUIRE(rows.size() == 5 * 5 * 8);
  double worst = 0.0;
  for (const auto& row : rows) {
    const auto k = static_cast<std::size_t>(std::lround(row.time / 0.5));
    worst = std::max(worst, std::abs(row.value - e.at(k, row.partition).at(parse_type_label(row.type))));
  }
  CHECK(worst < 1e-15);

  const auto r = run("lde --config " + cfg.string() + " --out lde");
  REQUIRE(r.code == 0);
  const Eigen::MatrixXd want = oracle::conjugated3(10, 0.1, 0.25);
  const auto pos = r.out.find("1|2|3:");
  REQUIRE(pos != std::string::npos);
  std::istringstream diag(r.out.substr(pos + 6));
  for (Eigen::Index i = 0; i < 5; ++i) {
    double v = 0.0;
    diag >> v;
    CHECK(v == doctest::Approx(want(i, i)).epsilon(1e-9));
  }
  CHECK(slurp(kWork / "lde" / "lde_report.txt").find("residual") != std::string::npos);
  std::ifstream lin(kWork / "lde" / "lde.csv");
  CHECK(read_expectation_csv(lin).size() == 5 * 5 * 8);
}

TEST_CASE("fixation without recombination returns the initial frequencies") {
  const auto cfg = write_config("fix.json", R"({
    "alphabet_sizes": [2, 2], "crossover_probs": [0.0], "initial_population": [1, 2, 3, 4], "replicates": 0})");
  REQUIRE(run("fixation --config " + cfg.string() + " --out fix").code == 0);
  std::ifstream in(kWork / "fix" / "fixation.csv");
  const MeasureD p = read_measure_csv(in, SiteSet{1, 2}, {2, 2});
  for (TypeIndex x = 0; x < 4; ++x) CHECK(p[x] == doctest::Approx((x + 1) / 10.0));
}
