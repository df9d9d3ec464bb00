#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <json.hpp>

#include "doctest.h"
#include "kawasaki/cli.hpp"

using namespace kawasaki;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("kawasaki_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<nlohmann::json> manifests(const std::string& dir) {
  std::vector<nlohmann::json> out;
  std::ifstream f(fs::path(dir) / "manifests.jsonl");
  for (std::string line; std::getline(f, line);) out.push_back(nlohmann::json::parse(line));
  return out;
}

ExperimentConfig base_config(const std::string& dir) {
  ExperimentConfig c;
  c.params.beta = 8.0;
  c.params.n = 4;
  c.params.L = 9;
  c.params.ell = 4;
  c.out_dir = dir;
  return c;
}

// Expected number of jumps over [0, T] from the ground class, from the class
// generator assembled here: the augmented exponential
// exp([[Q, r], [0, 0]] T) carries the integral of e^{Qt} r in its last column.
double expected_jumps(const RateTable& table, double beta, double T) {
  const int m = table.num_classes();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + 1, m + 1);
  for (int c = 0; c < m; ++c) {
    const double pre = std::exp(-beta * RateTable::prefactor_power(c));
    double out = 0.0;
    for (const RateEntry& e : table.row(c)) {
      A(c, e.target) += pre * e.value;
      out += pre * e.value;
    }
    A(c, c) -= out;
    A(c, m) = out;
  }
  const Eigen::MatrixXd E = (A * T).exp();
  return E(FamilyCatalog::gamma_class(), m);
}

}  // namespace

TEST_CASE("configuration files parse and validate") {
  const ExperimentConfig c = ExperimentConfig::parse(
      "[params]\nbeta = 7.5\nn = 5\nL = 11\nell = 3\n"
      "[run]\nseed = 9\nreplicas = 12\nengine = eta\nhorizon = 0.5\nout_dir = res\n"
      "[tolerance]\nsigma = 2\nqv_grid = 0.5, 1\n"
      "[sweep]\nbeta = 6, 8\n"
      "[report]\ninputs = a.jsonl, b.jsonl\n");
  CHECK(c.params.beta == 7.5);
  CHECK(c.params.n == 5);
  CHECK(c.params.L == 11);
  CHECK(c.params.ell == 3);
  CHECK(c.seed == 9);
  CHECK(c.replicas == 12);
  CHECK(c.engine == "eta");
  CHECK(c.horizon == 0.5);
  CHECK(c.sigma == 2.0);
  CHECK(c.qv_grid == std::vector<double>{0.5, 1.0});
  CHECK(c.inputs == std::vector<std::string>{"a.jsonl", "b.jsonl"});
  CHECK(c.table_path() == "res/rates_n5_L11.json");
  CHECK_NOTHROW(c.validate());
  const auto g = c.grid();
  REQUIRE(g.size() == 2);
  CHECK(g[0].beta == 6.0);
  CHECK(g[1].beta == 8.0);
  CHECK(g[1].n == 5);

  CHECK_THROWS_AS(ExperimentConfig::parse("[params]\nbogus = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::parse("[other]\nx = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::parse("[params]\nn = four\n"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::parse("[sweep]\nn = 4, x\n"), std::invalid_argument);

  ExperimentConfig bad = c;
  bad.params.n = 2;
  bad.params.L = 9;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.params.L = 10;  // L must exceed 2n
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.params.ell = 12;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.engine = "other";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  // One bad grid point rejects the whole sweep before any work.
  ExperimentConfig sw = c;
  sw.sweep_n = {4, 5};
  sw.sweep_L = {9};
  CHECK_THROWS_AS(sw.grid(), std::invalid_argument);
  sw.sweep_L.clear();
  const auto tight = sw.grid();
  REQUIRE(tight.size() == 4);
  CHECK(tight[0].L == 9);
  CHECK(tight[3].L == 11);
}

TEST_CASE("manifest ids are deterministic") {
  SimulationParams p;
  const std::string a = manifest_id("simulate", p, 3, "abc");
  CHECK(a == manifest_id("simulate", p, 3, "abc"));
  CHECK(a != manifest_id("simulate", p, 4, "abc"));
  CHECK(a != manifest_id("simulate", p, 3, "abd"));
  CHECK(a.rfind("simulate-", 0) == 0);
}

TEST_CASE("solve-rates writes an audited table with a stable hash") {
  TempDir d("solve");
  ExperimentConfig c = base_config(d.str());
  std::ostringstream log;
  REQUIRE(cmd_solve_rates(c, log) == 0);
  const std::string first = slurp(c.table_path());
  const RateTable t = RateTable::from_json(first);
  CHECK(t.num_classes() == 147);

  const auto audit = nlohmann::json::parse(slurp(d.path / "rates_n4_L9_audit.json"));
  CHECK(audit["pass"].get<bool>());
  bool has_path = false;
  for (const auto& ch : audit["checks"]) {
    CHECK_MESSAGE(ch["pass"].get<bool>(), ch["name"].get<std::string>());
    if (ch["name"].get<std::string>().rfind("path:", 0) == 0) has_path = true;
  }
  CHECK(has_path);

  const std::string csv = slurp(d.path / "rates_n4_L9_constants.csv");
  CHECK(csv.find("name,value\n") != std::string::npos);
  CHECK(csv.find("\nq,0.375\n") != std::string::npos);

  REQUIRE(cmd_solve_rates(c, log) == 0);
  CHECK(slurp(c.table_path()) == first);
  const auto ms = manifests(d.str());
  REQUIRE(ms.size() == 2);
  CHECK(ms[0]["table_hash"] == t.hash());
  CHECK(ms[0]["id"] == ms[1]["id"]);
  CHECK(csv.find("# manifest " + ms[0]["id"].get<std::string>()) == 0);
  CHECK(ms[0]["code_version"] == code_version());

  c.params.n = 2;
  CHECK_THROWS_AS(cmd_solve_rates(c, log), std::invalid_argument);
}

TEST_CASE("solve-rates constants agree with the rational recomputation at n = 6") {
  TempDir d("rational");
  ExperimentConfig c = base_config(d.str());
  c.params.n = 6;
  c.params.L = 13;
  c.rational = true;
  std::ostringstream log;
  CHECK(cmd_solve_rates(c, log) == 0);
  std::istringstream csv(slurp(d.path / "rates_n6_L13_constants.csv"));
  std::string line;
  std::getline(csv, line);  // manifest
  std::getline(csv, line);
  CHECK(line == "name,value,exact");
  int rows = 0;
  while (std::getline(csv, line)) {
    const auto a = line.find(','), b = line.rfind(',');
    const double v = std::stod(line.substr(a + 1, b - a - 1)), e = std::stod(line.substr(b + 1));
    CHECK_MESSAGE(std::abs(v - e) <= 1e-11 * std::max(1.0, std::abs(e)), line);
    ++rows;
  }
  CHECK(rows == 12 + 6);
}

TEST_CASE("simulate is reproducible, resumable and needs a table") {
  TempDir d("simulate");
  ExperimentConfig c = base_config(d.str());
  c.replicas = 400;
  c.seed = 11;
  std::ostringstream log;
  try {
    cmd_simulate(c, log);
    FAIL("missing table not reported");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("solve-rates") != std::string::npos);
  }
  REQUIRE(cmd_solve_rates(c, log) == 0);
  REQUIRE(cmd_simulate(c, log) == 0);
  const auto ms = manifests(d.str());
  const std::string id = ms.back()["id"];
  REQUIRE(ms.back()["outputs"].size() == 400);

  // Event counts against the exact expectation over the same horizon.
  const RateTable table = RateTable::from_json(slurp(c.table_path()));
  std::vector<double> counts;
  double horizon = 0.0;
  for (const auto& f : ms.back()["outputs"]) {
    const Trajectory t = load_trajectory(f.get<std::string>());
    CHECK(t.manifest == id);
    CHECK(t.params.ell == 4);
    horizon = t.end_time;
    counts.push_back(double(t.events.size()));
  }
  const Estimate e = mean_estimate(counts);
  const double expected = expected_jumps(table, 8.0, horizon);
  CHECK(expected > 20.0);
  CHECK(std::abs(e.value - expected) <= 3.0 * e.se);

  // Same seed elsewhere gives identical bytes; a rerun keeps finished files.
  TempDir d2("simulate2");
  ExperimentConfig c2 = c;
  c2.out_dir = d2.str();
  c2.table = c.table_path();
  c2.replicas = 3;
  REQUIRE(cmd_simulate(c2, log) == 0);
  for (int i = 0; i < 3; ++i) {
    const std::string name = "traj/zeta-hat_s11_r" + std::to_string(i) + ".jsonl";
    CHECK(slurp(d.path / name) == slurp(d2.path / name));
  }
  const auto before = fs::last_write_time(d2.path / "traj/zeta-hat_s11_r0.jsonl");
  fs::remove(d2.path / "traj/zeta-hat_s11_r1.jsonl");
  { std::ofstream(d2.path / "traj/zeta-hat_s11_r2.jsonl") << "truncated"; }
  REQUIRE(cmd_simulate(c2, log) == 0);
  CHECK(fs::last_write_time(d2.path / "traj/zeta-hat_s11_r0.jsonl") == before);
  for (int i = 1; i < 3; ++i) {
    const std::string name = "traj/zeta-hat_s11_r" + std::to_string(i) + ".jsonl";
    CHECK(slurp(d.path / name) == slurp(d2.path / name));
  }
  CHECK(manifests(d2.str()).size() == 2);
}

TEST_CASE("lattice-gas runs replay with matching hashes") {
  TempDir d("eta");
  ExperimentConfig c = base_config(d.str());
  c.engine = "eta";
  c.horizon_time = 1e12;
  c.max_events = 200'000;
  std::ostringstream log;
  REQUIRE(cmd_simulate(c, log) == 0);
  const Trajectory t = load_trajectory((d.path / "traj/eta_s1_r0.jsonl").string());
  CHECK(t.events.size() == 200'000);
  CHECK(t.stop == StopReason::EventCap);
  CHECK(!t.checkpoints.empty());
  CHECK_NOTHROW(verify_checkpoints(t));
  CHECK(replay_eta(t, t.checkpoints.back().event).hash() == t.checkpoints.back().hash);
}

TEST_CASE("report schema, csv layout and input checks") {
  TempDir d("report");
  ExperimentConfig c = base_config(d.str());
  c.replicas = 200;
  std::ostringstream log;
  REQUIRE(cmd_solve_rates(c, log) == 0);
  REQUIRE(cmd_simulate(c, log) == 0);
  const int rc = cmd_report(c, log);
  const auto r = nlohmann::json::parse(slurp(d.path / "report.json"));
  CHECK(rc == (r["failures"].empty() ? 0 : 1));
  CHECK(r["schema_version"] == ScalingReport::kSchemaVersion);
  CHECK(r["engine"] == "zeta-hat");
  CHECK(r["replicas"] == 200);
  CHECK(r["inputs"].size() == 200);
  for (const char* key : {"theta_hat", "qv", "tail", "budget", "confinement", "params"})
    CHECK_MESSAGE(r.contains(key), key);

  const std::string qv = slurp(d.path / "report_qv.csv");
  CHECK(qv.rfind("t,z11,z22,z12\n", 0) == 0);
  CHECK(std::count(qv.begin(), qv.end(), '\n') == 1 + int(c.qv_grid.size()));
  const std::string tail = slurp(d.path / "report_tail.csv");
  CHECK(tail.rfind("k,probability,se,exact\n", 0) == 0);
  CHECK(r["tail"].contains("monotone_after_5"));

  // The first rows of the tail agree with the exact return law.
  std::istringstream rows(tail);
  std::string line;
  std::getline(rows, line);
  for (int k = 0; k <= 2 && std::getline(rows, line); ++k) {
    std::vector<double> v;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) v.push_back(std::stod(cell));
    CHECK(v[3] >= 0.0);
    CHECK(std::abs(v[1] - v[3]) <= 4.0 * v[2] + 1e-3);
  }

  // Inputs from another temperature are refused.
  TempDir d2("report2");
  ExperimentConfig other = c;
  other.out_dir = d2.str();
  other.table = c.table_path();
  other.params.beta = 7.0;
  other.replicas = 1;
  REQUIRE(cmd_simulate(other, log) == 0);
  ExperimentConfig mixed = c;
  mixed.inputs = {(d.path / "traj/zeta-hat_s1_r0.jsonl").string(), (d2.path / "traj/zeta-hat_s1_r0.jsonl").string()};
  CHECK_THROWS_AS(cmd_report(mixed, log), std::invalid_argument);
}

TEST_CASE("capacity and sweep outputs") {
  TempDir d("capacity");
  ExperimentConfig c = base_config(d.str());
  std::ostringstream log;
  REQUIRE(cmd_solve_rates(c, log) == 0);
  REQUIRE(cmd_capacity(c, log) == 0);
  const auto j = nlohmann::json::parse(slurp(d.path / "capacity_n4_L9_b8.json"));
  CHECK(j["inverse_theta"]["within"].get<bool>());
  CHECK(j["capacity"]["return_probability"].get<double>() > 0.5);
  CHECK(j["manifest"].get<std::string>().rfind("capacity-", 0) == 0);

  c.sweep_beta = {6.0, 9.0};
  REQUIRE(cmd_sweep(c, log) == 0);
  std::istringstream csv(slurp(d.path / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line.rfind("# manifest sweep-", 0) == 0);
  std::getline(csv, line);
  CHECK(line.rfind("beta,n,L,ell,capacity_e2beta", 0) == 0);
  int points = 0;
  while (std::getline(csv, line)) ++points;
  CHECK(points == 2);
}
