// Experiment configuration, run manifests and the subcommands of the
// command-line tool.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kawasaki/scaling.hpp"

namespace kawasaki {

const char* code_version();

// Flat key-value file with [sections]:
//   [params]    beta, n, L, ell
//   [run]       seed, replicas, engine, horizon, horizon_time, max_events,
//               out_dir, table, threads, rational
//   [sweep]     beta, n, L, ell as comma-separated lists
//   [tolerance] sigma, qv_grid
//   [report]    inputs (comma-separated trajectory files)
struct ExperimentConfig {
  SimulationParams params;
  std::uint64_t seed = 1;
  std::uint64_t replicas = 1;
  std::string engine = "zeta-hat";
  double horizon = 1.0;       // in units of ell^2 theta
  double horizon_time = 0.0;  // absolute; overrides `horizon` when positive
  std::uint64_t max_events = 100'000'000;
  std::string out_dir = "out";
  std::string table;          // default: rates file under out_dir
  int threads = 0;
  bool rational = false;
  double sigma = 3.0;
  std::vector<double> qv_grid{0.25, 0.5, 0.75, 1.0};
  std::vector<std::string> inputs;
  std::vector<double> sweep_beta;
  std::vector<int> sweep_n, sweep_L, sweep_ell;

  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  // Throws std::invalid_argument unless n >= 3, L > 2n, 1 <= ell <= L and the
  // run settings are usable.
  void validate() const;
  // Sweep points, each validated; the single parameter point when no sweep
  // list is given.
  std::vector<SimulationParams> grid() const;
  std::string table_path() const;
};

struct RunManifest {
  std::string id;
  std::string subcommand;
  SimulationParams params;
  std::uint64_t seed = 0;
  std::string table_hash;
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;
  std::string to_json() const;
};

// Deterministic id of a run, referenced from every file it writes.
std::string manifest_id(const std::string& subcommand, const SimulationParams& p, std::uint64_t seed,
                        const std::string& table_hash);
// Appends one line to <out_dir>/manifests.jsonl.
void append_manifest(const std::string& out_dir, const RunManifest& m);
// Writes through a temporary file and a rename.
void write_file_atomic(const std::string& path, const std::string& content);

// Exit status: 0 success, 1 a failed audit or tolerance check. Input and
// usage errors are thrown.
int cmd_solve_rates(const ExperimentConfig& cfg, std::ostream& log);
int cmd_simulate(const ExperimentConfig& cfg, std::ostream& log);
int cmd_trace(const ExperimentConfig& cfg, std::ostream& log);
int cmd_report(const ExperimentConfig& cfg, std::ostream& log);
int cmd_capacity(const ExperimentConfig& cfg, std::ostream& log);
int cmd_sweep(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace kawasaki
