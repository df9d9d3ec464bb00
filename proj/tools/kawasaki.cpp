// Command-line entry point: solve-rates, simulate, trace, report, capacity
// and sweep. Flags override the values of the --config file.
#include <exception>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "kawasaki/cli.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<double> beta;
  std::optional<int> n, L, ell;
  std::optional<std::uint64_t> seed, replicas, max_events;
  std::optional<std::string> engine, out_dir, table;
  std::optional<double> horizon, horizon_time;
  std::optional<int> threads;
  bool rational = false;
  std::vector<std::string> inputs;

  kawasaki::ExperimentConfig apply() const {
    kawasaki::ExperimentConfig c = config.empty() ? kawasaki::ExperimentConfig{} : kawasaki::ExperimentConfig::load(config);
    if (beta) c.params.beta = *beta;
    if (n) c.params.n = *n;
    if (L) c.params.L = *L;
    if (ell) c.params.ell = *ell;
    if (seed) c.seed = *seed;
    if (replicas) c.replicas = *replicas;
    if (max_events) c.max_events = *max_events;
    if (engine) c.engine = *engine;
    if (out_dir) c.out_dir = *out_dir;
    if (table) c.table = *table;
    if (horizon) c.horizon = *horizon;
    if (horizon_time) c.horizon_time = *horizon_time;
    if (threads) c.threads = *threads;
    if (rational) c.rational = true;
    if (!inputs.empty()) c.inputs = inputs;
    return c;
  }
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "INI configuration file")->check(CLI::ExistingFile);
  app->add_option("--beta", o.beta, "inverse temperature");
  app->add_option("--n", o.n, "side of the square droplet");
  app->add_option("--L", o.L, "torus half-side");
  app->add_option("--ell", o.ell, "diffusive length scale");
  app->add_option("--out-dir", o.out_dir, "output directory");
  app->add_option("--table", o.table, "rate table file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metastable droplet dynamics of the Kawasaki lattice gas"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kawasaki::code_version());
  Overrides o;

  auto* solve = app.add_subcommand("solve-rates", "build and audit the rate table and walk constants");
  add_common(solve, o);
  solve->add_flag("--rational", o.rational, "recompute the constants in exact arithmetic");

  auto* sim = app.add_subcommand("simulate", "write one trajectory file per replica");
  add_common(sim, o);
  sim->add_option("--engine", o.engine, "eta or zeta-hat");
  sim->add_option("--seed", o.seed, "master seed");
  sim->add_option("--replicas", o.replicas, "number of replicas");
  sim->add_option("--horizon", o.horizon, "time horizon in units of ell^2 theta");
  sim->add_option("--horizon-time", o.horizon_time, "absolute time horizon");
  sim->add_option("--max-events", o.max_events, "event cap per replica");
  sim->add_option("--threads", o.threads, "worker threads (0 = hardware)");

  auto* tr = app.add_subcommand("trace", "write the ground-state trace of each trajectory as CSV");
  add_common(tr, o);
  tr->add_option("--input", o.inputs, "trajectory files (default: <out-dir>/traj/*.jsonl)");

  auto* rep = app.add_subcommand("report", "scaling report over a set of trajectories");
  add_common(rep, o);
  rep->add_option("--input", o.inputs, "trajectory files (default: <out-dir>/traj/*.jsonl)");

  auto* cap = app.add_subcommand("capacity", "exact capacity, diffusion rate and return bounds");
  add_common(cap, o);

  auto* sweep = app.add_subcommand("sweep", "capacity summary over the [sweep] grid of the configuration");
  add_common(sweep, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const kawasaki::ExperimentConfig cfg = o.apply();
    if (*solve) return kawasaki::cmd_solve_rates(cfg, std::cerr);
    if (*sim) return kawasaki::cmd_simulate(cfg, std::cerr);
    if (*tr) return kawasaki::cmd_trace(cfg, std::cerr);
    if (*rep) return kawasaki::cmd_report(cfg, std::cerr);
    if (*cap) return kawasaki::cmd_capacity(cfg, std::cerr);
    if (*sweep) return kawasaki::cmd_sweep(cfg, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
