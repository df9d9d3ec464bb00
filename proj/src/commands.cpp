#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "kawasaki/cli.hpp"

#ifndef KAWASAKI_VERSION
#define KAWASAKI_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace kawasaki {

const char* code_version() { return KAWASAKI_VERSION; }

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

nlohmann::json params_json(const SimulationParams& p) {
  return {{"beta", p.beta}, {"n", p.n}, {"L", p.L}, {"ell", p.ell}};
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RateTable load_table(const ExperimentConfig& cfg) {
  const std::string path = cfg.table_path();
  if (!fs::exists(path))
    throw std::runtime_error("rate table not found at " + path + "; run the solve-rates subcommand first");
  RateTable t = RateTable::from_json(read_file(path));
  if (t.n() != cfg.params.n || t.L() != cfg.params.L)
    throw std::runtime_error("rate table at " + path + " was built for other (n, L)");
  return t;
}

std::string stem(const std::string& path) { return fs::path(path).stem().string(); }

std::vector<std::string> trajectory_inputs(const ExperimentConfig& cfg) {
  if (!cfg.inputs.empty()) return cfg.inputs;
  std::vector<std::string> out;
  const fs::path dir = fs::path(cfg.out_dir) / "traj";
  if (fs::exists(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".jsonl") out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw std::runtime_error("no trajectory files given and none under " + dir.string());
  return out;
}

// Offsets of consecutive ground-trace segments, same-anchor returns included.
std::vector<Site> return_offsets(const Path& gamma, const Torus& torus) {
  std::vector<Site> out;
  for (std::size_t k = 1; k < gamma.segments.size(); ++k)
    out.push_back(torus.displacement(gamma.segments[k - 1].state.anchor, gamma.segments[k].state.anchor));
  return out;
}

}  // namespace

std::string RunManifest::to_json() const {
  nlohmann::json j{{"id", id},
                   {"subcommand", subcommand},
                   {"params", params_json(params)},
                   {"seed", seed},
                   {"code_version", code_version()},
                   {"table_hash", table_hash},
                   {"outputs", outputs},
                   {"wall_seconds", wall_seconds}};
  return j.dump();
}

std::string manifest_id(const std::string& subcommand, const SimulationParams& p, std::uint64_t seed,
                        const std::string& table_hash) {
  const std::string key = subcommand + "|" + fmt(p.beta) + "|" + std::to_string(p.n) + "|" + std::to_string(p.L) +
                          "|" + std::to_string(p.ell) + "|" + std::to_string(seed) + "|" + table_hash + "|" +
                          code_version();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return subcommand + "-" + buf;
}

void append_manifest(const std::string& out_dir, const RunManifest& m) {
  fs::create_directories(out_dir);
  std::ofstream f(fs::path(out_dir) / "manifests.jsonl", std::ios::app);
  if (!f) throw std::runtime_error("cannot append to the manifest log in " + out_dir);
  f << m.to_json() << '\n';
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

// ------------------------------------------------------------- solve-rates

int cmd_solve_rates(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const SimulationParams& p = cfg.params;
  const RateTable table = build_rate_table(p.n, p.L);
  RunManifest m;
  m.subcommand = "solve-rates";
  m.params = p;
  m.seed = cfg.seed;
  m.table_hash = table.hash();
  m.id = manifest_id(m.subcommand, p, 0, m.table_hash);

  const std::string table_path = cfg.table_path();
  write_file_atomic(table_path, table.to_json());

  const WalkConstants w = walk_constants(p.n, p.L);
  std::ostringstream csv;
  csv << "# manifest " << m.id << "\n";
  csv << "name,value" << (cfg.rational ? ",exact" : "") << "\n";
  std::vector<std::pair<std::string, double>> rows = {
      {"q", w.q}, {"r_plus", w.r_plus}, {"r_minus", w.r_minus}, {"A", w.A}, {"A03", w.A03},
      {"A12", w.A12}, {"A_e1", w.A_e1}, {"A_e2", w.A_e2}};
  for (int j = 0; j < 4; ++j) rows.push_back({"A_side" + std::to_string(j), w.A_side[j]});
  for (std::size_t k = 0; k < w.r0.size(); ++k) rows.push_back({"r0_" + std::to_string(k), w.r0[k]});
  std::vector<double> exact;
  if (cfg.rational) {
    const WalkConstantsExact e = walk_constants_exact(p.n, p.L);
    exact = {to_double(e.q), to_double(e.r_plus), to_double(e.r_minus), to_double(e.A), to_double(e.A03),
             to_double(e.A12), to_double(e.A_e1), to_double(e.A_e2)};
    for (int j = 0; j < 4; ++j) exact.push_back(to_double(e.A_side[j]));
    for (const auto& r : e.r0) exact.push_back(to_double(r));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv << rows[i].first << ',' << fmt(rows[i].second);
    if (cfg.rational) {
      csv << ',' << fmt(exact[i]);
      worst = std::max(worst, std::abs(exact[i] - rows[i].second));
    }
    csv << '\n';
  }
  const std::string stem_path = cfg.out_dir + "/rates_n" + std::to_string(p.n) + "_L" + std::to_string(p.L);
  write_file_atomic(stem_path + "_constants.csv", csv.str());

  PlateauExplorer explorer(p.n, p.L);
  RateAudit audit = audit_rate_table(table, explorer, cfg.rational);
  const PathAudit path = sliding_path_audit(table);
  const double first = std::min({path.head[0], path.tail[0]});
  audit.checks.push_back({"path: square to first well >= 1/6", first >= 1.0 / 6.0, first, 1.0 / 6.0, ""});
  const double mid = std::min({path.head[1], path.head[2], path.tail[1], path.tail[2]});
  audit.checks.push_back({"path: wells along the side >= 1", mid >= 1.0, mid, 1.0, ""});
  const double into = std::min(path.head[3], path.tail[3]);
  audit.checks.push_back({"path: into the rectangles >= 1/n", into >= 1.0 / p.n, into, 1.0 / p.n, ""});
  audit.checks.push_back({"path: rectangles connect both ends", path.reachable && path.middle_bottleneck >= 1.0 / p.n,
                          path.middle_bottleneck, 1.0 / p.n, ""});
  if (cfg.rational)
    audit.checks.push_back({"walk constants match the rational recomputation", worst <= 1e-12, worst, 1e-12, ""});

  nlohmann::json aj;
  aj["manifest"] = m.id;
  aj["pass"] = audit.pass();
  for (const AuditCheck& c : audit.checks)
    aj["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"bound", c.bound}, {"detail", c.detail}});
  write_file_atomic(stem_path + "_audit.json", aj.dump(2) + "\n");

  m.outputs = {table_path, stem_path + "_constants.csv", stem_path + "_audit.json"};
  m.wall_seconds = seconds_since(t0);
  append_manifest(cfg.out_dir, m);
  for (const AuditCheck& c : audit.checks)
    if (!c.pass) log << "audit FAILED: " << c.name << " (value " << c.value << ", bound " << c.bound << ")\n";
  log << "rate table " << table.hash() << " with " << table.num_classes() << " classes written to " << table_path
      << "; audit " << (audit.pass() ? "passed" : "FAILED") << "\n";
  return audit.pass() ? 0 : 1;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const SimulationParams& p = cfg.params;
  const bool zeta = cfg.engine == "zeta-hat";
  std::optional<RateTable> table;
  if (zeta || !(cfg.horizon_time > 0.0)) table = load_table(cfg);
  // A horizon in units of ell^2 theta is measured on the ground clock. The
  // run length divides it by the stationary ground fraction, with a margin of
  // 1.5 so that almost every replica reaches it.
  double horizon = cfg.horizon_time;
  if (!(horizon > 0.0)) {
    const QuotientChain q(*table, p.beta);
    const GroundCapacity g = ground_capacity(q);
    const double ground_fraction = q.stationary()[FamilyCatalog::gamma_class()];
    horizon = 1.5 * cfg.horizon * double(p.ell) * p.ell / g.inverse_theta / ground_fraction;
  }
  RunManifest m;
  m.subcommand = "simulate";
  m.params = p;
  m.seed = cfg.seed;
  m.table_hash = table ? table->hash() : "";
  m.id = manifest_id(m.subcommand + "-" + cfg.engine, p, cfg.seed, m.table_hash);

  std::optional<TableChain> chain;
  if (zeta) chain.emplace(*table, p.beta);
  const Configuration start = Configuration::from_sites(make_torus(p.L), square_sites(p.n));
  StopCondition stop;
  stop.horizon = horizon;
  stop.max_events = cfg.max_events;

  std::vector<std::string> files(cfg.replicas);
  run_replicas_parallel(cfg.replicas, cfg.threads, [&](std::uint64_t i) {
    const std::string path = cfg.out_dir + "/traj/" + cfg.engine + "_s" + std::to_string(cfg.seed) + "_r" +
                             std::to_string(i) + ".jsonl";
    files[i] = path;
    if (fs::exists(path)) {
      try {
        const Trajectory old = load_trajectory(path);
        if (old.manifest == m.id && old.stream == i) return;  // resumed run
      } catch (const std::exception&) {
      }
    }
    Trajectory t = zeta ? simulate_zeta_hat(*chain, {FamilyCatalog::gamma_class(), {0, 0}}, stop, cfg.seed, i)
                        : simulate_eta(start, p, stop, cfg.seed, i);
    t.params = p;
    t.manifest = m.id;
    write_file_atomic(path, trajectory_to_jsonl(t));
  });
  m.outputs = files;
  m.wall_seconds = seconds_since(t0);
  append_manifest(cfg.out_dir, m);
  log << cfg.replicas << " " << cfg.engine << " trajectories over time " << horizon << " in " << cfg.out_dir
      << "/traj\n";
  return 0;
}

// ------------------------------------------------------------------- trace

int cmd_trace(const ExperimentConfig& cfg, std::ostream& log) {
  const auto inputs = trajectory_inputs(cfg);
  for (const auto& path : inputs) {
    const Trajectory t = load_trajectory(path);
    const Path labels = labelled_path(t);
    const Path gamma = trace(labels, in_gamma);
    const auto torus = make_torus(t.params.L);
    const DisplacementPath d = displacement_path(gamma, torus.get());
    std::ostringstream os;
    os << "# source " << path << " manifest " << t.manifest << "\n";
    os << "ground_time,x,y\n";
    for (std::size_t k = 0; k < d.times.size(); ++k) os << fmt(d.times[k]) << ',' << d.X[k].x << ',' << d.X[k].y << '\n';
    write_file_atomic(cfg.out_dir + "/trace/" + stem(path) + ".csv", os.str());
  }
  log << inputs.size() << " ground traces written to " << cfg.out_dir << "/trace\n";
  return 0;
}

// ------------------------------------------------------------------ report

int cmd_report(const ExperimentConfig& cfg, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto inputs = trajectory_inputs(cfg);
  std::vector<Trajectory> trs;
  for (const auto& path : inputs) trs.push_back(load_trajectory(path));
  const Trajectory& ref = trs.front();
  for (std::size_t i = 1; i < trs.size(); ++i) {
    const Trajectory& t = trs[i];
    if (t.kind != ref.kind || t.params.beta != ref.params.beta || t.params.n != ref.params.n ||
        t.params.L != ref.params.L || t.params.ell != ref.params.ell || t.table_hash != ref.table_hash)
      throw std::invalid_argument("report: mixed-parameter inputs (" + inputs[0] + " vs " + inputs[i] + ")");
  }
  const SimulationParams& p = ref.params;
  const auto torus = make_torus(p.L);

  ScalingReport r;
  r.params = p;
  r.engine = chain_kind_name(ref.kind);
  r.replicas = trs.size();
  for (std::size_t i = 0; i < trs.size(); ++i)
    r.inputs.push_back(inputs[i] + (trs[i].manifest.empty() ? "" : " manifest " + trs[i].manifest));

  ExperimentConfig tcfg = cfg;
  tcfg.params = p;
  std::optional<RateTable> table;
  if (fs::exists(tcfg.table_path())) table = load_table(tcfg);

  std::vector<Path> gammas;
  for (const auto& t : trs) gammas.push_back(trace(labelled_path(t), in_gamma));
  r.theta = estimate_theta(gammas, torus.get());
  std::vector<double> tail_exact;
  if (table) {
    const QuotientChain q(*table, p.beta);
    r.theta_exact = 1.0 / ground_capacity(q).inverse_theta;
    tail_exact = ground_return_tail(q);
  }
  const double theta = r.theta_exact > 0.0 ? r.theta_exact : r.theta.theta_hat;

  // Quadratic variation and jumps on the grid, averaged over replicas.
  // Replicas whose ground clock ends before a grid point are left out there.
  std::vector<std::vector<QvPoint>> qv;
  std::vector<double> jumps, reach;
  std::vector<std::size_t> qv_count;
  const double horizon = *std::max_element(cfg.qv_grid.begin(), cfg.qv_grid.end());
  const double unit = double(p.ell) * p.ell * theta;
  for (const Path& g : gammas) {
    const DisplacementPath d = displacement_path(g, torus.get());
    qv.push_back(quadratic_variation(d, p.ell, theta, cfg.qv_grid));
    jumps.push_back(max_jump(d, p.ell, theta, horizon));
    reach.push_back(d.end_time / unit);
  }
  const auto short_runs = std::count_if(reach.begin(), reach.end(), [&](double r) { return r < horizon; });
  if (10 * short_runs > long(trs.size()))
    r.failures.push_back("qv: " + std::to_string(short_runs) + " replicas end before the last grid point");
  for (std::size_t k = 0; k < cfg.qv_grid.size(); ++k) {
    std::vector<double> a, b, c;
    for (std::size_t i = 0; i < qv.size(); ++i) {
      if (reach[i] < cfg.qv_grid[k]) continue;
      const auto& row = qv[i];
      a.push_back(row[k].z11);
      b.push_back(row[k].z22);
      c.push_back(row[k].z12);
    }
    const Estimate ea = mean_estimate(a), eb = mean_estimate(b), ec = mean_estimate(c);
    r.qv.push_back({cfg.qv_grid[k], ea.value, eb.value, ec.value});
    r.qv_se.push_back({cfg.qv_grid[k], ea.se, eb.se, ec.se});
    qv_count.push_back(a.size());
  }
  r.max_jump = mean_estimate(jumps);

  if (ref.kind == ChainKind::Eta) {
    std::vector<double> xi, gm;
    std::uint64_t exits = 0;
    for (const auto& t : trs) {
      const Confinement c = confinement_fractions(t);
      xi.push_back(c.outside_xi_star);
      gm.push_back(c.outside_gamma);
      exits += c.exited;
    }
    r.outside_xi_star = mean_estimate(xi);
    r.outside_gamma = mean_estimate(gm);
    r.exit_probability = proportion_estimate(exits, trs.size());
  }

  // Long-jump tail over all returns to the ground states.
  std::map<int, std::uint64_t> counts;
  std::uint64_t returns = 0;
  for (const Path& g : gammas)
    for (const Site& x : return_offsets(g, *torus)) {
      ++counts[sum_norm(x)];
      ++returns;
    }
  const int kmax = 2 * p.L;
  for (int k = 0; k <= kmax; ++k) {
    const Estimate e = proportion_estimate(counts[k], returns);
    TailRow row{k, e.value, e.se, k < int(tail_exact.size()) ? tail_exact[k] : -1.0};
    if (returns == 0 && row.exact < 0.0) continue;
    r.tail.push_back(row);
  }
  std::vector<double> ks, logs;
  for (const TailRow& row : r.tail)
    if (row.k >= 5 && row.probability > 0.0) {
      ks.push_back(row.k);
      logs.push_back(std::log(row.probability));
    }
  if (ks.size() >= 2) r.tail_decay = fit_line(ks, logs).slope;
  for (std::size_t i = 1; i < r.tail.size(); ++i)
    if (r.tail[i].k > 5 && r.tail[i].probability > r.tail[i - 1].probability + cfg.sigma * std::hypot(r.tail[i].se, r.tail[i - 1].se))
      r.tail_monotone = false;
  r.budget = error_budget(p, theta);

  // Tolerance checks.
  if (r.theta.insufficient) r.failures.push_back("theta: fewer than 10 returns in some trajectory");
  if (!r.theta.consistent(cfg.sigma)) r.failures.push_back("theta: the two estimators disagree");
  if (!r.tail_monotone) r.failures.push_back("tail: increases beyond noise after k = 5");
  // Sample standard errors vanish when all replicas agree, so each is floored
  // at (t/2)/sqrt(replicas), the spread of a realized variation of mean t/2.
  for (std::size_t k = 0; k < r.qv.size(); ++k) {
    const double t = r.qv[k].t;
    const double floor = t / 2 / std::sqrt(double(std::max<std::size_t>(qv_count[k], 1)));
    auto tol = [&](double se) { return cfg.sigma * std::max(se, floor); };
    if (std::abs(r.qv[k].z11 - t / 2) > tol(r.qv_se[k].z11) || std::abs(r.qv[k].z22 - t / 2) > tol(r.qv_se[k].z22))
      r.failures.push_back("qv: diagonal at t = " + fmt(t) + " is off t/2");
    if (std::abs(r.qv[k].z12) > tol(r.qv_se[k].z12))
      r.failures.push_back("qv: cross term at t = " + fmt(t) + " is off 0");
  }
  if (!tail_exact.empty() && returns > 0)
    for (const TailRow& row : r.tail)
      if (row.k <= 4 && std::abs(row.probability - row.exact) >
                            cfg.sigma * std::sqrt(row.exact * (1 - row.exact) / double(returns)) + 1e-12)
        r.failures.push_back("tail: k = " + std::to_string(row.k) + " is off the exact law");

  const std::string base = cfg.out_dir + "/report";
  write_file_atomic(base + ".json", r.to_json());
  write_file_atomic(base + "_qv.csv", r.qv_csv());
  write_file_atomic(base + "_tail.csv", r.tail_csv());
  if (ref.kind == ChainKind::Eta) {
    std::ostringstream os;
    os << "beta,outside_xi_star,outside_gamma,exit_probability\n"
       << fmt(p.beta) << ',' << fmt(r.outside_xi_star.value) << ',' << fmt(r.outside_gamma.value) << ','
       << fmt(r.exit_probability.value) << '\n';
    write_file_atomic(base + "_confinement.csv", os.str());
  }
  RunManifest m;
  m.subcommand = "report";
  m.params = p;
  m.seed = ref.seed;
  m.table_hash = ref.table_hash;
  m.id = manifest_id(m.subcommand, p, ref.seed, ref.table_hash);
  m.outputs = {base + ".json", base + "_qv.csv", base + "_tail.csv"};
  m.wall_seconds = seconds_since(t0);
  append_manifest(cfg.out_dir, m);
  for (const auto& f : r.failures) log << "check FAILED: " << f << "\n";
  log << "report over " << trs.size() << " trajectories written to " << base << ".json\n";
  return r.failures.empty() ? 0 : 1;
}

// ---------------------------------------------------------------- capacity

namespace {

nlohmann::json capacity_summary(const RateTable& table, const SimulationParams& p) {
  const QuotientChain q(table, p.beta);
  const GroundCapacity g = ground_capacity(q);
  const GammaRho gr = gamma_rho_exact(table);
  const MeanHitting mh = mean_hitting_bound(q);
  const double scale = std::exp(2.0 * p.beta);
  nlohmann::json j;
  j["params"] = params_json(p);
  j["table_hash"] = table.hash();
  j["capacity"] = {{"normalized", g.normalized},
                   {"normalized_times_e2beta", g.normalized * scale},
                   {"return_probability", g.return_probability},
                   {"normalization", "divided by the measure of the square"}};
  j["inverse_theta"] = {{"value", g.inverse_theta},
                        {"times_e2beta", g.inverse_theta * scale},
                        {"lower", g.lower},
                        {"upper", g.upper},
                        {"within", g.lower <= g.inverse_theta && g.inverse_theta <= g.upper}};
  j["gamma_rho"] = {{"rho", gr.rho}, {"lying_escape", gr.lying_escape}, {"gamma", gr.gamma}, {"leak", gr.leak}};
  j["mean_hitting"] = {{"worst", mh.worst}, {"from_first", mh.from_first}, {"ratio", mh.ratio}};
  return j;
}

}  // namespace

int cmd_capacity(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const RateTable table = load_table(cfg);
  nlohmann::json j = capacity_summary(table, cfg.params);
  RunManifest m;
  m.subcommand = "capacity";
  m.params = cfg.params;
  m.table_hash = table.hash();
  m.id = manifest_id(m.subcommand, cfg.params, 0, m.table_hash);
  j["manifest"] = m.id;
  const std::string path = cfg.out_dir + "/capacity_n" + std::to_string(cfg.params.n) + "_L" +
                           std::to_string(cfg.params.L) + "_b" + fmt(cfg.params.beta) + ".json";
  write_file_atomic(path, j.dump(2) + "\n");
  m.outputs = {path};
  m.wall_seconds = seconds_since(t0);
  append_manifest(cfg.out_dir, m);
  const bool ok = j["inverse_theta"]["within"].get<bool>();
  log << "capacity written to " << path << (ok ? "" : "; the diffusion rate is outside its bounds") << "\n";
  return ok ? 0 : 1;
}

// ------------------------------------------------------------------- sweep

int cmd_sweep(const ExperimentConfig& cfg, std::ostream& log) {
  const auto points = cfg.grid();  // validated before any work
  const auto t0 = std::chrono::steady_clock::now();
  std::map<std::pair<int, int>, RateTable> tables;
  std::ostringstream csv;
  csv << "beta,n,L,ell,capacity_e2beta,inverse_theta_e2beta,gamma,rho,mean_hitting_ratio";
  for (const auto& c : error_budget(points.front(), 1.0).regime) csv << ',' << c.name;
  csv << '\n';
  bool ok = true;
  for (const SimulationParams& p : points) {
    auto key = std::make_pair(p.n, p.L);
    auto it = tables.find(key);
    if (it == tables.end()) {
      ExperimentConfig c = cfg;
      c.params = p;
      c.table.clear();
      RateTable t = fs::exists(c.table_path()) ? load_table(c) : build_rate_table(p.n, p.L);
      if (!fs::exists(c.table_path())) write_file_atomic(c.table_path(), t.to_json());
      it = tables.emplace(key, std::move(t)).first;
    }
    const nlohmann::json s = capacity_summary(it->second, p);
    ok = ok && s["inverse_theta"]["within"].get<bool>();
    const double inv_theta = s["inverse_theta"]["value"].get<double>();
    csv << fmt(p.beta) << ',' << p.n << ',' << p.L << ',' << p.ell << ','
        << fmt(s["capacity"]["normalized_times_e2beta"].get<double>()) << ','
        << fmt(s["inverse_theta"]["times_e2beta"].get<double>()) << ',' << fmt(s["gamma_rho"]["gamma"].get<double>())
        << ',' << fmt(s["gamma_rho"]["rho"].get<double>()) << ',' << fmt(s["mean_hitting"]["ratio"].get<double>());
    for (const auto& c : error_budget(p, 1.0 / inv_theta).regime) csv << ',' << fmt(c.value);
    csv << '\n';
    log << "point beta=" << p.beta << " n=" << p.n << " L=" << p.L << " ell=" << p.ell << " done\n";
  }
  RunManifest m;
  m.subcommand = "sweep";
  m.params = points.front();
  m.seed = cfg.seed;
  m.id = manifest_id(m.subcommand, m.params, cfg.seed, "");
  const std::string path = cfg.out_dir + "/sweep.csv";
  write_file_atomic(path, "# manifest " + m.id + "\n" + csv.str());
  m.outputs = {path};
  m.wall_seconds = seconds_since(t0);
  append_manifest(cfg.out_dir, m);
  log << points.size() << " sweep points written to " << path << "\n";
  return ok ? 0 : 1;
}

}  // namespace kawasaki
