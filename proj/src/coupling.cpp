#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "kawasaki/kmc.hpp"

namespace kawasaki {

namespace {

using JumpKey = std::pair<int, Site>;

std::map<JumpKey, double> row_rates(const TableChain& c, int cls) {
  std::map<JumpKey, double> out;
  const RateTable& t = c.table();
  if (cls < 0 || cls >= t.num_classes() || !t.has_row(cls)) return out;
  const double pre = std::exp(-c.beta() * RateTable::prefactor_power(cls));
  for (const RateEntry& e : t.row(cls))
    if (e.value > 0.0) out[{e.target, e.offset}] += pre * e.value;
  return out;
}

struct Channel {
  JumpKey key;
  double shared = 0.0;
  double only_a = 0.0;
  double only_b = 0.0;
};

std::vector<Channel> channels(const TableChain& a, const TableChain& b, int cls) {
  const auto ra = row_rates(a, cls);
  const auto rb = row_rates(b, cls);
  std::map<JumpKey, Channel> m;
  for (const auto& [k, v] : ra) m[k].only_a = v;
  for (const auto& [k, v] : rb) m[k].only_b = v;
  std::vector<Channel> out;
  for (auto& [k, c] : m) {
    c.key = k;
    c.shared = std::min(c.only_a, c.only_b);
    c.only_a -= c.shared;
    c.only_b -= c.shared;
    out.push_back(c);
  }
  return out;
}

void advance_alone(const TableChain& chain, ClassAt cur, double t, double horizon, Rng& rng, Path& path) {
  for (;;) {
    const double rate = chain.exit_rate(cur.cls);
    const double dt = rate > 0.0 ? rng.exponential(rate) : INFINITY;
    if (t + dt >= horizon) {
      path.segments.back().duration += horizon - t;
      return;
    }
    path.segments.back().duration += dt;
    t += dt;
    const RateEntry& e = chain.sample(cur.cls, rng);
    cur = {e.target, cur.anchor + e.offset};
    path.segments.push_back({Label{cur.cls, cur.anchor, 0}, 0.0});
  }
}

}  // namespace

double rate_discrepancy(const TableChain& a, const TableChain& b, int cls) {
  double s = 0.0;
  for (const Channel& c : channels(a, b, cls)) s += c.only_a + c.only_b;
  return s;
}

CoupledRun couple_tables(const TableChain& a, const TableChain& b, const ClassAt& start, double horizon,
                         std::uint64_t seed, std::uint64_t stream) {
  if (a.table().num_classes() != b.table().num_classes())
    throw std::invalid_argument("couple_tables: the tables index different class sets");
  if (!(horizon > 0.0)) throw std::invalid_argument("couple_tables: horizon must be positive");
  CoupledRun run;
  run.horizon = horizon;
  Rng rng(seed, stream);
  std::map<int, std::vector<Channel>> cache;
  ClassAt cur = start;
  double t = 0.0;
  run.first.segments.push_back({Label{cur.cls, cur.anchor, 0}, 0.0});
  run.second.segments.push_back({Label{cur.cls, cur.anchor, 0}, 0.0});
  for (;;) {
    auto it = cache.find(cur.cls);
    if (it == cache.end()) it = cache.emplace(cur.cls, channels(a, b, cur.cls)).first;
    const auto& ch = it->second;
    double total = 0.0, residual = 0.0;
    for (const Channel& c : ch) {
      total += c.shared + c.only_a + c.only_b;
      residual += c.only_a + c.only_b;
    }
    run.alpha = std::max(run.alpha, residual);
    const double dt = total > 0.0 ? rng.exponential(total) : INFINITY;
    if (t + dt >= horizon) {
      run.first.segments.back().duration += horizon - t;
      run.second.segments.back().duration += horizon - t;
      return run;
    }
    t += dt;
    run.first.segments.back().duration += dt;
    run.second.segments.back().duration += dt;
    double u = rng.uniform() * total;
    const Channel* pick = &ch.back();
    int kind = 0;  // 0 shared, 1 first only, 2 second only
    for (const Channel& c : ch) {
      if (u < c.shared) { pick = &c; kind = 0; break; }
      u -= c.shared;
      if (u < c.only_a) { pick = &c; kind = 1; break; }
      u -= c.only_a;
      if (u < c.only_b) { pick = &c; kind = 2; break; }
      u -= c.only_b;
    }
    const ClassAt next{pick->key.first, cur.anchor + pick->key.second};
    if (kind == 0) {
      cur = next;
      run.first.segments.push_back({Label{cur.cls, cur.anchor, 0}, 0.0});
      run.second.segments.push_back({Label{cur.cls, cur.anchor, 0}, 0.0});
      continue;
    }
    // Separation: each chain continues on its own.
    run.separation = t;
    Path& moved = kind == 1 ? run.first : run.second;
    Path& stayed = kind == 1 ? run.second : run.first;
    moved.segments.push_back({Label{next.cls, next.anchor, 0}, 0.0});
    advance_alone(kind == 1 ? a : b, next, t, horizon, rng, moved);
    advance_alone(kind == 1 ? b : a, cur, t, horizon, rng, stayed);
    return run;
  }
}

CoupledRun couple_zeta_zetahat(const TraceRateEstimate& trace_rates, const RateTable& table, double beta,
                               const ClassAt& start, double horizon, std::uint64_t seed, std::uint64_t stream) {
  const TableChain traced(trace_rates.table, beta);
  const TableChain reference(table, beta);
  return couple_tables(traced, reference, start, horizon, seed, stream);
}

TraceRateEstimate estimate_trace_rates(const SimulationParams& params, double horizon, std::uint64_t replicas,
                                       std::uint64_t seed, std::uint64_t stream0, int threads) {
  params.validate();
  if (replicas < 1) throw std::invalid_argument("estimate_trace_rates: replicas must be at least 1");
  const auto torus = make_torus(params.L);
  const auto catalog = FamilyCatalog::get(params.n);
  const int m = catalog->num_xi_classes();
  const Configuration start = Configuration::from_sites(torus, square_sites(params.n));

  struct Counts {
    std::vector<double> time;
    std::vector<std::map<JumpKey, std::uint64_t>> jumps;
  };
  std::vector<Counts> per(replicas);
  run_replicas_parallel(replicas, threads, [&](std::uint64_t i) {
    StopCondition stop;
    stop.horizon = horizon;
    const Trajectory t = simulate_eta(start, params, stop, seed, stream0 + i);
    const Path xi = trace(labelled_path(t), in_xi);
    Counts& c = per[i];
    c.time.assign(m, 0.0);
    c.jumps.resize(m);
    for (std::size_t k = 0; k < xi.segments.size(); ++k) {
      const Label& s = xi.segments[k].state;
      c.time[s.cls] += xi.segments[k].duration;
      if (k + 1 == xi.segments.size()) continue;
      const Label& nx = xi.segments[k + 1].state;
      if (nx == s) continue;  // back to the same state after an excursion
      ++c.jumps[s.cls][{nx.cls, torus->displacement(s.anchor, nx.anchor)}];
    }
  });

  TraceRateEstimate est;
  est.table = RateTable(params.n, params.L);
  est.holding_time.assign(m, 0.0);
  est.jumps.assign(m, 0);
  std::vector<std::map<JumpKey, std::uint64_t>> total(m);
  for (const Counts& c : per)
    for (int cls = 0; cls < m; ++cls) {
      est.holding_time[cls] += c.time[cls];
      for (const auto& [k, v] : c.jumps[cls]) {
        total[cls][k] += v;
        est.jumps[cls] += v;
      }
    }
  for (int cls = 0; cls < m; ++cls) {
    if (est.holding_time[cls] <= 0.0) continue;
    const double scale = std::exp(params.beta * RateTable::prefactor_power(cls)) / est.holding_time[cls];
    std::vector<RateEntry> row;
    for (const auto& [k, v] : total[cls]) row.push_back({k.first, k.second, double(v) * scale});
    est.table.set_row(cls, std::move(row));
  }
  return est;
}

}  // namespace kawasaki
