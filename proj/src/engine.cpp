#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "kawasaki/kmc.hpp"

namespace kawasaki {

const char* chain_kind_name(ChainKind k) { return k == ChainKind::Eta ? "eta" : "zeta-hat"; }

const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::Horizon: return "horizon";
    case StopReason::Hit: return "hit";
    case StopReason::EventCap: return "event-cap";
    case StopReason::Absorbed: return "absorbed";
  }
  return "?";
}

std::uint64_t class_hash(const ClassAt& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::int64_t v : {std::int64_t(c.cls), std::int64_t(c.anchor.x), std::int64_t(c.anchor.y)}) {
    for (int b = 0; b < 8; ++b) {
      h ^= std::uint64_t(v >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

namespace {

// Event times stay strictly increasing even when an increment is below the
// resolution of the clock.
double stamp(const std::vector<Event>& events, double t) {
  if (!events.empty() && t <= events.back().time) return std::nextafter(events.back().time, INFINITY);
  return t;
}

void check_checkpoint(const Trajectory& t, std::size_t& next, std::size_t applied, std::uint64_t hash) {
  while (next < t.checkpoints.size() && t.checkpoints[next].event < applied) ++next;
  if (next < t.checkpoints.size() && t.checkpoints[next].event == applied) {
    if (t.checkpoints[next].hash != hash)
      throw std::runtime_error("trajectory: checkpoint hash mismatch after event " + std::to_string(applied));
    ++next;
  }
}

}  // namespace

Configuration replay_eta(const Trajectory& t, std::size_t upto) {
  if (t.kind != ChainKind::Eta) throw std::invalid_argument("replay_eta: not a lattice-gas trajectory");
  Configuration c = t.initial;
  const Torus& torus = c.geometry();
  const std::size_t m = std::min(upto, t.events.size());
  std::size_t next = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const Event& e = t.events[i];
    if (e.from < 0 || e.to < 0 || e.from >= torus.num_sites() || e.to >= torus.num_sites() ||
        !torus.adjacent(e.from, e.to) || !c.occupied(e.from) || c.occupied(e.to))
      throw std::runtime_error("replay_eta: inadmissible event " + std::to_string(i));
    c.set(e.from, false);
    c.set(e.to, true);
    check_checkpoint(t, next, i + 1, c.hash());
  }
  return c;
}

ClassAt replay_class(const Trajectory& t, std::size_t upto) {
  if (t.kind != ChainKind::ZetaHat) throw std::invalid_argument("replay_class: not a table-driven trajectory");
  ClassAt c = t.initial_class;
  const std::size_t m = std::min(upto, t.events.size());
  std::size_t next = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const Event& e = t.events[i];
    if (e.from != c.cls) throw std::runtime_error("replay_class: event " + std::to_string(i) + " leaves a wrong class");
    c.cls = e.to;
    c.anchor = c.anchor + e.shift;
    check_checkpoint(t, next, i + 1, class_hash(c));
  }
  return c;
}

void verify_checkpoints(const Trajectory& t) {
  for (std::size_t i = 1; i < t.events.size(); ++i)
    if (!(t.events[i].time > t.events[i - 1].time))
      throw std::runtime_error("trajectory: event times are not increasing at " + std::to_string(i));
  if (t.kind == ChainKind::Eta)
    replay_eta(t);
  else
    replay_class(t);
}

Trajectory simulate_eta(const Configuration& start, const SimulationParams& params, const StopCondition& stop,
                        std::uint64_t seed, std::uint64_t stream) {
  params.validate();
  if (start.geometry().half_side() != params.L)
    throw std::invalid_argument("simulate_eta: start configuration lives on another torus");
  Trajectory tr;
  tr.kind = ChainKind::Eta;
  tr.params = params;
  tr.initial = start;
  tr.seed = seed;
  tr.stream = stream;

  MoveSampler sampler(start, params.beta);
  Rng rng(seed, stream);
  KahanClock clock;
  if (!stop.return_mode && stop.hit && stop.hit(sampler.config(), sampler.energy())) {
    tr.stop = StopReason::Hit;
    return tr;
  }
  for (;;) {
    if (tr.events.size() >= stop.max_events) {
      tr.stop = StopReason::EventCap;
      tr.end_time = clock.value();
      break;
    }
    const double total = sampler.total_rate();
    if (!(total > 0.0)) {
      const bool finite = std::isfinite(stop.horizon);
      tr.stop = finite ? StopReason::Horizon : StopReason::Absorbed;
      tr.end_time = finite ? stop.horizon : clock.value();
      break;
    }
    const double dt = rng.exponential(total);
    if (clock.value() + dt >= stop.horizon) {
      tr.stop = StopReason::Horizon;
      tr.end_time = stop.horizon;
      break;
    }
    clock.add(dt);
    const Move m = sampler.sample(rng);
    sampler.apply(m);
    tr.events.push_back({stamp(tr.events, clock.value()), m.from, m.to, {}});
    if (tr.events.size() % kCheckpointInterval == 0) tr.checkpoints.push_back({tr.events.size(), sampler.config().hash()});
    if (stop.hit && stop.hit(sampler.config(), sampler.energy())) {
      tr.stop = StopReason::Hit;
      tr.end_time = tr.events.back().time;
      break;
    }
  }
  return tr;
}

double ReturnStats::frequency(const ClassAt& c) const {
  auto it = landing.find(c);
  return it == landing.end() || replicas == 0 ? 0.0 : double(it->second) / double(replicas);
}

namespace {

struct ReplicaOutcome {
  bool hit = false;
  ClassAt landing;
  double time = 0.0;
};

template <class Fn>
void run_replicas(std::uint64_t replicas, int threads, Fn&& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::uint64_t workers = std::min<std::uint64_t>(threads > 0 ? unsigned(threads) : hw, std::max<std::uint64_t>(replicas, 1));
  if (workers <= 1) {
    for (std::uint64_t i = 0; i < replicas; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::uint64_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::uint64_t i = w; i < replicas; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

ReturnStats summarize(const std::vector<ReplicaOutcome>& out) {
  ReturnStats s;
  s.replicas = out.size();
  double sum = 0.0, sum2 = 0.0;
  std::uint64_t hits = 0;
  for (const auto& o : out) {
    if (!o.hit) {
      ++s.censored;
      continue;
    }
    ++s.landing[o.landing];
    ++hits;
    sum += o.time;
    sum2 += o.time * o.time;
  }
  if (hits > 0) {
    s.mean_time = sum / double(hits);
    if (hits > 1) {
      const double var = std::max(0.0, (sum2 - double(hits) * s.mean_time * s.mean_time) / double(hits - 1));
      s.se_time = std::sqrt(var / double(hits));
    }
  }
  return s;
}

}  // namespace

void run_replicas_parallel(std::uint64_t replicas, int threads, const std::function<void(std::uint64_t)>& fn) {
  run_replicas(replicas, threads, fn);
}

ReturnStats eta_return_stats(const Configuration& start, const SimulationParams& params,
                             const std::function<bool(const Label&)>& target, std::uint64_t replicas,
                             std::uint64_t seed, std::uint64_t stream0, std::uint64_t max_events, int threads) {
  if (replicas < 1) throw std::invalid_argument("eta_return_stats: replicas must be at least 1");
  const auto catalog = FamilyCatalog::get(params.n);
  const long shell1 = params.ground_energy() + 1;
  std::vector<ReplicaOutcome> out(replicas);
  run_replicas(replicas, threads, [&](std::uint64_t i) {
    StopCondition stop;
    stop.return_mode = true;
    stop.max_events = max_events;
    Label last;
    stop.hit = [&](const Configuration& c, long energy) {
      last = energy <= shell1 ? label_configuration(c, energy, *catalog) : Label{};
      return target(last);
    };
    const Trajectory t = simulate_eta(start, params, stop, seed, stream0 + i);
    if (t.stop == StopReason::Hit) out[i] = {true, {last.cls, last.anchor}, t.end_time};
  });
  return summarize(out);
}

ReturnStats zeta_hat_return_stats(const TableChain& chain, const ClassAt& start,
                                  const std::function<bool(const ClassAt&)>& target, std::uint64_t replicas,
                                  std::uint64_t seed, std::uint64_t stream0, std::uint64_t max_events) {
  if (replicas < 1) throw std::invalid_argument("zeta_hat_return_stats: replicas must be at least 1");
  std::vector<ReplicaOutcome> out(replicas);
  for (std::uint64_t i = 0; i < replicas; ++i) {
    Rng rng(seed, stream0 + i);
    ClassAt cur = start;
    double t = 0.0;
    std::uint64_t k = 0;
    for (; k < max_events; ++k) {
      const double rate = chain.exit_rate(cur.cls);
      if (!(rate > 0.0)) break;
      t += rng.exponential(rate);
      const RateEntry& e = chain.sample(cur.cls, rng);
      cur = {e.target, cur.anchor + e.offset};
      if (target(cur)) {
        out[i] = {true, cur, t};
        break;
      }
    }
  }
  return summarize(out);
}

}  // namespace kawasaki
