#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kawasaki/kmc.hpp"

namespace kawasaki {

TableChain::TableChain(const RateTable& table, double beta) : table_(&table), beta_(beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("TableChain: beta must be nonnegative");
  hash_ = table.hash();
  const int m = table.num_classes();
  exit_.assign(m, 0.0);
  cumulative_.resize(m);
  for (int c = 0; c < m; ++c) {
    if (!table.has_row(c)) continue;
    const double pre = std::exp(-beta * RateTable::prefactor_power(c));
    double s = 0.0;
    for (const RateEntry& e : table.row(c)) {
      if (e.value < 0.0) throw std::invalid_argument("TableChain: negative rate in the table");
      s += e.value;
      cumulative_[c].push_back(s);
    }
    exit_[c] = pre * s;
  }
}

const RateEntry& TableChain::sample(int cls, Rng& rng) const {
  const auto& cum = cumulative_[cls];
  if (cum.empty() || !(cum.back() > 0.0)) throw std::logic_error("TableChain::sample: class has no exit");
  const double u = rng.uniform() * cum.back();
  auto it = std::upper_bound(cum.begin(), cum.end(), u);
  std::size_t k = std::min<std::size_t>(it - cum.begin(), cum.size() - 1);
  // Zero entries can never be selected.
  while (table_->row(cls)[k].value == 0.0 && k > 0) --k;
  return table_->row(cls)[k];
}

Trajectory simulate_zeta_hat(const TableChain& chain, const ClassAt& start, const StopCondition& stop,
                             std::uint64_t seed, std::uint64_t stream) {
  const RateTable& table = chain.table();
  if (start.cls < 0 || start.cls >= table.num_classes())
    throw std::invalid_argument("simulate_zeta_hat: start class out of range");
  Trajectory tr;
  tr.kind = ChainKind::ZetaHat;
  tr.params.beta = chain.beta();
  tr.params.n = table.n();
  tr.params.L = table.L();
  tr.params.ell = 1;
  tr.initial_class = start;
  tr.seed = seed;
  tr.stream = stream;
  tr.table_hash = chain.table_hash();

  Rng rng(seed, stream);
  KahanClock clock;
  ClassAt cur = start;
  if (!stop.return_mode && stop.hit_class && stop.hit_class(cur)) {
    tr.stop = StopReason::Hit;
    return tr;
  }
  for (;;) {
    if (tr.events.size() >= stop.max_events) {
      tr.stop = StopReason::EventCap;
      tr.end_time = clock.value();
      break;
    }
    const double rate = chain.exit_rate(cur.cls);
    if (!(rate > 0.0)) {
      const bool finite = std::isfinite(stop.horizon);
      tr.stop = finite ? StopReason::Horizon : StopReason::Absorbed;
      tr.end_time = finite ? stop.horizon : clock.value();
      break;
    }
    const double dt = rng.exponential(rate);
    if (clock.value() + dt >= stop.horizon) {
      tr.stop = StopReason::Horizon;
      tr.end_time = stop.horizon;
      break;
    }
    clock.add(dt);
    const RateEntry& e = chain.sample(cur.cls, rng);
    double t = clock.value();
    if (!tr.events.empty() && t <= tr.events.back().time) t = std::nextafter(tr.events.back().time, INFINITY);
    tr.events.push_back({t, cur.cls, e.target, e.offset});
    cur = {e.target, cur.anchor + e.offset};
    if (tr.events.size() % kCheckpointInterval == 0) tr.checkpoints.push_back({tr.events.size(), class_hash(cur)});
    if (stop.hit_class && stop.hit_class(cur)) {
      tr.stop = StopReason::Hit;
      tr.end_time = t;
      break;
    }
  }
  return tr;
}

Trajectory simulate_zeta_hat(const RateTable& table, double beta, const ClassAt& start, const StopCondition& stop,
                             std::uint64_t seed, std::uint64_t stream) {
  const TableChain chain(table, beta);
  return simulate_zeta_hat(chain, start, stop, seed, stream);
}

}  // namespace kawasaki
