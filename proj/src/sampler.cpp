#include <cmath>
#include <stdexcept>

#include "kawasaki/kmc.hpp"

namespace kawasaki {

// Bond b = 2 * site + d joins the site to its +e1 (d = 0) or +e2 (d = 1)
// neighbour.

MoveSampler::MoveSampler(Configuration config, double beta) : config_(std::move(config)), beta_(beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("MoveSampler: beta must be nonnegative");
  for (int c = 0; c < 4; ++c) rate_[c] = std::exp(-beta * c);
  const Torus& t = config_.geometry();
  occ_nbrs_.resize(t.num_sites());
  for (int s = 0; s < t.num_sites(); ++s) occ_nbrs_[s] = std::uint8_t(config_.occupied_neighbors(s));
  bucket_of_.assign(t.num_bonds(), -1);
  pos_.assign(t.num_bonds(), -1);
  for (int b = 0; b < t.num_bonds(); ++b) refresh_bond(b);
  energy_ = hamiltonian(config_);
}

double MoveSampler::total_rate() const {
  double r = 0.0;
  for (int c = 0; c < 4; ++c) r += rate_[c] * double(buckets_[c].size());
  return r;
}

std::array<int, 4> MoveSampler::bucket_sizes() const {
  return {int(buckets_[0].size()), int(buckets_[1].size()), int(buckets_[2].size()), int(buckets_[3].size())};
}

Move MoveSampler::bond_move(int b) const {
  const Torus& t = config_.geometry();
  const int s = b >> 1;
  const int u = t.neighbors(s)[b & 1];
  Move m;
  if (config_.occupied(s)) {
    m.from = s;
    m.to = u;
  } else {
    m.from = u;
    m.to = s;
  }
  m.delta_h = int(occ_nbrs_[m.from]) - (int(occ_nbrs_[m.to]) - 1);
  return m;
}

void MoveSampler::refresh_bond(int b) {
  const Torus& t = config_.geometry();
  const int s = b >> 1;
  const int u = t.neighbors(s)[b & 1];
  int want = -1;
  if (config_.occupied(s) != config_.occupied(u)) {
    const int dh = bond_move(b).delta_h;
    want = dh > 0 ? dh : 0;
  }
  const int have = bucket_of_[b];
  if (want == have) return;
  if (have >= 0) {
    auto& v = buckets_[have];
    const int p = pos_[b];
    v[p] = v.back();
    pos_[v[p]] = p;
    v.pop_back();
  }
  if (want >= 0) {
    pos_[b] = int(buckets_[want].size());
    buckets_[want].push_back(b);
  }
  bucket_of_[b] = want;
}

void MoveSampler::refresh_site(int s) {
  const Torus& t = config_.geometry();
  const auto& nb = t.neighbors(s);
  refresh_bond(2 * s);
  refresh_bond(2 * s + 1);
  refresh_bond(2 * nb[2]);
  refresh_bond(2 * nb[3] + 1);
}

Move MoveSampler::sample(Rng& rng) const {
  const double total = total_rate();
  if (!(total > 0.0)) throw std::logic_error("MoveSampler::sample: no active move");
  double u = rng.uniform() * total;
  int c = 0;
  for (; c < 3; ++c) {
    const double w = rate_[c] * double(buckets_[c].size());
    if (u < w) break;
    u -= w;
  }
  while (buckets_[c].empty()) --c;  // rounding at the top end
  const auto& v = buckets_[c];
  return bond_move(v[rng.below(v.size())]);
}

void MoveSampler::apply(const Move& m) { apply(m.from, m.to); }

void MoveSampler::apply(int from, int to) {
  const Torus& t = config_.geometry();
  if (!t.adjacent(from, to) || !config_.occupied(from) || config_.occupied(to))
    throw std::invalid_argument("MoveSampler::apply: not an admissible particle jump");
  energy_ += int(occ_nbrs_[from]) - (int(occ_nbrs_[to]) - 1);
  config_.set(from, false);
  config_.set(to, true);
  for (int u : t.neighbors(from)) --occ_nbrs_[u];
  for (int u : t.neighbors(to)) ++occ_nbrs_[u];
  // Costs depend on the occupations and neighbour counts of both ends, which
  // only changed on the closed neighbourhoods of the two sites.
  refresh_site(from);
  refresh_site(to);
  for (int u : t.neighbors(from))
    if (u != to) refresh_site(u);
  for (int u : t.neighbors(to))
    if (u != from) refresh_site(u);
}

std::vector<Move> MoveSampler::active_moves() const {
  std::vector<Move> out;
  for (int c = 0; c < 4; ++c)
    for (int b : buckets_[c]) out.push_back(bond_move(b));
  return out;
}

bool MoveSampler::consistent() const {
  const Torus& t = config_.geometry();
  for (int s = 0; s < t.num_sites(); ++s)
    if (occ_nbrs_[s] != config_.occupied_neighbors(s)) return false;
  if (energy_ != hamiltonian(config_)) return false;
  std::size_t active = 0;
  for (int b = 0; b < t.num_bonds(); ++b) {
    const int s = b >> 1;
    const int u = t.neighbors(s)[b & 1];
    if (config_.occupied(s) == config_.occupied(u)) {
      if (bucket_of_[b] != -1) return false;
      continue;
    }
    ++active;
    const Move m = bond_move(b);
    if (m.delta_h != delta_h(config_, m.from, m.to)) return false;
    const int c = m.delta_h > 0 ? m.delta_h : 0;
    if (bucket_of_[b] != c || buckets_[c][pos_[b]] != b) return false;
  }
  std::size_t stored = 0;
  for (const auto& v : buckets_) stored += v.size();
  return stored == active;
}

}  // namespace kawasaki
