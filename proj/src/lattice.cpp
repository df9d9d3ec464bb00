#include "kawasaki/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace kawasaki {

namespace {

int floor_mod(int a, int m) {
  int r = a % m;
  return r < 0 ? r + m : r;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Torus::Torus(int half_side) : half_(half_side), side_(2 * half_side + 1) {
  if (half_side < 1) throw std::invalid_argument("torus half-side must be >= 1");
  const int n = num_sites();
  nbr_.resize(n);
  coords_.resize(n);
  for (int r = 0; r < side_; ++r) {
    for (int c = 0; c < side_; ++c) {
      const int idx = r * side_ + c;
      coords_[idx] = {c - half_, r - half_};
      nbr_[idx] = {r * side_ + (c + 1) % side_, ((r + 1) % side_) * side_ + c,
                   r * side_ + (c + side_ - 1) % side_, ((r + side_ - 1) % side_) * side_ + c};
    }
  }
}

int Torus::index(Site s) const {
  return floor_mod(s.y + half_, side_) * side_ + floor_mod(s.x + half_, side_);
}

Site Torus::wrap(Site s) const {
  return {floor_mod(s.x + half_, side_) - half_, floor_mod(s.y + half_, side_) - half_};
}

Site Torus::displacement(Site from, Site to) const { return wrap(to - from); }

bool Torus::adjacent(int a, int b) const {
  const auto& nb = nbr_[a];
  return a != b && (nb[0] == b || nb[1] == b || nb[2] == b || nb[3] == b);
}

TorusPtr make_torus(int half_side) { return std::make_shared<const Torus>(half_side); }

Configuration::Configuration(TorusPtr geometry)
    : geo_(std::move(geometry)), words_((geo_->num_sites() + 63) / 64, 0) {}

Configuration Configuration::from_sites(TorusPtr geometry, const std::vector<Site>& sites) {
  Configuration c(std::move(geometry));
  for (const Site& s : sites) c.set(c.geo_->index(s), true);
  return c;
}

void Configuration::set(int idx, bool value) {
  const std::uint64_t bit = std::uint64_t{1} << (idx & 63);
  std::uint64_t& w = words_[idx >> 6];
  const bool was = w & bit;
  if (was == value) return;
  w ^= bit;
  count_ += value ? 1 : -1;
}

int Configuration::occupied_neighbors(int idx) const {
  const auto& nb = geo_->neighbors(idx);
  return int(occupied(nb[0])) + int(occupied(nb[1])) + int(occupied(nb[2])) + int(occupied(nb[3]));
}

std::vector<int> Configuration::occupied_sites() const {
  std::vector<int> out;
  out.reserve(count_);
  for (std::size_t w = 0; w < words_.size(); ++w) {
    std::uint64_t bits = words_[w];
    while (bits) {
      const int b = std::countr_zero(bits);
      out.push_back(int(w * 64 + b));
      bits &= bits - 1;
    }
  }
  return out;
}

std::vector<Site> Configuration::occupied_coords() const {
  std::vector<Site> out;
  for (int idx : occupied_sites()) out.push_back(geo_->coords(idx));
  return out;
}

Configuration Configuration::translated(Site by) const {
  Configuration out(geo_);
  for (int idx : occupied_sites()) out.set(geo_->index(geo_->coords(idx) + by), true);
  return out;
}

std::uint64_t Configuration::hash() const {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (std::uint64_t w : words_) h = mix64(h ^ w) + 0x632be59bd9b4e019ULL;
  return h;
}

std::string Configuration::to_string() const {
  std::ostringstream os;
  os << "{";
  bool first = true;
  for (const Site& s : occupied_coords()) {
    os << (first ? "" : " ") << "(" << s.x << "," << s.y << ")";
    first = false;
  }
  os << "}";
  return os.str();
}

long hamiltonian(const Configuration& config) {
  const Torus& g = config.geometry();
  long bonds = 0;
  for (int idx : config.occupied_sites()) {
    const auto& nb = g.neighbors(idx);
    bonds += int(config.occupied(nb[0])) + int(config.occupied(nb[1]));
  }
  return -bonds;
}

int delta_h(const Configuration& config, int a, int b) {
  if (!config.geometry().adjacent(a, b)) {
    throw std::invalid_argument("delta_h: sites are not nearest neighbours");
  }
  const bool oa = config.occupied(a);
  if (oa == config.occupied(b)) return 0;
  const int from = oa ? a : b;
  const int to = oa ? b : a;
  return config.occupied_neighbors(from) - (config.occupied_neighbors(to) - 1);
}

double rate_from_delta(int dh, double beta) { return dh <= 0 ? 1.0 : std::exp(-beta * dh); }

double rate(const Configuration& config, int a, int b, double beta) {
  return rate_from_delta(delta_h(config, a, b), beta);
}

void exchange_in_place(Configuration& config, int a, int b) {
  if (!config.geometry().adjacent(a, b)) {
    throw std::invalid_argument("exchange: sites are not nearest neighbours");
  }
  const bool oa = config.occupied(a);
  const bool ob = config.occupied(b);
  if (oa == ob) return;
  config.set(a, ob);
  config.set(b, oa);
}

Configuration exchange(const Configuration& config, int a, int b) {
  Configuration out = config;
  exchange_in_place(out, a, b);
  return out;
}

std::vector<Move> enumerate_active_moves(const Configuration& config) {
  const Torus& g = config.geometry();
  std::vector<Move> moves;
  for (int p : config.occupied_sites()) {
    const int own = config.occupied_neighbors(p);
    for (int v : g.neighbors(p)) {
      if (config.occupied(v)) continue;
      moves.push_back({p, v, own - (config.occupied_neighbors(v) - 1)});
    }
  }
  std::sort(moves.begin(), moves.end(), [](const Move& x, const Move& y) {
    if (x.delta_h != y.delta_h) return x.delta_h < y.delta_h;
    if (x.from != y.from) return x.from < y.from;
    return x.to < y.to;
  });
  return moves;
}

std::array<int, 7> count_moves_by_delta(const std::vector<Move>& moves) {
  std::array<int, 7> counts{};
  for (const Move& m : moves) ++counts[m.delta_h + 3];
  return counts;
}

void SimulationParams::validate() const {
  if (n < 2) throw std::invalid_argument("n must be at least 2");
  if (L <= 2 * n) throw std::invalid_argument("L must exceed 2n");
  if (ell < 1 || ell > L) throw std::invalid_argument("ell must lie in [1, L]");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be positive");
}

}  // namespace kawasaki
