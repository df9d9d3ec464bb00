// Torus geometry, occupation configurations, the Ising lattice-gas
// Hamiltonian and Metropolis exchange rates for Kawasaki dynamics.
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace kawasaki {

struct Site {
  int x = 0;
  int y = 0;

  friend Site operator+(Site a, Site b) { return {a.x + b.x, a.y + b.y}; }
  friend Site operator-(Site a, Site b) { return {a.x - b.x, a.y - b.y}; }
  friend Site operator-(Site a) { return {-a.x, -a.y}; }
  friend Site operator*(int k, Site a) { return {k * a.x, k * a.y}; }
  friend bool operator==(Site a, Site b) = default;
  friend auto operator<=>(Site a, Site b) = default;
};

inline constexpr Site kE1{1, 0};
inline constexpr Site kE2{0, 1};

inline int sum_norm(Site s) { return (s.x < 0 ? -s.x : s.x) + (s.y < 0 ? -s.y : s.y); }
inline long squared_norm(Site s) { return long(s.x) * s.x + long(s.y) * s.y; }

// The torus {-L..L}^2 with periodic wrap. Sites are indexed row-major after
// shifting coordinates to {0..2L}.
class Torus {
 public:
  explicit Torus(int half_side);

  int half_side() const { return half_; }
  int side() const { return side_; }
  int num_sites() const { return side_ * side_; }
  int num_bonds() const { return 2 * num_sites(); }

  int index(Site s) const;
  Site coords(int idx) const { return coords_[idx]; }
  Site wrap(Site s) const;
  // Minimal-image difference to - from.
  Site displacement(Site from, Site to) const;

  // Neighbour order: +e1, +e2, -e1, -e2.
  const std::array<int, 4>& neighbors(int idx) const { return nbr_[idx]; }
  bool adjacent(int a, int b) const;

 private:
  int half_;
  int side_;
  std::vector<std::array<int, 4>> nbr_;
  std::vector<Site> coords_;
};

using TorusPtr = std::shared_ptr<const Torus>;
TorusPtr make_torus(int half_side);

class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(TorusPtr geometry);
  static Configuration from_sites(TorusPtr geometry, const std::vector<Site>& sites);

  const Torus& geometry() const { return *geo_; }
  const TorusPtr& geometry_ptr() const { return geo_; }

  bool occupied(int idx) const { return (words_[idx >> 6] >> (idx & 63)) & 1u; }
  bool occupied(Site s) const { return occupied(geo_->index(s)); }
  void set(int idx, bool value);
  int particle_count() const { return count_; }

  int occupied_neighbors(int idx) const;
  std::vector<int> occupied_sites() const;
  std::vector<Site> occupied_coords() const;
  Configuration translated(Site by) const;

  const std::vector<std::uint64_t>& words() const { return words_; }
  std::uint64_t hash() const;
  friend bool operator==(const Configuration& a, const Configuration& b) {
    return a.words_ == b.words_;
  }

  // Compact text form used in logs and test diagnostics.
  std::string to_string() const;

 private:
  TorusPtr geo_;
  std::vector<std::uint64_t> words_;
  int count_ = 0;
};

struct ConfigurationHash {
  std::size_t operator()(const Configuration& c) const { return static_cast<std::size_t>(c.hash()); }
};

// A particle jump across a bond: `from` is occupied, `to` is vacant.
struct Move {
  int from = -1;
  int to = -1;
  int delta_h = 0;
  friend bool operator==(const Move&, const Move&) = default;
};

long hamiltonian(const Configuration& config);

// Energy change of exchanging the occupations of two adjacent sites.
// Throws std::invalid_argument when the sites are not nearest neighbours.
int delta_h(const Configuration& config, int a, int b);

double rate(const Configuration& config, int a, int b, double beta);
double rate_from_delta(int delta_h, double beta);

Configuration exchange(const Configuration& config, int a, int b);
void exchange_in_place(Configuration& config, int a, int b);

// All bonds with one occupied and one vacant endpoint, sorted by delta_h and
// then by (from, to).
std::vector<Move> enumerate_active_moves(const Configuration& config);

// Number of active moves per delta_h value, index delta_h + 3.
std::array<int, 7> count_moves_by_delta(const std::vector<Move>& moves);

struct SimulationParams {
  double beta = 8.0;
  int n = 4;
  int L = 9;
  int ell = 4;

  int particles() const { return n * n; }
  long ground_energy() const { return -2L * n * (n - 1); }
  // Throws std::invalid_argument unless n >= 2, L > 2n and 1 <= ell <= L.
  void validate() const;
};

}  // namespace kawasaki
