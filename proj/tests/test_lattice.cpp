#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "kawasaki/lattice.hpp"

using namespace kawasaki;

namespace {

std::vector<Site> square(int n, Site at = {0, 0}) {
  std::vector<Site> out;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) out.push_back(at + Site{x, y});
  return out;
}

Configuration random_config(const TorusPtr& t, int k, std::mt19937_64& rng) {
  std::vector<int> idx(t->num_sites());
  for (int i = 0; i < t->num_sites(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  Configuration c(t);
  for (int i = 0; i < k; ++i) c.set(idx[i], true);
  return c;
}

}  // namespace

TEST_CASE("torus neighbours are distinct and bonds number 2 side^2") {
  for (int L : {1, 2, 5}) {
    const Torus t(L);
    std::set<std::pair<int, int>> bonds;
    for (int i = 0; i < t.num_sites(); ++i) {
      const auto& nb = t.neighbors(i);
      CHECK(std::set<int>(nb.begin(), nb.end()).size() == 4);
      for (int v : nb) bonds.insert({std::min(i, v), std::max(i, v)});
      CHECK(t.index(t.coords(i)) == i);
    }
    CHECK(int(bonds.size()) == t.num_bonds());
  }
  const Torus t(4);
  CHECK(t.index({5, 0}) == t.index({-4, 0}));
  CHECK(t.wrap({5, -5}) == Site{-4, 4});
}

TEST_CASE("hamiltonian examples") {
  auto t = make_torus(9);
  CHECK(hamiltonian(Configuration::from_sites(t, square(4, {3, -2}))) == -24);
  CHECK(hamiltonian(Configuration(t)) == 0);
  auto t2 = make_torus(2);
  Configuration full(t2);
  for (int i = 0; i < t2->num_sites(); ++i) full.set(i, true);
  CHECK(hamiltonian(full) == -50);
}

TEST_CASE("delta_h examples and contract") {
  const int n = 5;
  auto t = make_torus(11);
  const auto sq = Configuration::from_sites(t, square(n));
  CHECK(delta_h(sq, t->index({0, 0}), t->index({0, -1})) == 2);
  CHECK(delta_h(sq, t->index({2, 0}), t->index({2, -1})) == 3);
  CHECK(delta_h(sq, t->index({-3, -3}), t->index({-3, -4})) == 0);
  CHECK_THROWS_AS(delta_h(sq, t->index({0, 0}), t->index({1, 1})), std::invalid_argument);
}

TEST_CASE("rate values") {
  auto t = make_torus(5);
  CHECK(rate_from_delta(0, 3.0) == 1.0);
  CHECK(rate_from_delta(-2, 3.0) == 1.0);
  CHECK(rate_from_delta(2, 5.0) == doctest::Approx(std::exp(-10.0)).epsilon(1e-15));
  const auto single = Configuration::from_sites(t, {{0, 0}});
  CHECK(rate(single, t->index({0, 0}), t->index({1, 0}), 9.0) == 1.0);
}

TEST_CASE("exchange is an involution and conserves particles") {
  auto t = make_torus(9);
  const auto eta0 = Configuration::from_sites(t, square(4));
  const int a = t->index({0, 0});
  const int b = t->index({0, -1});
  const auto once = exchange(eta0, a, b);
  CHECK(once.particle_count() == 16);
  CHECK(!once.occupied(Site{0, 0}));
  CHECK(once.occupied(Site{0, -1}));
  CHECK(exchange(once, a, b) == eta0);
  CHECK(exchange(eta0, t->index({0, 0}), t->index({1, 0})) == eta0);
}

TEST_CASE("active moves of the square") {
  for (int n : {4, 5, 6}) {
    auto t = make_torus(2 * n + 1);
    const auto counts = count_moves_by_delta(enumerate_active_moves(Configuration::from_sites(t, square(n))));
    CHECK(counts[2 + 3] == 8);
    CHECK(counts[3 + 3] == 4 * (n - 2));
    CHECK(counts[0 + 3] == 0);
    CHECK(counts[1 + 3] == 0);
  }
  auto t = make_torus(3);
  const auto one = enumerate_active_moves(Configuration::from_sites(t, {{1, 1}}));
  CHECK(one.size() == 4);
  for (const Move& m : one) CHECK(m.delta_h == 0);
  Configuration full(t);
  for (int i = 0; i < t->num_sites(); ++i) full.set(i, true);
  CHECK(enumerate_active_moves(full).empty());
}

TEST_CASE("local delta_h agrees with global energy difference") {
  std::mt19937_64 rng(12345);
  auto t = make_torus(5);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto c = random_config(t, int(rng() % t->num_sites()), rng);
    const int a = int(rng() % t->num_sites());
    const int b = t->neighbors(a)[rng() % 4];
    const int dh = delta_h(c, a, b);
    const auto d = exchange(c, a, b);
    REQUIRE(dh == hamiltonian(d) - hamiltonian(c));
    REQUIRE(delta_h(d, a, b) == -dh);
    REQUIRE(d.particle_count() == c.particle_count());
    REQUIRE(dh >= -3);
    REQUIRE(dh <= 3);
  }
}

TEST_CASE("detailed balance of the Metropolis kernel") {
  std::mt19937_64 rng(777);
  auto t = make_torus(4);
  const double beta = 3.7;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto c = random_config(t, 20, rng);
    const int a = int(rng() % t->num_sites());
    const int b = t->neighbors(a)[rng() % 4];
    const auto d = exchange(c, a, b);
    const double lhs = -beta * double(hamiltonian(c)) + std::log(rate(c, a, b, beta));
    const double rhs = -beta * double(hamiltonian(d)) + std::log(rate(d, a, b, beta));
    REQUIRE(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("ground-state audit") {
  const int n = 4;
  auto t = make_torus(9);
  const long ground = -2L * n * (n - 1);
  for (int i = 0; i < t->num_sites(); ++i) {
    REQUIRE(hamiltonian(Configuration::from_sites(t, square(n, t->coords(i)))) == ground);
  }
  std::mt19937_64 rng(4242);
  for (int trial = 0; trial < 100000; ++trial) {
    REQUIRE(hamiltonian(random_config(t, n * n, rng)) >= ground);
  }
}

TEST_CASE("parameter validation") {
  SimulationParams p;
  CHECK_NOTHROW(p.validate());
  p.L = 8;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.n = 1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.ell = 10;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
