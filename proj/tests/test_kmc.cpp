#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "kawasaki/kmc.hpp"

using namespace kawasaki;

namespace {

const RateTable& table4() {
  static const RateTable t = build_rate_table(4, 9);
  return t;
}

Configuration square(int n, int L) { return Configuration::from_sites(make_torus(L), square_sites(n)); }

SimulationParams params(double beta, int n, int L) {
  SimulationParams p;
  p.beta = beta;
  p.n = n;
  p.L = L;
  p.ell = 2;
  return p;
}

// Small chain with hand-set rows on the first classes of the catalog.
RateTable toy_table(double a, double b, double c, double d, double e, double f) {
  RateTable t(4, 9);
  t.set_row(0, {{1, {1, 0}, a}, {2, {0, 1}, b}});
  t.set_row(1, {{0, {-1, 0}, c}, {2, {0, 0}, d}});
  t.set_row(2, {{0, {0, -1}, e}, {1, {0, 0}, f}});
  return t;
}

// Dense Gaussian elimination for the oracles below.
std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const int n = int(b.size());
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int r = k + 1; r < n; ++r)
      if (std::abs(a[r][k]) > std::abs(a[p][k])) p = r;
    std::swap(a[p], a[k]);
    std::swap(b[p], b[k]);
    for (int r = k + 1; r < n; ++r) {
      const double m = a[r][k] / a[k][k];
      for (int c = k; c < n; ++c) a[r][c] -= m * a[k][c];
      b[r] -= m * b[k];
    }
  }
  std::vector<double> x(n);
  for (int k = n - 1; k >= 0; --k) {
    double s = b[k];
    for (int c = k + 1; c < n; ++c) s -= a[k][c] * x[c];
    x[k] = s / a[k][k];
  }
  return x;
}

}  // namespace

TEST_CASE("philox known-answer vectors") {
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("rng streams") {
  Rng a(42, 0), b(42, 0), c(42, 1), d(43, 0);
  bool differ_stream = false, differ_seed = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    differ_stream |= x != c();
    differ_seed |= x != d();
  }
  CHECK(differ_stream);
  CHECK(differ_seed);

  SUBCASE("uniform stays inside the open interval and has the right mean") {
    Rng r(7, 3);
    double s = 0.0;
    const int m = 200000;
    for (int i = 0; i < m; ++i) {
      const double u = r.uniform();
      REQUIRE(u > 0.0);
      REQUIRE(u < 1.0);
      s += u;
    }
    CHECK(std::abs(s / m - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / m));
  }
  SUBCASE("bounded draws are uniform") {
    Rng r(9, 0);
    std::array<int, 6> count{};
    const int m = 60000;
    for (int i = 0; i < m; ++i) ++count[r.below(6)];
    double chi2 = 0.0;
    for (int c : count) chi2 += (c - m / 6.0) * (c - m / 6.0) / (m / 6.0);
    CHECK(chi2 < 15.09);  // chi-square, 5 degrees of freedom, p = 0.01
    CHECK_THROWS_AS(r.below(0), std::invalid_argument);
  }
  SUBCASE("exponential mean") {
    Rng r(11, 0);
    double s = 0.0;
    const int m = 100000;
    for (int i = 0; i < m; ++i) s += r.exponential(4.0);
    CHECK(std::abs(s / m - 0.25) < 3.0 * 0.25 / std::sqrt(m));
  }
}

TEST_CASE("sampler buckets at the square and incremental consistency") {
  for (int n : {4, 5, 6}) {
    MoveSampler s(square(n, 2 * n + 1), 8.0);
    const auto b = s.bucket_sizes();
    CHECK(b[0] == 0);
    CHECK(b[1] == 0);
    CHECK(b[2] == 8);
    CHECK(b[3] == 4 * (n - 2));
    CHECK(s.total_rate() == doctest::Approx(8 * std::exp(-16.0) + 4 * (n - 2) * std::exp(-24.0)).epsilon(1e-14));
    CHECK(s.energy() == -2L * n * (n - 1));
  }
  MoveSampler s(square(4, 9), 1.0);
  Rng rng(5, 0);
  for (int i = 0; i < 3000; ++i) {
    s.apply(s.sample(rng));
    if (i % 100 == 0) REQUIRE(s.consistent());
  }
  CHECK(s.consistent());
  auto mine = s.active_moves();
  auto ref = enumerate_active_moves(s.config());
  auto key = [](const Move& m) { return std::tuple(m.delta_h, m.from, m.to); };
  std::sort(mine.begin(), mine.end(), [&](auto& x, auto& y) { return key(x) < key(y); });
  std::sort(ref.begin(), ref.end(), [&](auto& x, auto& y) { return key(x) < key(y); });
  CHECK(mine == ref);
  CHECK_THROWS_AS(s.apply(0, 5), std::invalid_argument);
}

TEST_CASE("first jump out of the square") {
  const int n = 4, L = 9;
  const double beta = 8.0;
  const auto moves = enumerate_active_moves(square(n, L));
  const auto counts = count_moves_by_delta(moves);
  const double corner = counts[2 + 3] * std::exp(-2 * beta);
  const double side = counts[3 + 3] * std::exp(-3 * beta);
  const double p = corner / (corner + side);
  const double mean = 1.0 / (corner + side);

  const int m = 100000;
  StopCondition stop;
  stop.max_events = 1;
  int hits = 0;
  double total = 0.0;
  const Configuration start = square(n, L);
  const long e0 = hamiltonian(start);
  for (int i = 0; i < m; ++i) {
    const Trajectory t = simulate_eta(start, params(beta, n, L), stop, 2024, i);
    REQUIRE(t.events.size() == 1);
    const Configuration after = replay_eta(t);
    hits += hamiltonian(after) - e0 == 2;
    total += t.events[0].time;
  }
  CHECK(std::abs(double(hits) / m - p) < 3.0 * std::sqrt(p * (1 - p) / m));
  CHECK(std::abs(total / m - mean) < 3.0 * mean / std::sqrt(m));
}

TEST_CASE("zero-rate state stops at the horizon") {
  const auto torus = make_torus(5);
  Configuration full(torus);
  for (int i = 0; i < torus->num_sites(); ++i) full.set(i, true);
  StopCondition stop;
  stop.horizon = 10.0;
  const Trajectory t = simulate_eta(full, params(2.0, 2, 5), stop, 1);
  CHECK(t.events.empty());
  CHECK(t.stop == StopReason::Horizon);
  CHECK(t.end_time == 10.0);
}

TEST_CASE("determinism, checkpoints and the trajectory file") {
  StopCondition stop;
  stop.max_events = 3 * kCheckpointInterval + 17;
  const auto p = params(1.0, 4, 9);
  const Trajectory a = simulate_eta(square(4, 9), p, stop, 99, 4);
  const Trajectory b = simulate_eta(square(4, 9), p, stop, 99, 4);
  REQUIRE(a.events.size() == b.events.size());
  bool same = true;
  for (std::size_t i = 0; i < a.events.size(); ++i)
    same &= a.events[i].time == b.events[i].time && a.events[i].from == b.events[i].from && a.events[i].to == b.events[i].to;
  CHECK(same);
  CHECK(a.checkpoints.size() == 3);
  CHECK(a.stop == StopReason::EventCap);
  for (std::size_t i = 1; i < a.events.size(); ++i) REQUIRE(a.events[i].time > a.events[i - 1].time);
  CHECK_NOTHROW(verify_checkpoints(a));

  const std::string text = trajectory_to_jsonl(a);
  CHECK(text == trajectory_to_jsonl(b));
  const Trajectory back = trajectory_from_jsonl(text);
  CHECK(back.events.size() == a.events.size());
  CHECK(back.events.back().time == a.events.back().time);
  CHECK(replay_eta(back) == replay_eta(a));

  const auto dir = std::filesystem::temp_directory_path() / "kawasaki_test_traj";
  std::filesystem::create_directories(dir);
  save_trajectory(a, (dir / "a.jsonl").string());
  CHECK(load_trajectory((dir / "a.jsonl").string()).events.size() == a.events.size());

  Trajectory bad = a;
  bad.checkpoints[1].hash ^= 1;
  CHECK_THROWS_AS(trajectory_from_jsonl(trajectory_to_jsonl(bad)), std::runtime_error);
  CHECK_THROWS_AS(trajectory_from_jsonl(text.substr(0, text.size() / 2)), std::exception);
}

TEST_CASE("trace examples") {
  StopCondition stop;
  stop.max_events = 5000;
  const Trajectory t = simulate_eta(square(4, 9), params(1.5, 4, 9), stop, 3);
  const Path p = labelled_path(t);
  CHECK(p.total_time() == doctest::Approx(t.end_time).epsilon(1e-12));

  SUBCASE("whole space is the identity") {
    const Path q = trace(p, [](const Label&) { return true; });
    REQUIRE(q.segments.size() == p.segments.size());
    for (std::size_t i = 0; i < q.segments.size(); ++i) {
      CHECK(q.segments[i].state == p.segments[i].state);
      CHECK(q.segments[i].duration == p.segments[i].duration);
    }
  }
  SUBCASE("a path inside the subset keeps its clock") {
    StopCondition hold;
    hold.horizon = 1.0;
    const Trajectory h = simulate_eta(square(4, 9), params(8.0, 4, 9), hold, 3);
    REQUIRE(h.events.empty());
    const Path q = trace(labelled_path(h), in_gamma);
    REQUIRE(q.segments.size() == 1);
    CHECK(q.segments[0].duration == 1.0);
    CHECK(q.segments[0].state.cls == 0);
  }
  SUBCASE("subset never visited") {
    CHECK_THROWS_AS(trace(p, [](const Label& l) { return l.cls == 9999; }), std::invalid_argument);
  }
}

TEST_CASE("trace of a three-state chain") {
  // Rates 0->1 a, 0->2 b, 1->0 c, 1->2 d, 2->0 e, 2->1 f. On {0,1} the trace
  // jumps 0->1 at a + b f/(e+f) and 1->0 at c + d e/(e+f).
  const double a = 1.0, b = 2.0, c = 0.5, d = 1.5, e = 3.0, f = 1.0;
  const RateTable t = toy_table(a, b, c, d, e, f);
  const TableChain chain(t, 0.0);
  StopCondition stop;
  stop.horizon = 40000.0;
  const Path p = labelled_path(simulate_zeta_hat(chain, {0, {0, 0}}, stop, 17));
  const Path q = trace(p, [](const Label& l) { return l.cls <= 1; });
  double time[2] = {0, 0};
  double jumps[2] = {0, 0};
  for (std::size_t k = 0; k < q.segments.size(); ++k) {
    const int s = q.segments[k].state.cls;
    time[s] += q.segments[k].duration;
    if (k + 1 < q.segments.size() && q.segments[k + 1].state.cls != s) jumps[s] += 1;
  }
  const double want01 = a + b * f / (e + f);
  const double want10 = c + d * e / (e + f);
  CHECK(std::abs(jumps[0] / time[0] - want01) < 3.0 * std::sqrt(jumps[0]) / time[0]);
  CHECK(std::abs(jumps[1] / time[1] - want10) < 3.0 * std::sqrt(jumps[1]) / time[1]);
}

TEST_CASE("jump statistics of a hand-solvable chain") {
  const RateTable t = toy_table(1.0, 3.0, 2.0, 2.0, 0.5, 4.5);
  const TableChain chain(t, 0.0);
  StopCondition stop;
  stop.max_events = 100000;
  const Trajectory tr = simulate_zeta_hat(chain, {0, {0, 0}}, stop, 8);
  std::map<std::pair<int, int>, double> count;
  for (const Event& e : tr.events) count[{e.from, e.to}] += 1;
  const double prob[3][3] = {{0, 0.25, 0.75}, {0.5, 0, 0.5}, {0.1, 0.9, 0}};
  for (int s = 0; s < 3; ++s) {
    double out = 0.0;
    for (int u = 0; u < 3; ++u) out += count[{s, u}];
    double chi2 = 0.0;
    for (int u = 0; u < 3; ++u)
      if (prob[s][u] > 0) chi2 += std::pow(count[{s, u}] - out * prob[s][u], 2) / (out * prob[s][u]);
    CHECK(chi2 < 6.635);  // one degree of freedom, p = 0.01
  }
}

TEST_CASE("trace composition on full-dynamics paths") {
  const auto p = params(1.2, 4, 9);
  int checked = 0;
  for (int r = 0; r < 1000; ++r) {
    StopCondition stop;
    stop.max_events = 400;
    const Path path = labelled_path(simulate_eta(square(4, 9), p, stop, 77, r));
    const Path direct = trace(path, in_gamma);
    const Path twice = trace(trace(path, in_xi), in_gamma);
    REQUIRE(direct.segments.size() == twice.segments.size());
    for (std::size_t k = 0; k < direct.segments.size(); ++k) {
      REQUIRE(direct.segments[k].state == twice.segments[k].state);
      REQUIRE(direct.segments[k].duration == twice.segments[k].duration);
    }
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("table-driven chain out of the square") {
  const RateTable& t = table4();
  const TableChain chain(t, 8.0);
  const auto& cat = t.catalog();
  SUBCASE("one jump from the square lands next to it") {
    std::set<ClassAt> neighbours;
    for (const RateEntry& e : t.row(0)) neighbours.insert({e.target, e.offset});
    CHECK(neighbours.size() == 16);
    StopCondition stop;
    stop.max_events = 1;
    for (int i = 0; i < 200; ++i) {
      const Trajectory tr = simulate_zeta_hat(chain, {0, {0, 0}}, stop, 5, i);
      const ClassAt c = replay_class(tr);
      CHECK(neighbours.count(c) == 1);
      CHECK(cat.xi_class(c.cls).level == 1);
    }
  }
  SUBCASE("holding time at the square scales as exp(2 beta)") {
    const TableChain hot(t, 8.0), cold(t, 8.5);
    StopCondition stop;
    stop.max_events = 1;
    const int m = 20000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < m; ++i) {
      s1 += simulate_zeta_hat(hot, {0, {0, 0}}, stop, 1, i).events[0].time;
      s2 += simulate_zeta_hat(cold, {0, {0, 0}}, stop, 2, i).events[0].time;
    }
    const double ratio = (s2 / m) / (s1 / m);
    const double se = ratio * std::sqrt(2.0 / m);
    CHECK(std::abs(ratio - std::exp(1.0)) < 3.0 * se);
  }
  SUBCASE("landing law on the first shell against an exact solve") {
    // From a rectangle class, first hit of the ground or first-shell classes,
    // collapsed over anchors.
    const int m = t.num_classes();
    auto low = [&](int c) { return cat.xi_class(c).level <= 1; };
    const int start = cat.omega2_class(0);
    std::vector<int> idx(m, -1), trans;
    for (int c = 0; c < m; ++c)
      if (!low(c)) {
        idx[c] = int(trans.size());
        trans.push_back(c);
      }
    std::map<int, double> exact;
    for (int target = 0; target < m; ++target) {
      if (!low(target)) continue;
      std::vector<std::vector<double>> a(trans.size(), std::vector<double>(trans.size(), 0.0));
      std::vector<double> b(trans.size(), 0.0);
      for (std::size_t i = 0; i < trans.size(); ++i) {
        for (const RateEntry& e : t.row(trans[i])) {
          a[i][i] += e.value;
          if (idx[e.target] >= 0)
            a[i][idx[e.target]] -= e.value;
          else if (e.target == target)
            b[i] += e.value;
        }
      }
      const double v = dense_solve(a, b)[idx[start]];
      if (v > 1e-12) exact[target] = v;
    }
    const std::uint64_t reps = 40000;
    const auto stats = zeta_hat_return_stats(chain, {start, {0, 0}}, [&](const ClassAt& c) { return low(c.cls); },
                                             reps, 31);
    CHECK(stats.censored == 0);
    std::map<int, double> freq;
    for (const auto& [c, k] : stats.landing) freq[c.cls] += double(k) / reps;
    double total = 0.0;
    for (const auto& [c, p] : exact) {
      total += p;
      CHECK(std::abs(freq[c] - p) < 3.0 * std::sqrt(p * (1 - p) / reps) + 1e-12);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("return to the ground states is symmetric in the four directions") {
    const std::uint64_t reps = 40000;
    const auto stats = zeta_hat_return_stats(chain, {0, {0, 0}}, [](const ClassAt& c) { return c.cls == 0; }, reps, 12);
    double f[4] = {stats.frequency({0, {1, 0}}), stats.frequency({0, {0, 1}}), stats.frequency({0, {-1, 0}}),
                   stats.frequency({0, {0, -1}})};
    const double mean = (f[0] + f[1] + f[2] + f[3]) / 4;
    CHECK(mean > 0.0);
    for (double v : f) CHECK(std::abs(v - mean) < 3.0 * std::sqrt(2.0 * mean * (1 - mean) / reps));
  }
}

TEST_CASE("coupling") {
  const RateTable& t = table4();
  SUBCASE("identical tables never separate") {
    const TableChain a(t, 8.0), b(t, 8.0);
    for (int i = 0; i < 20; ++i) {
      const CoupledRun run = couple_tables(a, b, {0, {0, 0}}, 1e9, 3, i);
      CHECK(std::isinf(run.separation));
      CHECK(run.alpha == 0.0);
      CHECK(run.first.segments.size() == run.second.segments.size());
    }
  }
  SUBCASE("separation law is dominated by the exponential bound") {
    RateTable perturbed = t;
    for (int c = 0; c < t.num_classes(); ++c) {
      if (!t.has_row(c)) continue;
      auto row = t.row(c);
      for (auto& e : row) e.value *= c % 2 ? 1.05 : 0.97;
      perturbed.set_row(c, row);
    }
    const TableChain a(t, 4.0), b(perturbed, 4.0);
    const int m = 2000;
    double alpha = 0.0;
    std::vector<double> sep;
    for (int i = 0; i < m; ++i) {
      const CoupledRun run = couple_tables(a, b, {0, {0, 0}}, 2e5, 9, i);
      alpha = std::max(alpha, run.alpha);
      sep.push_back(run.separation);
    }
    for (double q : {1e3, 1e4, 5e4, 2e5}) {
      double frac = 0.0;
      for (double s : sep) frac += s <= q;
      frac /= m;
      const double bound = 1.0 - std::exp(-alpha * q);
      CHECK(frac <= bound + 3.0 * std::sqrt(std::max(bound * (1 - bound), 1e-4) / m));
    }
    double d = 0.0;
    for (int c = 0; c < t.num_classes(); ++c) d = std::max(d, rate_discrepancy(a, b, c));
    CHECK(alpha <= d);
  }
}
