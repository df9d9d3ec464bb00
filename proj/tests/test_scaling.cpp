#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <json.hpp>

#include "doctest.h"
#include "kawasaki/scaling.hpp"

using namespace kawasaki;

namespace {

const RateTable& table4() {
  static const RateTable t = build_rate_table(4, 9);
  return t;
}

const RateTable& table5() {
  static const RateTable t = build_rate_table(5, 11);
  return t;
}

// Nearest-neighbour walk of the ground class with unit rates.
RateTable walk_table() {
  RateTable t(4, 9);
  t.set_row(0, {{0, {1, 0}, 1.0}, {0, {-1, 0}, 1.0}, {0, {0, 1}, 1.0}, {0, {0, -1}, 1.0}});
  return t;
}

SimulationParams params(double beta, int n, int L, int ell = 2) {
  SimulationParams p;
  p.beta = beta;
  p.n = n;
  p.L = L;
  p.ell = ell;
  return p;
}

Configuration square(int n, int L) { return Configuration::from_sites(make_torus(L), square_sites(n)); }

std::vector<int> lying_classes() {
  std::vector<int> out;
  for (int j = 0; j < 4; ++j) out.push_back(FamilyCatalog::omega3_class(Orientation::Lying, j));
  return out;
}

}  // namespace

TEST_CASE("statistics helpers") {
  SUBCASE("means, proportions and ratios") {
    const Estimate m = mean_estimate({1.0, 2.0, 3.0, 4.0});
    CHECK(m.value == doctest::Approx(2.5));
    CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
    const Estimate p = proportion_estimate(25, 100);
    CHECK(p.value == doctest::Approx(0.25));
    CHECK(p.se == doctest::Approx(std::sqrt(0.25 * 0.75 / 100)));
    const Estimate r = ratio_estimate({2.0, 4.0, 6.0}, {1.0, 2.0, 3.0});
    CHECK(r.value == doctest::Approx(2.0));
    CHECK(r.se == doctest::Approx(0.0));
    CHECK(median({5.0, 1.0, 3.0}) == 3.0);
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  }
  SUBCASE("distribution tails") {
    CHECK(normal_upper_tail(1.959963984540054) == doctest::Approx(0.025).epsilon(1e-9));
    CHECK(chi_square_upper_tail(3.841458820694124, 1.0) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi_square_upper_tail(0.0, 3.0) == 1.0);
  }
  SUBCASE("line fit recovers an exact line") {
    const LineFit f = fit_line({0, 1, 2, 3}, {1, 3, 5, 7});
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.slope_se == doctest::Approx(0.0));
  }
  SUBCASE("lattice normality test") {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> g(0.0, 4.0);
    std::vector<long> good, bad;
    std::uniform_int_distribution<long> u(-7, 7);
    for (int i = 0; i < 4000; ++i) {
      good.push_back(std::lround(g(gen)));
      bad.push_back(u(gen));
    }
    const auto ok = lattice_normality_test(good, 4.0);
    CHECK(ok.p_value > 0.001);
    CHECK(ok.bins > 10);
    CHECK(lattice_normality_test(bad, 4.0).p_value < 1e-6);
  }
  SUBCASE("batch means fall back to the plain mean on short input") {
    const std::vector<double> x{1.0, 2.0, 3.0};
    CHECK(batch_mean_estimate(x, 20).value == doctest::Approx(2.0));
    std::vector<double> y(400);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = double(i % 2);
    CHECK(batch_mean_estimate(y, 20).value == doctest::Approx(0.5));
  }
}

TEST_CASE("quotient chain against the unfolded chain") {
  const RateTable& t = table4();
  const QuotientChain q(t, 8.0);
  const Torus& torus = q.torus();
  const int sites = torus.num_sites();
  const int m = q.num_classes();

  SUBCASE("first-return law matches a direct absorption solve") {
    const auto P = q.ground_return_law();
    double total = 0.0;
    for (double v : P) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));

    // Oracle: every non-ground class at every anchor is an unknown.
    const int N = (m - 1) * sites;
    auto id = [&](int cls, int s) { return (cls - 1) * sites + s; };
    Triplets trip;
    for (int c = 1; c < m; ++c)
      for (int s = 0; s < sites; ++s) {
        trip.emplace_back(id(c, s), id(c, s), t.exit_rate(c));
        for (const RateEntry& e : t.row(c))
          if (e.target != 0)
            trip.emplace_back(id(c, s), id(e.target, torus.index(torus.wrap(torus.coords(s) + e.offset))), -e.value);
      }
    const SparseSolver solver(make_sparse(N, N, trip));
    for (const Site y : {Site{0, 0}, Site{1, 0}, Site{2, 1}, Site{-3, 0}}) {
      Eigen::VectorXd b = Eigen::VectorXd::Zero(N);
      for (int c = 1; c < m; ++c)
        for (int s = 0; s < sites; ++s)
          for (const RateEntry& e : t.row(c))
            if (e.target == 0 && torus.wrap(torus.coords(s) + e.offset) == y) b[id(c, s)] += e.value;
      const Eigen::VectorXd h = solver.solve(b);
      double p = 0.0;
      for (const RateEntry& e : t.row(0)) p += e.value / t.exit_rate(0) * h[id(e.target, torus.index(torus.wrap(e.offset)))];
      CHECK(P[torus.index(y)] == doctest::Approx(p).epsilon(1e-9));
    }
  }

  SUBCASE("stationary law is reversible with weight exp(beta) on the square") {
    const auto pi = q.stationary();
    double total = 0.0;
    for (double v : pi) total += v;
    CHECK(total == doctest::Approx(1.0));
    CHECK(pi[0] / pi[1] == doctest::Approx(std::exp(8.0)).epsilon(1e-9));
    // Detailed balance summed over offsets.
    std::vector<std::vector<double>> flow(m, std::vector<double>(m, 0.0));
    for (int c = 0; c < m; ++c)
      for (const RateEntry& e : t.row(c))
        flow[c][e.target] += pi[c] * std::exp(-8.0 * RateTable::prefactor_power(c)) * e.value;
    double worst = 0.0;
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) worst = std::max(worst, std::abs(flow[a][b] - flow[b][a]) / (flow[a][b] + flow[b][a] + 1e-300));
    CHECK(worst < 1e-9);
  }

  SUBCASE("capacity by the Fourier route and by the unfolded solve") {
    const GroundCapacity g = ground_capacity(q);
    const FiniteChain f = unfold_table_chain(q);
    const int o = torus.index({0, 0});
    std::vector<int> others;
    for (int s = 0; s < sites; ++s)
      if (s != o) others.push_back(s);
    const CapacityResult c = capacity(f, {o}, others);
    CHECK(c.connected);
    CHECK(c.exact / f.measure[o] == doctest::Approx(g.normalized).epsilon(1e-8));
    CHECK(c.thomson_lower <= c.exact * (1 + 1e-10));
    CHECK(c.exact <= c.dirichlet_upper * (1 + 1e-10));
    // Sandwich of the diffusion rate.
    CHECK(g.lower <= g.inverse_theta);
    CHECK(g.inverse_theta <= g.upper);
  }
}

TEST_CASE("capacity of explicit chains") {
  SUBCASE("two states") {
    FiniteChain f{"pair", {0.3, 0.7}, {{{1, 2.0 * 0.7}}, {{0, 2.0 * 0.3}}}};
    const CapacityResult c = capacity(f, {0}, {1});
    CHECK(c.exact == doctest::Approx(0.3 * 1.4));
    CHECK(c.dirichlet_upper == doctest::Approx(c.exact));
    CHECK(c.thomson_lower == doctest::Approx(c.exact));
  }
  SUBCASE("random reversible chains obey the variational bounds") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      const int N = 12;
      FiniteChain f;
      f.measure.resize(N);
      for (double& v : f.measure) v = u(gen);
      f.rates.resize(N);
      Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(N, N);
      for (int a = 0; a < N; ++a)
        for (int b = a + 1; b < N; ++b)
          if (u(gen) < 0.4 || b == a + 1) cond(a, b) = cond(b, a) = u(gen);
      for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b)
          if (cond(a, b) > 0) f.rates[a].push_back({b, cond(a, b) / f.measure[a]});
      const CapacityResult c = capacity(f, {0, 1}, {N - 1});
      // Oracle: dense harmonic solve.
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(N);
      for (int x = 0; x < N; ++x) {
        if (x <= 1 || x == N - 1) {
          M(x, x) = 1.0;
          b[x] = x <= 1 ? 1.0 : 0.0;
          continue;
        }
        for (int y = 0; y < N; ++y) {
          M(x, x) += cond(x, y);
          M(x, y) -= cond(x, y);
        }
      }
      const Eigen::VectorXd h = M.fullPivLu().solve(b);
      double cap = 0.0;
      for (int x : {0, 1})
        for (int y = 0; y < N; ++y) cap += cond(x, y) * (1.0 - h[y]);
      CHECK(c.exact == doctest::Approx(cap).epsilon(1e-10));
      CHECK(c.thomson_lower <= c.exact * (1 + 1e-10));
      CHECK(c.exact <= c.dirichlet_upper * (1 + 1e-10));
    }
  }
  SUBCASE("disconnected sets") {
    FiniteChain f{"split", {1, 1, 1}, {{{1, 1.0}}, {{0, 1.0}}, {}}};
    const CapacityResult c = capacity(f, {0}, {2});
    CHECK_FALSE(c.connected);
    CHECK(c.exact == 0.0);
    CHECK_FALSE(c.diagnostic.empty());
    CHECK_THROWS_AS(capacity(f, {0}, {0}), std::invalid_argument);
  }
}

TEST_CASE("exact quantities against the table-driven simulation") {
  const RateTable& t = table4();
  const double beta = 8.0;
  const QuotientChain q(t, beta);
  const TableChain chain(t, beta);
  const Torus& torus = q.torus();
  const std::uint64_t R = 10000;

  SUBCASE("first-return distance law") {
    const auto tail = ground_return_tail(q);
    double total = 0.0;
    for (double v : tail) total += v;
    CHECK(total == doctest::Approx(1.0));
    const auto stats = zeta_hat_return_stats(chain, {0, {0, 0}}, [](const ClassAt& c) { return c.cls == 0; }, R, 3, 0);
    std::vector<double> freq(tail.size(), 0.0);
    for (const auto& [c, k] : stats.landing) freq[sum_norm(torus.wrap(c.anchor))] += double(k) / R;
    for (int k = 0; k <= 4; ++k) {
      const double se = std::sqrt(tail[k] * (1 - tail[k]) / R);
      CHECK(std::abs(freq[k] - tail[k]) <= 3 * se + 1e-12);
    }
  }

  SUBCASE("escape from the lying rectangles") {
    const GammaRho g = gamma_rho_exact(t);
    CHECK(g.leak < 1e-9);
    CHECK(g.rho > 0.0);
    CHECK(g.rho < 1.0);
    CHECK(g.gamma >= g.rho);
    CHECK(g.gamma < 1.0);
    const auto lying = lying_classes();
    auto target = [&](const ClassAt& c) {
      if (c.cls <= 16) return true;
      return std::find(lying.begin(), lying.end(), c.cls) != lying.end() && torus.wrap(c.anchor) != Site{0, 0};
    };
    const auto stats = zeta_hat_return_stats(chain, {lying[0], {0, 0}}, target, R, 5, 0);
    std::uint64_t hits = 0;
    for (const auto& [c, k] : stats.landing)
      if (c.cls > 16) hits += k;
    const Estimate e = proportion_estimate(hits, R);
    CHECK(std::abs(e.value - g.lying_escape[0]) <= 3 * std::sqrt(g.lying_escape[0] * (1 - g.lying_escape[0]) / R));
  }

  SUBCASE("mean hitting time of the ground states") {
    const MeanHitting mh = mean_hitting_bound(q);
    CHECK(mh.from_first <= mh.worst);
    CHECK(mh.ratio > 0.0);
    const auto stats = zeta_hat_return_stats(chain, {FamilyCatalog::omega1_class(0, 0), {0, 0}},
                                             [](const ClassAt& c) { return c.cls == 0; }, R, 9, 0);
    CHECK(stats.censored == 0);
    CHECK(std::abs(stats.mean_time - mh.from_first) <= 3 * stats.se_time);
    // Off the ground states every rate carries one factor exp(-beta).
    const MeanHitting hotter = mean_hitting_bound(QuotientChain(t, 10.0));
    for (std::size_t i = 0; i < mh.from_neighbors.size(); ++i)
      CHECK(hotter.from_neighbors[i] / mh.from_neighbors[i] == doctest::Approx(std::exp(2.0)).epsilon(1e-9));
  }

  SUBCASE("tail bound from the escape constant") {
    const GammaRho g = gamma_rho_exact(t);
    const auto tail = ground_return_tail(q);
    for (int k = 5; k <= 10; ++k) {
      double at_least = 0.0;
      for (std::size_t j = k; j < tail.size(); ++j) at_least += tail[j];
      CHECK(at_least <= std::pow(g.gamma, (k - 4) / 3.0));
    }
  }
}

TEST_CASE("diffusion estimators") {
  SUBCASE("nearest-neighbour walk") {
    const RateTable t = walk_table();
    const TableChain chain(t, 0.0);
    std::vector<DisplacementPath> walks;
    for (std::uint64_t i = 0; i < 200; ++i) walks.push_back(zeta_hat_ground_walk(chain, 100.0, 21, i));
    const ThetaEstimate e = estimate_theta(walks);
    CHECK_FALSE(e.insufficient);
    CHECK(std::abs(e.msd_rate.value - 4.0) <= 3 * e.msd_rate.se);
    CHECK(std::abs(e.jump_rate.value - 4.0) <= 3 * e.jump_rate.se);
    CHECK(e.consistent());
    CHECK(e.departure_rate == doctest::Approx(4.0).epsilon(0.02));

    // Quadratic variation and jumps with theta = 1/4.
    const int ell = 4;
    std::vector<double> d11, d22, d12;
    for (const auto& w : walks) {
      const auto qv = quadratic_variation(w, ell, 0.25, {0.5, 1.0});
      d11.push_back(qv[1].z11);
      d22.push_back(qv[1].z22);
      d12.push_back(qv[1].z12);
      CHECK(qv[0].z11 <= qv[1].z11);
      CHECK(max_jump(w, ell, 0.25, 1.0) == doctest::Approx(1.0 / ell));
    }
    const Estimate a = mean_estimate(d11), b = mean_estimate(d22), c = mean_estimate(d12);
    CHECK(std::abs(a.value - 0.5) <= 3 * a.se);
    CHECK(std::abs(b.value - 0.5) <= 3 * b.se);
    CHECK(c.value == 0.0);  // unit steps never move both coordinates
  }

  SUBCASE("ground-class traces from simulated paths agree with the walk form") {
    const RateTable t = walk_table();
    StopCondition stop;
    stop.horizon = 50.0;
    std::vector<Path> traces;
    std::vector<DisplacementPath> walks;
    for (std::uint64_t i = 0; i < 50; ++i) {
      const Trajectory tr = simulate_zeta_hat(t, 0.0, {0, {0, 0}}, stop, 4, i);
      traces.push_back(trace(labelled_path(tr), in_gamma));
      walks.push_back(displacement_path(traces.back(), nullptr));
    }
    const ThetaEstimate a = estimate_theta(traces, nullptr);
    const ThetaEstimate b = estimate_theta(walks);
    CHECK(a.msd_rate.value == doctest::Approx(b.msd_rate.value));
    CHECK(a.jump_rate.value == doctest::Approx(b.jump_rate.value));
  }

  SUBCASE("table-driven chain: both estimators and the exact rate agree") {
    const RateTable& t = table5();
    const double beta = 8.0;
    const QuotientChain q(t, beta);
    const GroundCapacity g = ground_capacity(q);
    const TableChain chain(t, beta);
    const double horizon = 200.0 / q.exit_rate(0);
    std::vector<DisplacementPath> walks;
    for (std::uint64_t i = 0; i < 300; ++i) walks.push_back(zeta_hat_ground_walk(chain, horizon, 31, i));
    const ThetaEstimate e = estimate_theta(walks);
    CHECK(e.consistent());
    CHECK(std::abs(e.jump_rate.value - g.inverse_theta) <= 3 * e.jump_rate.se);
    CHECK(std::abs(e.msd_rate.value - g.inverse_theta) <= 3 * e.msd_rate.se);
    CHECK(1.0 / e.theta_hat >= g.lower * 0.9);
    CHECK(1.0 / e.theta_hat <= g.upper);
  }
}

TEST_CASE("confinement and centre of mass") {
  SUBCASE("a path held at the square") {
    SimulationParams p = params(30.0, 4, 9);
    StopCondition stop;
    stop.horizon = 1.0;
    const Trajectory tr = simulate_eta(square(4, 9), p, stop, 1, 0);
    REQUIRE(tr.events.empty());
    const Confinement c = confinement_fractions(tr);
    CHECK(c.outside_xi_star == 0.0);
    CHECK(c.outside_gamma == 0.0);
    CHECK_FALSE(c.exited);
    const CenterOfMassComparison m = center_of_mass_compare(tr);
    CHECK(m.sup_discrepancy == 0.0);
    CHECK(m.max_overshoot == 0.0);
  }

  SUBCASE("tracked membership matches a direct plateau search") {
    SimulationParams p = params(2.5, 4, 9);
    StopCondition stop;
    stop.max_events = 1500;
    const Trajectory tr = simulate_eta(square(4, 9), p, stop, 17, 0);
    const Confinement c = confinement_fractions(tr);
    const auto catalog = FamilyCatalog::get(4);
    Configuration cfg = tr.initial;
    double outside = 0.0, off_ground = 0.0, prev = 0.0, first = -1.0;
    auto account = [&](double until) {
      const double d = until - prev;
      if (!xi_star_membership(cfg, *catalog).member) {
        outside += d;
        if (first < 0) first = prev;
      }
      if (hamiltonian(cfg) != p.ground_energy()) off_ground += d;
      prev = until;
    };
    for (const Event& e : tr.events) {
      account(e.time);
      cfg.set(e.from, false);
      cfg.set(e.to, true);
    }
    account(tr.end_time);
    CHECK(c.outside_xi_star == doctest::Approx(outside / tr.end_time));
    CHECK(c.outside_gamma == doctest::Approx(off_ground / tr.end_time));
    CHECK(c.exited == (first >= 0));
    if (c.exited) CHECK(c.first_exit == doctest::Approx(first));
  }

  SUBCASE("exit stop condition ends at the first exit") {
    SimulationParams p = params(2.5, 4, 9);
    const Trajectory full = simulate_eta(square(4, 9), p, [] {
      StopCondition s;
      s.max_events = 1500;
      return s;
    }(), 17, 0);
    const Confinement c = confinement_fractions(full);
    REQUIRE(c.exited);
    const Trajectory cut = simulate_eta(square(4, 9), p, confinement_exit_stop(p, INFINITY, 1500), 17, 0);
    CHECK(cut.stop == StopReason::Hit);
    CHECK(cut.end_time == doctest::Approx(c.first_exit));
  }

  SUBCASE("centre of mass follows the ground trace") {
    SimulationParams p = params(5.0, 4, 9, 4);
    StopCondition stop;
    stop.max_events = 20000;
    const Trajectory tr = simulate_eta(square(4, 9), p, stop, 23, 0);
    const CenterOfMassComparison m = center_of_mass_compare(tr);
    CHECK(m.sup_discrepancy >= 0.0);
    CHECK(std::isfinite(m.sup_discrepancy));
    CHECK(m.max_overshoot <= tr.end_time);
    CHECK(m.compared_time <= tr.end_time);
  }
}

TEST_CASE("error budget and report") {
  const SimulationParams p = params(8.0, 5, 11, 4);
  const ErrorBudget a = error_budget(p, 1e6);
  const ErrorBudget b = error_budget(p, 1e6);
  CHECK(a.kappa1 == doctest::Approx(11 * std::exp(-4.0)));
  CHECK(a.kappa2 == doctest::Approx(625 * std::exp(-8.0) + 55 * std::exp(-4.0)));
  CHECK(a.e_beta == doctest::Approx(a.kappa1 + std::sqrt(std::pow(5.0, 7) * a.kappa2)));
  REQUIRE(a.regime.size() == 5);
  for (std::size_t i = 0; i < a.regime.size(); ++i) {
    CHECK(a.regime[i].value >= 0.0);
    CHECK(a.regime[i].value == b.regime[i].value);
    CHECK(a.regime[i].small == (a.regime[i].value <= 1.0));
  }

  ScalingReport r;
  r.params = p;
  r.engine = "zeta-hat";
  r.qv = {{1.0, 0.5, 0.49, 0.01}};
  r.tail = {{5, 0.01, 0.001, 0.011}, {6, 0.002, 0.0005, -1.0}};
  r.budget = a;
  r.inputs = {"run/manifest.json"};
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j["schema_version"] == ScalingReport::kSchemaVersion);
  CHECK(j["inputs"][0] == "run/manifest.json");
  CHECK(j["tail"]["rows"][1].contains("exact") == false);
  CHECK(r.qv_csv().rfind("t,z11,z22,z12\n", 0) == 0);
  CHECK(r.tail_csv().find("6,0.002,0.0005,\n") != std::string::npos);
}
