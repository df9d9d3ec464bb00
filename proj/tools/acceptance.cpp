// Acceptance run: evaluates every criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion, with the measured values below it.
// --scale multiplies the Monte Carlo replica counts.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "kawasaki/cli.hpp"

using namespace kawasaki;

namespace {

struct Outcome {
  bool pass = false;
  std::string summary;
  std::vector<std::string> details;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double scale = 1.0;
std::uint64_t replicas(double base) { return std::max<std::uint64_t>(10, std::uint64_t(std::llround(base * scale))); }

Configuration square_at_origin(int n, int L) { return Configuration::from_sites(make_torus(L), square_sites(n)); }

SimulationParams params(double beta, int n, int L, int ell) {
  SimulationParams p;
  p.beta = beta;
  p.n = n;
  p.L = L;
  p.ell = ell;
  return p;
}

// ------------------------------------------------------------------------ 1

Outcome square_moves() {
  Outcome o{true, "", {}};
  for (int n : {4, 5, 6}) {
    const auto counts = count_moves_by_delta(enumerate_active_moves(square_at_origin(n, 2 * n + 1)));
    const int two = counts[2 + 3], three = counts[3 + 3], low = counts[1 + 3];
    const bool ok = two == 8 && three == 4 * (n - 2) && low == 0;
    o.pass = o.pass && ok;
    o.details.push_back(fmt("n=%d: %d moves with dH=2 (want 8), %d with dH=3 (want %d), %d with dH=1", n, two, three,
                            4 * (n - 2), low));
  }
  o.summary = "square move counts";
  return o;
}

// ------------------------------------------------------------------------ 2

Outcome ground_energy() {
  Outcome o{true, "", {}};
  for (int n : {4, 5, 6}) {
    const int L = 2 * n + 1;
    const auto torus = make_torus(L);
    const long ground = -2L * n * (n - 1);
    long worst_anchor = 0;
    bool anchors_ok = true;
    for (int i = 0; i < torus->num_sites(); ++i) {
      const Configuration c = square_at_origin(n, L).translated(torus->coords(i));
      const long h = hamiltonian(c);
      anchors_ok = anchors_ok && h == ground;
      worst_anchor = std::max(worst_anchor, h - ground);
    }
    Rng rng(2024, n);
    std::vector<int> sites(torus->num_sites());
    long lowest = std::numeric_limits<long>::max();
    const int samples = 100'000;
    for (int s = 0; s < samples; ++s) {
      std::iota(sites.begin(), sites.end(), 0);
      Configuration c(torus);
      for (int k = 0; k < n * n; ++k) {
        const int j = k + int(rng.below(sites.size() - k));
        std::swap(sites[k], sites[j]);
        c.set(sites[k], true);
      }
      lowest = std::min(lowest, hamiltonian(c));
    }
    const bool ok = anchors_ok && lowest >= ground;
    o.pass = o.pass && ok;
    o.details.push_back(fmt("n=%d: all %d anchors at %ld: %s; lowest of %d random configurations %ld", n,
                            torus->num_sites(), ground, anchors_ok ? "yes" : "no", samples, lowest));
  }
  o.summary = "ground energy";
  return o;
}

// ------------------------------------------------------------------------ 3

Outcome exact_rates() {
  Outcome o{true, "", {}};
  for (int n : {4, 5, 6}) {
    const int L = 2 * n + 1;
    PlateauExplorer explorer(n, L);
    RateTable table(n, L);
    std::vector<int> all(table.num_classes());
    std::iota(all.begin(), all.end(), 0);
    fill_rows(table, explorer, all);
    const RateAudit audit = audit_rate_table(table, explorer, true);
    int failed = 0;
    for (const AuditCheck& c : audit.checks)
      if (!c.pass) {
        ++failed;
        o.details.push_back(fmt("n=%d: audit check failed: %s (value %.6g, bound %.6g)", n, c.name.c_str(), c.value,
                                c.bound));
      }
    // Rational-mode rectangle rates, checked against the integers here.
    const Rational same = omega2_rate_exact(explorer, 0, 0);
    const Rational next = omega2_rate_exact(explorer, 0, 1);
    const bool exact_ok = same == Rational(1, n) && next == Rational(1, n) + Rational(1, n - 1);
    const PathAudit path = sliding_path_audit(table);
    const bool path_ok = std::min(path.head[0], path.tail[0]) >= 1.0 / 6.0 &&
                         std::min({path.head[1], path.head[2], path.tail[1], path.tail[2]}) >= 1.0 &&
                         std::min(path.head[3], path.tail[3]) >= 1.0 / n && path.reachable &&
                         path.middle_bottleneck >= 1.0 / n;
    const bool ok = audit.pass() && exact_ok && path_ok;
    o.pass = o.pass && ok;
    o.details.push_back(fmt("n=%d: %zu audit checks, %d failed; same-side %s, next-side %s; path head %.4g %.4g %.4g "
                            "%.4g, middle %.4g",
                            n, audit.checks.size(), failed, same.get_str().c_str(), next.get_str().c_str(),
                            path.head[0], path.head[1], path.head[2], path.head[3], path.middle_bottleneck));
  }
  o.summary = "exact rate identities, symmetry and lower bounds";
  return o;
}

// ------------------------------------------------------------------------ 4

Outcome neighbourhood_escape() {
  Outcome o{true, "", {}};
  for (int n = 9; n <= 14; ++n) {
    const int L = 2 * n + 1;
    RateTableOptions opt;
    opt.classes.push_back(FamilyCatalog::gamma_class());
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) opt.classes.push_back(FamilyCatalog::omega1_class(i, j));
    const RateTable table = build_rate_table(n, L, opt);
    const double p = neighborhood_escape_probability(table);
    const bool ok = p <= 23.0 / n;
    o.pass = o.pass && ok;
    o.details.push_back(fmt("n=%d: escape probability %.6f, bound %.6f", n, p, 23.0 / n));
  }
  o.summary = "escape from the first-shell neighbourhood";
  return o;
}

// ------------------------------------------------------------------------ 5

Outcome same_side_return() {
  Outcome o{true, "", {}};
  const int n = 4, L = 9;
  const ClosedFormP cf = closed_form_P(n, L);
  const std::uint64_t R = replicas(100'000);
  std::vector<double> betas{7.0, 8.0, 9.0}, d, se;
  for (double beta : betas) {
    const auto st = eta_return_stats(square_at_origin(n, L), params(beta, n, L, 1), in_xi, R, 5 + int(beta), 0);
    const double p = st.frequency({FamilyCatalog::omega1_class(0, 0), {0, 0}});
    d.push_back(std::abs(p - cf.to_same_side));
    se.push_back(std::sqrt(cf.to_same_side * (1 - cf.to_same_side) / double(R - st.censored)));
    o.details.push_back(fmt("beta=%.0f: %.6f from %llu excursions (%llu censored), closed form %.6f, |diff| %.2e, "
                            "se %.2e",
                            beta, p, (unsigned long long)R, (unsigned long long)st.censored, cf.to_same_side, d.back(),
                            se.back()));
  }
  // Envelope C L e^{-beta/2}, C by weighted least squares on |diff|.
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    const double g = L * std::exp(-betas[i] / 2);
    num += d[i] * g / (se[i] * se[i]);
    den += g * g / (se[i] * se[i]);
  }
  const double C = std::max(0.0, num / den);
  for (std::size_t i = 0; i < betas.size(); ++i) {
    const double env = 3 * se[i] + C * L * std::exp(-betas[i] / 2);
    const bool in = d[i] <= env;
    o.pass = o.pass && in;
    if (i > 0) {
      const bool down = d[i] <= d[i - 1] + 3 * std::hypot(se[i], se[i - 1]);
      o.pass = o.pass && down;
      if (!down) o.details.push_back(fmt("discrepancy grows beyond noise from beta=%.0f", betas[i]));
    }
    if (!in) o.details.push_back(fmt("beta=%.0f outside the envelope %.2e", betas[i], env));
  }
  o.details.push_back(fmt("fitted C = %.4g", C));
  o.summary = "full-dynamics return to the same-side well";
  return o;
}

// ------------------------------------------------------------------------ 6

Outcome capacity_sandwich() {
  Outcome o{true, "", {}};
  const double beta = 8.0;
  std::vector<double> lower, upper;
  bool inside = true;
  for (int n = 4; n <= 8; ++n) {
    const RateTable table = build_rate_table(n, 2 * n + 1);
    const GroundCapacity g = ground_capacity(QuotientChain(table, beta));
    const double kappa = g.normalized * std::exp(2 * beta);
    lower.push_back(kappa * n * n);
    upper.push_back(kappa * n);
    const bool ok = g.lower <= g.inverse_theta && g.inverse_theta <= g.upper;
    inside = inside && ok;
    o.details.push_back(fmt("n=%d: capacity e^{2beta} %.6f, n^2 x = %.4f, n x = %.4f, inverse theta e^{2beta} %.6f in "
                            "[%.6f, %.6f]: %s",
                            n, kappa, kappa * n * n, kappa * n, g.inverse_theta * std::exp(2 * beta),
                            g.lower * std::exp(2 * beta), g.upper * std::exp(2 * beta), ok ? "yes" : "no"));
  }
  const double c = *std::min_element(lower.begin(), lower.end());
  const double C = *std::max_element(upper.begin(), upper.end());
  const double spread_c = *std::max_element(lower.begin(), lower.end()) / c;
  const double spread_C = C / *std::min_element(upper.begin(), upper.end());
  o.pass = inside && spread_c < 2.0 && spread_C < 2.0;
  o.details.push_back(fmt("fitted c = %.4f (variation %.3fx), C = %.4f (variation %.3fx)", c, spread_c, C, spread_C));
  o.summary = "capacity sandwich and diffusion-rate bounds";
  return o;
}

// ------------------------------------------------------------------------ 7

Outcome brownian() {
  Outcome o{true, "", {}};
  const int n = 5, L = 11;
  const double beta = 8.0;
  const RateTable table = build_rate_table(n, L);
  const QuotientChain q(table, beta);
  const double theta = 1.0 / ground_capacity(q).inverse_theta;
  const TableChain chain(table, beta);
  const std::uint64_t R = replicas(1000);
  std::vector<double> median_jump;
  for (int ell : {4, 8}) {
    std::vector<double> z11, z22, z12, jumps;
    std::vector<long> x;
    for (std::uint64_t i = 0; i < R; ++i) {
      const DisplacementPath d = zeta_hat_ground_walk(chain, double(ell) * ell * theta, 7 + ell, i);
      const QvPoint v = quadratic_variation(d, ell, theta, {1.0}).front();
      z11.push_back(v.z11);
      z22.push_back(v.z22);
      z12.push_back(v.z12);
      jumps.push_back(max_jump(d, ell, theta, 1.0));
      x.push_back(displacement_at(d, double(ell) * ell * theta).x);
    }
    const Estimate a = mean_estimate(z11), b = mean_estimate(z22), c = mean_estimate(z12);
    const bool qv_ok = std::abs(a.value - 0.5) <= 3 * a.se && std::abs(b.value - 0.5) <= 3 * b.se &&
                       std::abs(c.value) <= 3 * c.se;
    o.pass = o.pass && qv_ok;
    median_jump.push_back(median(jumps));
    o.details.push_back(fmt("ell=%d: [Z1] %.4f +- %.4f, [Z2] %.4f +- %.4f, cross %.4f +- %.4f, median max jump %.4f",
                            ell, a.value, a.se, b.value, b.se, c.value, c.se, median_jump.back()));
    if (ell == 8) {
      const ChiSquareResult chi = lattice_normality_test(x, ell / std::sqrt(2.0));
      o.pass = o.pass && chi.p_value > 0.01;
      o.details.push_back(fmt("ell=8: normality of X1 at t=1: chi2 %.3f on %.0f dof, p = %.4f", chi.statistic, chi.dof,
                              chi.p_value));
    }
  }
  const double ratio = median_jump[1] / median_jump[0];
  o.pass = o.pass && ratio >= 0.35 && ratio <= 0.65;
  o.details.push_back(fmt("median max jump ratio ell=8 / ell=4: %.4f (want 0.5 +- 30%%)", ratio));
  o.details.push_back(fmt("%llu replicas per ell, theta from the exact solve", (unsigned long long)R));
  o.summary = "Brownian diagnostics of the rescaled droplet";
  return o;
}

// ------------------------------------------------------------------------ 8

Outcome long_jump_tail() {
  Outcome o{true, "", {}};
  const int n = 4, L = 9;
  const double beta = 8.0;
  const RateTable table = build_rate_table(n, L);
  const GammaRho gr = gamma_rho_exact(table);
  const auto exact = ground_return_tail(QuotientChain(table, beta));
  const TableChain chain(table, beta);
  const auto torus = make_torus(L);
  const std::uint64_t R = replicas(100'000);
  const auto st = zeta_hat_return_stats(chain, {0, {0, 0}}, [](const ClassAt& c) { return c.cls == 0; }, R, 13, 0);
  std::vector<std::uint64_t> at(2 * L + 1, 0);
  for (const auto& [c, k] : st.landing) at[sum_norm(torus->wrap(c.anchor))] += k;
  for (int k = 5; k <= 10; ++k) {
    std::uint64_t hits = 0;
    double ex = 0.0;
    for (int j = k; j <= 2 * L; ++j) {
      hits += at[j];
      ex += exact[j];
    }
    const Estimate e = proportion_estimate(hits, R);
    const double bound = std::pow(gr.gamma, (k - 4) / 3.0);
    const bool ok = e.value <= bound + 3 * e.se;
    o.pass = o.pass && ok;
    o.details.push_back(fmt("k=%d: P[distance >= k] %.3e +- %.1e (exact %.3e), bound %.4f", k, e.value, e.se, ex, bound));
  }
  o.details.push_back(fmt("gamma = %.6f, %llu returns", gr.gamma, (unsigned long long)R));
  o.summary = "long-jump tail of the return law";
  return o;
}

// ------------------------------------------------------------------------ 9

Outcome confinement() {
  Outcome o{true, "", {}};
  const int n = 4, L = 9, ell = 4;
  const RateTable table = build_rate_table(n, L);
  const std::uint64_t R = replicas(200);
  std::vector<double> p;
  std::vector<double> se;
  for (double beta : {6.0, 7.0, 8.0, 9.0}) {
    const SimulationParams prm = params(beta, n, L, ell);
    const double horizon = double(ell) * ell / ground_capacity(QuotientChain(table, beta)).inverse_theta;
    std::uint64_t exits = 0;
    std::vector<double> first;
    for (std::uint64_t i = 0; i < R; ++i) {
      const Trajectory t = simulate_eta(square_at_origin(n, L), prm, confinement_exit_stop(prm, horizon, 2'000'000'000),
                                        21, i);
      if (t.stop == StopReason::Hit) {
        ++exits;
        first.push_back(t.end_time / horizon);
      }
    }
    const Estimate e = proportion_estimate(exits, R);
    p.push_back(e.value);
    se.push_back(e.se);
    o.details.push_back(fmt("beta=%.0f: exit probability %.4f +- %.4f over horizon %.4g (%llu replicas), median exit "
                            "at %.3g horizons",
                            beta, e.value, e.se, horizon, (unsigned long long)R, first.empty() ? 0.0 : median(first)));
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < p.size(); ++i)
    decreasing = decreasing && p[i] <= p[i - 1] + 3 * std::hypot(se[i], se[i - 1]) && !(p[i] == 1.0 && p[i - 1] == 1.0);
  o.pass = decreasing && p.back() < 0.05;
  o.summary = "confinement to the family neighbourhood";
  return o;
}

// ----------------------------------------------------------------------- 10

Outcome coupling() {
  Outcome o{true, "", {}};
  const int n = 4, L = 9;
  const RateTable table = build_rate_table(n, L);
  std::vector<double> medians;
  const std::uint64_t R = replicas(2000);
  for (double beta : {8.0, 10.0}) {
    const SimulationParams prm = params(beta, n, L, 1);
    const double ground_time = std::exp(2 * beta) / table.exit_rate(FamilyCatalog::gamma_class());
    // Many short runs from the square keep the event logs small.
    const TraceRateEstimate est = estimate_trace_rates(prm, 0.5 * ground_time, replicas(400), 31 + int(beta), 0);
    const double horizon = 50 * ground_time;
    std::vector<double> sep;
    double alpha = 0.0;
    for (std::uint64_t i = 0; i < R; ++i) {
      const CoupledRun run = couple_zeta_zetahat(est, table, beta, {0, {0, 0}}, horizon, 37 + int(beta), i);
      alpha = std::max(alpha, run.alpha);
      sep.push_back(run.separation);
    }
    bool dominated = true;
    for (double f : {0.01, 0.1, 0.5, 1.0, 5.0, 20.0, 50.0}) {
      const double t = f * ground_time;
      double frac = 0.0;
      for (double s : sep) frac += s <= t;
      frac /= double(R);
      const double bound = 1.0 - std::exp(-alpha * t);
      const bool ok = frac <= bound + 3.0 * std::sqrt(std::max(bound * (1 - bound), 1.0 / double(R)) / double(R));
      dominated = dominated && ok;
      if (!ok) o.details.push_back(fmt("beta=%.0f: P[T <= %.3g] = %.4f above bound %.4f", beta, t, frac, bound));
    }
    medians.push_back(median(sep));
    o.pass = o.pass && dominated;
    o.details.push_back(fmt("beta=%.0f: alpha %.4e, median separation %.4g (%.3g ground holding times)", beta, alpha,
                            medians.back(), medians.back() / ground_time));
  }
  o.pass = o.pass && medians[1] > medians[0];
  o.summary = "coupling of the trace and table-driven chains";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only, known;
  std::string output;
  app.add_option("--only", only, "criteria to run (default: all)");
  app.add_option("--scale", scale, "multiplier on Monte Carlo replica counts");
  app.add_option("--known-failures", known,
                 "criteria whose failure is expected; the exit status is zero when the outcomes match this list")
      ->delimiter(',');
  app.add_option("--output", output, "also write the lines to this file");
  CLI11_PARSE(app, argc, argv);
  std::ostringstream out;

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, square_moves},      {2, ground_energy},     {3, exact_rates}, {4, neighbourhood_escape},
      {5, same_side_return},  {6, capacity_sandwich}, {7, brownian},    {8, long_jump_tail},
      {9, confinement},       {10, coupling}};
  int failed = 0, unexpected = 0;
  std::vector<int> failures;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, "error", {e.what()}};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream block;
    block << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.summary
          << fmt("  (%.1f s)", secs) << "\n";
    for (const auto& d : o.details) block << "    " << d << "\n";
    std::cout << block.str() << std::flush;
    out << block.str();
    const bool expected_failure = std::find(known.begin(), known.end(), id) != known.end();
    failed += !o.pass;
    unexpected += o.pass == expected_failure;
    if (!o.pass) failures.push_back(id);
  }
  std::ostringstream tail;
  tail << "summary: " << failed << " failed";
  for (int id : failures) tail << " " << id;
  if (!known.empty()) tail << "; " << unexpected << " outcome(s) differ from the known-failure list";
  tail << "\n";
  std::cout << tail.str();
  out << tail.str();
  if (!output.empty()) std::ofstream(output) << out.str();
  return (known.empty() ? failed : unexpected) == 0 ? 0 : 1;
}
