#include <algorithm>
#include <stdexcept>
#include <unordered_map>

#include "kawasaki/plateau.hpp"

namespace kawasaki {

namespace {

struct WalkSystem {
  std::vector<int> transient;              // site ids, BFS order from the start
  std::unordered_map<int, int> position;   // site id -> transient index
  std::vector<int> absorbing_ids;
  std::unordered_map<int, int> absorbing_pos;
};

// Transient sites reachable from `start` without touching the absorbing set.
WalkSystem build_system(const Torus& torus, Site start, const std::vector<Site>& absorbing) {
  if (absorbing.empty()) throw std::invalid_argument("harmonic_measure: absorbing set is empty");
  WalkSystem w;
  for (const Site& s : absorbing) {
    const int id = torus.index(s);
    if (w.absorbing_pos.emplace(id, int(w.absorbing_ids.size())).second) w.absorbing_ids.push_back(id);
  }
  const int s0 = torus.index(start);
  if (w.absorbing_pos.count(s0)) return w;
  w.position.emplace(s0, 0);
  w.transient.push_back(s0);
  bool reaches = false;
  for (std::size_t head = 0; head < w.transient.size(); ++head) {
    for (int y : torus.neighbors(w.transient[head])) {
      if (w.absorbing_pos.count(y)) {
        reaches = true;
        continue;
      }
      if (w.position.emplace(y, int(w.transient.size())).second) w.transient.push_back(y);
    }
  }
  if (!reaches) throw std::invalid_argument("harmonic_measure: absorbing set unreachable from start");
  return w;
}

std::vector<char> target_mask(const WalkSystem& w, const Torus& torus, const std::vector<Site>& targets) {
  std::vector<char> mask(w.absorbing_ids.size(), 0);
  for (const Site& t : targets) {
    auto it = w.absorbing_pos.find(torus.index(t));
    if (it != w.absorbing_pos.end()) mask[it->second] = 1;
  }
  return mask;
}

}  // namespace

// The jump chain is symmetric, so the expected visit counts from the start
// solve (I - P_TT) g = e_start and the exit law is g P_TA.
HarmonicMeasure harmonic_measure(const Torus& torus, Site start, const std::vector<Site>& targets,
                                 const std::vector<Site>& absorbing) {
  const WalkSystem w = build_system(torus, start, absorbing);
  HarmonicMeasure out;
  out.mass.assign(w.absorbing_ids.size(), 0.0);
  const auto mask = target_mask(w, torus, targets);
  if (w.transient.empty()) {
    const int a = w.absorbing_pos.at(torus.index(start));
    out.mass[a] = 1.0;
    out.target_mass = mask[a] ? 1.0 : 0.0;
    return out;
  }
  const int m = int(w.transient.size());
  Triplets t;
  t.reserve(5 * m);
  for (int i = 0; i < m; ++i) {
    t.emplace_back(i, i, 1.0);
    for (int y : torus.neighbors(w.transient[i])) {
      auto it = w.position.find(y);
      if (it != w.position.end()) t.emplace_back(i, it->second, -0.25);
    }
  }
  SparseSolver solver(make_sparse(m, m, t));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs[0] = 1.0;
  const Eigen::VectorXd g = solver.solve(rhs);
  out.residual = solver.last_residual();
  for (int i = 0; i < m; ++i) {
    for (int y : torus.neighbors(w.transient[i])) {
      auto it = w.absorbing_pos.find(y);
      if (it != w.absorbing_pos.end()) out.mass[it->second] += 0.25 * g[i];
    }
  }
  for (std::size_t a = 0; a < out.mass.size(); ++a)
    if (mask[a]) out.target_mass += out.mass[a];
  return out;
}

HarmonicMeasureExact harmonic_measure_exact(const Torus& torus, Site start, const std::vector<Site>& targets,
                                            const std::vector<Site>& absorbing) {
  const WalkSystem w = build_system(torus, start, absorbing);
  HarmonicMeasureExact out;
  out.mass.assign(w.absorbing_ids.size(), Rational(0));
  out.target_mass = 0;
  const auto mask = target_mask(w, torus, targets);
  if (w.transient.empty()) {
    const int a = w.absorbing_pos.at(torus.index(start));
    out.mass[a] = 1;
    if (mask[a]) out.target_mass = 1;
    return out;
  }
  // Generator scaled by 4 keeps the matrix integral.
  const int m = int(w.transient.size());
  RationalMatrix a(m);
  for (int i = 0; i < m; ++i) {
    a.add(i, i, 4);
    for (int y : torus.neighbors(w.transient[i])) {
      auto it = w.position.find(y);
      if (it != w.position.end()) a.add(i, it->second, -1);
    }
  }
  std::vector<Rational> rhs(m, Rational(0));
  rhs[0] = 1;
  const auto g = solve_rational(std::move(a), std::move(rhs));
  for (int i = 0; i < m; ++i) {
    for (int y : torus.neighbors(w.transient[i])) {
      auto it = w.absorbing_pos.find(y);
      if (it != w.absorbing_pos.end()) out.mass[it->second] += g[i];
    }
  }
  for (std::size_t k = 0; k < out.mass.size(); ++k)
    if (mask[k]) out.target_mass += out.mass[k];
  return out;
}

std::vector<Site> square_outer_boundary(int n) {
  std::vector<Site> out;
  out.reserve(4 * n);
  for (int a = 0; a < n; ++a) {
    out.push_back({a, -1});
    out.push_back({n, a});
    out.push_back({a, n});
    out.push_back({-1, a});
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace kawasaki
