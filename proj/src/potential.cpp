#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include <Eigen/Dense>

#include "kawasaki/scaling.hpp"

namespace kawasaki {

CapacityResult capacity(const FiniteChain& chain, const std::vector<int>& A, const std::vector<int>& B) {
  const int N = chain.size();
  if (int(chain.rates.size()) != N) throw std::invalid_argument("capacity: rates and measure differ in size");
  if (A.empty() || B.empty()) throw std::invalid_argument("capacity: A and B must be nonempty");
  std::vector<int> role(N, 0);  // 1 in A, 2 in B
  for (int x : A) role.at(x) = 1;
  for (int x : B) {
    if (role.at(x) == 1) throw std::invalid_argument("capacity: A and B intersect");
    role[x] = 2;
  }
  CapacityResult r;
  r.chain_id = chain.id;

  for (int x : A)
    for (const auto& [y, rate] : chain.rates[x])
      if (role[y] != 1) r.dirichlet_upper += chain.measure[x] * rate;

  // Undirected adjacency; the chain is reversible so both directions carry
  // the same conductance.
  std::vector<std::vector<std::pair<int, double>>> adj(N);
  for (int x = 0; x < N; ++x)
    for (const auto& [y, rate] : chain.rates[x])
      if (rate > 0.0 && y != x) {
        const double c = chain.measure[x] * rate;
        adj[x].push_back({y, c});
        adj[y].push_back({x, c});
      }
  std::vector<char> reach_b(N, 0);
  std::vector<int> stack;
  for (int x : B) {
    reach_b[x] = 1;
    stack.push_back(x);
  }
  while (!stack.empty()) {
    const int x = stack.back();
    stack.pop_back();
    if (role[x] == 1) continue;  // paths stop at A
    for (const auto& [y, c] : adj[x])
      if (!reach_b[y]) {
        reach_b[y] = 1;
        stack.push_back(y);
      }
  }
  bool linked = false;
  for (int x : A) linked = linked || reach_b[x];
  if (!linked) {
    r.connected = false;
    r.diagnostic = "A and B are not connected";
    return r;
  }

  // Equilibrium potential: 1 on A and on states that cannot reach B.
  std::vector<int> idx(N, -1);
  int ni = 0;
  for (int x = 0; x < N; ++x)
    if (role[x] == 0 && reach_b[x]) idx[x] = ni++;
  std::vector<double> h(N, 0.0);
  for (int x = 0; x < N; ++x)
    if (role[x] == 1 || (role[x] == 0 && !reach_b[x])) h[x] = 1.0;
  if (ni > 0) {
    Triplets trip;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(ni);
    for (int x = 0; x < N; ++x) {
      if (idx[x] < 0) continue;
      double out = 0.0;
      for (const auto& [y, rate] : chain.rates[x]) {
        if (y == x) continue;
        out += rate;
        if (idx[y] >= 0)
          trip.emplace_back(idx[x], idx[y], -rate);
        else
          b[idx[x]] += rate * h[y];
      }
      trip.emplace_back(idx[x], idx[x], out);
    }
    // Row scaling keeps the residual test meaningful for tiny rates.
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(ni);
    for (const auto& t : trip)
      if (t.row() == t.col()) scale[t.row()] = 1.0 / t.value();
    Triplets scaled;
    for (const auto& t : trip) scaled.emplace_back(t.row(), t.col(), t.value() * scale[t.row()]);
    const SparseSolver solver(make_sparse(ni, ni, scaled));
    const Eigen::VectorXd x = solver.solve(b.cwiseProduct(scale));
    for (int s = 0; s < N; ++s)
      if (idx[s] >= 0) h[s] = x[idx[s]];
  }
  for (int x : A)
    for (const auto& [y, rate] : chain.rates[x]) r.exact += chain.measure[x] * rate * (1.0 - h[y]);

  // Thomson: a unit flow along the path of least resistance.
  std::vector<double> dist(N, INFINITY);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (int x : A) {
    dist[x] = 0.0;
    pq.push({0.0, x});
  }
  double best = INFINITY;
  while (!pq.empty()) {
    const auto [d, x] = pq.top();
    pq.pop();
    if (d > dist[x]) continue;
    if (role[x] == 2) {
      best = d;
      break;
    }
    for (const auto& [y, c] : adj[x]) {
      const double nd = d + 1.0 / c;
      if (nd < dist[y]) {
        dist[y] = nd;
        pq.push({nd, y});
      }
    }
  }
  r.thomson_lower = std::isfinite(best) ? 1.0 / best : 0.0;
  return r;
}

FiniteChain unfold_table_chain(const QuotientChain& q) {
  const RateTable& t = q.table();
  const Torus& torus = q.torus();
  const int sites = torus.num_sites();
  const auto pi = q.stationary();
  FiniteChain f;
  f.id = "table-chain n=" + std::to_string(t.n()) + " L=" + std::to_string(t.L()) + " table=" + t.hash();
  f.measure.resize(std::size_t(q.num_classes()) * sites);
  f.rates.resize(f.measure.size());
  for (int c = 0; c < q.num_classes(); ++c) {
    const double pre = std::exp(-q.beta() * RateTable::prefactor_power(c));
    for (int s = 0; s < sites; ++s) {
      const int x = c * sites + s;
      f.measure[x] = pi[c] / sites;
      for (const RateEntry& e : t.row(c)) {
        const int to = torus.index(torus.wrap(torus.coords(s) + e.offset));
        f.rates[x].push_back({e.target * sites + to, pre * e.value});
      }
    }
  }
  return f;
}

GroundCapacity ground_capacity(const QuotientChain& q) {
  const auto P = q.ground_return_law();
  const Torus& torus = q.torus();
  GroundCapacity g;
  const double lambda = q.exit_rate(FamilyCatalog::gamma_class());
  g.return_probability = P[torus.index({0, 0})];
  double msd = 0.0;
  for (int s = 0; s < torus.num_sites(); ++s) msd += double(squared_norm(torus.coords(s))) * P[s];
  g.normalized = lambda * (1.0 - g.return_probability);
  g.inverse_theta = lambda * msd;
  g.lower = g.normalized;
  g.upper = 2.0 * double(q.table().L()) * q.table().L() * g.normalized;
  return g;
}

GammaRho gamma_rho_exact(const RateTable& table) {
  GammaRho out;
  out.rho = neighborhood_escape_probability(table);
  const QuotientChain q(table, 0.0);
  std::vector<int> lying;
  for (int j = 0; j < 4; ++j) lying.push_back(FamilyCatalog::omega3_class(Orientation::Lying, j));
  std::vector<int> absorbing{FamilyCatalog::gamma_class()};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) absorbing.push_back(FamilyCatalog::omega1_class(i, j));
  absorbing.insert(absorbing.end(), lying.begin(), lying.end());
  const auto laws = q.landing(absorbing, lying);

  // Renewal over returns to the lying rectangles at the origin.
  Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
  Eigen::Vector4d a = Eigen::Vector4d::Zero();
  for (int j = 0; j < 4; ++j) {
    out.leak = std::max(out.leak, std::abs(1.0 - laws[j].total()));
    for (std::size_t k = 0; k < absorbing.size(); ++k) {
      const auto it = std::find(lying.begin(), lying.end(), absorbing[k]);
      if (it == lying.end()) continue;
      const int jj = int(it - lying.begin());
      for (int s = 0; s < q.torus().num_sites(); ++s) {
        const double v = laws[j].mass[k][s];
        if (q.torus().coords(s) == Site{0, 0})
          Q(j, jj) += v;
        else
          a[j] += v;
      }
    }
  }
  const Eigen::Vector4d p = (Eigen::Matrix4d::Identity() - Q).fullPivLu().solve(a);
  out.lying_escape.assign(p.data(), p.data() + 4);
  out.lying_escape_max = p.maxCoeff();
  out.gamma = out.rho + (1.0 - out.rho) * out.lying_escape_max;
  return out;
}

MeanHitting mean_hitting_bound(const QuotientChain& q) {
  const auto t = q.mean_hitting_time({FamilyCatalog::gamma_class()});
  MeanHitting m;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double v = t[FamilyCatalog::omega1_class(i, j)];
      m.from_neighbors.push_back(v);
      m.worst = std::max(m.worst, v);
    }
  m.from_first = t[FamilyCatalog::omega1_class(0, 0)];
  m.scale = double(q.num_classes()) * std::exp(q.beta());
  m.ratio = m.worst / m.scale;
  return m;
}

std::vector<double> ground_return_tail(const QuotientChain& q) {
  const auto P = q.ground_return_law();
  const Torus& torus = q.torus();
  std::vector<double> tail(2 * q.table().L() + 1, 0.0);
  for (int s = 0; s < torus.num_sites(); ++s) tail[sum_norm(torus.coords(s))] += P[s];
  return tail;
}

}  // namespace kawasaki
