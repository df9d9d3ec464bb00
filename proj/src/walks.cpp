#include <cmath>
#include <map>
#include <stdexcept>

#include "kawasaki/plateau.hpp"

namespace kawasaki {

namespace {

// Rate-one walk on a small graph. label[v] < 0 marks a transient node,
// otherwise the absorbing class of v.
struct SmallChain {
  std::vector<std::vector<int>> nbr;
  std::vector<int> label;
  int num_labels = 0;

  int add(int lab = -1) {
    nbr.emplace_back();
    label.push_back(lab);
    return int(label.size()) - 1;
  }
  void link(int a, int b) {
    nbr[a].push_back(b);
    nbr[b].push_back(a);
  }
};

struct Indexing {
  std::vector<int> transient;
  std::vector<int> pos;
};

Indexing index_transient(const SmallChain& c) {
  Indexing ix;
  ix.pos.assign(c.label.size(), -1);
  for (int v = 0; v < int(c.label.size()); ++v)
    if (c.label[v] < 0) {
      ix.pos[v] = int(ix.transient.size());
      ix.transient.push_back(v);
    }
  return ix;
}

std::vector<double> exit_law(const SmallChain& c, int start) {
  std::vector<double> out(c.num_labels, 0.0);
  if (c.label[start] >= 0) {
    out[c.label[start]] = 1.0;
    return out;
  }
  const Indexing ix = index_transient(c);
  const int m = int(ix.transient.size());
  Triplets t;
  for (int i = 0; i < m; ++i) {
    const int v = ix.transient[i];
    t.emplace_back(i, i, double(c.nbr[v].size()));
    for (int u : c.nbr[v])
      if (ix.pos[u] >= 0) t.emplace_back(i, ix.pos[u], -1.0);
  }
  // Symmetric generator: visit densities from the start give the exit law.
  SparseSolver solver(make_sparse(m, m, t));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs[ix.pos[start]] = 1.0;
  const Eigen::VectorXd g = solver.solve(rhs);
  for (int i = 0; i < m; ++i)
    for (int u : c.nbr[ix.transient[i]])
      if (c.label[u] >= 0) out[c.label[u]] += g[i];
  return out;
}

std::vector<Rational> exit_law_exact(const SmallChain& c, int start) {
  std::vector<Rational> out(c.num_labels, Rational(0));
  if (c.label[start] >= 0) {
    out[c.label[start]] = 1;
    return out;
  }
  const Indexing ix = index_transient(c);
  const int m = int(ix.transient.size());
  RationalMatrix a(m);
  for (int i = 0; i < m; ++i) {
    const int v = ix.transient[i];
    a.add(i, i, int(c.nbr[v].size()));
    for (int u : c.nbr[v])
      if (ix.pos[u] >= 0) a.add(i, ix.pos[u], -1);
  }
  std::vector<Rational> rhs(m, Rational(0));
  rhs[ix.pos[start]] = 1;
  const auto g = solve_rational(std::move(a), std::move(rhs));
  for (int i = 0; i < m; ++i)
    for (int u : c.nbr[ix.transient[i]])
      if (c.label[u] >= 0) out[c.label[u]] += g[i];
  return out;
}

// Labels: 0 top row, 1 the corner state.
SmallChain q_chain(int n, int& start) {
  if (n < 2) throw std::invalid_argument("q_walk: n must be at least 2");
  SmallChain c;
  c.num_labels = 2;
  std::map<std::pair<int, int>, int> id;
  id[{0, 0}] = c.add(1);
  for (int j = 0; j < n; ++j)
    for (int k = j + 1; k < n; ++k) id[{j, k}] = c.add(k == n - 1 ? 0 : -1);
  for (const auto& [p, v] : id) {
    auto right = id.find({p.first + 1, p.second});
    auto up = id.find({p.first, p.second + 1});
    if (right != id.end()) c.link(v, right->second);
    if (up != id.end()) c.link(v, up->second);
  }
  start = id.at({0, 1});
  return c;
}

// Labels: 0 upper row, 1 lower row without the corner, 2 the corner.
SmallChain r_chain(int n, std::vector<int>& row_one) {
  if (n < 2) throw std::invalid_argument("r_walk: n must be at least 2");
  SmallChain c;
  c.num_labels = 3;
  std::vector<int> id(n * n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      int lab = -1;
      if (y == n - 1) lab = 0;
      else if (y == 0) lab = x == 0 ? 2 : 1;
      id[y * n + x] = c.add(lab);
    }
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      if (x + 1 < n) c.link(id[y * n + x], id[y * n + x + 1]);
      if (y + 1 < n) c.link(id[y * n + x], id[(y + 1) * n + x]);
    }
  const int extra = c.add(-1);
  c.link(extra, id[1 * n + 1]);
  row_one.resize(n);
  for (int k = 0; k < n; ++k) row_one[k] = id[1 * n + k];
  return c;
}

}  // namespace

double q_walk(int n) {
  int start = 0;
  const SmallChain c = q_chain(n, start);
  return exit_law(c, start)[0];
}

Rational q_walk_exact(int n) {
  int start = 0;
  const SmallChain c = q_chain(n, start);
  return exit_law_exact(c, start)[0];
}

RWalk r_walk(int n) {
  std::vector<int> row;
  const SmallChain c = r_chain(n, row);
  RWalk out;
  const auto from01 = exit_law(c, row[0]);
  out.r_plus = from01[0];
  out.r_minus = from01[1];
  out.r0.resize(n);
  for (int k = 0; k < n; ++k) out.r0[k] = k == 0 ? from01[2] : exit_law(c, row[k])[2];
  return out;
}

RWalkExact r_walk_exact(int n) {
  std::vector<int> row;
  const SmallChain c = r_chain(n, row);
  RWalkExact out;
  const auto from01 = exit_law_exact(c, row[0]);
  out.r_plus = from01[0];
  out.r_minus = from01[1];
  out.r0.resize(n);
  for (int k = 0; k < n; ++k) out.r0[k] = k == 0 ? from01[2] : exit_law_exact(c, row[k])[2];
  return out;
}

WalkConstants walk_constants(int n, int L) {
  if (n < 2) throw std::invalid_argument("walk_constants: n must be at least 2");
  if (L <= n) throw std::invalid_argument("walk_constants: torus too small for the square");
  WalkConstants w;
  w.n = n;
  w.L = L;
  w.q = q_walk(n);
  const RWalk r = r_walk(n);
  w.r_plus = r.r_plus;
  w.r_minus = r.r_minus;
  w.r0 = r.r0;

  const auto torus = make_torus(L);
  const auto boundary = square_outer_boundary(n);
  const Site starts[2] = {{0, -2}, {-1, -1}};
  const Site below{0, -1}, left{-1, 0};
  for (const Site& s : starts) {
    const HarmonicMeasure h = harmonic_measure(*torus, s, {}, boundary);
    std::map<Site, double> at;
    for (std::size_t k = 0; k < boundary.size(); ++k) at[boundary[k]] = h.mass[k];
    w.A_e2 += at[below];
    w.A_e1 += at[left];
    for (int j = 0; j < 4; ++j)
      for (const Site& z : quasi_square_side(0, j, n)) w.A_side[j] += at[z];
  }
  w.A = w.A_e1 + w.A_e2;
  w.A03 = w.A_side[0] + w.A_side[3];
  w.A12 = w.A_side[1] + w.A_side[2];
  return w;
}

WalkConstantsExact walk_constants_exact(int n, int L) {
  if (n < 2) throw std::invalid_argument("walk_constants_exact: n must be at least 2");
  if (L <= n) throw std::invalid_argument("walk_constants_exact: torus too small for the square");
  WalkConstantsExact w;
  w.q = q_walk_exact(n);
  RWalkExact r = r_walk_exact(n);
  w.r_plus = r.r_plus;
  w.r_minus = r.r_minus;
  w.r0 = std::move(r.r0);
  w.A = w.A03 = w.A12 = w.A_e1 = w.A_e2 = 0;
  for (auto& a : w.A_side) a = 0;
  const auto torus = make_torus(L);
  const auto boundary = square_outer_boundary(n);
  const Site starts[2] = {{0, -2}, {-1, -1}};
  for (const Site& s : starts) {
    const HarmonicMeasureExact h = harmonic_measure_exact(*torus, s, {}, boundary);
    std::map<Site, Rational> at;
    for (std::size_t k = 0; k < boundary.size(); ++k) at[boundary[k]] = h.mass[k];
    w.A_e2 += at[Site{0, -1}];
    w.A_e1 += at[Site{-1, 0}];
    for (int j = 0; j < 4; ++j)
      for (const Site& z : quasi_square_side(0, j, n)) w.A_side[j] += at[z];
  }
  w.A = w.A_e1 + w.A_e2;
  w.A03 = w.A_side[0] + w.A_side[3];
  w.A12 = w.A_side[1] + w.A_side[2];
  return w;
}

GroundRates rate_eta0(const WalkConstants& w) {
  GroundRates g;
  g.denominator = w.denominator();
  g.same_side = (1.0 + w.A03 + w.r_minus + w.q) / g.denominator;
  g.other_side = (w.A12 + w.r_plus) / g.denominator;
  g.self_return = 1.0 / g.denominator;
  return g;
}

GroundRates rate_eta0(int n, int L) {
  if (n < 3) throw std::invalid_argument("rate_eta0: n must be at least 3");
  return rate_eta0(walk_constants(n, L));
}

double ground_rate(const GroundRates& g, int i, int j) {
  if (i < 0 || i > 3 || j < 0 || j > 3) throw std::out_of_range("ground_rate: index out of range");
  return (j == i || j == (i + 3) % 4) ? g.same_side : g.other_side;
}

ClosedFormP closed_form_P(const WalkConstants& w) {
  ClosedFormP p;
  const double d = w.denominator();
  p.to_same_side = (1.0 + w.A03 + w.r_minus + w.q) / (8.0 * d);
  p.to_other_side = (w.A12 + w.r_plus) / (8.0 * d);
  p.to_self = 1.0 / d;
  const double jump_den = 1.0 + w.A03 + w.A12 + w.r() + w.q;
  p.jump_same_side = (1.0 + w.A03 + w.r_minus + w.q) / (8.0 * jump_den);
  p.jump_other_side = (w.A12 + w.r_plus) / (8.0 * jump_den);
  const double sum = (1.0 + w.r_minus + w.A03) / d;
  const double diff = (1.0 + w.r_minus + w.A_side[0] - w.A_side[3]) / (4.0 + w.q + w.r() + w.A_e1 - w.A_e2);
  p.bbm1 = 0.5 * (sum + diff);
  p.bbm2 = 0.5 * (sum - diff);
  p.total = 8.0 * (p.to_same_side + p.to_other_side) + p.to_self;
  return p;
}

ClosedFormP closed_form_P(int n, int L) {
  if (n < 3) throw std::invalid_argument("closed_form_P: n must be at least 3");
  return closed_form_P(walk_constants(n, L));
}

}  // namespace kawasaki
