#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/SparseLU>

#include "kawasaki/scaling.hpp"

namespace kawasaki {

namespace {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::SparseMatrix<Complex>;

constexpr double kSolveTolerance = 1e-10;

}  // namespace

QuotientChain::QuotientChain(const RateTable& table, double beta)
    : table_(&table), beta_(beta), torus_(make_torus(table.L())) {
  for (int c = 0; c < table.num_classes(); ++c)
    if (!table.has_row(c)) throw std::invalid_argument("QuotientChain: row " + std::to_string(c) + " is missing");
}

double QuotientChain::exit_rate(int cls) const {
  return std::exp(-beta_ * RateTable::prefactor_power(cls)) * table_->exit_rate(cls);
}

double QuotientChain::LandingLaw::total() const {
  double s = 0.0;
  for (const auto& m : mass)
    for (double v : m) s += v;
  return s;
}

double QuotientChain::LandingLaw::at(int cls, Site offset) const {
  for (std::size_t a = 0; a < absorbing.size(); ++a)
    if (absorbing[a] == cls) {
      const int side = int(std::lround(std::sqrt(double(mass[a].size()))));
      const Torus t((side - 1) / 2);
      return mass[a][t.index(t.wrap(offset))];
    }
  return 0.0;
}

std::vector<QuotientChain::LandingLaw> QuotientChain::landing(const std::vector<int>& absorbing,
                                                              const std::vector<int>& starts) const {
  const RateTable& t = *table_;
  const int m = t.num_classes();
  const int S = side();
  const int sites = S * S;
  if (absorbing.empty()) throw std::invalid_argument("QuotientChain::landing: no absorbing class");
  std::vector<int> abs_index(m, -1);
  for (std::size_t a = 0; a < absorbing.size(); ++a) {
    if (absorbing[a] < 0 || absorbing[a] >= m) throw std::out_of_range("QuotientChain::landing: bad class");
    abs_index[absorbing[a]] = int(a);
  }
  std::vector<int> tr(m, -1);
  int nt = 0;
  for (int c = 0; c < m; ++c)
    if (abs_index[c] < 0) tr[c] = nt++;

  // Transient classes whose hitting law is needed.
  std::vector<int> need_index(m, -1);
  std::vector<int> need;
  auto want = [&](int c) {
    if (tr[c] >= 0 && need_index[c] < 0) {
      need_index[c] = int(need.size());
      need.push_back(c);
    }
  };
  for (int s : starts) {
    if (s < 0 || s >= m) throw std::out_of_range("QuotientChain::landing: bad start class");
    if (abs_index[s] >= 0)
      for (const RateEntry& e : t.row(s)) want(e.target);
    else
      want(s);
  }

  const int A = int(absorbing.size());
  // hat[need][absorbing][wave index]
  std::vector<std::vector<std::vector<Complex>>> hat(need.size(),
                                                     std::vector<std::vector<Complex>>(A, std::vector<Complex>(sites)));
  if (!need.empty()) {
    std::vector<Complex> phase(S);
    for (int j = 0; j < S; ++j) phase[j] = std::polar(1.0, 2.0 * std::numbers::pi * j / S);
    auto mod = [S](long v) { return int(((v % S) + S) % S); };

    Eigen::SparseLU<ComplexMatrix, Eigen::COLAMDOrdering<int>> lu;
    bool analyzed = false;
    std::vector<Eigen::Triplet<Complex>> trip;
    for (int m1 = 0; m1 < S; ++m1)
      for (int m2 = 0; m2 < S; ++m2) {
        const int c1 = mod(-m1), c2 = mod(-m2);
        // Real laws: the transform at -k is the conjugate of the one at k.
        if (c1 * S + c2 < m1 * S + m2) continue;
        auto w = [&](Site d) { return phase[mod(long(m1) * d.x + long(m2) * d.y)]; };
        trip.clear();
        Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(nt, A);
        for (int c = 0; c < m; ++c) {
          if (tr[c] < 0) continue;
          trip.emplace_back(tr[c], tr[c], Complex(t.exit_rate(c), 0.0));
          for (const RateEntry& e : t.row(c)) {
            if (tr[e.target] >= 0)
              trip.emplace_back(tr[c], tr[e.target], -e.value * w(e.offset));
            else
              rhs(tr[c], abs_index[e.target]) += e.value * w(e.offset);
          }
        }
        ComplexMatrix M(nt, nt);
        M.setFromTriplets(trip.begin(), trip.end());
        M.makeCompressed();
        if (!analyzed) {
          lu.analyzePattern(M);
          analyzed = true;
        }
        lu.factorize(M);
        if (lu.info() != Eigen::Success)
          throw std::runtime_error("QuotientChain::landing: singular system (a class never reaches the absorbing set)");
        const Eigen::MatrixXcd x = lu.solve(rhs);
        const double res = (M * x - rhs).cwiseAbs().maxCoeff();
        if (!(res <= kSolveTolerance * std::max(1.0, rhs.cwiseAbs().maxCoeff())))
          throw std::runtime_error("QuotientChain::landing: residual " + std::to_string(res) + " exceeds tolerance");
        for (std::size_t i = 0; i < need.size(); ++i)
          for (int a = 0; a < A; ++a) {
            const Complex v = x(tr[need[i]], a);
            hat[i][a][m1 * S + m2] = v;
            hat[i][a][c1 * S + c2] = std::conj(v);
          }
      }
  }

  // Inverse transform, separable over the two axes.
  const int L = t.L();
  std::vector<Complex> inv(S);
  for (int j = 0; j < S; ++j) inv[j] = std::polar(1.0, -2.0 * std::numbers::pi * j / S);
  auto invert = [&](const std::vector<Complex>& h) {
    std::vector<Complex> g(sites, 0.0);
    for (int m1 = 0; m1 < S; ++m1)
      for (int y2 = 0; y2 < S; ++y2) {
        Complex s = 0.0;
        for (int m2 = 0; m2 < S; ++m2) s += h[m1 * S + m2] * inv[(long(m2) * y2) % S];
        g[m1 * S + y2] = s;
      }
    std::vector<double> out(sites, 0.0);
    for (int y1 = 0; y1 < S; ++y1)
      for (int y2 = 0; y2 < S; ++y2) {
        Complex s = 0.0;
        for (int m1 = 0; m1 < S; ++m1) s += g[m1 * S + y2] * inv[(long(m1) * y1) % S];
        const Site y{y1 > L ? y1 - S : y1, y2 > L ? y2 - S : y2};
        // Round-off can leave tiny negative values.
        out[torus_->index(y)] = std::max(0.0, s.real() / double(sites));
      }
    return out;
  };
  std::vector<std::vector<std::vector<double>>> law(need.size(), std::vector<std::vector<double>>(A));
  for (std::size_t i = 0; i < need.size(); ++i)
    for (int a = 0; a < A; ++a) law[i][a] = invert(hat[i][a]);

  std::vector<LandingLaw> out;
  for (int s : starts) {
    LandingLaw l;
    l.start = s;
    l.absorbing = absorbing;
    l.mass.assign(A, std::vector<double>(sites, 0.0));
    if (abs_index[s] < 0) {
      l.mass = law[need_index[s]];
    } else {
      const double total = t.exit_rate(s);
      if (!(total > 0.0)) throw std::runtime_error("QuotientChain::landing: absorbing start has no jumps");
      for (const RateEntry& e : t.row(s)) {
        const double p = e.value / total;
        if (abs_index[e.target] >= 0) {
          l.mass[abs_index[e.target]][torus_->index(torus_->wrap(e.offset))] += p;
          continue;
        }
        const auto& h = law[need_index[e.target]];
        for (int a = 0; a < A; ++a)
          for (int y = 0; y < sites; ++y) {
            if (h[a][y] == 0.0) continue;
            const Site to = torus_->wrap(torus_->coords(y) + e.offset);
            l.mass[a][torus_->index(to)] += p * h[a][y];
          }
      }
    }
    out.push_back(std::move(l));
  }
  return out;
}

std::vector<double> QuotientChain::ground_return_law() const {
  const int g = FamilyCatalog::gamma_class();
  return landing({g}, {g}).front().mass.front();
}

std::vector<double> QuotientChain::mean_hitting_time(const std::vector<int>& targets) const {
  const int m = num_classes();
  std::vector<char> is_target(m, 0);
  for (int c : targets) is_target.at(c) = 1;
  std::vector<int> tr(m, -1);
  int nt = 0;
  for (int c = 0; c < m; ++c)
    if (!is_target[c]) tr[c] = nt++;
  std::vector<double> out(m, 0.0);
  if (nt == 0) return out;
  Triplets trip;
  for (int c = 0; c < m; ++c) {
    if (tr[c] < 0) continue;
    const double pre = std::exp(-beta_ * RateTable::prefactor_power(c));
    trip.emplace_back(tr[c], tr[c], exit_rate(c));
    for (const RateEntry& e : table_->row(c))
      if (tr[e.target] >= 0) trip.emplace_back(tr[c], tr[e.target], -pre * e.value);
  }
  // Times scale like the inverse rates, so the residual is checked relative
  // to a unit right-hand side after rescaling by the largest rate.
  const SparseSolver solver(make_sparse(nt, nt, trip), 1e-9);
  const Eigen::VectorXd h = solver.solve(Eigen::VectorXd::Ones(nt));
  for (int c = 0; c < m; ++c)
    if (tr[c] >= 0) out[c] = h[tr[c]];
  return out;
}

std::vector<double> QuotientChain::stationary() const {
  const int m = num_classes();
  // The jump flux y = pi * exit rate is stationary for the embedded jump
  // chain, whose probabilities do not depend on beta. The last balance
  // equation is replaced by the normalization of y.
  Triplets trip;
  for (int c = 0; c < m; ++c) {
    const double total = table_->exit_rate(c);
    if (!(total > 0.0)) throw std::runtime_error("QuotientChain::stationary: class without jumps");
    if (c != m - 1) trip.emplace_back(c, c, -1.0);
    for (const RateEntry& e : table_->row(c))
      if (e.target != m - 1) trip.emplace_back(e.target, c, e.value / total);
    trip.emplace_back(m - 1, c, 1.0);
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  b[m - 1] = 1.0;
  const SparseSolver solver(make_sparse(m, m, trip));
  const Eigen::VectorXd y = solver.solve(b);
  std::vector<double> pi(m);
  double s = 0.0;
  for (int c = 0; c < m; ++c) {
    pi[c] = std::max(0.0, y[c]) / exit_rate(c);
    s += pi[c];
  }
  for (double& v : pi) v /= s;
  return pi;
}

}  // namespace kawasaki
