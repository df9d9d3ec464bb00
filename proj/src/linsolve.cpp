#include "kawasaki/linsolve.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

namespace kawasaki {

struct SparseSolver::Impl {
  std::unique_ptr<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>> lu;
  std::unique_ptr<Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>>> iterative;
};

SparseSolver::SparseSolver(SparseMatrix a, double tolerance)
    : a_(std::move(a)), tol_(tolerance), impl_(std::make_unique<Impl>()) {
  if (a_.rows() != a_.cols()) throw std::invalid_argument("SparseSolver: matrix is not square");
  a_.makeCompressed();
  if (a_.rows() <= kDirectSolveLimit) {
    impl_->lu = std::make_unique<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>>();
    impl_->lu->analyzePattern(a_);
    impl_->lu->factorize(a_);
    if (impl_->lu->info() != Eigen::Success) {
      throw std::runtime_error("SparseSolver: LU factorization failed (singular system)");
    }
  } else {
    impl_->iterative = std::make_unique<Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>>>();
    impl_->iterative->setTolerance(1e-14);
    impl_->iterative->setMaxIterations(20000);
    impl_->iterative->compute(a_);
    if (impl_->iterative->info() != Eigen::Success) {
      throw std::runtime_error("SparseSolver: preconditioner setup failed");
    }
  }
}

SparseSolver::~SparseSolver() = default;
SparseSolver::SparseSolver(SparseSolver&&) noexcept = default;
SparseSolver& SparseSolver::operator=(SparseSolver&&) noexcept = default;

bool SparseSolver::direct() const { return bool(impl_->lu); }

Eigen::VectorXd SparseSolver::solve(const Eigen::VectorXd& b) const {
  Eigen::VectorXd x = impl_->lu ? Eigen::VectorXd(impl_->lu->solve(b)) : Eigen::VectorXd(impl_->iterative->solve(b));
  last_residual_ = residual_inf(a_, x, b);
  if (!(last_residual_ <= tol_)) {
    throw std::runtime_error("SparseSolver: residual " + std::to_string(last_residual_) + " exceeds tolerance");
  }
  return x;
}

SparseMatrix make_sparse(int rows, int cols, const Triplets& t) {
  SparseMatrix m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

double residual_inf(const SparseMatrix& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  if (b.size() == 0) return 0.0;
  const Eigen::VectorXd r = a * x - b;
  const double m = r.lpNorm<Eigen::Infinity>();
  return std::isfinite(m) ? m : INFINITY;
}

void RationalMatrix::add(int i, int j, const Rational& v) {
  auto& cell = rows[i][j];
  cell += v;
  if (cell == 0) rows[i].erase(j);
}

std::vector<Rational> solve_rational(RationalMatrix a, std::vector<Rational> b) {
  const int n = a.size();
  if (int(b.size()) != n) throw std::invalid_argument("solve_rational: size mismatch");
  // Column occupancy below the diagonal, kept in step with fill-in.
  std::vector<std::vector<int>> below(n);
  for (int r = 0; r < n; ++r)
    for (const auto& [c, v] : a.rows[r])
      if (r > c) below[c].push_back(r);
  std::vector<char> mark(n, 0);
  for (int k = 0; k < n; ++k) {
    auto pit = a.rows[k].find(k);
    if (pit == a.rows[k].end() || pit->second == 0) throw std::runtime_error("solve_rational: zero pivot");
    const Rational pivot = pit->second;
    std::vector<int>& rows_k = below[k];
    std::sort(rows_k.begin(), rows_k.end());
    rows_k.erase(std::unique(rows_k.begin(), rows_k.end()), rows_k.end());
    for (int r : rows_k) {
      auto it = a.rows[r].find(k);
      if (it == a.rows[r].end()) continue;
      const Rational factor = it->second / pivot;
      a.rows[r].erase(it);
      for (auto kt = a.rows[k].upper_bound(k); kt != a.rows[k].end(); ++kt) {
        const int c = kt->first;
        auto [cell, inserted] = a.rows[r].try_emplace(c, 0);
        cell->second -= factor * kt->second;
        if (inserted && r > c) below[c].push_back(r);
        if (cell->second == 0) a.rows[r].erase(cell);
      }
      b[r] -= factor * b[k];
    }
    rows_k.clear();
    rows_k.shrink_to_fit();
  }
  std::vector<Rational> x(n);
  for (int k = n - 1; k >= 0; --k) {
    Rational s = b[k];
    for (auto it = a.rows[k].upper_bound(k); it != a.rows[k].end(); ++it) s -= it->second * x[it->first];
    x[k] = s / a.rows[k].at(k);
  }
  return x;
}

std::vector<Rational> solve_rational_dense(std::vector<std::vector<Rational>> a, std::vector<Rational> b) {
  const int n = int(b.size());
  for (int k = 0; k < n; ++k) {
    int p = k;
    while (p < n && a[p][k] == 0) ++p;
    if (p == n) throw std::runtime_error("solve_rational_dense: singular system");
    std::swap(a[p], a[k]);
    std::swap(b[p], b[k]);
    for (int r = k + 1; r < n; ++r) {
      if (a[r][k] == 0) continue;
      const Rational f = a[r][k] / a[k][k];
      for (int c = k; c < n; ++c) a[r][c] -= f * a[k][c];
      b[r] -= f * b[k];
    }
  }
  std::vector<Rational> x(n);
  for (int k = n - 1; k >= 0; --k) {
    Rational s = b[k];
    for (int c = k + 1; c < n; ++c) s -= a[k][c] * x[c];
    x[k] = s / a[k][k];
  }
  return x;
}

double to_double(const Rational& q) { return q.get_d(); }

}  // namespace kawasaki
