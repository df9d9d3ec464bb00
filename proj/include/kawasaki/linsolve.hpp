// Sparse linear solves in floating point (Eigen) and in exact rationals (GMP).
#pragma once

#include <map>
#include <memory>
#include <vector>

#include <Eigen/SparseCore>
#include <gmpxx.h>

namespace kawasaki {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

inline constexpr double kResidualTolerance = 1e-10;
inline constexpr int kDirectSolveLimit = 200'000;

// Factor once, solve many right-hand sides. Systems up to kDirectSolveLimit
// unknowns use sparse LU, larger ones BiCGSTAB with an incomplete-LU
// preconditioner. Every solve re-checks ||Ax - b||_inf against the tolerance
// and throws std::runtime_error when it is exceeded.
class SparseSolver {
 public:
  explicit SparseSolver(SparseMatrix a, double tolerance = kResidualTolerance);
  ~SparseSolver();
  SparseSolver(SparseSolver&&) noexcept;
  SparseSolver& operator=(SparseSolver&&) noexcept;

  int size() const { return int(a_.rows()); }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  double last_residual() const { return last_residual_; }
  bool direct() const;

 private:
  struct Impl;
  SparseMatrix a_;
  double tol_;
  std::unique_ptr<Impl> impl_;
  mutable double last_residual_ = 0.0;
};

SparseMatrix make_sparse(int rows, int cols, const Triplets& t);
double residual_inf(const SparseMatrix& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b);

using Rational = mpq_class;

// Sparse matrix with exact entries, stored by row.
struct RationalMatrix {
  explicit RationalMatrix(int n = 0) : rows(n) {}
  int size() const { return int(rows.size()); }
  void add(int i, int j, const Rational& v);
  std::vector<std::map<int, Rational>> rows;
};

// Gaussian elimination without pivoting; valid for the symmetric positive
// definite systems used here. Throws std::runtime_error on a zero pivot.
std::vector<Rational> solve_rational(RationalMatrix a, std::vector<Rational> b);

// Dense partial-pivot elimination for small systems of arbitrary structure.
std::vector<Rational> solve_rational_dense(std::vector<std::vector<Rational>> a, std::vector<Rational> b);

double to_double(const Rational& q);

}  // namespace kawasaki
