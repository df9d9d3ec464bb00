// Statistics, exact solves of the table-driven chain on the torus of anchors,
// potential theory and the scaling estimators computed from trajectories.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kawasaki/kmc.hpp"

namespace kawasaki {

// ------------------------------------------------------------------- stats

struct Estimate {
  double value = 0.0;
  double se = 0.0;
  std::size_t samples = 0;
  double lo(double k = 3.0) const { return value - k * se; }
  double hi(double k = 3.0) const { return value + k * se; }
};

Estimate mean_estimate(const std::vector<double>& x);
// Batch means over consecutive blocks; falls back to the plain mean when
// there are fewer samples than batches.
Estimate batch_mean_estimate(const std::vector<double>& x, int batches = 20);
Estimate proportion_estimate(std::uint64_t hits, std::uint64_t trials);
// Ratio sum(y)/sum(x) with the delta-method standard error.
Estimate ratio_estimate(const std::vector<double>& y, const std::vector<double>& x);
double median(std::vector<double> x);

double normal_upper_tail(double z);
double chi_square_upper_tail(double statistic, double dof);

struct ChiSquareResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 0.0;
  int bins = 0;
};
// Goodness of fit of integer-valued samples to N(0, sigma^2), with one bin
// per integer (edges at half-integers) and tails pooled until every bin
// expects at least `min_expected` samples.
ChiSquareResult lattice_normality_test(const std::vector<long>& values, double sigma, double min_expected = 5.0);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// -------------------------------------------------------- quotient chain

// The table-driven chain is invariant under translations of the torus, so
// hitting laws of translation-invariant sets factor over wave vectors: one
// sparse complex solve per wave vector on the class set, then an inverse
// discrete Fourier transform over anchor offsets. All rows must be present.
class QuotientChain {
 public:
  QuotientChain(const RateTable& table, double beta);

  const RateTable& table() const { return *table_; }
  double beta() const { return beta_; }
  int num_classes() const { return table_->num_classes(); }
  int side() const { return 2 * table_->L() + 1; }
  const Torus& torus() const { return *torus_; }
  // Total jump rate with the temperature prefactor.
  double exit_rate(int cls) const;

  struct LandingLaw {
    int start = -1;
    std::vector<int> absorbing;
    std::vector<std::vector<double>> mass;  // [absorbing index][torus index of the offset]
    double total() const;
    double at(int cls, Site offset) const;
  };
  // First landing on the absorbing classes (at any anchor) from each start
  // class at the origin. A start that is itself absorbing is first moved by
  // one jump, which gives the law of the first return.
  std::vector<LandingLaw> landing(const std::vector<int>& absorbing, const std::vector<int>& starts) const;

  // Offset law of the first return to the ground class from the square at
  // the origin, indexed by torus site index.
  std::vector<double> ground_return_law() const;

  // Mean hitting time of the target classes at any anchor, per class (zero
  // on the targets).
  std::vector<double> mean_hitting_time(const std::vector<int>& targets) const;

  // Stationary law of the class process, summing to one.
  std::vector<double> stationary() const;

 private:
  const RateTable* table_;
  double beta_;
  TorusPtr torus_;
};

// --------------------------------------------------------------- potential

// Finite reversible chain given explicitly: jump rates and a reversible
// measure (not necessarily normalized).
struct FiniteChain {
  std::string id;
  std::vector<double> measure;
  std::vector<std::vector<std::pair<int, double>>> rates;
  int size() const { return int(measure.size()); }
};

struct CapacityResult {
  std::string chain_id;
  std::string normalization = "measure-weighted";
  double exact = 0.0;
  double dirichlet_upper = 0.0;  // indicator of A as test function
  double thomson_lower = 0.0;    // unit flow along a least-resistance path
  bool connected = true;
  std::string diagnostic;
};
// Throws std::invalid_argument when A or B is empty or they intersect.
CapacityResult capacity(const FiniteChain& chain, const std::vector<int>& A, const std::vector<int>& B);

// The table-driven chain unfolded over all anchors, with the stationary
// class law as measure. States are cls * side^2 + torus index.
FiniteChain unfold_table_chain(const QuotientChain& q);

struct GroundCapacity {
  double normalized = 0.0;       // lambda(square) * P[leave the ground class before returning]
  double return_probability = 0.0;
  double inverse_theta = 0.0;    // lambda(square) * sum ||x||^2 P(x)
  double lower = 0.0;            // normalized
  double upper = 0.0;            // 2 L^2 * normalized
};
// Capacity between the square and the other ground states, divided by the
// measure of the square, and the diffusion rate it brackets.
GroundCapacity ground_capacity(const QuotientChain& q);

struct GammaRho {
  double rho = 0.0;
  std::vector<double> lying_escape;  // per lying rectangle class at the origin
  double lying_escape_max = 0.0;
  double gamma = 0.0;
  double leak = 0.0;                 // 1 - total landing mass
};
GammaRho gamma_rho_exact(const RateTable& table);

struct MeanHitting {
  std::vector<double> from_neighbors;  // the 16 first-shell wells at the origin
  double worst = 0.0;
  double from_first = 0.0;             // the well (0, 0)
  double scale = 0.0;                  // number of classes times e^beta
  double ratio = 0.0;                  // worst / scale
};
MeanHitting mean_hitting_bound(const QuotientChain& q);

// Exact probability that the first return lands at sum-norm distance exactly
// k (index k) from the origin anchor, k = 0..2L.
std::vector<double> ground_return_tail(const QuotientChain& q);

// ------------------------------------------------------------- estimators

struct ThetaEstimate {
  Estimate msd_rate;       // |X(T)|^2 / T over replicas
  Estimate jump_rate;      // departure rate times the mean squared return offset
  double departure_rate = 0.0;
  double theta_hat = 0.0;  // inverse of the mean-square rate
  std::size_t min_returns = 0;
  bool insufficient = false;  // some trajectory has fewer than 10 returns
  double joint_z = 0.0;
  bool consistent(double k = 3.0) const { return joint_z <= k; }
};
// Ground-class traces started on the square; offsets use the minimal image
// when a torus is given.
ThetaEstimate estimate_theta(const std::vector<Path>& gamma_traces, const Torus* torus);
// Same from displacement paths; only returns to a new anchor are counted.
ThetaEstimate estimate_theta(const std::vector<DisplacementPath>& walks);

// Displacement path of the ground-class trace of the table-driven chain run
// until its ground clock reaches `gamma_time`; no event log is kept.
DisplacementPath zeta_hat_ground_walk(const TableChain& chain, double gamma_time, std::uint64_t seed,
                                      std::uint64_t stream, std::uint64_t max_events = 1'000'000'000ULL);

struct QvPoint {
  double t = 0.0;
  double z11 = 0.0;
  double z22 = 0.0;
  double z12 = 0.0;
};
// Realized covariation of Z(t) = X(t ell^2 theta) / ell on the grid.
std::vector<QvPoint> quadratic_variation(const DisplacementPath& X, int ell, double theta,
                                         const std::vector<double>& grid);
// Largest Euclidean jump of Z over [0, horizon].
double max_jump(const DisplacementPath& X, int ell, double theta, double horizon);
// Z(t) as an integer offset X(t ell^2 theta).
Site displacement_at(const DisplacementPath& X, double time);

struct Confinement {
  double outside_xi_star = 0.0;  // time fractions over [0, end]
  double outside_gamma = 0.0;
  bool exited = false;
  double first_exit = 0.0;       // meaningful when exited
  double horizon = 0.0;
};
Confinement confinement_fractions(const Trajectory& t);
// Stop condition ending a run at the first exit from the confinement set.
StopCondition confinement_exit_stop(const SimulationParams& params, double horizon, std::uint64_t max_events);

struct CenterOfMassComparison {
  double sup_discrepancy = 0.0;  // divided by ell
  double max_overshoot = 0.0;    // sup of S(t) - t, in time units of the trajectory
  double compared_time = 0.0;
};
CenterOfMassComparison center_of_mass_compare(const Trajectory& t);

// ----------------------------------------------------------------- report

struct RegimeCondition {
  std::string name;
  double value = 0.0;  // the quantity required to vanish
  bool small = false;  // value <= threshold
};

// Error orders and the regime quantities at a parameter point. The unknown
// constant of the first term is reported as one.
struct ErrorBudget {
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double e_beta = 0.0;
  std::vector<RegimeCondition> regime;
};
ErrorBudget error_budget(const SimulationParams& p, double theta_hat, double threshold = 1.0);

struct TailRow {
  int k = 0;
  double probability = 0.0;
  double se = 0.0;
  double exact = -1.0;  // negative when not computed
};

struct ScalingReport {
  static constexpr int kSchemaVersion = 1;
  SimulationParams params;
  std::string engine;
  std::size_t replicas = 0;
  ThetaEstimate theta;
  double theta_exact = 0.0;  // zero when not computed
  std::vector<QvPoint> qv;   // averaged over replicas
  std::vector<QvPoint> qv_se;
  Estimate max_jump;
  Estimate outside_xi_star;
  Estimate outside_gamma;
  Estimate exit_probability;
  std::vector<TailRow> tail;
  double tail_decay = 0.0;   // fitted slope of log P against k for k >= 5
  bool tail_monotone = true;
  ErrorBudget budget;
  std::vector<std::string> inputs;
  std::vector<std::string> failures;  // tolerance checks that did not hold

  std::string to_json() const;
  std::string qv_csv() const;
  std::string tail_csv() const;
};

}  // namespace kawasaki
