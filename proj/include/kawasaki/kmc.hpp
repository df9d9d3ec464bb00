// Event-driven simulation of the lattice gas and of the table-driven chain on
// translation classes, trace extraction, return statistics, coupling and
// trajectory files.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kawasaki/plateau.hpp"

namespace kawasaki {

// --------------------------------------------------------------------- rng

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

// Philox4x32 with ten rounds.
PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key);

// Counter-based stream: the key is the 64-bit master seed, counter words 2-3
// hold the stream id and words 0-1 the block index. Streams never overlap.
class Rng {
 public:
  using result_type = std::uint32_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xffffffffu; }
  result_type operator()();

  std::uint64_t next_u64();
  double uniform();  // open interval (0, 1)
  double exponential(double rate);
  std::uint64_t below(std::uint64_t m);  // unbiased on 0..m-1, m > 0

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t blocks_used() const { return block_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  PhiloxCounter buf_{};
  int used_ = 4;
};

// Compensated running sum for the simulation clock.
class KahanClock {
 public:
  void add(double dt) {
    const double y = dt - comp_;
    const double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// ----------------------------------------------------------------- sampler

// Rejection-free selection among the active bonds. Bonds are grouped by the
// cost max(dH, 0) in 0..3, so every group has one common rate and a move is
// drawn by picking a group and then a uniform member.
class MoveSampler {
 public:
  MoveSampler(Configuration config, double beta);

  const Configuration& config() const { return config_; }
  long energy() const { return energy_; }
  double beta() const { return beta_; }
  double total_rate() const;
  std::array<int, 4> bucket_sizes() const;
  double bucket_rate(int cost) const { return rate_[cost]; }

  // Requires total_rate() > 0.
  Move sample(Rng& rng) const;
  void apply(const Move& m);
  // Applies the exchange of two adjacent sites, one occupied and one vacant.
  void apply(int from, int to);

  std::vector<Move> active_moves() const;
  // Recounts every bond and compares with the incremental state.
  bool consistent() const;

 private:
  void refresh_bond(int b);
  void refresh_site(int s);
  Move bond_move(int b) const;

  Configuration config_;
  double beta_;
  long energy_ = 0;
  std::array<double, 4> rate_{};
  std::vector<std::uint8_t> occ_nbrs_;
  std::array<std::vector<int>, 4> buckets_;
  std::vector<int> bucket_of_;  // -1 when the bond is inactive
  std::vector<int> pos_;
};

// ------------------------------------------------------------- trajectory

enum class ChainKind { Eta, ZetaHat };
enum class StopReason { Horizon, Hit, EventCap, Absorbed };

const char* chain_kind_name(ChainKind k);
const char* stop_reason_name(StopReason r);

// Lattice-gas events carry the two sites; table-driven events carry the
// source and target classes and the anchor shift.
struct Event {
  double time = 0.0;
  int from = -1;
  int to = -1;
  Site shift{};
};

struct Checkpoint {
  std::size_t event = 0;  // number of events applied
  std::uint64_t hash = 0;
};

inline constexpr std::size_t kCheckpointInterval = std::size_t(1) << 16;

struct Trajectory {
  ChainKind kind = ChainKind::Eta;
  SimulationParams params;
  Configuration initial;   // lattice gas
  ClassAt initial_class;   // table-driven chain; anchors are not wrapped
  std::vector<Event> events;
  std::vector<Checkpoint> checkpoints;
  double end_time = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::string table_hash;
  std::string manifest;    // id of the run that wrote the file, if any
  StopReason stop = StopReason::Horizon;
};

std::uint64_t class_hash(const ClassAt& c);

// Replays the events. Throws std::runtime_error on an inconsistent event or
// a checkpoint mismatch.
Configuration replay_eta(const Trajectory& t, std::size_t upto = std::numeric_limits<std::size_t>::max());
ClassAt replay_class(const Trajectory& t, std::size_t upto = std::numeric_limits<std::size_t>::max());
void verify_checkpoints(const Trajectory& t);

struct StopCondition {
  double horizon = std::numeric_limits<double>::infinity();
  std::uint64_t max_events = std::numeric_limits<std::uint64_t>::max();
  // Target predicates; the lattice-gas one also receives the energy.
  std::function<bool(const Configuration&, long)> hit;
  std::function<bool(const ClassAt&)> hit_class;
  // Return mode: the target is only checked after the first state change.
  bool return_mode = false;
};

// Lattice-gas dynamics with Metropolis exchange rates.
Trajectory simulate_eta(const Configuration& start, const SimulationParams& params, const StopCondition& stop,
                        std::uint64_t seed, std::uint64_t stream = 0);

// Table-driven chain on classes with anchor tracking in Z^2: rates are
// e^{-2 beta} R on the ground class and e^{-beta} R elsewhere.
class TableChain {
 public:
  TableChain(const RateTable& table, double beta);
  double beta() const { return beta_; }
  const RateTable& table() const { return *table_; }
  const std::string& table_hash() const { return hash_; }
  double exit_rate(int cls) const { return exit_[cls]; }
  // Target entry of a jump out of `cls`; requires exit_rate(cls) > 0.
  const RateEntry& sample(int cls, Rng& rng) const;

 private:
  const RateTable* table_;
  double beta_;
  std::string hash_;
  std::vector<double> exit_;
  std::vector<std::vector<double>> cumulative_;
};

Trajectory simulate_zeta_hat(const TableChain& chain, const ClassAt& start, const StopCondition& stop,
                             std::uint64_t seed, std::uint64_t stream = 0);
Trajectory simulate_zeta_hat(const RateTable& table, double beta, const ClassAt& start, const StopCondition& stop,
                             std::uint64_t seed, std::uint64_t stream = 0);

// ------------------------------------------------------------------ traces

// State label of a path: a family class at an anchor, or a configuration
// outside every family (cls = -1, identified by its hash).
struct Label {
  int cls = -1;
  Site anchor{};
  std::uint64_t hash = 0;
  friend bool operator==(const Label&, const Label&) = default;
  friend auto operator<=>(const Label&, const Label&) = default;
};

struct PathSegment {
  Label state;
  double duration = 0.0;
};

// Piecewise-constant path. A label can repeat in consecutive segments of a
// trace when the path left the subset in between.
struct Path {
  std::vector<PathSegment> segments;
  double total_time() const;
  std::vector<double> start_times() const;
};

// Label of a lattice configuration: well representatives and the other
// family members at anchors, everything else (including the non-chosen
// members of a well) by hash.
Label label_configuration(const Configuration& c, long energy, const FamilyCatalog& catalog);

Path labelled_path(const Trajectory& t);

// Trace on the labels accepted by `keep`: the clock only runs inside the
// subset and excursions collapse to instantaneous jumps. Throws
// std::invalid_argument when the subset is never visited.
Path trace(const Path& path, const std::function<bool(const Label&)>& keep);
bool in_xi(const Label& l);
bool in_gamma(const Label& l);

// Anchor path of a ground-state trace, unwrapped by minimal image on the
// torus when `torus` is given and taken as is otherwise.
struct DisplacementPath {
  std::vector<double> times;  // jump times, times[0] = 0
  std::vector<Site> X;        // X[0] = {0,0}
  double end_time = 0.0;
};
DisplacementPath displacement_path(const Path& gamma_trace, const Torus* torus = nullptr);

// ---------------------------------------------------------- return stats

// Runs fn(i) for i in 0..replicas-1 on `threads` workers (0: all cores).
// Exceptions are rethrown after every worker has joined.
void run_replicas_parallel(std::uint64_t replicas, int threads, const std::function<void(std::uint64_t)>& fn);

struct ReturnStats {
  std::map<ClassAt, std::uint64_t> landing;  // first state of the target set
  std::uint64_t replicas = 0;
  std::uint64_t censored = 0;  // replicas stopped before reaching the target
  double mean_time = 0.0;
  double se_time = 0.0;
  double frequency(const ClassAt& c) const;
};

// Replica i uses stream stream0 + i.
ReturnStats zeta_hat_return_stats(const TableChain& chain, const ClassAt& start,
                                  const std::function<bool(const ClassAt&)>& target, std::uint64_t replicas,
                                  std::uint64_t seed, std::uint64_t stream0 = 0,
                                  std::uint64_t max_events = 100'000'000);

// Full dynamics from `start`: first return to the target labels after the
// first state change; landing states are reported by label. Replica i uses
// stream stream0 + i.
ReturnStats eta_return_stats(const Configuration& start, const SimulationParams& params,
                             const std::function<bool(const Label&)>& target, std::uint64_t replicas,
                             std::uint64_t seed, std::uint64_t stream0 = 0,
                             std::uint64_t max_events = 100'000'000, int threads = 0);

// ---------------------------------------------------------------- coupling

// Empirical rates of the trace of the full dynamics on the family union,
// in units where the e^{-beta} / e^{-2 beta} prefactor is divided out.
struct TraceRateEstimate {
  RateTable table;
  std::vector<double> holding_time;     // trace clock spent per class
  std::vector<std::uint64_t> jumps;     // jumps out of each class
};
TraceRateEstimate estimate_trace_rates(const SimulationParams& params, double horizon, std::uint64_t replicas,
                                       std::uint64_t seed, std::uint64_t stream0 = 0, int threads = 0);

struct CoupledRun {
  Path first;            // chain driven by the first table
  Path second;           // chain driven by the second table
  double separation = std::numeric_limits<double>::infinity();
  double horizon = 0.0;
  double alpha = 0.0;    // largest total rate discrepancy over visited classes
};

// Maximal-overlap coupling of two table-driven chains started at the same
// class: shared moves fire together at the smaller rate, residual rates fire
// independently and end the coupling.
CoupledRun couple_tables(const TableChain& a, const TableChain& b, const ClassAt& start, double horizon,
                         std::uint64_t seed, std::uint64_t stream = 0);

// Total rate discrepancy of the two chains at a class.
double rate_discrepancy(const TableChain& a, const TableChain& b, int cls);

// Couples the table-driven chain with a chain whose rates are the estimated
// trace rates of the full dynamics (see estimate_trace_rates).
CoupledRun couple_zeta_zetahat(const TraceRateEstimate& trace_rates, const RateTable& table, double beta,
                               const ClassAt& start, double horizon, std::uint64_t seed,
                               std::uint64_t stream = 0);

// ---------------------------------------------------------- trajectory io

// JSON-lines layout: one header object, one object per event and per
// checkpoint, and a closing object with the end time. See README.
void save_trajectory(const Trajectory& t, const std::string& path);
std::string trajectory_to_jsonl(const Trajectory& t);
// Re-verifies every checkpoint; throws std::runtime_error on mismatch.
Trajectory load_trajectory(const std::string& path);
Trajectory trajectory_from_jsonl(const std::string& text);

}  // namespace kawasaki
