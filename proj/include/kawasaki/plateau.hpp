// Zero-temperature limit objects: harmonic measures of the torus walk, the
// auxiliary walk constants, absorption measures out of energy plateaus and
// the limit rate table on translation classes of the family union.
#pragma once

#include <array>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "kawasaki/droplet.hpp"
#include "kawasaki/linsolve.hpp"

namespace kawasaki {

// ---------------------------------------------------------------- harmonic

struct HarmonicMeasure {
  double target_mass = 0.0;
  std::vector<double> mass;  // aligned with the absorbing list
  double residual = 0.0;
};

// Exit distribution of the rate-one nearest-neighbour walk on the torus
// started at `start` and stopped on `absorbing`. Throws std::invalid_argument
// when `absorbing` is empty.
HarmonicMeasure harmonic_measure(const Torus& torus, Site start, const std::vector<Site>& targets,
                                 const std::vector<Site>& absorbing);

struct HarmonicMeasureExact {
  Rational target_mass;
  std::vector<Rational> mass;
};
HarmonicMeasureExact harmonic_measure_exact(const Torus& torus, Site start, const std::vector<Site>& targets,
                                            const std::vector<Site>& absorbing);

// The 4n sites of the outer boundary of the n x n square at the origin.
std::vector<Site> square_outer_boundary(int n);

// ------------------------------------------------------------------- walks

struct WalkConstants {
  int n = 0;
  int L = 0;
  double q = 0.0;
  double r_plus = 0.0;
  double r_minus = 0.0;
  std::vector<double> r0;            // index k = 0..n-1
  double A = 0.0;                    // mass on the two sites next to the empty corner
  double A03 = 0.0;
  double A12 = 0.0;
  std::array<double, 4> A_side{};    // mass on each side set of the quasi-square
  double A_e1 = 0.0;                 // mass on w0 - e1
  double A_e2 = 0.0;                 // mass on w0 - e2
  double r() const { return r_plus + r_minus; }
  double denominator() const { return 4.0 + q + r() - A; }
};

struct WalkConstantsExact {
  Rational q, r_plus, r_minus;
  std::vector<Rational> r0;
  Rational A, A03, A12, A_e1, A_e2;
  std::array<Rational, 4> A_side;
};

// Hole-versus-particle walk: probability, from (0,1), of reaching the top
// row {(j,n-1) : j < n-1} before the corner state (0,0).
double q_walk(int n);
Rational q_walk_exact(int n);

struct RWalk {
  double r_plus = 0.0;
  double r_minus = 0.0;
  std::vector<double> r0;
};
RWalk r_walk(int n);
struct RWalkExact {
  Rational r_plus, r_minus;
  std::vector<Rational> r0;
};
RWalkExact r_walk_exact(int n);

WalkConstants walk_constants(int n, int L);
// Exact variant; the harmonic-measure part is solved over the whole torus.
WalkConstantsExact walk_constants_exact(int n, int L);

struct GroundRates {
  double same_side = 0.0;    // rate to eta^{i,j} with j in {i, i-1}
  double other_side = 0.0;   // rate to eta^{i,j} with j in {i+1, i+2}
  double self_return = 0.0;  // probability that the first landing is the square itself
  double denominator = 0.0;
};
// Leading-order rates out of the square, extended over the 16 neighbours by
// the symmetry of the square.
GroundRates rate_eta0(int n, int L);
GroundRates rate_eta0(const WalkConstants& w);
double ground_rate(const GroundRates& g, int i, int j);

struct ClosedFormP {
  double to_same_side = 0.0;   // first landing on eta^{0,0}
  double to_other_side = 0.0;  // first landing on eta^{0,1}
  double to_self = 0.0;
  double jump_same_side = 0.0;   // jump probability of the trace chain to eta^{0,0}
  double jump_other_side = 0.0;  // to eta^{0,1}
  double bbm1 = 0.0;           // absorption from the corner pushed down, at eta^{0,0}
  double bbm2 = 0.0;           // corner pushed left
  double total = 0.0;          // 8 * (same + other) + self
};
ClosedFormP closed_form_P(int n, int L);
ClosedFormP closed_form_P(const WalkConstants& w);

// --------------------------------------------------------------- plateaus

struct AbsorbingState {
  Configuration config;
  int entry = -1;
  Site anchor{};
  int xi_class = -1;
  int level = -1;
  bool leak = false;  // first shell but outside every family
};

// Connected set of second-shell configurations under zero-cost moves,
// together with its downhill exits.
struct PlateauComponent {
  std::vector<Configuration> states;
  std::vector<std::vector<int>> flat;                       // neighbour state ids
  std::vector<std::vector<int>> exits;                      // absorbing ids
  std::vector<AbsorbingState> absorbing;
  std::unique_ptr<SparseSolver> solver;                     // null when no exit exists
  bool free_particle = false;                               // some state has an isolated particle

  std::size_t size() const { return states.size(); }
  bool stuck() const { return !solver; }
  // Absorption distribution for a weighted set of start states.
  std::vector<double> absorb(const std::vector<std::pair<int, double>>& starts) const;
};

class PlateauExplorer {
 public:
  PlateauExplorer(int n, int L, std::size_t state_cap = 2'000'000);

  int n() const { return n_; }
  const TorusPtr& torus() const { return torus_; }
  const FamilyCatalog& catalog() const { return *catalog_; }

  struct Location {
    int component = -1;
    int state = -1;
  };
  // Explores (and caches) the component containing `config`, which must lie
  // in the second shell.
  Location locate(const Configuration& config);
  const PlateauComponent& component(int id) const { return *components_[id]; }
  int num_components() const { return int(components_.size()); }
  std::size_t total_states() const { return index_.size(); }

 private:
  int explore(const Configuration& start);

  int n_;
  TorusPtr torus_;
  std::shared_ptr<const FamilyCatalog> catalog_;
  std::size_t cap_;
  long shell2_energy_;
  std::vector<std::unique_ptr<PlateauComponent>> components_;
  std::unordered_map<Configuration, Location, ConfigurationHash> index_;
};

// Key of a translation class placed at an anchor.
struct ClassAt {
  int cls = -1;
  Site anchor{};
  friend auto operator<=>(const ClassAt&, const ClassAt&) = default;
};

struct BbmResult {
  std::map<ClassAt, double> collapsed;   // wells merged onto their representatives
  std::map<ClassAt, double> raw;         // cls holds the catalog entry index
  double leak = 0.0;
  double stuck = 0.0;
  std::size_t states = 0;
  double residual = 0.0;
  double total() const;
};

// Rejects configurations outside the second shell with std::invalid_argument.
BbmResult solve_bbM(const Configuration& start, const SimulationParams& params);
BbmResult solve_bbM(const Configuration& start, PlateauExplorer& explorer);

// Exact absorption mass on the given family levels from a set of starts.
Rational absorption_mass_exact(PlateauExplorer& explorer, const std::vector<Configuration>& starts,
                               const std::vector<int>& levels);

// ------------------------------------------------------------- rate table

struct RateEntry {
  int target = -1;
  Site offset{};
  double value = 0.0;
};

struct RowDiagnostics {
  int starts = 0;            // distinct second-shell neighbours of the source well
  int duplicate_starts = 0;  // neighbours reached from two well members
  double self_mass = 0.0;    // absorption mass returning to the source well
  double leak = 0.0;
  double stuck = 0.0;
  double residual = 0.0;
  std::size_t states = 0;
};

class RateTable {
 public:
  RateTable() = default;
  RateTable(int n, int L);

  int n() const { return n_; }
  int L() const { return L_; }
  const FamilyCatalog& catalog() const { return *catalog_; }
  int num_classes() const { return catalog_->num_xi_classes(); }
  bool has_row(int cls) const { return has_row_[cls]; }
  const std::vector<RateEntry>& row(int cls) const { return rows_[cls]; }
  const RowDiagnostics& diagnostics(int cls) const { return diag_[cls]; }
  // Power of e^{-beta} multiplying the row: 2 on the ground class, 1 elsewhere.
  static int prefactor_power(int cls) { return cls == FamilyCatalog::gamma_class() ? 2 : 1; }
  double rate(int src, int dst, Site offset) const;
  double exit_rate(int cls) const;
  Site wrap(Site s) const;

  void set_row(int cls, std::vector<RateEntry> entries, RowDiagnostics d = {});

  std::string to_json() const;
  static RateTable from_json(const std::string& text);
  std::string hash() const;  // FNV-1a of the canonical JSON

 private:
  int n_ = 0;
  int L_ = 0;
  std::shared_ptr<const FamilyCatalog> catalog_;
  TorusPtr torus_;
  std::vector<std::vector<RateEntry>> rows_;
  std::vector<RowDiagnostics> diag_;
  std::vector<char> has_row_;
};

struct RateTableOptions {
  std::vector<int> classes;            // rows to build; empty means all
  bool operational_ground = false;     // ground row from the absorption solver instead of the closed form
  std::size_t state_cap = 2'000'000;
};

RateTable build_rate_table(int n, int L, const RateTableOptions& options = {});
// Builds the requested rows with a shared explorer.
void fill_rows(RateTable& table, PlateauExplorer& explorer, const std::vector<int>& classes,
               bool operational_ground = false);

struct GroundRowOperational {
  std::vector<RateEntry> entries;
  double self_return = 0.0;  // mean over the 8 corner moves
  double leak = 0.0;
};
GroundRowOperational ground_row_operational(PlateauExplorer& explorer);

// Exact aggregated rates from a first-shell well into the rectangles with
// loaded sides.
Rational omega2_rate_exact(PlateauExplorer& explorer, int i, int j);

// Configurations of the source well of a class at the origin: the whole well
// for the two collapsed families, the single configuration otherwise.
std::vector<Configuration> source_well(const FamilyCatalog& catalog, int cls, const TorusPtr& torus);

struct Neighborhood {
  std::vector<Configuration> starts;  // distinct, in discovery order
  int duplicates = 0;
};
// Second-shell configurations one cheapest uphill move away from the well.
Neighborhood uphill_neighborhood(const FamilyCatalog& catalog, int cls, const TorusPtr& torus);

// Image of a class at an anchor under a lattice symmetry.
ClassAt transform_class(const FamilyCatalog& catalog, const TorusPtr& torus, int g, ClassAt c);

struct AuditCheck {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double bound = 0.0;
  std::string detail;
};
struct RateAudit {
  std::vector<AuditCheck> checks;
  bool pass() const;
};
// Exact identities and lower bounds of the table; `rational` recomputes the
// rectangle rates in exact arithmetic.
RateAudit audit_rate_table(const RateTable& table, PlateauExplorer& explorer, bool rational);

// Largest probability, over the 16 neighbours of the square, that the limit
// chain leaves the square and its neighbours before returning to the square.
// Needs the ground row and the 16 first-shell rows.
double neighborhood_escape_probability(const RateTable& table);

struct PathAudit {
  std::array<double, 4> head{};   // first four rates of the sliding path
  std::array<double, 4> tail{};   // the mirrored four at the far end
  double middle_bottleneck = 0.0; // widest route between the two ends through rectangle classes
  bool reachable = false;
};
// Needs the ground row and the rows of every first-shell and rectangle class.
PathAudit sliding_path_audit(const RateTable& table);

}  // namespace kawasaki
