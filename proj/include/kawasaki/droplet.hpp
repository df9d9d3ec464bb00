// Configuration families around the n x n droplet: squares, quasi-squares
// with an attached particle, rectangles with loaded sides, and the
// classification, quotient and center-of-mass operations built on them.
#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kawasaki/lattice.hpp"

namespace kawasaki {

enum class Family {
  Square,
  QuasiSquarePlusParticle,
  RectWithSideParticles,
  RectPlusParticle,
  Rect2WithSideParticles,
  EnergyShell,
  Plateau,
  Other,
};

enum class Orientation { Lying = 0, Standing = 1 };

const char* family_name(Family f);
const char* orientation_name(Orientation a);

// Index pairs (k_i, l_i) of particles attached to the four sides of the
// inner rectangle. `wide` selects the (n+2) x (n-2) construction.
struct SideLoad {
  Orientation orient = Orientation::Lying;
  bool wide = false;
  std::array<int, 4> k{};
  std::array<int, 4> l{};
  friend bool operator==(const SideLoad&, const SideLoad&) = default;
};

struct DropletClass {
  Family kind = Family::Other;
  Site anchor{};
  int corner = -1;     // missing corner i of the quasi-square
  int side = -1;       // side j carrying the extra particle
  Orientation orient = Orientation::Lying;
  Site extra{};        // extra particle, relative to the anchor
  SideLoad load{};
  int shell = -1;      // energy above the ground state
  int segment = -1;    // plateau label, see xi_star_membership

  std::string describe() const;
};

// Geometry of the families, all relative to the anchor x = 0.
std::vector<Site> square_sites(int n);
Site corner_site(int i, int n);
std::vector<Site> quasi_square_sites(int i, int n);
// Outer boundary side j of an arbitrary finite set (0 bottom, 1 right, 2 top, 3 left).
std::vector<Site> outer_side(const std::vector<Site>& set, int j);
// Sites of the j-th outer side of the quasi-square missing corner i, minus the square.
std::vector<Site> quasi_square_side(int i, int j, int n);
Site quasi_square_midpoint(int j, int n);
std::vector<Site> rectangle_sites(Orientation a, int n);
std::vector<Site> rectangle_side(Orientation a, int j, int n);
Site rectangle_midpoint(Orientation a, int j, int n);

std::array<int, 4> side_lengths(Orientation a, bool wide, int n);
// Membership in the index set: bounds plus the corner-continuity rule.
bool side_load_valid(const SideLoad& load, int n);
std::vector<Site> side_load_sites(const SideLoad& load, int n);
std::array<int, 4> side_counts(const SideLoad& load);
bool side_load_admissible(const SideLoad& load, int n);  // occupancy n^2 and all counts >= 2
std::vector<SideLoad> enumerate_side_loads(bool wide, int n);

struct CatalogEntry {
  DropletClass cls;          // anchor {0,0}
  std::vector<Site> sites;   // sorted, relative to the anchor
  int xi_class = -1;         // class of the collapsed representative
  bool representative = false;
  int level = 0;             // 0 ground, 1..4 for the four families
};

// All family members of size n at anchor 0, indexed by translation-normalized
// shape, plus the numbering of translation classes of the reduced set.
class FamilyCatalog {
 public:
  explicit FamilyCatalog(int n);
  static std::shared_ptr<const FamilyCatalog> get(int n);

  int n() const { return n_; }
  const std::vector<CatalogEntry>& entries() const { return entries_; }
  const CatalogEntry& entry(int idx) const { return entries_[idx]; }

  struct Match {
    int entry = -1;
    Site anchor{};
  };
  // Exact family membership; requires an empty row and column on the torus.
  std::optional<Match> match(const Configuration& config) const;

  int num_xi_classes() const { return int(xi_entries_.size()); }
  int xi_entry(int cls) const { return xi_entries_[cls]; }
  const CatalogEntry& xi_class(int cls) const { return entries_[xi_entries_[cls]]; }
  int count_omega2() const { return n_omega2_; }
  int count_omega4() const { return n_omega4_; }
  const std::vector<std::string>& collisions() const { return collisions_; }

  static int gamma_class() { return 0; }
  static int omega1_class(int i, int j) { return 1 + 4 * i + j; }
  static int omega3_class(Orientation a, int j) { return 17 + 4 * int(a) + j; }
  int omega2_class(int ordinal) const { return 25 + ordinal; }
  int omega4_class(int ordinal) const { return 25 + n_omega2_ + ordinal; }

  Configuration build(int entry, Site anchor, const TorusPtr& torus) const;

 private:
  void add(CatalogEntry e);

  int n_;
  std::vector<CatalogEntry> entries_;
  std::vector<int> xi_entries_;
  int n_omega2_ = 0;
  int n_omega4_ = 0;
  std::unordered_map<std::string, std::pair<int, Site>> index_;
  std::vector<std::string> collisions_;
};

// Translation-normalized shape key and offset from normalized origin to the
// configuration coordinates. Empty when the particles wrap around the torus.
struct NormalizedShape {
  std::string key;
  Site origin{};
};
std::optional<NormalizedShape> normalize_shape(const Configuration& config);
std::string shape_key(std::vector<Site> sites);

DropletClass classify(const Configuration& config, const FamilyCatalog& catalog);
DropletClass classify(const Configuration& config, const SimulationParams& params);

// Rejects invalid parameters with std::invalid_argument.
Configuration build_representative(const DropletClass& cls, const SimulationParams& params);
DropletClass omega1_representative(int i, int j, Site anchor, int n);
DropletClass omega3_representative(Orientation a, int j, Site anchor, int n);

enum class FamilySet { Gamma, Omega1Hat, Omega2, Omega3Hat, Omega4, Xi };
std::vector<Configuration> enumerate_family(FamilySet family, int n, int L);
// Streaming form: anchors in torus index order, classes in catalog order.
void for_each_in_family(FamilySet family, int n, int L,
                        const std::function<void(const Configuration&)>& fn);

struct XiStarMembership {
  bool member = false;
  int segment = -1;        // lowest family level touched by the plateau
  std::size_t plateau_size = 0;
};
XiStarMembership xi_star_membership(const Configuration& config, const FamilyCatalog& catalog,
                                    std::size_t state_cap = 2'000'000);
bool is_in_Xi_star(const Configuration& config, const SimulationParams& params);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};
// Center of mass of the largest connected component, unwrapped around the
// component's lexicographically minimal site. With check_membership the
// sentinel {0,0} is returned outside the confinement set.
Point2 center_of_mass(const Configuration& config, const SimulationParams& params,
                      bool check_membership = true);

struct QuotientClass {
  Configuration canonical;
  Site offset{};
};
QuotientClass canonicalize(const Configuration& config);

// Dihedral group of the lattice, g in 0..7: rotation by g%4 quarter turns,
// preceded by the reflection x -> -x when g >= 4.
Site apply_dihedral(int g, Site s);
Configuration apply_dihedral(int g, const Configuration& config);

}  // namespace kawasaki
