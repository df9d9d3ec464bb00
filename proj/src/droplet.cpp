#include <algorithm>
#include <deque>
#include <stdexcept>
#include <unordered_set>

#include "kawasaki/droplet.hpp"

namespace kawasaki {

namespace {

long ground_energy(int n) { return -2L * n * (n - 1); }

DropletClass class_from_entry(const CatalogEntry& e, Site anchor) {
  DropletClass c = e.cls;
  c.anchor = anchor;
  c.shell = e.level == 0 ? 0 : 1;
  return c;
}

bool contains(const std::vector<Site>& v, Site s) { return std::find(v.begin(), v.end(), s) != v.end(); }

}  // namespace

DropletClass classify(const Configuration& config, const FamilyCatalog& catalog) {
  const int n = catalog.n();
  if (config.particle_count() != n * n) {
    throw std::invalid_argument("classify: particle count differs from n^2");
  }
  const int shell = int(hamiltonian(config) - ground_energy(n));
  if (shell <= 1) {
    if (const auto m = catalog.match(config)) return class_from_entry(catalog.entry(m->entry), m->anchor);
  }
  DropletClass c;
  c.shell = shell;
  if (shell == 2) {
    const XiStarMembership mem = xi_star_membership(config, catalog);
    if (mem.member) {
      c.kind = Family::Plateau;
      c.segment = mem.segment;
      return c;
    }
  }
  c.kind = shell <= 2 ? Family::EnergyShell : Family::Other;
  return c;
}

DropletClass classify(const Configuration& config, const SimulationParams& params) {
  params.validate();
  return classify(config, *FamilyCatalog::get(params.n));
}

DropletClass omega1_representative(int i, int j, Site anchor, int n) {
  DropletClass c;
  c.kind = Family::QuasiSquarePlusParticle;
  c.anchor = anchor;
  c.corner = i;
  c.side = j;
  c.extra = quasi_square_midpoint(j, n);
  c.shell = 1;
  return c;
}

DropletClass omega3_representative(Orientation a, int j, Site anchor, int n) {
  DropletClass c;
  c.kind = Family::RectPlusParticle;
  c.anchor = anchor;
  c.orient = a;
  c.side = j;
  c.extra = rectangle_midpoint(a, j, n);
  c.shell = 1;
  return c;
}

Configuration build_representative(const DropletClass& cls, const SimulationParams& params) {
  params.validate();
  const int n = params.n;
  std::vector<Site> sites;
  switch (cls.kind) {
    case Family::Square:
      sites = square_sites(n);
      break;
    case Family::QuasiSquarePlusParticle:
      if (cls.corner < 0 || cls.corner > 3 || cls.side < 0 || cls.side > 3)
        throw std::invalid_argument("build_representative: corner/side out of range");
      if (!contains(quasi_square_side(cls.corner, cls.side, n), cls.extra))
        throw std::invalid_argument("build_representative: extra particle not on the required side");
      sites = quasi_square_sites(cls.corner, n);
      sites.push_back(cls.extra);
      break;
    case Family::RectPlusParticle:
      if (cls.side < 0 || cls.side > 3) throw std::invalid_argument("build_representative: side out of range");
      if (!contains(rectangle_side(cls.orient, cls.side, n), cls.extra))
        throw std::invalid_argument("build_representative: extra particle not on the required side");
      sites = rectangle_sites(cls.orient, n);
      sites.push_back(cls.extra);
      break;
    case Family::RectWithSideParticles:
    case Family::Rect2WithSideParticles: {
      SideLoad load = cls.load;
      load.orient = cls.orient;
      load.wide = cls.kind == Family::Rect2WithSideParticles;
      if (!side_load_admissible(load, n)) throw std::invalid_argument("build_representative: invalid side load");
      sites = side_load_sites(load, n);
      break;
    }
    default:
      throw std::invalid_argument("build_representative: class has no constructible representative");
  }
  for (Site& s : sites) s = s + cls.anchor;
  return Configuration::from_sites(make_torus(params.L), sites);
}

void for_each_in_family(FamilySet family, int n, int L, const std::function<void(const Configuration&)>& fn) {
  const auto catalog = FamilyCatalog::get(n);
  const TorusPtr torus = make_torus(L);
  std::vector<int> classes;
  const auto want = [&](int level) {
    switch (family) {
      case FamilySet::Gamma: return level == 0;
      case FamilySet::Omega1Hat: return level == 1;
      case FamilySet::Omega2: return level == 2;
      case FamilySet::Omega3Hat: return level == 3;
      case FamilySet::Omega4: return level == 4;
      case FamilySet::Xi: return true;
    }
    return false;
  };
  for (int c = 0; c < catalog->num_xi_classes(); ++c)
    if (want(catalog->xi_class(c).level)) classes.push_back(catalog->xi_entry(c));
  for (int idx = 0; idx < torus->num_sites(); ++idx) {
    const Site x = torus->coords(idx);
    for (int e : classes) fn(catalog->build(e, x, torus));
  }
}

std::vector<Configuration> enumerate_family(FamilySet family, int n, int L) {
  std::vector<Configuration> out;
  for_each_in_family(family, n, L, [&](const Configuration& c) { out.push_back(c); });
  return out;
}

XiStarMembership xi_star_membership(const Configuration& config, const FamilyCatalog& catalog,
                                    std::size_t state_cap) {
  XiStarMembership out;
  const int n = catalog.n();
  if (config.particle_count() != n * n) return out;
  const long shell = hamiltonian(config) - ground_energy(n);
  if (shell <= 1) {
    if (const auto m = catalog.match(config)) {
      out.member = true;
      out.segment = catalog.entry(m->entry).level;
    }
    return out;
  }
  if (shell != 2) return out;

  std::unordered_set<Configuration, ConfigurationHash> seen{config};
  std::deque<Configuration> queue{config};
  int best = 99;
  while (!queue.empty()) {
    Configuration cur = std::move(queue.front());
    queue.pop_front();
    for (const Move& mv : enumerate_active_moves(cur)) {
      if (mv.delta_h > 0) break;
      Configuration next = exchange(cur, mv.from, mv.to);
      if (mv.delta_h < 0) {
        if (const auto m = catalog.match(next)) best = std::min(best, catalog.entry(m->entry).level);
        continue;
      }
      if (seen.insert(next).second) {
        if (seen.size() > state_cap) throw std::runtime_error("xi_star_membership: plateau exceeds state cap");
        queue.push_back(std::move(next));
      }
    }
  }
  out.plateau_size = seen.size();
  if (best < 99) {
    out.member = true;
    out.segment = best;
  }
  return out;
}

bool is_in_Xi_star(const Configuration& config, const SimulationParams& params) {
  params.validate();
  return xi_star_membership(config, *FamilyCatalog::get(params.n)).member;
}

Point2 center_of_mass(const Configuration& config, const SimulationParams& params, bool check_membership) {
  if (check_membership && !is_in_Xi_star(config, params)) return {};
  const Torus& g = config.geometry();
  static constexpr Site kDir[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  std::vector<int> comp(g.num_sites(), -1);
  std::vector<Site> best_rel;
  Site best_origin{};
  int ncomp = 0;
  for (int start : config.occupied_sites()) {
    if (comp[start] >= 0) continue;
    std::vector<std::pair<int, Site>> members{{start, {0, 0}}};
    comp[start] = ncomp;
    for (std::size_t h = 0; h < members.size(); ++h) {
      const auto [u, pos] = members[h];
      const auto& nb = g.neighbors(u);
      for (int d = 0; d < 4; ++d) {
        const int v = nb[d];
        if (!config.occupied(v) || comp[v] >= 0) continue;
        comp[v] = ncomp;
        members.push_back({v, pos + kDir[d]});
      }
    }
    ++ncomp;
    std::size_t lo = 0;
    for (std::size_t h = 1; h < members.size(); ++h)
      if (g.coords(members[h].first) < g.coords(members[lo].first)) lo = h;
    const Site origin = g.coords(members[lo].first);
    const bool larger = members.size() > best_rel.size();
    const bool tie_wins = members.size() == best_rel.size() && origin < best_origin;
    if (!larger && !tie_wins) continue;
    best_origin = origin;
    best_rel.clear();
    for (const auto& [idx, pos] : members) best_rel.push_back(pos - members[lo].second);
  }
  if (best_rel.empty()) return {};
  double sx = 0.0;
  double sy = 0.0;
  for (const Site& s : best_rel) {
    sx += s.x;
    sy += s.y;
  }
  const double m = double(best_rel.size());
  return {best_origin.x + sx / m, best_origin.y + sy / m};
}

QuotientClass canonicalize(const Configuration& config) {
  const Torus& g = config.geometry();
  const int side = g.side();
  const std::vector<Site> pts = config.occupied_coords();
  if (pts.empty()) return {config, {0, 0}};
  const auto mod = [side](int v) { return ((v % side) + side) % side; };
  std::vector<int> best;
  std::vector<int> cur(pts.size());
  Site best_p{};
  for (const Site& p : pts) {
    for (std::size_t q = 0; q < pts.size(); ++q) cur[q] = mod(pts[q].y - p.y) * side + mod(pts[q].x - p.x);
    std::sort(cur.begin(), cur.end());
    if (best.empty() || cur < best) {
      best = cur;
      best_p = p;
    }
  }
  return {config.translated(-best_p), best_p};
}

}  // namespace kawasaki
