#include <algorithm>
#include <cstring>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>

#include "kawasaki/droplet.hpp"

namespace kawasaki {

const char* family_name(Family f) {
  switch (f) {
    case Family::Square: return "Square";
    case Family::QuasiSquarePlusParticle: return "QuasiSquarePlusParticle";
    case Family::RectWithSideParticles: return "RectWithSideParticles";
    case Family::RectPlusParticle: return "RectPlusParticle";
    case Family::Rect2WithSideParticles: return "Rect2WithSideParticles";
    case Family::EnergyShell: return "EnergyShell";
    case Family::Plateau: return "Plateau";
    case Family::Other: return "Other";
  }
  return "?";
}

const char* orientation_name(Orientation a) { return a == Orientation::Lying ? "lying" : "standing"; }

std::string DropletClass::describe() const {
  std::ostringstream os;
  os << family_name(kind) << "@(" << anchor.x << "," << anchor.y << ")";
  switch (kind) {
    case Family::QuasiSquarePlusParticle:
      os << " i=" << corner << " j=" << side << " z=(" << extra.x << "," << extra.y << ")";
      break;
    case Family::RectPlusParticle:
      os << " a=" << orientation_name(orient) << " j=" << side << " z=(" << extra.x << "," << extra.y
         << ")";
      break;
    case Family::RectWithSideParticles:
    case Family::Rect2WithSideParticles:
      os << " a=" << orientation_name(orient) << " kl=";
      for (int i = 0; i < 4; ++i) os << (i ? ";" : "") << load.k[i] << "," << load.l[i];
      break;
    case Family::EnergyShell:
    case Family::Other:
      os << " shell=" << shell;
      break;
    case Family::Plateau:
      os << " segment=" << segment;
      break;
    default:
      break;
  }
  return os.str();
}

std::vector<Site> square_sites(int n) {
  std::vector<Site> out;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) out.push_back({x, y});
  return out;
}

Site corner_site(int i, int n) {
  switch (i & 3) {
    case 0: return {0, 0};
    case 1: return {n - 1, 0};
    case 2: return {n - 1, n - 1};
    default: return {0, n - 1};
  }
}

std::vector<Site> quasi_square_sites(int i, int n) {
  std::vector<Site> out = square_sites(n);
  std::erase(out, corner_site(i, n));
  return out;
}

std::vector<Site> outer_side(const std::vector<Site>& set, int j) {
  // Offset from a side site z to the set site y it touches.
  static constexpr Site kToSet[4] = {{0, 1}, {-1, 0}, {0, -1}, {1, 0}};
  std::set<Site> in(set.begin(), set.end());
  std::set<Site> out;
  for (const Site& y : set) {
    const Site z = y - kToSet[j & 3];
    if (!in.count(z)) out.insert(z);
  }
  return {out.begin(), out.end()};
}

std::vector<Site> quasi_square_side(int i, int j, int n) {
  const std::vector<Site> q = square_sites(n);
  const std::set<Site> square(q.begin(), q.end());
  std::vector<Site> out;
  for (const Site& z : outer_side(quasi_square_sites(i, n), j))
    if (!square.count(z)) out.push_back(z);
  return out;
}

Site quasi_square_midpoint(int j, int n) {
  const bool even = n % 2 == 0;
  const int lo = even ? n / 2 - 1 : (n - 1) / 2;
  const int hi = even ? n / 2 : (n - 1) / 2;
  switch (j & 3) {
    case 0: return {lo, -1};
    case 1: return {n, lo};
    case 2: return {hi, n};
    default: return {-1, hi};
  }
}

std::vector<Site> rectangle_sites(Orientation a, int n) {
  const int w = a == Orientation::Lying ? n + 1 : n - 1;
  const int h = a == Orientation::Lying ? n - 1 : n + 1;
  std::vector<Site> out;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.push_back({x, y});
  return out;
}

std::vector<Site> rectangle_side(Orientation a, int j, int n) {
  return outer_side(rectangle_sites(a, n), j);
}

Site rectangle_midpoint(Orientation a, int j, int n) {
  const bool even = n % 2 == 0;
  if (a == Orientation::Lying) {
    switch (j & 3) {
      case 0: return {even ? n / 2 : (n - 1) / 2, -1};
      case 1: return {n + 1, even ? (n - 2) / 2 : (n - 3) / 2};
      case 2: return {even ? n / 2 : (n + 1) / 2, n - 1};
      default: return {-1, even ? (n - 2) / 2 : (n - 1) / 2};
    }
  }
  switch (j & 3) {
    case 0: return {even ? (n - 2) / 2 : (n - 3) / 2, -1};
    case 1: return {n - 1, even ? n / 2 : (n - 1) / 2};
    case 2: return {even ? (n - 2) / 2 : (n - 1) / 2, n + 1};
    default: return {-1, even ? n / 2 : (n + 1) / 2};
  }
}

namespace {

// Interior width and height of the inner rectangle of a side load.
std::pair<int, int> inner_dims(Orientation a, bool wide, int n) {
  if (!wide) return a == Orientation::Lying ? std::pair{n - 1, n - 2} : std::pair{n - 2, n - 1};
  return a == Orientation::Lying ? std::pair{n, n - 3} : std::pair{n - 3, n};
}

}  // namespace

std::array<int, 4> side_lengths(Orientation a, bool wide, int n) {
  const auto [w, h] = inner_dims(a, wide, n);
  return {w, h, w, h};
}

bool side_load_valid(const SideLoad& load, int n) {
  const auto len = side_lengths(load.orient, load.wide, n);
  for (int i = 0; i < 4; ++i) {
    if (load.k[i] < 0 || load.k[i] > load.l[i] || load.l[i] > len[i]) return false;
  }
  for (int j = 0; j < 4; ++j) {
    const int prev = (j + 3) % 4;
    if (load.k[j] == 0 && load.l[prev] != len[prev]) return false;
  }
  return true;
}

std::vector<Site> side_load_sites(const SideLoad& load, int n) {
  const auto [w, h] = inner_dims(load.orient, load.wide, n);
  const int X = w + 1;
  const int Y = h + 1;
  std::vector<Site> out;
  for (int y = 1; y <= h; ++y)
    for (int x = 1; x <= w; ++x) out.push_back({x, y});
  for (int a = load.k[0]; a <= load.l[0]; ++a) out.push_back({a, 0});
  for (int b = load.k[1]; b <= load.l[1]; ++b) out.push_back({X, b});
  for (int a = load.k[2]; a <= load.l[2]; ++a) out.push_back({X - a, Y});
  for (int b = load.k[3]; b <= load.l[3]; ++b) out.push_back({0, Y - b});
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::array<int, 4> side_counts(const SideLoad& load) {
  std::array<int, 4> m{};
  for (int i = 0; i < 4; ++i) m[i] = load.l[i] - load.k[i] + (load.k[(i + 1) % 4] == 0 ? 2 : 1);
  return m;
}

bool side_load_admissible(const SideLoad& load, int n) {
  if (!side_load_valid(load, n)) return false;
  if (int(side_load_sites(load, n).size()) != n * n) return false;
  for (int m : side_counts(load))
    if (m < 2) return false;
  return true;
}

std::vector<SideLoad> enumerate_side_loads(bool wide, int n) {
  std::vector<SideLoad> out;
  for (Orientation a : {Orientation::Lying, Orientation::Standing}) {
    const auto len = side_lengths(a, wide, n);
    if (len[0] < 1 || len[1] < 1) continue;
    SideLoad s;
    s.orient = a;
    s.wide = wide;
    // Lexicographic over (k0,l0,k1,l1,k2,l2,k3,l3).
    for (s.k[0] = 0; s.k[0] <= len[0]; ++s.k[0])
      for (s.l[0] = s.k[0]; s.l[0] <= len[0]; ++s.l[0])
        for (s.k[1] = 0; s.k[1] <= len[1]; ++s.k[1])
          for (s.l[1] = s.k[1]; s.l[1] <= len[1]; ++s.l[1])
            for (s.k[2] = 0; s.k[2] <= len[2]; ++s.k[2])
              for (s.l[2] = s.k[2]; s.l[2] <= len[2]; ++s.l[2])
                for (s.k[3] = 0; s.k[3] <= len[3]; ++s.k[3])
                  for (s.l[3] = s.k[3]; s.l[3] <= len[3]; ++s.l[3]) {
                    // The four side segments and the interior are disjoint,
                    // so the particle count is a plain sum.
                    int count = len[0] * len[1];
                    for (int i = 0; i < 4; ++i) count += s.l[i] - s.k[i] + 1;
                    if (count == n * n && side_load_admissible(s, n)) out.push_back(s);
                  }
  }
  return out;
}

std::string shape_key(std::vector<Site> sites) {
  if (sites.empty()) return {};
  int mx = sites[0].x;
  int my = sites[0].y;
  for (const Site& s : sites) {
    mx = std::min(mx, s.x);
    my = std::min(my, s.y);
  }
  for (Site& s : sites) s = s - Site{mx, my};
  std::sort(sites.begin(), sites.end());
  std::string key(sites.size() * 4, '\0');
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const std::uint16_t x = std::uint16_t(sites[i].x);
    const std::uint16_t y = std::uint16_t(sites[i].y);
    std::memcpy(&key[4 * i], &x, 2);
    std::memcpy(&key[4 * i + 2], &y, 2);
  }
  return key;
}

std::optional<NormalizedShape> normalize_shape(const Configuration& config) {
  const Torus& g = config.geometry();
  const int side = g.side();
  const int L = g.half_side();
  std::vector<int> rows(side, 0);
  std::vector<int> cols(side, 0);
  const std::vector<int> occ = config.occupied_sites();
  if (occ.empty()) return std::nullopt;
  for (int idx : occ) {
    ++rows[idx / side];
    ++cols[idx % side];
  }
  const auto r0 = std::find(rows.begin(), rows.end(), 0);
  const auto c0 = std::find(cols.begin(), cols.end(), 0);
  if (r0 == rows.end() || c0 == cols.end()) return std::nullopt;
  const int er = int(r0 - rows.begin());
  const int ec = int(c0 - cols.begin());
  std::vector<Site> pts;
  pts.reserve(occ.size());
  int mx = side;
  int my = side;
  for (int idx : occ) {
    const int ux = (idx % side - ec - 1 + side) % side;
    const int uy = (idx / side - er - 1 + side) % side;
    pts.push_back({ux, uy});
    mx = std::min(mx, ux);
    my = std::min(my, uy);
  }
  NormalizedShape out;
  out.key = shape_key(std::move(pts));
  out.origin = g.wrap({ec + 1 + mx - L, er + 1 + my - L});
  return out;
}

FamilyCatalog::FamilyCatalog(int n) : n_(n) {
  if (n < 3) throw std::invalid_argument("family catalog needs n >= 3");

  CatalogEntry gamma;
  gamma.cls.kind = Family::Square;
  gamma.sites = square_sites(n);
  gamma.xi_class = gamma_class();
  gamma.representative = true;
  gamma.level = 0;
  add(gamma);

  std::vector<int> reps(25, -1);
  reps[0] = 0;
  for (int i = 0; i < 4; ++i) {
    const Site wi = corner_site(i, n);
    for (int j = 0; j < 4; ++j) {
      const Site mid = quasi_square_midpoint(j, n);
      for (const Site& z : quasi_square_side(i, j, n)) {
        CatalogEntry e;
        e.cls.kind = Family::QuasiSquarePlusParticle;
        e.cls.corner = i;
        e.cls.side = j;
        e.cls.extra = z;
        e.sites = square_sites(n);
        std::erase(e.sites, wi);
        e.sites.push_back(z);
        e.xi_class = omega1_class(i, j);
        e.representative = z == mid;
        e.level = 1;
        if (e.representative) reps[e.xi_class] = int(entries_.size());
        add(std::move(e));
      }
    }
  }
  for (Orientation a : {Orientation::Lying, Orientation::Standing}) {
    for (int j = 0; j < 4; ++j) {
      const Site mid = rectangle_midpoint(a, j, n);
      for (const Site& z : rectangle_side(a, j, n)) {
        CatalogEntry e;
        e.cls.kind = Family::RectPlusParticle;
        e.cls.orient = a;
        e.cls.side = j;
        e.cls.extra = z;
        e.sites = rectangle_sites(a, n);
        e.sites.push_back(z);
        e.xi_class = omega3_class(a, j);
        e.representative = z == mid;
        e.level = 3;
        if (e.representative) reps[e.xi_class] = int(entries_.size());
        add(std::move(e));
      }
    }
  }
  for (int c = 0; c < 25; ++c) {
    if (reps[c] < 0) throw std::logic_error("family catalog: missing well representative");
  }
  const auto omega2 = enumerate_side_loads(false, n);
  const auto omega4 = enumerate_side_loads(true, n);
  n_omega2_ = int(omega2.size());
  n_omega4_ = int(omega4.size());
  for (int pass = 0; pass < 2; ++pass) {
    const auto& loads = pass == 0 ? omega2 : omega4;
    for (std::size_t o = 0; o < loads.size(); ++o) {
      CatalogEntry e;
      e.cls.kind = pass == 0 ? Family::RectWithSideParticles : Family::Rect2WithSideParticles;
      e.cls.orient = loads[o].orient;
      e.cls.load = loads[o];
      e.sites = side_load_sites(loads[o], n);
      e.xi_class = pass == 0 ? omega2_class(int(o)) : omega4_class(int(o));
      e.representative = true;
      e.level = pass == 0 ? 2 : 4;
      reps.push_back(int(entries_.size()));
      add(std::move(e));
    }
  }
  xi_entries_ = std::move(reps);
}

void FamilyCatalog::add(CatalogEntry e) {
  std::sort(e.sites.begin(), e.sites.end());
  if (int(e.sites.size()) != n_ * n_) throw std::logic_error("family catalog: wrong particle count");
  const std::string key = shape_key(e.sites);
  Site lo = e.sites.front();
  for (const Site& s : e.sites) {
    lo.x = std::min(lo.x, s.x);
    lo.y = std::min(lo.y, s.y);
  }
  const int idx = int(entries_.size());
  const auto [it, inserted] = index_.emplace(key, std::pair{idx, -lo});
  if (!inserted) {
    collisions_.push_back(e.cls.describe() + " duplicates " + entries_[it->second.first].cls.describe());
  }
  entries_.push_back(std::move(e));
}

std::shared_ptr<const FamilyCatalog> FamilyCatalog::get(int n) {
  static std::mutex mu;
  static std::map<int, std::shared_ptr<const FamilyCatalog>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_shared<const FamilyCatalog>(n);
  return slot;
}

std::optional<FamilyCatalog::Match> FamilyCatalog::match(const Configuration& config) const {
  if (config.particle_count() != n_ * n_) return std::nullopt;
  const auto shape = normalize_shape(config);
  if (!shape) return std::nullopt;
  const auto it = index_.find(shape->key);
  if (it == index_.end()) return std::nullopt;
  return Match{it->second.first, config.geometry().wrap(shape->origin + it->second.second)};
}

Configuration FamilyCatalog::build(int entry, Site anchor, const TorusPtr& torus) const {
  std::vector<Site> pts;
  pts.reserve(entries_[entry].sites.size());
  for (const Site& s : entries_[entry].sites) pts.push_back(anchor + s);
  return Configuration::from_sites(torus, pts);
}

}  // namespace kawasaki
