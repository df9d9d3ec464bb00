#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <set>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

#include "kawasaki/plateau.hpp"

namespace kawasaki {

namespace {

constexpr int kFormatVersion = 1;
constexpr double kExactTolerance = 1e-12;

bool is_well_level(int level) { return level == 1 || level == 3; }

}  // namespace

RateTable::RateTable(int n, int L) : n_(n), L_(L) {
  SimulationParams p;
  p.n = n;
  p.L = L;
  p.ell = 1;
  p.validate();
  if (n < 3) throw std::invalid_argument("RateTable: n must be at least 3");
  catalog_ = FamilyCatalog::get(n);
  torus_ = make_torus(L);
  const int k = catalog_->num_xi_classes();
  rows_.assign(k, {});
  diag_.assign(k, {});
  has_row_.assign(k, 0);
}

Site RateTable::wrap(Site s) const { return torus_->wrap(s); }

double RateTable::rate(int src, int dst, Site offset) const {
  if (src < 0 || src >= num_classes()) throw std::out_of_range("RateTable::rate: source class out of range");
  const Site o = wrap(offset);
  for (const RateEntry& e : rows_[src])
    if (e.target == dst && e.offset == o) return e.value;
  return 0.0;
}

double RateTable::exit_rate(int cls) const {
  double s = 0.0;
  for (const RateEntry& e : rows_[cls]) s += e.value;
  return s;
}

void RateTable::set_row(int cls, std::vector<RateEntry> entries, RowDiagnostics d) {
  if (cls < 0 || cls >= num_classes()) throw std::out_of_range("RateTable::set_row: class out of range");
  std::map<std::pair<int, Site>, double> merged;
  for (const RateEntry& e : entries) {
    if (e.value < 0.0) throw std::invalid_argument("RateTable::set_row: negative rate");
    merged[{e.target, wrap(e.offset)}] += e.value;
  }
  auto& row = rows_[cls];
  row.clear();
  for (const auto& [key, v] : merged)
    if (v != 0.0) row.push_back({key.first, key.second, v});
  diag_[cls] = d;
  has_row_[cls] = 1;
}

std::string RateTable::to_json() const {
  nlohmann::json j;
  j["format"] = "kawasaki-rate-table";
  j["version"] = kFormatVersion;
  j["n"] = n_;
  j["L"] = L_;
  j["classes"] = num_classes();
  nlohmann::json rows = nlohmann::json::array();
  for (int c = 0; c < num_classes(); ++c) {
    if (!has_row_[c]) continue;
    nlohmann::json r;
    r["source"] = c;
    r["prefactor"] = prefactor_power(c) == 2 ? "exp(-2beta)" : "exp(-beta)";
    nlohmann::json entries = nlohmann::json::array();
    for (const RateEntry& e : rows_[c])
      entries.push_back({{"target", e.target}, {"offset", {e.offset.x, e.offset.y}}, {"value", e.value}});
    r["entries"] = std::move(entries);
    const RowDiagnostics& d = diag_[c];
    r["diagnostics"] = {{"starts", d.starts},       {"duplicate_starts", d.duplicate_starts},
                        {"self_mass", d.self_mass}, {"leak", d.leak},
                        {"stuck", d.stuck},         {"residual", d.residual},
                        {"states", d.states}};
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j.dump(1);
}

RateTable RateTable::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("format") != "kawasaki-rate-table") throw std::invalid_argument("RateTable::from_json: unknown format");
  if (j.at("version").get<int>() != kFormatVersion)
    throw std::invalid_argument("RateTable::from_json: unsupported version");
  RateTable t(j.at("n").get<int>(), j.at("L").get<int>());
  if (j.at("classes").get<int>() != t.num_classes())
    throw std::invalid_argument("RateTable::from_json: class count does not match the catalog");
  for (const auto& r : j.at("rows")) {
    std::vector<RateEntry> entries;
    for (const auto& e : r.at("entries"))
      entries.push_back({e.at("target").get<int>(), {e.at("offset")[0].get<int>(), e.at("offset")[1].get<int>()},
                         e.at("value").get<double>()});
    RowDiagnostics d;
    const auto& dj = r.at("diagnostics");
    d.starts = dj.at("starts");
    d.duplicate_starts = dj.at("duplicate_starts");
    d.self_mass = dj.at("self_mass");
    d.leak = dj.at("leak");
    d.stuck = dj.at("stuck");
    d.residual = dj.at("residual");
    d.states = dj.at("states");
    t.set_row(r.at("source").get<int>(), std::move(entries), d);
  }
  return t;
}

std::string RateTable::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : to_json()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<Configuration> source_well(const FamilyCatalog& catalog, int cls, const TorusPtr& torus) {
  if (cls < 0 || cls >= catalog.num_xi_classes()) throw std::out_of_range("source_well: class out of range");
  std::vector<Configuration> out;
  const int level = catalog.xi_class(cls).level;
  if (!is_well_level(level)) {
    out.push_back(catalog.build(catalog.xi_entry(cls), {0, 0}, torus));
    return out;
  }
  for (int e = 0; e < int(catalog.entries().size()); ++e)
    if (catalog.entry(e).xi_class == cls) out.push_back(catalog.build(e, {0, 0}, torus));
  return out;
}

Neighborhood uphill_neighborhood(const FamilyCatalog& catalog, int cls, const TorusPtr& torus) {
  // The square leaves its shell only through the +2 corner moves.
  const int step = cls == FamilyCatalog::gamma_class() ? 2 : 1;
  Neighborhood out;
  std::unordered_map<Configuration, int, ConfigurationHash> seen;
  for (const Configuration& c : source_well(catalog, cls, torus)) {
    for (const Move& m : enumerate_active_moves(c)) {
      if (m.delta_h != step) continue;
      Configuration next = exchange(c, m.from, m.to);
      if (seen.emplace(next, int(out.starts.size())).second) {
        out.starts.push_back(std::move(next));
      } else {
        ++out.duplicates;
      }
    }
  }
  return out;
}

namespace {

std::vector<RateEntry> operational_row(PlateauExplorer& explorer, int cls, RowDiagnostics& d) {
  const FamilyCatalog& catalog = explorer.catalog();
  const Torus& torus = *explorer.torus();
  const Neighborhood nb = uphill_neighborhood(catalog, cls, explorer.torus());
  d = {};
  d.starts = int(nb.starts.size());
  d.duplicate_starts = nb.duplicates;
  std::map<int, std::vector<std::pair<int, double>>> by_component;
  for (const Configuration& c : nb.starts) {
    const auto loc = explorer.locate(c);
    by_component[loc.component].push_back({loc.state, 1.0});
  }
  std::map<ClassAt, double> mass;
  for (const auto& [cid, starts] : by_component) {
    const PlateauComponent& comp = explorer.component(cid);
    d.states += comp.size();
    if (comp.stuck()) {
      d.stuck += double(starts.size());
      continue;
    }
    const auto m = comp.absorb(starts);
    d.residual = std::max(d.residual, comp.solver->last_residual());
    for (std::size_t a = 0; a < m.size(); ++a) {
      const AbsorbingState& s = comp.absorbing[a];
      if (s.leak) {
        d.leak += m[a];
        continue;
      }
      mass[{s.xi_class, torus.wrap(s.anchor)}] += m[a];
    }
  }
  std::vector<RateEntry> out;
  for (const auto& [key, v] : mass) {
    if (key.cls == cls && key.anchor == Site{0, 0}) {
      d.self_mass += v;
      continue;
    }
    out.push_back({key.cls, key.anchor, v});
  }
  return out;
}

std::vector<RateEntry> closed_form_ground_row(int n, int L, RowDiagnostics& d) {
  const GroundRates g = rate_eta0(n, L);
  std::vector<RateEntry> out;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out.push_back({FamilyCatalog::omega1_class(i, j), {0, 0}, ground_rate(g, i, j)});
  d = {};
  d.starts = 8;
  d.self_mass = 8.0 * g.self_return;
  return out;
}

}  // namespace

void fill_rows(RateTable& table, PlateauExplorer& explorer, const std::vector<int>& classes,
               bool operational_ground) {
  if (explorer.n() != table.n() || explorer.torus()->half_side() != table.L())
    throw std::invalid_argument("fill_rows: explorer and table disagree on n or L");
  for (int cls : classes) {
    RowDiagnostics d;
    std::vector<RateEntry> row;
    if (cls == FamilyCatalog::gamma_class() && !operational_ground) {
      row = closed_form_ground_row(table.n(), table.L(), d);
    } else {
      row = operational_row(explorer, cls, d);
    }
    if (row.empty()) throw std::runtime_error("rate table: class " + std::to_string(cls) + " has no exits");
    table.set_row(cls, std::move(row), d);
  }
}

RateTable build_rate_table(int n, int L, const RateTableOptions& options) {
  RateTable table(n, L);
  PlateauExplorer explorer(n, L, options.state_cap);
  std::vector<int> classes = options.classes;
  if (classes.empty())
    for (int c = 0; c < table.num_classes(); ++c) classes.push_back(c);
  fill_rows(table, explorer, classes, options.operational_ground);
  return table;
}

GroundRowOperational ground_row_operational(PlateauExplorer& explorer) {
  RowDiagnostics d;
  GroundRowOperational out;
  out.entries = operational_row(explorer, FamilyCatalog::gamma_class(), d);
  out.self_return = d.self_mass / 8.0;
  out.leak = d.leak;
  return out;
}

ClassAt transform_class(const FamilyCatalog& catalog, const TorusPtr& torus, int g, ClassAt c) {
  const Configuration img = apply_dihedral(g, catalog.build(catalog.xi_entry(c.cls), c.anchor, torus));
  const auto m = catalog.match(img);
  if (!m) throw std::logic_error("transform_class: image is not a family member");
  return {catalog.entry(m->entry).xi_class, torus->wrap(m->anchor)};
}

bool RateAudit::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const AuditCheck& c) { return c.pass; });
}

namespace {

double omega2_mass(const RateTable& t, int cls) {
  double s = 0.0;
  for (const RateEntry& e : t.row(cls))
    if (t.catalog().xi_class(e.target).level == 2) s += e.value;
  return s;
}

AuditCheck at_least(std::string name, double value, double bound) {
  return {std::move(name), value >= bound, value, bound, ""};
}

AuditCheck within(std::string name, double deviation, double tol) {
  return {std::move(name), deviation <= tol, deviation, tol, ""};
}

}  // namespace

RateAudit audit_rate_table(const RateTable& t, PlateauExplorer& explorer, bool rational) {
  RateAudit audit;
  const FamilyCatalog& cat = t.catalog();
  const int n = t.n();
  const int gamma = FamilyCatalog::gamma_class();
  auto level = [&](int c) { return cat.xi_class(c).level; };

  double min_entry = 0.0, worst_leak = 0.0, worst_balance = 0.0;
  for (int c = 0; c < t.num_classes(); ++c) {
    if (!t.has_row(c)) continue;
    const RowDiagnostics& d = t.diagnostics(c);
    for (const RateEntry& e : t.row(c)) min_entry = std::min(min_entry, e.value);
    worst_leak = std::max(worst_leak, d.leak + d.stuck);
    const double total = t.exit_rate(c) + d.self_mass + d.leak + d.stuck;
    worst_balance = std::max(worst_balance, std::abs(total - d.starts) / std::max(1, d.starts));
  }
  audit.checks.push_back(at_least("entries nonnegative", min_entry, 0.0));
  audit.checks.push_back(within("no leak or stuck mass", worst_leak, kExactTolerance));
  audit.checks.push_back(within("absorption mass balance", worst_balance, kExactTolerance));

  // Structural zeros by source level: targets that must never receive mass.
  const std::map<int, std::set<int>> forbidden = {{1, {3, 4}}, {2, {0, 4}}, {3, {0, 1}}, {4, {0, 1, 2}}};
  double structural = 0.0;
  for (int c = 0; c < t.num_classes(); ++c) {
    if (!t.has_row(c) || c == gamma) continue;
    const auto& bad = forbidden.at(level(c));
    for (const RateEntry& e : t.row(c))
      if (bad.count(level(e.target))) structural = std::max(structural, e.value);
  }
  audit.checks.push_back(within("structural zeros", structural, kExactTolerance));

  double asym = 0.0;
  int pairs = 0;
  for (int c = 0; c < t.num_classes(); ++c) {
    if (!t.has_row(c) || c == gamma) continue;
    for (const RateEntry& e : t.row(c)) {
      if (e.target == gamma || !t.has_row(e.target)) continue;
      asym = std::max(asym, std::abs(e.value - t.rate(e.target, c, -e.offset)));
      ++pairs;
    }
  }
  if (pairs > 0) audit.checks.push_back(within("reversed rates agree off the ground class", asym, kExactTolerance));

  double dihedral = 0.0;
  int images = 0;
  for (int c = 0; c < t.num_classes(); ++c) {
    if (!t.has_row(c)) continue;
    for (int g = 1; g < 8; ++g) {
      const ClassAt src = transform_class(cat, explorer.torus(), g, {c, {0, 0}});
      if (!t.has_row(src.cls)) continue;
      for (const RateEntry& e : t.row(c)) {
        const ClassAt dst = transform_class(cat, explorer.torus(), g, {e.target, e.offset});
        dihedral = std::max(dihedral, std::abs(e.value - t.rate(src.cls, dst.cls, dst.anchor - src.anchor)));
        ++images;
      }
    }
  }
  if (images > 0) audit.checks.push_back(within("dihedral invariance", dihedral, kExactTolerance));

  auto w1 = [](int i, int j) { return FamilyCatalog::omega1_class(((i % 4) + 4) % 4, ((j % 4) + 4) % 4); };
  bool have_omega1 = true;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) have_omega1 = have_omega1 && t.has_row(w1(i, j));
  if (have_omega1) {
    const double same = 1.0 / n, next = 1.0 / n + 1.0 / (n - 1);
    double dev_same = 0.0, dev_next = 0.0;
    double nb = INFINITY, to_ground = INFINITY, ground_gap = 0.0, swap = INFINITY, swap_gap = 0.0;
    for (int i = 0; i < 4; ++i) {
      dev_same = std::max(dev_same, std::abs(omega2_mass(t, w1(i, i)) - same));
      dev_next = std::max(dev_next, std::abs(omega2_mass(t, w1(i, i + 1)) - next));
      for (int j = 0; j < 4; ++j) {
        nb = std::min(nb, t.rate(w1(i, j), w1(i, j + 1), {0, 0}));
        nb = std::min(nb, t.rate(w1(i, j), w1(i, j - 1), {0, 0}));
      }
      const double a = t.rate(w1(i, i - 1), gamma, {0, 0}), b = t.rate(w1(i, i), gamma, {0, 0});
      to_ground = std::min({to_ground, a, b});
      ground_gap = std::max(ground_gap, std::abs(a - b));
      const double c = t.rate(w1(i, i), w1(i - 1, i), {0, 0}), d = t.rate(w1(i - 1, i), w1(i, i), {0, 0});
      swap = std::min({swap, c, d});
      swap_gap = std::max(swap_gap, std::abs(c - d));
    }
    audit.checks.push_back(within("same-side well to rectangles equals 1/n", dev_same, kExactTolerance));
    audit.checks.push_back(within("next-side well to rectangles equals 1/n+1/(n-1)", dev_next, kExactTolerance));
    audit.checks.push_back(at_least("neighbouring sides rate >= 1/64", nb, 1.0 / 64.0));
    audit.checks.push_back(at_least("well to square rate >= 1/4", to_ground, 0.25));
    audit.checks.push_back(within("well to square rates coincide", ground_gap, kExactTolerance));
    audit.checks.push_back(at_least("corner exchange rate >= 1", swap, 1.0));
    audit.checks.push_back(within("corner exchange rates coincide", swap_gap, kExactTolerance));
    if (rational) {
      bool exact_ok = true;
      std::string detail;
      for (int i = 0; i < 4; ++i) {
        const Rational s = omega2_rate_exact(explorer, i, i);
        const Rational x = omega2_rate_exact(explorer, i, (i + 1) % 4);
        const bool ok = s == Rational(1, n) && x == Rational(1, n) + Rational(1, n - 1);
        exact_ok = exact_ok && ok;
        detail += (i ? "; " : "") + s.get_str() + ", " + x.get_str();
      }
      audit.checks.push_back({"exact rectangle rates from the first shell", exact_ok, 0.0, 0.0, detail});
    }
  }

  if (t.has_row(gamma)) {
    const auto op = ground_row_operational(explorer);
    double gap = 0.0;
    std::map<std::pair<int, Site>, double> op_map;
    for (const RateEntry& e : op.entries) op_map[{e.target, e.offset}] = e.value;
    for (const RateEntry& e : t.row(gamma)) gap = std::max(gap, std::abs(e.value - op_map[{e.target, e.offset}]));
    for (const auto& [k, v] : op_map) gap = std::max(gap, std::abs(v - t.rate(gamma, k.first, k.second)));
    audit.checks.push_back(within("ground row closed form matches absorption solve", gap, 1e-10));
    audit.checks.push_back(at_least("square to same-side well rate >= 1/6", t.rate(gamma, w1(2, 1), {0, 0}), 1.0 / 6.0));
  }
  return audit;
}

double neighborhood_escape_probability(const RateTable& t) {
  const int gamma = FamilyCatalog::gamma_class();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(16, 16);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(16);
  for (int k = 0; k < 16; ++k) {
    const int c = 1 + k;
    if (!t.has_row(c)) throw std::invalid_argument("neighborhood_escape_probability: missing first-shell row");
    for (const RateEntry& e : t.row(c)) {
      a(k, k) += e.value;
      const bool home = e.offset == Site{0, 0};
      if (home && e.target == gamma) continue;
      if (home && e.target >= 1 && e.target <= 16) {
        a(k, e.target - 1) -= e.value;
      } else {
        b[k] += e.value;
      }
    }
  }
  const Eigen::VectorXd h = a.fullPivLu().solve(b);
  return h.maxCoeff();
}

PathAudit sliding_path_audit(const RateTable& t) {
  const int n = t.n();
  const int gamma = FamilyCatalog::gamma_class();
  auto w1 = [](int i, int j) { return FamilyCatalog::omega1_class(i, j); };
  const Site e1{1, 0};
  PathAudit out;
  // Head: square, then the wells (2,1), (3,1), (0,1); the tail mirrors it
  // about the vertical axis of the doubled box and ends on the shifted square.
  out.head = {t.rate(gamma, w1(2, 1), {0, 0}), t.rate(w1(2, 1), w1(3, 1), {0, 0}),
              t.rate(w1(3, 1), w1(0, 1), {0, 0}), 0.0};
  out.tail = {t.rate(gamma, w1(3, 3), {0, 0}), t.rate(w1(3, 3), w1(2, 3), {0, 0}),
              t.rate(w1(2, 3), w1(1, 3), {0, 0}), 0.0};

  const ClassAt start{w1(0, 1), {0, 0}};
  const ClassAt goal{w1(1, 3), e1};
  auto is_rect = [&](int c) { return t.catalog().xi_class(c).level == 2; };
  // Widest-path search over rectangle classes in a window of anchors.
  std::map<ClassAt, double> best;
  std::priority_queue<std::pair<double, ClassAt>> pq;
  best[start] = INFINITY;
  pq.push({INFINITY, start});
  const int window = n;
  while (!pq.empty()) {
    auto [width, node] = pq.top();
    pq.pop();
    if (width < best[node]) continue;
    if (node == goal) break;
    if (!t.has_row(node.cls)) continue;
    for (const RateEntry& e : t.row(node.cls)) {
      const ClassAt next{e.target, t.wrap(node.anchor + e.offset)};
      if (!(next == goal) && !is_rect(e.target)) continue;
      if (std::abs(next.anchor.x) > window || std::abs(next.anchor.y) > window) continue;
      const double w = std::min(width, e.value);
      auto it = best.find(next);
      if (it != best.end() && it->second >= w) continue;
      best[next] = w;
      pq.push({w, next});
    }
  }
  auto g = best.find(goal);
  out.reachable = g != best.end();
  out.middle_bottleneck = out.reachable ? g->second : 0.0;
  // First and last jumps into the rectangles.
  double first = 0.0, last = 0.0;
  for (const RateEntry& e : t.row(start.cls))
    if (is_rect(e.target)) first = std::max(first, e.value);
  if (t.has_row(w1(1, 3)))
    for (const RateEntry& e : t.row(w1(1, 3)))
      if (is_rect(e.target)) last = std::max(last, e.value);
  out.head[3] = first;
  out.tail[3] = last;
  return out;
}

}  // namespace kawasaki
