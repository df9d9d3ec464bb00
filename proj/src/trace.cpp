#include <stdexcept>

#include "kawasaki/kmc.hpp"

namespace kawasaki {

double Path::total_time() const {
  KahanClock c;
  for (const auto& s : segments) c.add(s.duration);
  return c.value();
}

std::vector<double> Path::start_times() const {
  std::vector<double> out;
  out.reserve(segments.size());
  KahanClock c;
  for (const auto& s : segments) {
    out.push_back(c.value());
    c.add(s.duration);
  }
  return out;
}

Label label_configuration(const Configuration& c, long energy, const FamilyCatalog& catalog) {
  const long ground = -2L * catalog.n() * (catalog.n() - 1);
  if (energy <= ground + 1) {
    if (auto m = catalog.match(c)) {
      const CatalogEntry& e = catalog.entry(m->entry);
      // Only the chosen representative of a well belongs to the reduced set.
      if (e.representative) return Label{e.xi_class, m->anchor, 0};
    }
  }
  return Label{-1, {}, c.hash()};
}

namespace {

void push(Path& p, const Label& l, double d) {
  if (!p.segments.empty() && p.segments.back().state == l) {
    p.segments.back().duration += d;
    return;
  }
  p.segments.push_back({l, d});
}

}  // namespace

Path labelled_path(const Trajectory& t) {
  Path p;
  double prev = 0.0;
  if (t.kind == ChainKind::ZetaHat) {
    ClassAt cur = t.initial_class;
    for (const Event& e : t.events) {
      push(p, Label{cur.cls, cur.anchor, 0}, e.time - prev);
      prev = e.time;
      cur = {e.to, cur.anchor + e.shift};
    }
    push(p, Label{cur.cls, cur.anchor, 0}, t.end_time - prev);
    return p;
  }
  const auto catalog = FamilyCatalog::get(t.params.n);
  Configuration c = t.initial;
  long energy = hamiltonian(c);
  for (const Event& e : t.events) {
    push(p, label_configuration(c, energy, *catalog), e.time - prev);
    prev = e.time;
    energy += delta_h(c, e.from, e.to);
    c.set(e.from, false);
    c.set(e.to, true);
  }
  push(p, label_configuration(c, energy, *catalog), t.end_time - prev);
  return p;
}

Path trace(const Path& path, const std::function<bool(const Label&)>& keep) {
  // Kept segments are copied verbatim, so traces compose exactly; a label
  // repeats when the path left the subset in between.
  Path out;
  for (const auto& s : path.segments)
    if (keep(s.state)) out.segments.push_back(s);
  if (out.segments.empty()) throw std::invalid_argument("trace: the path never visits the subset");
  return out;
}

bool in_xi(const Label& l) { return l.cls >= 0; }
bool in_gamma(const Label& l) { return l.cls == FamilyCatalog::gamma_class(); }

DisplacementPath displacement_path(const Path& gamma_trace, const Torus* torus) {
  DisplacementPath d;
  if (gamma_trace.segments.empty()) return d;
  d.times.push_back(0.0);
  d.X.push_back({0, 0});
  KahanClock clock;
  Site prev = gamma_trace.segments.front().state.anchor;
  clock.add(gamma_trace.segments.front().duration);
  for (std::size_t k = 1; k < gamma_trace.segments.size(); ++k) {
    const Site a = gamma_trace.segments[k].state.anchor;
    const Site step = torus ? torus->displacement(prev, a) : a - prev;
    if (step != Site{0, 0}) {
      d.times.push_back(clock.value());
      d.X.push_back(d.X.back() + step);
    }
    prev = a;
    clock.add(gamma_trace.segments[k].duration);
  }
  d.end_time = clock.value();
  return d;
}

}  // namespace kawasaki
