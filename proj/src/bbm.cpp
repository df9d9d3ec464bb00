#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

#include "kawasaki/plateau.hpp"

namespace kawasaki {

PlateauExplorer::PlateauExplorer(int n, int L, std::size_t state_cap)
    : n_(n), cap_(state_cap) {
  SimulationParams p;
  p.n = n;
  p.L = L;
  p.ell = 1;
  p.validate();
  torus_ = make_torus(L);
  catalog_ = FamilyCatalog::get(n);
  shell2_energy_ = p.ground_energy() + 2;
}

PlateauExplorer::Location PlateauExplorer::locate(const Configuration& config) {
  if (config.particle_count() != n_ * n_) throw std::invalid_argument("PlateauExplorer: wrong particle count");
  if (config.geometry().half_side() != torus_->half_side())
    throw std::invalid_argument("PlateauExplorer: configuration lives on a different torus");
  if (hamiltonian(config) != shell2_energy_)
    throw std::invalid_argument("PlateauExplorer: start is not in the second energy shell");
  auto it = index_.find(config);
  if (it != index_.end()) return it->second;
  explore(config);
  return index_.at(config);
}

// Breadth-first closure under zero-cost moves. Downhill moves become
// absorbing states labelled by family membership.
int PlateauExplorer::explore(const Configuration& start) {
  const int cid = int(components_.size());
  auto comp = std::make_unique<PlateauComponent>();
  std::unordered_map<Configuration, int, ConfigurationHash> absorbing_index;
  const std::size_t before = index_.size();

  index_.emplace(start, Location{cid, 0});
  comp->states.push_back(start);
  std::vector<int> downhill_count;
  for (std::size_t head = 0; head < comp->states.size(); ++head) {
    const Configuration current = comp->states[head];
    std::vector<int> flat, exits;
    bool isolated = false;
    for (int idx : current.occupied_sites())
      if (current.occupied_neighbors(idx) == 0) isolated = true;
    if (isolated) comp->free_particle = true;
    for (const Move& m : enumerate_active_moves(current)) {
      if (m.delta_h > 0) continue;
      Configuration next = exchange(current, m.from, m.to);
      if (m.delta_h == 0) {
        auto [pos, inserted] = index_.try_emplace(std::move(next), Location{cid, int(comp->states.size())});
        if (inserted) {
          if (index_.size() - before > cap_)
            throw std::runtime_error("PlateauExplorer: plateau exceeds state cap of " + std::to_string(cap_));
          comp->states.push_back(pos->first);
        }
        flat.push_back(pos->second.state);
      } else {
        auto [pos, inserted] = absorbing_index.try_emplace(next, int(comp->absorbing.size()));
        if (inserted) {
          AbsorbingState a;
          a.config = std::move(next);
          if (auto match = catalog_->match(a.config)) {
            const CatalogEntry& e = catalog_->entry(match->entry);
            a.entry = match->entry;
            a.anchor = match->anchor;
            a.xi_class = e.xi_class;
            a.level = e.level;
          } else {
            a.leak = true;
          }
          comp->absorbing.push_back(std::move(a));
        }
        exits.push_back(pos->second);
      }
    }
    comp->flat.push_back(std::move(flat));
    comp->exits.push_back(std::move(exits));
  }

  const int m = int(comp->states.size());
  bool any_exit = false;
  Triplets t;
  for (int i = 0; i < m; ++i) {
    const double degree = double(comp->flat[i].size() + comp->exits[i].size());
    any_exit = any_exit || !comp->exits[i].empty();
    t.emplace_back(i, i, degree);
    for (int j : comp->flat[i]) t.emplace_back(i, j, -1.0);
  }
  if (any_exit) comp->solver = std::make_unique<SparseSolver>(make_sparse(m, m, t));
  components_.push_back(std::move(comp));
  return cid;
}

// The generator restricted to the plateau is symmetric, so one solve with the
// start weights as right-hand side gives the whole exit distribution.
std::vector<double> PlateauComponent::absorb(const std::vector<std::pair<int, double>>& starts) const {
  std::vector<double> out(absorbing.size(), 0.0);
  if (!solver) return out;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(int(states.size()));
  for (const auto& [s, w] : starts) rhs[s] += w;
  const Eigen::VectorXd g = solver->solve(rhs);
  for (std::size_t i = 0; i < states.size(); ++i)
    for (int a : exits[i]) out[a] += g[int(i)];
  return out;
}

double BbmResult::total() const {
  double s = leak + stuck;
  for (const auto& [k, v] : collapsed) s += v;
  return s;
}

namespace {

Site wrap_offset(const Torus& torus, Site s) { return torus.wrap(s); }

}  // namespace

BbmResult solve_bbM(const Configuration& start, PlateauExplorer& explorer) {
  const auto loc = explorer.locate(start);
  const PlateauComponent& comp = explorer.component(loc.component);
  BbmResult out;
  out.states = comp.size();
  if (comp.stuck()) {
    out.stuck = 1.0;
    return out;
  }
  const auto mass = comp.absorb({{loc.state, 1.0}});
  out.residual = comp.solver->last_residual();
  const Torus& torus = *explorer.torus();
  for (std::size_t a = 0; a < mass.size(); ++a) {
    if (mass[a] == 0.0) continue;
    const AbsorbingState& s = comp.absorbing[a];
    if (s.leak) {
      out.leak += mass[a];
      continue;
    }
    const Site anchor = wrap_offset(torus, s.anchor);
    out.raw[{s.entry, anchor}] += mass[a];
    out.collapsed[{s.xi_class, anchor}] += mass[a];
  }
  return out;
}

BbmResult solve_bbM(const Configuration& start, const SimulationParams& params) {
  PlateauExplorer explorer(params.n, params.L);
  return solve_bbM(start, explorer);
}

Rational absorption_mass_exact(PlateauExplorer& explorer, const std::vector<Configuration>& starts,
                               const std::vector<int>& levels) {
  std::map<int, std::vector<int>> by_component;
  for (const Configuration& c : starts) {
    const auto loc = explorer.locate(c);
    by_component[loc.component].push_back(loc.state);
  }
  const std::set<int> wanted(levels.begin(), levels.end());
  Rational total = 0;
  for (const auto& [cid, states] : by_component) {
    const PlateauComponent& comp = explorer.component(cid);
    std::vector<char> target(comp.absorbing.size(), 0);
    bool any = false;
    for (std::size_t a = 0; a < comp.absorbing.size(); ++a)
      if (!comp.absorbing[a].leak && wanted.count(comp.absorbing[a].level)) target[a] = 1, any = true;
    if (!any || comp.stuck()) continue;
    const int m = int(comp.size());
    RationalMatrix a(m);
    for (int i = 0; i < m; ++i) {
      a.add(i, i, int(comp.flat[i].size() + comp.exits[i].size()));
      for (int j : comp.flat[i]) a.add(i, j, -1);
    }
    std::vector<Rational> rhs(m, Rational(0));
    for (int s : states) rhs[s] += 1;
    const auto g = solve_rational(std::move(a), std::move(rhs));
    for (int i = 0; i < m; ++i)
      for (int e : comp.exits[i])
        if (target[e]) total += g[i];
  }
  return total;
}

}  // namespace kawasaki
