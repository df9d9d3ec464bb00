#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <unordered_map>

#include "kawasaki/scaling.hpp"

namespace kawasaki {

namespace {

constexpr std::size_t kMinReturns = 10;

}  // namespace

ThetaEstimate estimate_theta(const std::vector<DisplacementPath>& walks) {
  if (walks.empty()) throw std::invalid_argument("estimate_theta: no trajectories");
  std::vector<double> T, endpoint, jumps;
  std::uint64_t returns = 0;
  ThetaEstimate est;
  est.min_returns = std::numeric_limits<std::size_t>::max();
  for (const DisplacementPath& d : walks) {
    double sq = 0.0;
    for (std::size_t k = 1; k < d.X.size(); ++k) sq += double(squared_norm(d.X[k] - d.X[k - 1]));
    T.push_back(d.end_time);
    endpoint.push_back(d.X.empty() ? 0.0 : double(squared_norm(d.X.back())));
    jumps.push_back(sq);
    const std::size_t r = d.X.empty() ? 0 : d.X.size() - 1;
    returns += r;
    est.min_returns = std::min(est.min_returns, r);
  }
  est.insufficient = est.min_returns < kMinReturns;
  est.msd_rate = ratio_estimate(endpoint, T);
  est.jump_rate = ratio_estimate(jumps, T);
  double total = 0.0;
  for (double t : T) total += t;
  est.departure_rate = total > 0.0 ? double(returns) / total : 0.0;
  est.theta_hat = est.jump_rate.value > 0.0 ? 1.0 / est.jump_rate.value : INFINITY;
  const double se = std::hypot(est.msd_rate.se, est.jump_rate.se);
  est.joint_z = se > 0.0 ? std::abs(est.msd_rate.value - est.jump_rate.value) / se : 0.0;
  return est;
}

ThetaEstimate estimate_theta(const std::vector<Path>& gamma_traces, const Torus* torus) {
  std::vector<DisplacementPath> walks;
  std::uint64_t returns = 0;
  std::size_t fewest = std::numeric_limits<std::size_t>::max();
  double total = 0.0;
  for (const Path& p : gamma_traces) {
    walks.push_back(displacement_path(p, torus));
    total += walks.back().end_time;
    const std::size_t r = p.segments.empty() ? 0 : p.segments.size() - 1;
    returns += r;
    fewest = std::min(fewest, r);
  }
  ThetaEstimate est = estimate_theta(walks);
  // Traces also see returns to the same anchor.
  est.min_returns = fewest;
  est.insufficient = fewest < kMinReturns;
  est.departure_rate = total > 0.0 ? double(returns) / total : 0.0;
  return est;
}

DisplacementPath zeta_hat_ground_walk(const TableChain& chain, double gamma_time, std::uint64_t seed,
                                      std::uint64_t stream, std::uint64_t max_events) {
  if (!(gamma_time > 0.0)) throw std::invalid_argument("zeta_hat_ground_walk: time must be positive");
  const int gamma = FamilyCatalog::gamma_class();
  Rng rng(seed, stream);
  DisplacementPath d;
  d.times.push_back(0.0);
  d.X.push_back({0, 0});
  ClassAt cur{gamma, {0, 0}};
  Site last{0, 0};
  KahanClock clock;
  for (std::uint64_t k = 0; k < max_events; ++k) {
    if (cur.cls == gamma) {
      const double rate = chain.exit_rate(gamma);
      const double dt = rate > 0.0 ? rng.exponential(rate) : INFINITY;
      if (clock.value() + dt >= gamma_time) {
        d.end_time = gamma_time;
        return d;
      }
      clock.add(dt);
    }
    const RateEntry& e = chain.sample(cur.cls, rng);
    cur = {e.target, cur.anchor + e.offset};
    if (cur.cls == gamma && cur.anchor != last) {
      d.times.push_back(clock.value());
      d.X.push_back(cur.anchor);
      last = cur.anchor;
    }
  }
  throw std::runtime_error("zeta_hat_ground_walk: event cap reached before the ground clock horizon");
}

Site displacement_at(const DisplacementPath& X, double time) {
  if (X.times.empty()) return {};
  const auto it = std::upper_bound(X.times.begin(), X.times.end(), time);
  const std::size_t k = it == X.times.begin() ? 0 : std::size_t(it - X.times.begin()) - 1;
  return X.X[k];
}

std::vector<QvPoint> quadratic_variation(const DisplacementPath& X, int ell, double theta,
                                         const std::vector<double>& grid) {
  if (ell < 1 || !(theta > 0.0)) throw std::invalid_argument("quadratic_variation: bad scaling");
  std::vector<std::size_t> order(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid[a] < grid[b]; });
  std::vector<QvPoint> out(grid.size());
  const double unit = double(ell) * ell * theta;
  const double norm = 1.0 / (double(ell) * ell);
  double s11 = 0.0, s22 = 0.0, s12 = 0.0;
  std::size_t k = 1;
  for (std::size_t i : order) {
    const double limit = grid[i] * unit;
    for (; k < X.X.size() && X.times[k] <= limit; ++k) {
      const Site dx = X.X[k] - X.X[k - 1];
      s11 += double(dx.x) * dx.x;
      s22 += double(dx.y) * dx.y;
      s12 += double(dx.x) * dx.y;
    }
    out[i] = {grid[i], s11 * norm, s22 * norm, s12 * norm};
  }
  return out;
}

double max_jump(const DisplacementPath& X, int ell, double theta, double horizon) {
  if (ell < 1 || !(theta > 0.0)) throw std::invalid_argument("max_jump: bad scaling");
  const double limit = horizon * double(ell) * ell * theta;
  double best = 0.0;
  for (std::size_t k = 1; k < X.X.size() && X.times[k] <= limit; ++k)
    best = std::max(best, std::sqrt(double(squared_norm(X.X[k] - X.X[k - 1]))));
  return best / ell;
}

namespace {

// Membership in the confinement set along a path. Zero-cost moves keep a
// second-shell configuration on its plateau, and a plateau entered by one
// uphill move from a family configuration drains into that family, so the
// plateau search runs only when the second shell is entered otherwise.
class MembershipTracker {
 public:
  explicit MembershipTracker(int n) : catalog_(FamilyCatalog::get(n)), ground_(-2L * n * (n - 1)) {}

  bool step(const Configuration& c, long energy) {
    const long shell = energy - ground_;
    bool member = false;
    if (shell <= 1) {
      member = catalog_->match(c).has_value();
    } else if (shell == 2) {
      if (prev_shell_ == 2 || (prev_shell_ >= 0 && prev_shell_ <= 1 && prev_member_)) {
        member = prev_member_;
      } else {
        auto it = cache_.find(c.hash());
        if (it == cache_.end()) it = cache_.emplace(c.hash(), xi_star_membership(c, *catalog_).member).first;
        member = it->second;
      }
    }
    prev_shell_ = shell;
    prev_member_ = member;
    return member;
  }

 private:
  std::shared_ptr<const FamilyCatalog> catalog_;
  long ground_;
  long prev_shell_ = -1;
  bool prev_member_ = false;
  std::unordered_map<std::uint64_t, bool> cache_;
};

}  // namespace

Confinement confinement_fractions(const Trajectory& t) {
  if (t.kind != ChainKind::Eta) throw std::invalid_argument("confinement_fractions: needs a lattice-gas trajectory");
  Confinement out;
  out.horizon = t.end_time;
  if (!(t.end_time > 0.0)) return out;
  MembershipTracker tracker(t.params.n);
  const long ground = t.params.ground_energy();
  Configuration c = t.initial;
  long energy = hamiltonian(c);
  bool member = tracker.step(c, energy);
  double prev = 0.0;
  auto account = [&](double until) {
    const double d = until - prev;
    if (!member) out.outside_xi_star += d;
    if (energy != ground) out.outside_gamma += d;
    prev = until;
  };
  if (!member) out.exited = true;
  for (const Event& e : t.events) {
    account(e.time);
    energy += delta_h(c, e.from, e.to);
    c.set(e.from, false);
    c.set(e.to, true);
    member = tracker.step(c, energy);
    if (!member && !out.exited) {
      out.exited = true;
      out.first_exit = e.time;
    }
  }
  account(t.end_time);
  out.outside_xi_star /= t.end_time;
  out.outside_gamma /= t.end_time;
  return out;
}

StopCondition confinement_exit_stop(const SimulationParams& params, double horizon, std::uint64_t max_events) {
  StopCondition s;
  s.horizon = horizon;
  s.max_events = max_events;
  auto tracker = std::make_shared<MembershipTracker>(params.n);
  s.hit = [tracker](const Configuration& c, long energy) { return !tracker->step(c, energy); };
  return s;
}

CenterOfMassComparison center_of_mass_compare(const Trajectory& t) {
  if (t.kind != ChainKind::Eta) throw std::invalid_argument("center_of_mass_compare: needs a lattice-gas trajectory");
  CenterOfMassComparison out;
  const SimulationParams& p = t.params;
  const Torus& torus = t.initial.geometry();
  const double S = torus.side();
  auto wrap_diff = [S](double d) { return d - S * std::round(d / S); };

  // Unwrapped centre of mass of the full configuration over real time.
  std::vector<double> at{0.0};
  std::vector<Point2> com;
  Configuration c = t.initial;
  com.push_back(center_of_mass(c, p, false));
  Point2 unwrapped = com.back();
  for (const Event& e : t.events) {
    c.set(e.from, false);
    c.set(e.to, true);
    const Point2 raw = center_of_mass(c, p, false);
    unwrapped.x += wrap_diff(raw.x - unwrapped.x);
    unwrapped.y += wrap_diff(raw.y - unwrapped.y);
    at.push_back(e.time);
    com.push_back(unwrapped);
  }

  // Ground-trace anchors over the ground clock, started at the same centre.
  const Path labels = labelled_path(t);
  const Path gamma = trace(labels, in_gamma);
  std::vector<double> gs;
  std::vector<Point2> gc;
  KahanClock clock;
  Site anchor = gamma.segments.front().state.anchor;
  Point2 centre = com.front();
  for (const auto& seg : gamma.segments) {
    const Site step = torus.displacement(anchor, seg.state.anchor);
    anchor = seg.state.anchor;
    centre.x += step.x;
    centre.y += step.y;
    gs.push_back(clock.value());
    gc.push_back(centre);
    clock.add(seg.duration);
  }
  out.compared_time = std::min(t.end_time, clock.value());

  std::vector<double> breaks = at;
  breaks.insert(breaks.end(), gs.begin(), gs.end());
  std::sort(breaks.begin(), breaks.end());
  auto value_at = [](const std::vector<double>& ts, const std::vector<Point2>& v, double x) {
    const auto it = std::upper_bound(ts.begin(), ts.end(), x);
    return v[it == ts.begin() ? 0 : std::size_t(it - ts.begin()) - 1];
  };
  for (double b : breaks) {
    if (b > out.compared_time) break;
    const Point2 a = value_at(at, com, b);
    const Point2 g = value_at(gs, gc, b);
    out.sup_discrepancy = std::max(out.sup_discrepancy, std::hypot(a.x - g.x, a.y - g.y));
  }
  out.sup_discrepancy /= p.ell;

  // S(t) - t is the time spent off the ground states before the ground clock
  // reaches t; its supremum is reached at the end of the compared window.
  double ground_time = 0.0, off = 0.0;
  for (const auto& seg : labels.segments) {
    if (ground_time >= out.compared_time) break;
    if (in_gamma(seg.state))
      ground_time += seg.duration;
    else
      off += seg.duration;
    out.max_overshoot = off;
  }
  return out;
}

}  // namespace kawasaki
