#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "kawasaki/scaling.hpp"

namespace kawasaki {

ErrorBudget error_budget(const SimulationParams& p, double theta_hat, double threshold) {
  const double b = p.beta, n = p.n, L = p.L, ell = p.ell;
  ErrorBudget e;
  e.kappa1 = L * std::exp(-b / 2.0);
  e.kappa2 = std::pow(n, 4) * std::exp(-b) + n * L * std::exp(-b / 2.0);
  e.e_beta = L * std::exp(-b / 2.0) + std::sqrt(std::pow(n, 7) * e.kappa2);
  const double scaled = theta_hat * std::exp(-2.0 * b);
  auto add = [&](const char* name, double v) { e.regime.push_back({name, v, v <= threshold}); };
  add("drift", ell * L * scaled * e.e_beta);
  add("jumps", ell * (ell + n) * scaled * std::exp(-ell / n));
  add("time-scale", std::pow(n, 4) * L * L * std::exp(-b));
  add("error", L * L / (n * n) * e.e_beta);
  add("confinement", ell * ell * scaled * (std::pow(n, 8) + L * L) * std::exp(-b));
  return e;
}

namespace {

nlohmann::json estimate_json(const Estimate& e) { return {{"value", e.value}, {"se", e.se}, {"samples", e.samples}}; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string ScalingReport::to_json() const {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["params"] = {{"beta", params.beta}, {"n", params.n}, {"L", params.L}, {"ell", params.ell}};
  j["engine"] = engine;
  j["replicas"] = replicas;
  j["theta_hat"] = {{"value", theta.theta_hat},
                    {"msd_rate", estimate_json(theta.msd_rate)},
                    {"jump_rate", estimate_json(theta.jump_rate)},
                    {"departure_rate", theta.departure_rate},
                    {"min_returns", theta.min_returns},
                    {"insufficient_data", theta.insufficient},
                    {"joint_z", theta.joint_z}};
  if (theta_exact > 0.0) j["theta_exact"] = theta_exact;
  nlohmann::json qv_rows = nlohmann::json::array();
  for (std::size_t i = 0; i < qv.size(); ++i) {
    nlohmann::json r{{"t", qv[i].t}, {"z11", qv[i].z11}, {"z22", qv[i].z22}, {"z12", qv[i].z12}};
    if (i < qv_se.size()) r["se"] = {qv_se[i].z11, qv_se[i].z22, qv_se[i].z12};
    qv_rows.push_back(r);
  }
  j["qv"] = qv_rows;
  j["max_jump"] = estimate_json(max_jump);
  j["confinement"] = {{"outside_xi_star", estimate_json(outside_xi_star)},
                      {"outside_gamma", estimate_json(outside_gamma)},
                      {"exit_probability", estimate_json(exit_probability)}};
  nlohmann::json tail_rows = nlohmann::json::array();
  for (const TailRow& r : tail) {
    nlohmann::json t{{"k", r.k}, {"p", r.probability}, {"se", r.se}};
    if (r.exact >= 0.0) t["exact"] = r.exact;
    tail_rows.push_back(t);
  }
  j["tail"] = {{"rows", tail_rows}, {"decay", tail_decay}, {"monotone_after_5", tail_monotone}};
  nlohmann::json regime = nlohmann::json::array();
  for (const auto& c : budget.regime) regime.push_back({{"name", c.name}, {"value", c.value}, {"small", c.small}});
  j["budget"] = {{"kappa1", budget.kappa1}, {"kappa2", budget.kappa2}, {"e_beta", budget.e_beta}, {"regime", regime}};
  j["inputs"] = inputs;
  j["failures"] = failures;
  return j.dump(2) + "\n";
}

std::string ScalingReport::qv_csv() const {
  std::ostringstream os;
  os << "t,z11,z22,z12\n";
  for (const QvPoint& q : qv) os << fmt(q.t) << ',' << fmt(q.z11) << ',' << fmt(q.z22) << ',' << fmt(q.z12) << '\n';
  return os.str();
}

std::string ScalingReport::tail_csv() const {
  std::ostringstream os;
  os << "k,probability,se,exact\n";
  for (const TailRow& r : tail)
    os << r.k << ',' << fmt(r.probability) << ',' << fmt(r.se) << ',' << (r.exact >= 0.0 ? fmt(r.exact) : "") << '\n';
  return os.str();
}

}  // namespace kawasaki
