#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <type_traits>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "kawasaki/cli.hpp"

namespace kawasaki {

namespace {

template <class T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(","));
  for (auto& p : parts) {
    boost::trim(p);
    if (p.empty()) continue;
    std::istringstream is(p);
    T v;
    if (!(is >> v) || !is.eof()) throw std::invalid_argument("config: bad list element '" + p + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  static const std::vector<std::pair<std::string, std::vector<std::string>>> known = {
      {"params", {"beta", "n", "L", "ell"}},
      {"run", {"seed", "replicas", "engine", "horizon", "horizon_time", "max_events", "out_dir", "table", "threads",
               "rational"}},
      {"sweep", {"beta", "n", "L", "ell"}},
      {"tolerance", {"sigma", "qv_grid"}},
      {"report", {"inputs"}}};
  for (const auto& [section, body] : tree) {
    auto s = std::find_if(known.begin(), known.end(), [&](const auto& k) { return k.first == section; });
    if (s == known.end()) throw std::invalid_argument("config: unknown section [" + section + "]");
    for (const auto& [key, v] : body)
      if (std::find(s->second.begin(), s->second.end(), key) == s->second.end())
        throw std::invalid_argument("config: unknown key '" + key + "' in [" + section + "]");
  }

  ExperimentConfig c;
  // ptree's defaulted get() swallows conversion errors, so values are read
  // as strings and converted strictly.
  auto read = [&](const char* key, auto& out) {
    auto v = tree.get_optional<std::string>(key);
    if (!v) return;
    std::string text = boost::trim_copy(*v);
    using T = std::decay_t<decltype(out)>;
    if constexpr (std::is_same_v<T, std::string>) {
      out = text;
    } else if constexpr (std::is_same_v<T, bool>) {
      boost::to_lower(text);
      if (text == "true" || text == "1" || text == "yes") out = true;
      else if (text == "false" || text == "0" || text == "no") out = false;
      else throw std::invalid_argument(std::string("config: bad boolean for ") + key);
    } else {
      std::istringstream is(text);
      if (!(is >> out) || !is.eof()) throw std::invalid_argument(std::string("config: bad value for ") + key);
    }
  };
  read("params.beta", c.params.beta);
  read("params.n", c.params.n);
  read("params.L", c.params.L);
  read("params.ell", c.params.ell);
  read("run.seed", c.seed);
  read("run.replicas", c.replicas);
  read("run.engine", c.engine);
  read("run.horizon", c.horizon);
  read("run.horizon_time", c.horizon_time);
  read("run.max_events", c.max_events);
  read("run.out_dir", c.out_dir);
  read("run.table", c.table);
  read("run.threads", c.threads);
  read("run.rational", c.rational);
  read("tolerance.sigma", c.sigma);
  if (auto v = tree.get_optional<std::string>("tolerance.qv_grid")) c.qv_grid = parse_list<double>(*v);
  if (auto v = tree.get_optional<std::string>("report.inputs")) {
    boost::split(c.inputs, *v, boost::is_any_of(","));
    for (auto& s : c.inputs) boost::trim(s);
    std::erase_if(c.inputs, [](const std::string& s) { return s.empty(); });
  }
  if (auto v = tree.get_optional<std::string>("sweep.beta")) c.sweep_beta = parse_list<double>(*v);
  if (auto v = tree.get_optional<std::string>("sweep.n")) c.sweep_n = parse_list<int>(*v);
  if (auto v = tree.get_optional<std::string>("sweep.L")) c.sweep_L = parse_list<int>(*v);
  if (auto v = tree.get_optional<std::string>("sweep.ell")) c.sweep_ell = parse_list<int>(*v);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

namespace {

void validate_point(const SimulationParams& p) {
  if (p.n < 3) throw std::invalid_argument("n must be at least 3: the droplet families degenerate below that");
  p.validate();
}

}  // namespace

void ExperimentConfig::validate() const {
  validate_point(params);
  if (engine != "eta" && engine != "zeta-hat") throw std::invalid_argument("engine must be 'eta' or 'zeta-hat'");
  if (replicas < 1) throw std::invalid_argument("replicas must be at least 1");
  if (!(horizon > 0.0) && !(horizon_time > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (out_dir.empty()) throw std::invalid_argument("out_dir must not be empty");
  for (double t : qv_grid)
    if (!(t > 0.0)) throw std::invalid_argument("qv_grid points must be positive");
}

std::vector<SimulationParams> ExperimentConfig::grid() const {
  const std::vector<double> betas = sweep_beta.empty() ? std::vector<double>{params.beta} : sweep_beta;
  const std::vector<int> ns = sweep_n.empty() ? std::vector<int>{params.n} : sweep_n;
  // Sweeping n without an L list uses the smallest torus, L = 2n + 1.
  const bool tight = sweep_L.empty() && !sweep_n.empty();
  const std::vector<int> Ls = sweep_L.empty() ? std::vector<int>{params.L} : sweep_L;
  const std::vector<int> ells = sweep_ell.empty() ? std::vector<int>{params.ell} : sweep_ell;
  std::vector<SimulationParams> out;
  for (int n : ns)
    for (int L : Ls)
      for (int ell : ells)
        for (double b : betas) {
          SimulationParams p;
          p.beta = b;
          p.n = n;
          p.L = tight ? 2 * n + 1 : L;
          p.ell = ell;
          validate_point(p);
          out.push_back(p);
        }
  return out;
}

std::string ExperimentConfig::table_path() const {
  if (!table.empty()) return table;
  return out_dir + "/rates_n" + std::to_string(params.n) + "_L" + std::to_string(params.L) + ".json";
}

}  // namespace kawasaki
