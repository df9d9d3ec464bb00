#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "kawasaki/kmc.hpp"

namespace kawasaki {

namespace {

constexpr int kFormatVersion = 1;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

StopReason parse_stop(const std::string& s) {
  for (StopReason r : {StopReason::Horizon, StopReason::Hit, StopReason::EventCap, StopReason::Absorbed})
    if (s == stop_reason_name(r)) return r;
  throw std::runtime_error("trajectory: unknown stop reason '" + s + "'");
}

}  // namespace

std::string trajectory_to_jsonl(const Trajectory& t) {
  std::ostringstream os;
  nlohmann::json h;
  h["format"] = "kawasaki-trajectory";
  h["version"] = kFormatVersion;
  h["kind"] = chain_kind_name(t.kind);
  h["beta"] = t.params.beta;
  h["n"] = t.params.n;
  h["L"] = t.params.L;
  h["ell"] = t.params.ell;
  h["seed"] = t.seed;
  h["stream"] = t.stream;
  h["table_hash"] = t.table_hash;
  if (!t.manifest.empty()) h["manifest"] = t.manifest;
  if (t.kind == ChainKind::Eta) {
    nlohmann::json sites = nlohmann::json::array();
    for (const Site& s : t.initial.occupied_coords()) sites.push_back({s.x, s.y});
    h["initial"] = sites;
  } else {
    h["initial"] = {{"cls", t.initial_class.cls}, {"anchor", {t.initial_class.anchor.x, t.initial_class.anchor.y}}};
  }
  os << h.dump() << '\n';
  std::size_t cp = 0;
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const Event& e = t.events[i];
    nlohmann::json j{{"t", e.time}, {"a", e.from}, {"b", e.to}};
    if (t.kind == ChainKind::ZetaHat) j["d"] = {e.shift.x, e.shift.y};
    os << j.dump() << '\n';
    while (cp < t.checkpoints.size() && t.checkpoints[cp].event == i + 1) {
      os << nlohmann::json{{"checkpoint", t.checkpoints[cp].event}, {"hash", hex64(t.checkpoints[cp].hash)}}.dump()
         << '\n';
      ++cp;
    }
  }
  os << nlohmann::json{{"end", t.end_time}, {"events", t.events.size()}, {"stop", stop_reason_name(t.stop)}}.dump()
     << '\n';
  return os.str();
}

Trajectory trajectory_from_jsonl(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("trajectory: empty input");
  const auto h = nlohmann::json::parse(line);
  if (h.value("format", "") != "kawasaki-trajectory") throw std::runtime_error("trajectory: wrong format tag");
  if (h.value("version", 0) != kFormatVersion) throw std::runtime_error("trajectory: unsupported version");
  Trajectory t;
  const std::string kind = h.at("kind");
  if (kind == "eta")
    t.kind = ChainKind::Eta;
  else if (kind == "zeta-hat")
    t.kind = ChainKind::ZetaHat;
  else
    throw std::runtime_error("trajectory: unknown chain kind '" + kind + "'");
  t.params.beta = h.at("beta");
  t.params.n = h.at("n");
  t.params.L = h.at("L");
  t.params.ell = h.at("ell");
  t.seed = h.at("seed");
  t.stream = h.at("stream");
  t.table_hash = h.value("table_hash", "");
  t.manifest = h.value("manifest", "");
  if (t.kind == ChainKind::Eta) {
    std::vector<Site> sites;
    for (const auto& s : h.at("initial")) sites.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
    t.initial = Configuration::from_sites(make_torus(t.params.L), sites);
  } else {
    const auto& c = h.at("initial");
    t.initial_class = {c.at("cls").get<int>(), {c.at("anchor").at(0).get<int>(), c.at("anchor").at(1).get<int>()}};
  }
  bool closed = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (closed) throw std::runtime_error("trajectory: data after the closing record");
    const auto j = nlohmann::json::parse(line);
    if (j.contains("checkpoint")) {
      t.checkpoints.push_back({j.at("checkpoint").get<std::size_t>(), parse_hex64(j.at("hash"))});
    } else if (j.contains("end")) {
      t.end_time = j.at("end");
      t.stop = parse_stop(j.at("stop"));
      if (j.at("events").get<std::size_t>() != t.events.size())
        throw std::runtime_error("trajectory: event count does not match the closing record");
      closed = true;
    } else {
      Event e;
      e.time = j.at("t");
      e.from = j.at("a");
      e.to = j.at("b");
      if (j.contains("d")) e.shift = {j["d"].at(0).get<int>(), j["d"].at(1).get<int>()};
      t.events.push_back(e);
    }
  }
  if (!closed) throw std::runtime_error("trajectory: truncated file");
  verify_checkpoints(t);
  return t;
}

void save_trajectory(const Trajectory& t, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_trajectory: cannot open " + path);
  f << trajectory_to_jsonl(t);
  if (!f) throw std::runtime_error("save_trajectory: write failed for " + path);
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_trajectory: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return trajectory_from_jsonl(ss.str());
}

}  // namespace kawasaki
