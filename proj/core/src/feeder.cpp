#include "pmuopt/feeder.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "pmuopt/error.hpp"

namespace pmuopt {

using json = nlohmann::json;

char phase_name(Phase p) { return "ABC"[static_cast<int>(p)]; }

PhaseSet PhaseSet::parse(std::string_view text) {
  PhaseSet out;
  for (char c : text) {
    switch (c) {
      case 'A': case 'a': out.insert(Phase::A); break;
      case 'B': case 'b': out.insert(Phase::B); break;
      case 'C': case 'c': out.insert(Phase::C); break;
      default:
        throw ValidationError("invalid phase letter '" + std::string(1, c) + "' in \"" + std::string(text) + "\"");
    }
  }
  return out;
}

int PhaseSet::size() const { return __builtin_popcount(bits_); }

std::vector<Phase> PhaseSet::phases() const {
  std::vector<Phase> out;
  for (Phase p : kAllPhases)
    if (contains(p)) out.push_back(p);
  return out;
}

std::string PhaseSet::str() const {
  std::string out;
  for (Phase p : phases()) out.push_back(phase_name(p));
  return out;
}

int PhaseSet::position(Phase p) const {
  if (!contains(p)) return -1;
  int pos = 0;
  for (Phase q : kAllPhases) {
    if (q == p) return pos;
    if (contains(q)) ++pos;
  }
  return -1;
}

std::string_view der_kind_name(DerKind kind) {
  switch (kind) {
    case DerKind::PV: return "PV";
    case DerKind::WTG: return "WTG";
    case DerKind::DG: return "DG";
  }
  return "?";
}

namespace {

// Walks the document keeping a JSON pointer for error messages.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_.empty() ? "/" : path_, what); }

  Reader at(const std::string& key) const {
    if (!node_.is_object()) fail("expected an object");
    auto it = node_.find(key);
    if (it == node_.end()) throw ParseError(path_ + "/" + key, "missing required field");
    return Reader(*it, path_ + "/" + key);
  }
  std::optional<Reader> maybe(const std::string& key) const {
    if (!node_.is_object()) fail("expected an object");
    auto it = node_.find(key);
    if (it == node_.end()) return std::nullopt;
    return Reader(*it, path_ + "/" + key);
  }
  Reader at(std::size_t i) const { return Reader(node_.at(i), path_ + "/" + std::to_string(i)); }

  std::size_t array_size() const {
    if (!node_.is_array()) fail("expected an array");
    return node_.size();
  }
  std::string string() const {
    if (!node_.is_string()) fail("expected a string");
    return node_.get<std::string>();
  }
  double number() const {
    if (!node_.is_number()) fail("expected a number");
    return node_.get<double>();
  }
  Complex complex() const {
    if (!node_.is_array() || node_.size() != 2 || !node_[0].is_number() || !node_[1].is_number())
      fail("expected a complex number as [re, im]");
    return {node_[0].get<double>(), node_[1].get<double>()};
  }
  PhaseSet phases() const {
    try {
      return PhaseSet::parse(string());
    } catch (const ValidationError& e) {
      fail(e.what());
    }
  }
  const json& raw() const { return node_; }
  const std::string& path() const { return path_; }

 private:
  const json& node_;
  std::string path_;
};

DerKind parse_der_kind(const Reader& r) {
  const std::string s = r.string();
  if (s == "PV") return DerKind::PV;
  if (s == "WTG") return DerKind::WTG;
  if (s == "DG") return DerKind::DG;
  r.fail("unknown DER kind \"" + s + "\" (expected PV, WTG or DG)");
}

std::string line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

}  // namespace

FeederModel parse_feeder(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(line_col(json_text, e.byte == 0 ? 0 : e.byte - 1), "syntax error: " + std::string(e.what()));
  }

  Reader root(doc, "");
  FeederModel m;
  if (auto n = root.maybe("name")) m.name = n->string();

  auto base = root.at("base");
  m.base.voltage_v = base.at("voltage_v").number();
  m.base.power_va = base.at("power_va").number();

  auto src = root.at("source");
  m.source.bus = src.at("bus").string();
  m.source.voltage_pu = src.at("voltage_pu").number();
  m.source.z = src.at("z").complex();

  auto buses = root.at("buses");
  for (std::size_t i = 0; i < buses.array_size(); ++i) {
    auto b = buses.at(i);
    m.buses.push_back({b.at("id").string(), b.at("phases").phases()});
  }

  auto lines = root.at("lines");
  for (std::size_t i = 0; i < lines.array_size(); ++i) {
    auto l = lines.at(i);
    Line line;
    line.id = l.at("id").string();
    line.from = l.at("from").string();
    line.to = l.at("to").string();
    line.phases = l.at("phases").phases();
    auto z = l.at("z");
    const std::size_t k = z.array_size();
    if (static_cast<int>(k) != line.phases.size())
      z.fail("impedance matrix has " + std::to_string(k) + " rows for " + std::to_string(line.phases.size()) + " phases");
    line.z.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t r = 0; r < k; ++r) {
      auto row = z.at(r);
      if (row.array_size() != k) row.fail("impedance matrix row must have " + std::to_string(k) + " entries");
      for (std::size_t c = 0; c < k; ++c)
        line.z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row.at(c).complex();
    }
    m.lines.push_back(std::move(line));
  }

  if (auto loads = root.maybe("loads")) {
    for (std::size_t i = 0; i < loads->array_size(); ++i) {
      auto l = loads->at(i);
      Load load;
      load.bus = l.at("bus").string();
      auto power = l.at("power");
      if (!power.raw().is_object()) power.fail("expected an object keyed by phase");
      for (auto it = power.raw().begin(); it != power.raw().end(); ++it) {
        Reader entry(it.value(), power.path() + "/" + it.key());
        PhaseSet ph;
        try {
          ph = PhaseSet::parse(it.key());
        } catch (const ValidationError& e) {
          entry.fail(e.what());
        }
        if (ph.size() != 1) entry.fail("load power keys must be a single phase letter");
        load.power.emplace_back(ph.phases().front(), entry.complex());
      }
      std::sort(load.power.begin(), load.power.end(),
                [](const auto& a, const auto& b) { return static_cast<int>(a.first) < static_cast<int>(b.first); });
      m.loads.push_back(std::move(load));
    }
  }

  if (auto ders = root.maybe("ders")) {
    for (std::size_t i = 0; i < ders->array_size(); ++i) {
      auto d = ders->at(i);
      DerUnit der;
      if (auto id = d.maybe("id")) der.id = id->string();
      der.bus = d.at("bus").string();
      der.kind = parse_der_kind(d.at("kind"));
      der.rating_kw = d.at("rating_kw").number();
      der.power_factor = d.maybe("power_factor") ? d.at("power_factor").number() : 1.0;
      auto profile = d.at("profile");
      if (profile.array_size() != 24)
        profile.fail("profile must have 24 hourly entries, got " + std::to_string(profile.array_size()));
      for (std::size_t h = 0; h < 24; ++h) der.profile[h] = profile.at(h).number();
      if (der.id.empty()) der.id = std::string(der_kind_name(der.kind)) + std::to_string(i + 1);
      m.ders.push_back(std::move(der));
    }
  }

  return FeederModel::validated(std::move(m));
}

FeederModel load_feeder(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), "cannot open feeder file");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_feeder(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ":" + e.locus(), std::string(e.what()).substr(e.locus().size() + 2));
  }
}

FeederModel FeederModel::validated(FeederModel model) {
  model.validate();
  return model;
}

void FeederModel::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError(what); };

  if (!(base.voltage_v > 0.0) || !(base.power_va > 0.0)) fail("base voltage and power must be positive");
  if (buses.empty()) fail("feeder has no buses");

  std::unordered_map<std::string, PhaseSet> phase_of;
  for (const Bus& b : buses) {
    if (b.id.empty()) fail("bus with empty id");
    if (b.phases.empty()) fail("bus " + b.id + " has no phases");
    if (!phase_of.emplace(b.id, b.phases).second) fail("duplicate bus id " + b.id);
  }

  if (!phase_of.count(source.bus)) fail("source bus " + source.bus + " does not exist");
  if (!(source.voltage_pu > 0.0)) fail("source voltage must be positive");
  if (std::abs(source.z) == 0.0 || source.z.real() < 0.0) fail("source impedance must be nonzero with non-negative resistance");

  std::set<std::string> line_ids_seen;
  std::unordered_map<std::string, std::vector<std::string>> adj;
  for (const Line& l : lines) {
    if (!line_ids_seen.insert(l.id).second) fail("duplicate line id " + l.id);
    auto f = phase_of.find(l.from);
    if (f == phase_of.end()) fail("line " + l.id + " references missing bus " + l.from);
    auto t = phase_of.find(l.to);
    if (t == phase_of.end()) fail("line " + l.id + " references missing bus " + l.to);
    if (l.from == l.to) fail("line " + l.id + " connects bus " + l.from + " to itself");
    if (l.phases.empty()) fail("line " + l.id + " has no phases");
    if (!l.phases.subset_of(f->second) || !l.phases.subset_of(t->second))
      fail("line " + l.id + " phases " + l.phases.str() + " are not a subset of both endpoint phase sets");
    const auto k = static_cast<Eigen::Index>(l.phases.size());
    if (l.z.rows() != k || l.z.cols() != k) fail("line " + l.id + " impedance matrix has wrong dimension");
    const double scale = std::max(1.0, l.z.cwiseAbs().maxCoeff());
    for (Eigen::Index r = 0; r < k; ++r) {
      if (l.z(r, r).real() < 0.0) fail("line " + l.id + " has negative self resistance");
      for (Eigen::Index c = r + 1; c < k; ++c)
        if (std::abs(l.z(r, c) - l.z(c, r)) > 1e-12 * scale) fail("line " + l.id + " impedance matrix is not symmetric");
    }
    adj[l.from].push_back(l.to);
    adj[l.to].push_back(l.from);
  }

  // Connectivity from the source bus.
  std::set<std::string> seen{source.bus};
  std::queue<std::string> todo;
  todo.push(source.bus);
  while (!todo.empty()) {
    auto cur = todo.front();
    todo.pop();
    for (const auto& nb : adj[cur])
      if (seen.insert(nb).second) todo.push(nb);
  }
  if (seen.size() != buses.size()) {
    for (const Bus& b : buses)
      if (!seen.count(b.id)) fail("topology is not connected: bus " + b.id + " is unreachable from the source");
  }

  for (const Load& ld : loads) {
    auto it = phase_of.find(ld.bus);
    if (it == phase_of.end()) fail("load references missing bus " + ld.bus);
    for (const auto& [ph, s] : ld.power) {
      if (!it->second.contains(ph))
        fail("load at bus " + ld.bus + " on missing phase " + std::string(1, phase_name(ph)));
      if (s.real() < 0.0) fail("load at bus " + ld.bus + " has negative real power");
    }
  }

  for (const DerUnit& d : ders) {
    if (!phase_of.count(d.bus)) fail("DER " + d.id + " references missing bus " + d.bus);
    if (d.rating_kw < 0.0) fail("DER " + d.id + " has negative rating");
    if (!(d.power_factor > 0.0 && d.power_factor <= 1.0)) fail("DER " + d.id + " power factor must lie in (0, 1]");
    for (double v : d.profile)
      if (!(v >= 0.0 && v <= 1.0)) fail("DER " + d.id + " profile entries must lie in [0, 1]");
  }
}

const Bus& FeederModel::bus(std::string_view id) const {
  for (const Bus& b : buses)
    if (b.id == id) return b;
  throw ValidationError("unknown bus id " + std::string(id));
}

std::optional<std::size_t> FeederModel::bus_position(std::string_view id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == id) return i;
  return std::nullopt;
}

const Line& FeederModel::line(std::string_view id) const {
  for (const Line& l : lines)
    if (l.id == id) return l;
  throw ValidationError("unknown line id " + std::string(id));
}

std::vector<std::string> FeederModel::bus_ids() const {
  std::vector<std::string> out;
  out.reserve(buses.size());
  for (const Bus& b : buses) out.push_back(b.id);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> FeederModel::line_ids() const {
  std::vector<std::string> out;
  out.reserve(lines.size());
  for (const Line& l : lines) out.push_back(l.id);
  std::sort(out.begin(), out.end());
  return out;
}

BusGraph::BusGraph(std::span<const std::string> nodes, std::span<const std::pair<std::string, std::string>> edges) {
  for (const auto& n : nodes) adj_[n];
  for (const auto& [a, b] : edges) {
    if (a == b) throw ValidationError("self-loop at bus " + a);
    adj_[a].insert(b);
    adj_[b].insert(a);
  }
}

BusGraph BusGraph::from_model(const FeederModel& model) {
  std::vector<std::string> nodes;
  for (const Bus& b : model.buses) nodes.push_back(b.id);
  std::vector<std::pair<std::string, std::string>> edges;
  for (const Line& l : model.lines) edges.emplace_back(l.from, l.to);
  return BusGraph(nodes, edges);
}

std::vector<std::string> BusGraph::nodes() const {
  std::vector<std::string> out;
  for (const auto& [n, _] : adj_) out.push_back(n);
  return out;
}

std::vector<std::string> BusGraph::neighbors(std::string_view bus, int radius) const {
  const auto start = adj_.find(std::string(bus));
  if (start == adj_.end()) throw ValidationError("unknown bus id " + std::string(bus));
  if (radius < 1) throw ValidationError("neighbor radius must be at least 1");

  std::vector<std::string> out;
  std::set<std::string> seen{std::string(bus)};
  std::vector<std::string> frontier{std::string(bus)};
  for (int depth = 1; depth <= radius && !frontier.empty(); ++depth) {
    std::set<std::string> next;  // ordered, so ties resolve by ascending id
    for (const auto& cur : frontier)
      for (const auto& nb : adj_.at(cur))
        if (!seen.count(nb)) next.insert(nb);
    frontier.assign(next.begin(), next.end());
    for (const auto& nb : frontier) {
      seen.insert(nb);
      out.push_back(nb);
    }
  }
  if (radius == 2 && out.size() > 4) out.resize(4);
  return out;
}

std::vector<std::string> neighbors(const FeederModel& model, std::string_view bus, int radius) {
  if (!model.bus_position(bus)) throw ValidationError("unknown bus id " + std::string(bus));
  return BusGraph::from_model(model).neighbors(bus, radius);
}

}  // namespace pmuopt
