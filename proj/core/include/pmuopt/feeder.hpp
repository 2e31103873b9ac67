#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <set>
#include <span>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace pmuopt {

using Complex = std::complex<double>;

enum class Phase : std::uint8_t { A = 0, B = 1, C = 2 };

inline constexpr std::array<Phase, 3> kAllPhases{Phase::A, Phase::B, Phase::C};

char phase_name(Phase p);

/// Set of phases stored as a bitmask; iteration order is always A, B, C.
class PhaseSet {
 public:
  constexpr PhaseSet() = default;
  constexpr PhaseSet(std::initializer_list<Phase> phases) {
    for (Phase p : phases) insert(p);
  }

  static PhaseSet parse(std::string_view text);  // "ABC", "AC", ...
  static constexpr PhaseSet all() { return PhaseSet{Phase::A, Phase::B, Phase::C}; }

  constexpr void insert(Phase p) { bits_ |= bit(p); }
  constexpr bool contains(Phase p) const { return (bits_ & bit(p)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool subset_of(PhaseSet other) const { return (bits_ & ~other.bits_) == 0; }
  int size() const;
  std::vector<Phase> phases() const;
  std::string str() const;
  /// Position of `p` among this set's phases, or -1.
  int position(Phase p) const;

  constexpr bool operator==(const PhaseSet&) const = default;

 private:
  static constexpr std::uint8_t bit(Phase p) { return static_cast<std::uint8_t>(1u << static_cast<int>(p)); }
  std::uint8_t bits_ = 0;
};

struct Bus {
  std::string id;
  PhaseSet phases;
};

struct Line {
  std::string id;
  std::string from;
  std::string to;
  PhaseSet phases;
  Eigen::MatrixXcd z;  // |phases| x |phases|, per-unit
};

struct Load {
  std::string bus;
  std::vector<std::pair<Phase, Complex>> power;  // per-phase S, per-unit
};

enum class DerKind : std::uint8_t { PV, WTG, DG };

struct DerUnit {
  std::string id;
  std::string bus;
  DerKind kind = DerKind::PV;
  double rating_kw = 0.0;
  double power_factor = 1.0;
  std::array<double, 24> profile{};
};

struct SourceSpec {
  std::string bus;
  double voltage_pu = 1.0;  // line-to-neutral magnitude
  Complex z{0.0, 0.0};      // per-phase source impedance
};

/// `voltage_v` is the line-to-line nominal voltage, `power_va` the
/// three-phase power base. Per-phase quantities are on power_va / 3.
struct BaseSpec {
  double voltage_v = 1.0;
  double power_va = 1.0;
  double zbase_ohm() const { return voltage_v * voltage_v / power_va; }
};

/// Unbalanced radial feeder. Construct through `load_feeder` or
/// `FeederModel::validated`, both of which check every invariant.
class FeederModel {
 public:
  std::string name;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Load> loads;
  std::vector<DerUnit> ders;
  SourceSpec source;
  BaseSpec base;

  /// Throws ValidationError naming the first violated invariant.
  void validate() const;
  static FeederModel validated(FeederModel model);

  const Bus& bus(std::string_view id) const;
  std::optional<std::size_t> bus_position(std::string_view id) const;
  const Line& line(std::string_view id) const;
  const std::string& substation() const { return source.bus; }
  /// Bus ids, ascending.
  std::vector<std::string> bus_ids() const;
  /// Line ids, ascending.
  std::vector<std::string> line_ids() const;
};

FeederModel load_feeder(const std::filesystem::path& path);
FeederModel parse_feeder(std::string_view json_text);

std::string_view der_kind_name(DerKind kind);

/// Undirected bus adjacency used for neighborhood queries.
class BusGraph {
 public:
  BusGraph() = default;
  BusGraph(std::span<const std::string> nodes, std::span<const std::pair<std::string, std::string>> edges);
  static BusGraph from_model(const FeederModel& model);

  bool contains(std::string_view bus) const { return adj_.count(std::string(bus)) > 0; }
  std::vector<std::string> nodes() const;
  /// Breadth-first neighbors, nearest first, ties by ascending id; capped at four for radius 2.
  std::vector<std::string> neighbors(std::string_view bus, int radius) const;

 private:
  std::map<std::string, std::set<std::string>> adj_;
};

/// Breadth-first neighbors of `bus`, nearest first, ties by ascending id.
/// With radius 2 the list is capped at four entries.
std::vector<std::string> neighbors(const FeederModel& model, std::string_view bus, int radius);

}  // namespace pmuopt
