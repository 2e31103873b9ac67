#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "pmuopt/feeder.hpp"
#include "pmuopt/network.hpp"

namespace pmuopt {

/// The eleven shunt fault classes.
enum class FaultType : std::uint8_t { AG, BG, CG, AB, BC, AC, ABG, BCG, ACG, ABC, ABCG };

inline constexpr std::array<FaultType, 11> kAllFaultTypes{
    FaultType::AG,  FaultType::BG,  FaultType::CG,  FaultType::AB,  FaultType::BC,  FaultType::AC,
    FaultType::ABG, FaultType::BCG, FaultType::ACG, FaultType::ABC, FaultType::ABCG};

std::string_view fault_type_name(FaultType kind);
std::optional<FaultType> parse_fault_type(std::string_view name);
PhaseSet faulted_phases(FaultType kind);
bool is_grounded(FaultType kind);
inline int fault_type_index(FaultType kind) { return static_cast<int>(kind); }

/// Shunt fault at fraction `position` along `line`, measured from its `from` bus.
struct FaultSpec {
  std::string line;
  double position = 0.5;
  FaultType kind = FaultType::AG;
  double rf_ohm = 0.001;
  double rg_ohm = 1.0;
  int hour = 0;
};

/// Pre-fault and during-fault snapshot of one scenario. Voltages are
/// aligned with `index` rows; currents with the substation's phases.
struct PhasorRecord {
  FaultSpec spec;
  std::string substation;
  std::shared_ptr<const NodeIndex> index;
  Eigen::VectorXcd v_pre;
  Eigen::VectorXcd v_fault;
  Eigen::VectorXcd i_pre;
  Eigen::VectorXcd i_fault;

  const std::string& faulted_line() const { return spec.line; }
  FaultType fault_type() const { return spec.kind; }
};

}  // namespace pmuopt
