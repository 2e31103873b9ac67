#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmuopt/features.hpp"
#include "pmuopt/feeder.hpp"
#include "pmuopt/network.hpp"
#include "pmuopt/phasor.hpp"

namespace pmuopt {

struct StampNode {
  bool common = false;    // internal star point of the fault
  Phase phase = Phase::A;  // meaningful when !common
};

/// Dense per-unit admittance stamp of a shunt fault over its nodes.
struct FaultStamp {
  std::vector<StampNode> nodes;
  Eigen::MatrixXd y;
};

/// LG: phase to ground through rf+rg. LL: phase to phase through 2 rf.
/// LLG/ABCG: phases to a common node through rf, common to ground through rg.
/// ABC: the floating common node is Kron-reduced away.
FaultStamp fault_stamp(FaultType kind, double rf_ohm, double rg_ohm, double zbase_ohm);

/// Solves pre- and during-fault snapshots of one feeder. Pre-fault states
/// are cached per hour; the object is safe to share between threads.
class FaultSimulator {
 public:
  explicit FaultSimulator(const FeederModel& model);

  const FeederModel& model() const { return *model_; }
  const std::shared_ptr<const NodeIndex>& index() const { return index_; }

  /// Throws ValidationError if `spec` does not fit the model.
  void check(const FaultSpec& spec) const;

  /// Nodal system with the faulted line split at spec.position and the fault stamped.
  NetworkSystem faulted_network(const FaultSpec& spec) const;

  PhasorRecord simulate(const FaultSpec& spec) const;

  struct State {
    Eigen::VectorXcd v;
    Eigen::VectorXcd i_substation;
  };
  const State& prefault(int hour) const;

 private:
  std::shared_ptr<const FeederModel> model_;
  std::shared_ptr<const NodeIndex> index_;
  mutable std::array<std::once_flag, 24> once_;
  mutable std::array<State, 24> prefault_;
};

PhasorRecord simulate_scenario(const FeederModel& model, const FaultSpec& spec);

enum class ScenarioMode { Placement, Cnn };
enum class PositionPolicy { Midpoint, UniformRandom };

struct ScenarioConfig {
  ScenarioMode mode = ScenarioMode::Placement;
  std::vector<int> hours;
  PositionPolicy position = PositionPolicy::Midpoint;
  bool rf_range = false;  // false: rf_ohm fixed; true: uniform in [rf_min, rf_max]
  double rf_ohm = 0.001;
  double rf_min = 0.01;
  double rf_max = 10.0;
  std::vector<double> rg_values{1.0};  // one value = fixed, several = uniform draw
  std::vector<FaultType> types{kAllFaultTypes.begin(), kAllFaultTypes.end()};
  std::size_t samples = 0;  // cnn mode
  std::size_t timesteps_pre = 15;
  std::size_t timesteps_fault = 15;
  double noise_sigma = 0.0;  // relative, applied per phasor and time step
  std::uint64_t seed = 0;
  unsigned jobs = 1;

  /// Midpoint faults, rf 0.001 ohm, rg 1 ohm, every second hour.
  static ScenarioConfig placement_defaults();
  /// Random position, rf in [0.01, 10] ohm, rg from {1, 5, 10, 20} ohm, any hour.
  static ScenarioConfig cnn_defaults(std::size_t samples);

  void validate() const;
};

/// Fault types of `types` whose phases exist on `line`.
std::vector<FaultType> applicable_types(const Line& line, std::span<const FaultType> types);

/// Scenario list in (line id, fault type, hour) order.
std::vector<FaultSpec> placement_scenarios(const FeederModel& model, const ScenarioConfig& config);

std::vector<PhasorRecord> generate_placement_dataset(const FeederModel& model, const ScenarioConfig& config);

/// Time-series dataset: `data` is row-major (samples, timesteps, features).
struct CnnDataset {
  std::size_t samples = 0;
  std::size_t timesteps = 0;
  std::size_t features = 0;
  std::vector<float> data;
  std::vector<std::uint16_t> location;  // index into location_names
  std::vector<std::uint16_t> type;      // FaultType index
  FeatureLayout layout;
  std::vector<std::string> location_names;
  std::vector<FaultSpec> specs;

  std::span<const float> sample(std::size_t i) const {
    return std::span<const float>(data).subspan(i * timesteps * features, timesteps * features);
  }
};

/// Draws one random scenario for sample `index` (deterministic in seed and index).
FaultSpec draw_cnn_scenario(const FeederModel& model, const ScenarioConfig& config, std::size_t index);

CnnDataset generate_cnn_dataset(const FeederModel& model, const ScenarioConfig& config);

}  // namespace pmuopt
