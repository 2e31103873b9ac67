#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "pmuopt/feeder.hpp"

namespace pmuopt {

using SparseComplexMatrix = Eigen::SparseMatrix<Complex, Eigen::ColMajor, int>;

struct NodeKey {
  std::string bus;
  Phase phase;
  bool operator==(const NodeKey&) const = default;
};

/// Bijection between (bus, phase) pairs and system rows, ordered by bus id
/// then phase. Only phases that exist at a bus get a row.
class NodeIndex {
 public:
  static NodeIndex build(const FeederModel& model);

  std::size_t size() const { return keys_.size(); }
  const NodeKey& key(std::size_t row) const { return keys_.at(row); }
  std::optional<std::size_t> find(std::string_view bus, Phase phase) const;
  std::size_t at(std::string_view bus, Phase phase) const;
  /// Rows of `bus` in A, B, C order (only the phases present).
  std::span<const std::size_t> rows_of(std::string_view bus) const;
  PhaseSet phases_of(std::string_view bus) const;
  const std::vector<std::string>& buses() const { return buses_; }

 private:
  std::vector<NodeKey> keys_;
  std::vector<std::string> buses_;          // ascending
  std::vector<std::size_t> bus_first_;      // offset into keys_ per bus
  std::vector<std::size_t> rows_;           // 0..n-1, sliced by rows_of
  std::vector<PhaseSet> bus_phases_;
  std::optional<std::size_t> bus_slot(std::string_view bus) const;
};

/// Nodal system Y V = I. Rows past `index.size()` are internal nodes added
/// by fault insertion; they carry no (bus, phase) key.
struct NetworkSystem {
  SparseComplexMatrix y;
  Eigen::VectorXcd injection;
  NodeIndex index;
  std::vector<std::string> internal_labels;

  std::size_t size() const { return static_cast<std::size_t>(injection.size()); }
};

/// Accumulates stamps as triplets; used by assembly and fault insertion.
class SystemBuilder {
 public:
  explicit SystemBuilder(std::size_t nodes);

  std::size_t add_node();
  std::size_t size() const { return nodes_; }

  /// Series branch with admittance matrix `y` between two aligned row sets.
  void add_branch(std::span<const std::size_t> from, std::span<const std::size_t> to, const Eigen::MatrixXcd& y);
  void add_shunt(std::size_t row, Complex y);
  /// Dense stamp over arbitrary rows (rows.size() == y.rows()).
  void add_stamp(std::span<const std::size_t> rows, const Eigen::MatrixXcd& y);
  void add_injection(std::size_t row, Complex current);

  NetworkSystem finish(NodeIndex index, std::vector<std::string> internal_labels = {}) const;

 private:
  std::size_t nodes_;
  std::vector<Eigen::Triplet<Complex, int>> triplets_;
  std::vector<Complex> injection_;
};

/// Nominal phasor 1 at angle 0, -120 or +120 degrees.
Complex nominal_phasor(Phase p);

/// Source EMF per phase: voltage_pu at nominal angle.
Complex source_emf(const FeederModel& model, Phase p);

/// Admittance of each line's phase block; throws SimulationError on a
/// singular impedance block.
Eigen::MatrixXcd line_admittance(const Line& line);

/// Stamps source, every line except `skip_line`, loads and DER injections
/// for `hour` into `builder`, whose first index.size() rows follow `index`.
void stamp_feeder(SystemBuilder& builder, const FeederModel& model, const NodeIndex& index, int hour,
                  std::string_view skip_line = {});

NetworkSystem assemble_network(const FeederModel& model, int hour);

/// Sparse LU solve of Y V = I; throws SimulationError if Y is singular.
Eigen::VectorXcd solve(const NetworkSystem& system);

/// ||Y V - I||_inf / max(1, ||I||_inf).
double kcl_residual(const NetworkSystem& system, const Eigen::VectorXcd& v);

/// Per-phase current leaving the source into the substation bus.
Eigen::VectorXcd substation_currents(const FeederModel& model, const NodeIndex& index, const Eigen::VectorXcd& v);

struct PositiveSequenceYbus {
  std::vector<std::string> buses;  // ascending ids; row i is buses[i]
  Eigen::MatrixXcd y;
  std::size_t position(std::string_view bus) const;
};

/// Single-phase equivalent Y-bus from each line's positive-sequence
/// impedance plus the source shunt at the substation.
PositiveSequenceYbus positive_sequence_ybus(const FeederModel& model);

/// Positive-sequence impedance of a phase block: mean self minus mean mutual.
Complex positive_sequence_impedance(const Eigen::MatrixXcd& z);

}  // namespace pmuopt
