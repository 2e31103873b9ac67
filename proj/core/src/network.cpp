#include "pmuopt/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/SparseLU>

#include "pmuopt/error.hpp"

namespace pmuopt {

NodeIndex NodeIndex::build(const FeederModel& model) {
  NodeIndex idx;
  std::vector<const Bus*> sorted;
  for (const Bus& b : model.buses) sorted.push_back(&b);
  std::sort(sorted.begin(), sorted.end(), [](const Bus* a, const Bus* b) { return a->id < b->id; });
  for (const Bus* b : sorted) {
    idx.buses_.push_back(b->id);
    idx.bus_first_.push_back(idx.keys_.size());
    idx.bus_phases_.push_back(b->phases);
    for (Phase p : b->phases.phases()) idx.keys_.push_back({b->id, p});
  }
  idx.bus_first_.push_back(idx.keys_.size());
  idx.rows_.resize(idx.keys_.size());
  for (std::size_t i = 0; i < idx.rows_.size(); ++i) idx.rows_[i] = i;
  return idx;
}

std::optional<std::size_t> NodeIndex::bus_slot(std::string_view bus) const {
  auto it = std::lower_bound(buses_.begin(), buses_.end(), bus);
  if (it == buses_.end() || *it != bus) return std::nullopt;
  return static_cast<std::size_t>(it - buses_.begin());
}

std::optional<std::size_t> NodeIndex::find(std::string_view bus, Phase phase) const {
  auto slot = bus_slot(bus);
  if (!slot) return std::nullopt;
  const int pos = bus_phases_[*slot].position(phase);
  if (pos < 0) return std::nullopt;
  return bus_first_[*slot] + static_cast<std::size_t>(pos);
}

std::size_t NodeIndex::at(std::string_view bus, Phase phase) const {
  auto row = find(bus, phase);
  if (!row) throw ValidationError("no node for bus " + std::string(bus) + " phase " + std::string(1, phase_name(phase)));
  return *row;
}

std::span<const std::size_t> NodeIndex::rows_of(std::string_view bus) const {
  auto slot = bus_slot(bus);
  if (!slot) throw ValidationError("unknown bus id " + std::string(bus));
  return std::span<const std::size_t>(rows_).subspan(bus_first_[*slot], bus_first_[*slot + 1] - bus_first_[*slot]);
}

PhaseSet NodeIndex::phases_of(std::string_view bus) const {
  auto slot = bus_slot(bus);
  if (!slot) throw ValidationError("unknown bus id " + std::string(bus));
  return bus_phases_[*slot];
}

SystemBuilder::SystemBuilder(std::size_t nodes) : nodes_(nodes), injection_(nodes, Complex{}) {}

std::size_t SystemBuilder::add_node() {
  injection_.emplace_back();
  return nodes_++;
}

void SystemBuilder::add_branch(std::span<const std::size_t> from, std::span<const std::size_t> to,
                               const Eigen::MatrixXcd& y) {
  const auto k = static_cast<std::size_t>(y.rows());
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      const Complex v = y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      if (v == Complex{}) continue;
      triplets_.emplace_back(static_cast<int>(from[r]), static_cast<int>(from[c]), v);
      triplets_.emplace_back(static_cast<int>(to[r]), static_cast<int>(to[c]), v);
      triplets_.emplace_back(static_cast<int>(from[r]), static_cast<int>(to[c]), -v);
      triplets_.emplace_back(static_cast<int>(to[r]), static_cast<int>(from[c]), -v);
    }
  }
}

void SystemBuilder::add_shunt(std::size_t row, Complex y) {
  triplets_.emplace_back(static_cast<int>(row), static_cast<int>(row), y);
}

void SystemBuilder::add_stamp(std::span<const std::size_t> rows, const Eigen::MatrixXcd& y) {
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows.size(); ++c) {
      const Complex v = y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      if (v != Complex{}) triplets_.emplace_back(static_cast<int>(rows[r]), static_cast<int>(rows[c]), v);
    }
}

void SystemBuilder::add_injection(std::size_t row, Complex current) { injection_.at(row) += current; }

NetworkSystem SystemBuilder::finish(NodeIndex index, std::vector<std::string> internal_labels) const {
  NetworkSystem sys;
  const auto n = static_cast<Eigen::Index>(nodes_);
  sys.y.resize(n, n);
  sys.y.setFromTriplets(triplets_.begin(), triplets_.end());
  sys.y.makeCompressed();
  sys.injection = Eigen::Map<const Eigen::VectorXcd>(injection_.data(), n);
  sys.index = std::move(index);
  sys.internal_labels = std::move(internal_labels);
  return sys;
}

Complex nominal_phasor(Phase p) {
  constexpr double deg120 = 2.0 * std::numbers::pi / 3.0;
  switch (p) {
    case Phase::A: return {1.0, 0.0};
    case Phase::B: return std::polar(1.0, -deg120);
    case Phase::C: return std::polar(1.0, deg120);
  }
  return {};
}

Complex source_emf(const FeederModel& model, Phase p) { return model.source.voltage_pu * nominal_phasor(p); }

Eigen::MatrixXcd line_admittance(const Line& line) {
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(line.z);
  if (!lu.isInvertible()) throw SimulationError("line " + line.id + " has a singular impedance block");
  return lu.inverse();
}

void stamp_feeder(SystemBuilder& builder, const FeederModel& model, const NodeIndex& index, int hour,
                  std::string_view skip_line) {
  if (hour < 0 || hour > 23) throw ValidationError("hour must lie in 0..23, got " + std::to_string(hour));

  const Complex ys = 1.0 / model.source.z;
  for (Phase p : index.phases_of(model.source.bus).phases()) {
    const std::size_t row = index.at(model.source.bus, p);
    builder.add_shunt(row, ys);
    builder.add_injection(row, source_emf(model, p) * ys);
  }

  std::vector<std::size_t> from_rows, to_rows;
  for (const Line& line : model.lines) {
    if (!skip_line.empty() && line.id == skip_line) continue;
    from_rows.clear();
    to_rows.clear();
    for (Phase p : line.phases.phases()) {
      from_rows.push_back(index.at(line.from, p));
      to_rows.push_back(index.at(line.to, p));
    }
    builder.add_branch(from_rows, to_rows, line_admittance(line));
  }

  // Constant-impedance loads at nominal voltage: y = conj(S) / |Vnom|^2, |Vnom| = 1 pu.
  for (const Load& load : model.loads)
    for (const auto& [p, s] : load.power) builder.add_shunt(index.at(load.bus, p), std::conj(s));

  // DERs as constant-current injections split across the bus phases.
  const double per_phase_base_kva = model.base.power_va / 3.0 / 1e3;
  for (const DerUnit& der : model.ders) {
    const PhaseSet phases = index.phases_of(der.bus);
    const double p_pu = der.rating_kw * der.profile[static_cast<std::size_t>(hour)] / phases.size() / per_phase_base_kva;
    const double q_pu = p_pu * std::tan(std::acos(der.power_factor));
    const Complex s{p_pu, q_pu};
    for (Phase p : phases.phases())
      builder.add_injection(index.at(der.bus, p), std::conj(s) / std::conj(nominal_phasor(p)));
  }
}

NetworkSystem assemble_network(const FeederModel& model, int hour) {
  NodeIndex index = NodeIndex::build(model);
  SystemBuilder builder(index.size());
  stamp_feeder(builder, model, index, hour);
  return builder.finish(std::move(index));
}

Eigen::VectorXcd solve(const NetworkSystem& system) {
  Eigen::SparseLU<SparseComplexMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(system.y);
  lu.factorize(system.y);
  if (lu.info() != Eigen::Success) throw SimulationError("singular nodal admittance matrix: " + lu.lastErrorMessage());
  Eigen::VectorXcd v = lu.solve(system.injection);
  if (lu.info() != Eigen::Success || !v.allFinite()) throw SimulationError("nodal solve failed");
  return v;
}

double kcl_residual(const NetworkSystem& system, const Eigen::VectorXcd& v) {
  const Eigen::VectorXcd r = system.y * v - system.injection;
  const double denom = std::max(1.0, system.injection.cwiseAbs().maxCoeff());
  return r.cwiseAbs().maxCoeff() / denom;
}

Eigen::VectorXcd substation_currents(const FeederModel& model, const NodeIndex& index, const Eigen::VectorXcd& v) {
  const auto rows = index.rows_of(model.source.bus);
  const auto phases = index.phases_of(model.source.bus).phases();
  Eigen::VectorXcd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k)
    out(static_cast<Eigen::Index>(k)) =
        (source_emf(model, phases[k]) - v(static_cast<Eigen::Index>(rows[k]))) / model.source.z;
  return out;
}

Complex positive_sequence_impedance(const Eigen::MatrixXcd& z) {
  const auto k = z.rows();
  if (k == 1) return z(0, 0);
  Complex self{}, mutual{};
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < k; ++c) (r == c ? self : mutual) += z(r, c);
  return self / static_cast<double>(k) - mutual / static_cast<double>(k * (k - 1));
}

std::size_t PositiveSequenceYbus::position(std::string_view bus) const {
  auto it = std::lower_bound(buses.begin(), buses.end(), bus);
  if (it == buses.end() || *it != bus) throw ValidationError("unknown bus id " + std::string(bus));
  return static_cast<std::size_t>(it - buses.begin());
}

PositiveSequenceYbus positive_sequence_ybus(const FeederModel& model) {
  PositiveSequenceYbus out;
  out.buses = model.bus_ids();
  const auto n = static_cast<Eigen::Index>(out.buses.size());
  out.y = Eigen::MatrixXcd::Zero(n, n);
  for (const Line& line : model.lines) {
    const Complex zpos = positive_sequence_impedance(line.z);
    if (std::abs(zpos) == 0.0) throw SimulationError("line " + line.id + " has zero positive-sequence impedance");
    const Complex y = 1.0 / zpos;
    const auto f = static_cast<Eigen::Index>(out.position(line.from));
    const auto t = static_cast<Eigen::Index>(out.position(line.to));
    out.y(f, f) += y;
    out.y(t, t) += y;
    out.y(f, t) -= y;
    out.y(t, f) -= y;
  }
  const auto s = static_cast<Eigen::Index>(out.position(model.source.bus));
  out.y(s, s) += 1.0 / model.source.z;
  return out;
}

}  // namespace pmuopt
