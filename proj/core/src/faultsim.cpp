#include "pmuopt/faultsim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pmuopt/error.hpp"
#include "pmuopt/parallel.hpp"
#include "pmuopt/random.hpp"

namespace pmuopt {

std::string_view fault_type_name(FaultType kind) {
  static constexpr std::array<std::string_view, 11> names{"AG", "BG",  "CG",  "AB",  "BC",  "AC",
                                                          "ABG", "BCG", "ACG", "ABC", "ABCG"};
  return names[static_cast<std::size_t>(kind)];
}

std::optional<FaultType> parse_fault_type(std::string_view name) {
  for (FaultType t : kAllFaultTypes)
    if (fault_type_name(t) == name) return t;
  return std::nullopt;
}

PhaseSet faulted_phases(FaultType kind) {
  PhaseSet out;
  for (char c : fault_type_name(kind)) {
    if (c == 'A') out.insert(Phase::A);
    if (c == 'B') out.insert(Phase::B);
    if (c == 'C') out.insert(Phase::C);
  }
  return out;
}

bool is_grounded(FaultType kind) { return fault_type_name(kind).back() == 'G'; }

FaultStamp fault_stamp(FaultType kind, double rf_ohm, double rg_ohm, double zbase_ohm) {
  if (!(rf_ohm > 0.0) || !(rg_ohm > 0.0)) throw ValidationError("fault resistances must be positive");
  const auto phases = faulted_phases(kind).phases();
  const auto k = static_cast<Eigen::Index>(phases.size());
  const double gf = zbase_ohm / rf_ohm;
  const double gg = zbase_ohm / rg_ohm;

  // Star: every faulted phase to the common node through rf.
  Eigen::MatrixXd star = Eigen::MatrixXd::Zero(k + 1, k + 1);
  for (Eigen::Index i = 0; i < k; ++i) {
    star(i, i) += gf;
    star(k, k) += gf;
    star(i, k) -= gf;
    star(k, i) -= gf;
  }
  const bool grounded = is_grounded(kind);
  if (grounded) star(k, k) += gg;

  FaultStamp out;
  for (Phase p : phases) out.nodes.push_back({false, p});
  if (grounded && k > 1) {
    out.nodes.push_back({true, Phase::A});
    out.y = star;
  } else {
    // Single-phase faults and ungrounded faults: eliminate the star point.
    out.y = star.topLeftCorner(k, k) - star.topRightCorner(k, 1) * star.bottomLeftCorner(1, k) / star(k, k);
  }
  return out;
}

FaultSimulator::FaultSimulator(const FeederModel& model)
    : model_(std::make_shared<const FeederModel>(model)),
      index_(std::make_shared<const NodeIndex>(NodeIndex::build(model))) {}

const FaultSimulator::State& FaultSimulator::prefault(int hour) const {
  if (hour < 0 || hour > 23) throw ValidationError("hour must lie in 0..23, got " + std::to_string(hour));
  const auto h = static_cast<std::size_t>(hour);
  std::call_once(once_[h], [&] {
    const NetworkSystem sys = assemble_network(*model_, hour);
    State st;
    st.v = solve(sys);
    st.i_substation = substation_currents(*model_, *index_, st.v);
    prefault_[h] = std::move(st);
  });
  return prefault_[h];
}

namespace {

std::string describe(const FaultSpec& s) {
  std::ostringstream os;
  os << "scenario {line " << s.line << ", t " << s.position << ", type " << fault_type_name(s.kind) << ", rf "
     << s.rf_ohm << " ohm, rg " << s.rg_ohm << " ohm, hour " << s.hour << "}";
  return os.str();
}

}  // namespace

void FaultSimulator::check(const FaultSpec& spec) const {
  const Line& line = model_->line(spec.line);
  if (!(spec.position > 0.0 && spec.position < 1.0))
    throw ValidationError("fault position must lie strictly inside (0, 1): " + describe(spec));
  if (!(spec.rf_ohm > 0.0) || !(spec.rg_ohm > 0.0))
    throw ValidationError("fault resistances must be positive: " + describe(spec));
  if (spec.hour < 0 || spec.hour > 23) throw ValidationError("hour must lie in 0..23: " + describe(spec));
  if (!faulted_phases(spec.kind).subset_of(line.phases))
    throw ValidationError("fault type " + std::string(fault_type_name(spec.kind)) + " needs phases absent on line " +
                          line.id);
}

NetworkSystem FaultSimulator::faulted_network(const FaultSpec& spec) const {
  check(spec);
  const Line& line = model_->line(spec.line);
  const NodeIndex& index = *index_;

  SystemBuilder builder(index.size());
  stamp_feeder(builder, *model_, index, spec.hour, line.id);

  std::vector<std::string> labels;
  std::vector<std::size_t> from_rows, to_rows, mid_rows;
  for (Phase p : line.phases.phases()) {
    from_rows.push_back(index.at(line.from, p));
    to_rows.push_back(index.at(line.to, p));
    mid_rows.push_back(builder.add_node());
    labels.push_back("fault:" + line.id + ":" + std::string(1, phase_name(p)));
  }
  const Eigen::MatrixXcd y = line_admittance(line);
  builder.add_branch(from_rows, mid_rows, y / spec.position);
  builder.add_branch(mid_rows, to_rows, y / (1.0 - spec.position));

  const FaultStamp stamp = fault_stamp(spec.kind, spec.rf_ohm, spec.rg_ohm, model_->base.zbase_ohm());
  std::vector<std::size_t> rows;
  for (const StampNode& node : stamp.nodes) {
    if (node.common) {
      rows.push_back(builder.add_node());
      labels.push_back("fault:" + line.id + ":common");
    } else {
      rows.push_back(mid_rows[static_cast<std::size_t>(line.phases.position(node.phase))]);
    }
  }
  builder.add_stamp(rows, stamp.y.cast<Complex>());
  return builder.finish(index, std::move(labels));
}

PhasorRecord FaultSimulator::simulate(const FaultSpec& spec) const {
  const State& pre = prefault(spec.hour);
  const NetworkSystem sys = faulted_network(spec);
  Eigen::VectorXcd v;
  try {
    v = solve(sys);
  } catch (const SimulationError& e) {
    throw SimulationError(std::string(e.what()) + " in " + describe(spec));
  }
  PhasorRecord rec;
  rec.spec = spec;
  rec.substation = model_->source.bus;
  rec.index = index_;
  rec.v_pre = pre.v;
  rec.i_pre = pre.i_substation;
  rec.v_fault = v.head(static_cast<Eigen::Index>(index_->size()));
  rec.i_fault = substation_currents(*model_, *index_, rec.v_fault);
  return rec;
}

PhasorRecord simulate_scenario(const FeederModel& model, const FaultSpec& spec) {
  return FaultSimulator(model).simulate(spec);
}

ScenarioConfig ScenarioConfig::placement_defaults() {
  ScenarioConfig c;
  c.mode = ScenarioMode::Placement;
  for (int h = 0; h < 24; h += 2) c.hours.push_back(h);
  return c;
}

ScenarioConfig ScenarioConfig::cnn_defaults(std::size_t samples) {
  ScenarioConfig c;
  c.mode = ScenarioMode::Cnn;
  for (int h = 0; h < 24; ++h) c.hours.push_back(h);
  c.position = PositionPolicy::UniformRandom;
  c.rf_range = true;
  c.rg_values = {1.0, 5.0, 10.0, 20.0};
  c.samples = samples;
  return c;
}

void ScenarioConfig::validate() const {
  if (hours.empty()) throw ValidationError("scenario config needs at least one hour");
  for (int h : hours)
    if (h < 0 || h > 23) throw ValidationError("hour out of range 0..23: " + std::to_string(h));
  if (types.empty()) throw ValidationError("scenario config needs at least one fault type");
  if (rg_values.empty()) throw ValidationError("scenario config needs at least one ground resistance");
  for (double rg : rg_values)
    if (!(rg > 0.0)) throw ValidationError("ground resistance must be positive");
  if (rf_range) {
    if (!(rf_min > 0.0) || !(rf_max >= rf_min)) throw ValidationError("fault resistance range must satisfy 0 < min <= max");
  } else if (!(rf_ohm > 0.0)) {
    throw ValidationError("fault resistance must be positive");
  }
  if (!(noise_sigma >= 0.0)) throw ValidationError("noise sigma must be non-negative");
  if (mode == ScenarioMode::Placement) {
    if (position != PositionPolicy::Midpoint || rf_range || rg_values.size() != 1)
      throw ValidationError("placement mode requires midpoint faults with fixed fault and ground resistance");
  } else {
    if (samples < 1) throw ValidationError("cnn mode needs at least one sample");
    if (timesteps_pre + timesteps_fault == 0) throw ValidationError("cnn mode needs at least one time step");
  }
}

std::vector<FaultType> applicable_types(const Line& line, std::span<const FaultType> types) {
  std::vector<FaultType> out;
  for (FaultType t : types)
    if (faulted_phases(t).subset_of(line.phases)) out.push_back(t);
  return out;
}

std::vector<FaultSpec> placement_scenarios(const FeederModel& model, const ScenarioConfig& config) {
  if (config.mode != ScenarioMode::Placement) throw ValidationError("placement dataset requires placement mode");
  config.validate();
  std::vector<FaultType> types = config.types;
  std::sort(types.begin(), types.end());
  types.erase(std::unique(types.begin(), types.end()), types.end());
  std::vector<FaultSpec> out;
  for (const auto& id : model.line_ids()) {
    for (FaultType t : applicable_types(model.line(id), types))
      for (int h : config.hours) out.push_back({id, 0.5, t, config.rf_ohm, config.rg_values.front(), h});
  }
  return out;
}

std::vector<PhasorRecord> generate_placement_dataset(const FeederModel& model, const ScenarioConfig& config) {
  const auto specs = placement_scenarios(model, config);
  const FaultSimulator sim(model);
  std::vector<PhasorRecord> out(specs.size());
  parallel_for(specs.size(), config.jobs, [&](std::size_t i) { out[i] = sim.simulate(specs[i]); });
  return out;
}

FaultSpec draw_cnn_scenario(const FeederModel& model, const ScenarioConfig& config, std::size_t index) {
  Rng rng(stream_seed(config.seed, index));
  const auto lines = model.line_ids();
  FaultSpec s;
  s.line = lines[rng.index(lines.size())];
  s.position = config.position == PositionPolicy::Midpoint ? 0.5 : rng.uniform01();
  const auto types = applicable_types(model.line(s.line), config.types);
  if (types.empty()) throw ValidationError("no configured fault type fits line " + s.line);
  s.kind = types[rng.index(types.size())];
  s.rf_ohm = config.rf_range ? rng.uniform(config.rf_min, config.rf_max) : config.rf_ohm;
  s.rg_ohm = config.rg_values[rng.index(config.rg_values.size())];
  s.hour = config.hours[rng.index(config.hours.size())];
  return s;
}

CnnDataset generate_cnn_dataset(const FeederModel& model, const ScenarioConfig& config) {
  if (config.mode != ScenarioMode::Cnn) throw ValidationError("cnn dataset requires cnn mode");
  config.validate();
  const FaultSimulator sim(model);
  CnnDataset ds;
  ds.samples = config.samples;
  ds.timesteps = config.timesteps_pre + config.timesteps_fault;
  ds.layout = full_layout(*sim.index(), model.source.bus);
  ds.features = ds.layout.width();
  ds.location_names = model.line_ids();
  ds.data.assign(ds.samples * ds.timesteps * ds.features, 0.0f);
  ds.location.resize(ds.samples);
  ds.type.resize(ds.samples);
  ds.specs.resize(ds.samples);

  parallel_for(ds.samples, config.jobs, [&](std::size_t i) {
    const FaultSpec spec = draw_cnn_scenario(model, config, i);
    const PhasorRecord rec = sim.simulate(spec);
    // Noise draws use a stream separate from the scenario draw.
    Rng noise(stream_seed(config.seed ^ 0x5bd1e9955bd1e995ULL, i));
    auto noisy = [&](const Eigen::VectorXcd& x) {
      if (config.noise_sigma == 0.0) return x;
      Eigen::VectorXcd out = x;
      for (Eigen::Index k = 0; k < out.size(); ++k) {
        const double re = noise.normal(), im = noise.normal();
        out(k) *= Complex(1.0 + config.noise_sigma * re, config.noise_sigma * im);
      }
      return out;
    };
    float* dst = ds.data.data() + i * ds.timesteps * ds.features;
    Eigen::RowVectorXd pre_row, fault_row;
    if (config.noise_sigma == 0.0) {
      pre_row = state_features(*rec.index, rec.v_pre, rec.i_pre, ds.layout);
      fault_row = state_features(*rec.index, rec.v_fault, rec.i_fault, ds.layout);
    }
    for (std::size_t t = 0; t < ds.timesteps; ++t) {
      const bool during = t >= config.timesteps_pre;
      Eigen::RowVectorXd row;
      if (config.noise_sigma == 0.0) {
        row = during ? fault_row : pre_row;
      } else {
        const Eigen::VectorXcd v = noisy(during ? rec.v_fault : rec.v_pre);
        const Eigen::VectorXcd cur = noisy(during ? rec.i_fault : rec.i_pre);
        row = state_features(*rec.index, v, cur, ds.layout);
      }
      for (std::size_t f = 0; f < ds.features; ++f)
        dst[t * ds.features + f] = static_cast<float>(row(static_cast<Eigen::Index>(f)));
    }
    const auto loc = std::lower_bound(ds.location_names.begin(), ds.location_names.end(), spec.line);
    ds.location[i] = static_cast<std::uint16_t>(loc - ds.location_names.begin());
    ds.type[i] = static_cast<std::uint16_t>(fault_type_index(spec.kind));
    ds.specs[i] = spec;
  });
  return ds;
}

}  // namespace pmuopt
