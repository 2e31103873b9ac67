#include "pmuopt/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pmuopt/error.hpp"

namespace pmuopt {

namespace {

const Complex kA = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
const Complex kA2 = kA * kA;

void put_sequence(Eigen::RowVectorXd& row, std::size_t offset, const SequenceTriple& s) {
  const auto o = static_cast<Eigen::Index>(offset);
  row(o + 0) = s.zero.real();
  row(o + 1) = s.zero.imag();
  row(o + 2) = s.positive.real();
  row(o + 3) = s.positive.imag();
  row(o + 4) = s.negative.real();
  row(o + 5) = s.negative.imag();
}

}  // namespace

SequenceTriple to_sequence_components(Complex va, Complex vb, Complex vc) {
  return {(va + vb + vc) / 3.0, (va + kA * vb + kA2 * vc) / 3.0, (va + kA2 * vb + kA * vc) / 3.0};
}

std::array<Complex, 3> from_sequence_components(const SequenceTriple& s) {
  return {s.zero + s.positive + s.negative, s.zero + kA2 * s.positive + kA * s.negative,
          s.zero + kA * s.positive + kA2 * s.negative};
}

FeatureLayout::FeatureLayout(std::vector<std::string> buses) {
  if (buses.empty()) throw ValidationError("feature layout needs at least the substation");
  std::size_t offset = 0;
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (find(buses[i])) throw ValidationError("duplicate bus " + buses[i] + " in feature layout");
    const std::size_t w = i == 0 ? kSubstationWidth : kBusWidth;
    blocks_.push_back({std::move(buses[i]), offset, w});
    offset += w;
  }
  width_ = offset;
}

std::vector<std::string> FeatureLayout::buses() const {
  std::vector<std::string> out;
  out.reserve(blocks_.size());
  for (const auto& b : blocks_) out.push_back(b.bus);
  return out;
}

std::optional<std::size_t> FeatureLayout::find(std::string_view bus) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].bus == bus) return i;
  return std::nullopt;
}

const BusBlock& FeatureLayout::block(std::string_view bus) const {
  auto i = find(bus);
  if (!i) throw ValidationError("bus " + std::string(bus) + " is not in the feature layout");
  return blocks_[*i];
}

std::vector<std::size_t> FeatureLayout::columns_for(std::span<const std::string> buses) const {
  std::vector<std::size_t> cols;
  for (const auto& bus : buses) {
    const BusBlock& b = block(bus);
    for (std::size_t c = 0; c < b.width; ++c) cols.push_back(b.offset + c);
  }
  return cols;
}

std::vector<std::string> FeatureLayout::column_names() const {
  std::vector<std::string> out;
  out.reserve(width_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    for (int k = 0; k < 3; ++k)
      for (const char* part : {"re", "im"}) out.push_back(blocks_[i].bus + "_dV" + std::to_string(k) + "_" + part);
    if (i == 0)
      for (int k = 0; k < 3; ++k)
        for (const char* part : {"re", "im"}) out.push_back("sub_dI" + std::to_string(k) + "_" + part);
  }
  return out;
}

FeatureMatrix FeatureMatrix::select(std::span<const std::string> buses) const {
  const auto cols = layout.columns_for(buses);
  FeatureMatrix out;
  out.x.resize(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.x.col(static_cast<Eigen::Index>(c)) = x.col(static_cast<Eigen::Index>(cols[c]));
  // The selected substation keeps its 12-column block, so the layout is rebuilt in place.
  std::vector<std::string> names(buses.begin(), buses.end());
  if (names.empty() || names.front() != layout.substation())
    throw ValidationError("feature selection must start with the substation " + layout.substation());
  out.layout = FeatureLayout(std::move(names));
  out.labels = labels;
  return out;
}

FeatureLayout full_layout(const NodeIndex& index, const std::string& substation) {
  std::vector<std::string> buses{substation};
  for (const auto& b : index.buses())
    if (b != substation) buses.push_back(b);
  return FeatureLayout(std::move(buses));
}

Eigen::RowVectorXd state_features(const NodeIndex& index, const Eigen::VectorXcd& v,
                                  const Eigen::VectorXcd& i_substation, const FeatureLayout& layout) {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(layout.width()));
  for (std::size_t bi = 0; bi < layout.blocks().size(); ++bi) {
    const BusBlock& blk = layout.blocks()[bi];
    const PhaseSet phases = index.phases_of(blk.bus);
    std::array<Complex, 3> abc{};
    std::array<Complex, 3> iabc{};
    const auto rows = index.rows_of(blk.bus);
    int k = 0;
    for (Phase p : phases.phases()) {
      abc[static_cast<std::size_t>(p)] = v(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(k)]));
      if (bi == 0) iabc[static_cast<std::size_t>(p)] = i_substation(k);
      ++k;
    }
    put_sequence(row, blk.offset, to_sequence_components(abc[0], abc[1], abc[2]));
    if (bi == 0) put_sequence(row, blk.offset + kBusWidth, to_sequence_components(iabc[0], iabc[1], iabc[2]));
  }
  return row;
}

Eigen::RowVectorXd delta_features(const PhasorRecord& record, const FeatureLayout& layout) {
  if (!record.index) throw ValidationError("phasor record has no node index");
  if (layout.substation() != record.substation)
    throw ValidationError("feature layout must start with the substation " + record.substation);
  for (const auto& blk : layout.blocks())
    if (record.index->rows_of(blk.bus).empty())
      throw ValidationError("bus " + blk.bus + " is absent from the phasor record");
  // The sequence transform is linear, so delta of features equals features of the delta.
  const Eigen::VectorXcd dv = record.v_pre - record.v_fault;
  const Eigen::VectorXcd di = record.i_pre - record.i_fault;
  return state_features(*record.index, dv, di, layout);
}

Eigen::RowVectorXd delta_features(const PhasorRecord& record, std::span<const std::string> buses) {
  return delta_features(record, FeatureLayout(std::vector<std::string>(buses.begin(), buses.end())));
}

FeatureMatrix build_feature_matrix(std::span<const PhasorRecord> records, const FeatureLayout& layout) {
  FeatureMatrix fm;
  fm.layout = layout;
  fm.x.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(layout.width()));
  fm.labels.reserve(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    fm.x.row(static_cast<Eigen::Index>(r)) = delta_features(records[r], layout);
    fm.labels.push_back({records[r].spec.line, records[r].spec.kind});
  }
  return fm;
}

RowMatrix normalize_columns(const RowMatrix& x) {
  RowMatrix out = x;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const double norm = out.col(c).norm();
    if (norm > 0.0) out.col(c) /= norm;
  }
  return out;
}

FeatureMatrix normalize_columns(const FeatureMatrix& x) {
  FeatureMatrix out = x;
  out.x = normalize_columns(x.x);
  return out;
}

SequenceMagnitudeBlocks sequence_magnitude_blocks(const FeatureMatrix& normalized, std::span<const std::string> buses) {
  const Eigen::Index n = normalized.x.rows();
  const auto q = static_cast<Eigen::Index>(buses.size());
  SequenceMagnitudeBlocks out;
  out.x0.resize(n, q);
  out.x1.resize(n, q);
  out.x2.resize(n, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    const auto base = static_cast<Eigen::Index>(normalized.layout.block(buses[static_cast<std::size_t>(i)]).offset);
    Eigen::MatrixXd* targets[3] = {&out.x0, &out.x1, &out.x2};
    for (Eigen::Index k = 0; k < 3; ++k) {
      const auto re = normalized.x.col(base + 2 * k);
      const auto im = normalized.x.col(base + 2 * k + 1);
      targets[k]->col(i) = (re.array().square() + im.array().square()).sqrt().matrix();
    }
  }
  out.z.resize(3 * n, q);
  out.z << out.x0, out.x1, out.x2;
  return out;
}

}  // namespace pmuopt
