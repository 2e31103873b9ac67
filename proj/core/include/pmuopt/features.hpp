#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmuopt/phasor.hpp"

namespace pmuopt {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Zero, positive and negative sequence components of a phase triple.
struct SequenceTriple {
  Complex zero;
  Complex positive;
  Complex negative;
};

SequenceTriple to_sequence_components(Complex va, Complex vb, Complex vc);
std::array<Complex, 3> from_sequence_components(const SequenceTriple& s);

/// Substation blocks are 12 wide (dV then dI), every other bus 6 wide.
inline constexpr std::size_t kSubstationWidth = 12;
inline constexpr std::size_t kBusWidth = 6;

struct BusBlock {
  std::string bus;
  std::size_t offset = 0;
  std::size_t width = 0;
};

/// Column layout of a feature matrix. The first bus is the substation.
class FeatureLayout {
 public:
  FeatureLayout() = default;
  explicit FeatureLayout(std::vector<std::string> buses);

  const std::vector<BusBlock>& blocks() const { return blocks_; }
  std::size_t width() const { return width_; }
  std::size_t bus_count() const { return blocks_.size(); }
  const std::string& substation() const { return blocks_.front().bus; }
  std::vector<std::string> buses() const;
  std::optional<std::size_t> find(std::string_view bus) const;
  const BusBlock& block(std::string_view bus) const;

  /// Column indices of `buses` in the given order.
  std::vector<std::size_t> columns_for(std::span<const std::string> buses) const;
  std::vector<std::string> column_names() const;

 private:
  std::vector<BusBlock> blocks_;
  std::size_t width_ = 0;
};

struct SampleLabel {
  std::string line;
  FaultType kind = FaultType::AG;
  bool operator==(const SampleLabel&) const = default;
};

struct FeatureMatrix {
  RowMatrix x;
  FeatureLayout layout;
  std::vector<SampleLabel> labels;

  std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
  /// Column selection of Q's blocks, Q's order, substation first.
  FeatureMatrix select(std::span<const std::string> buses) const;
};

/// Feature layout over every bus of a network: substation first, the rest ascending.
FeatureLayout full_layout(const NodeIndex& index, const std::string& substation);

/// Re/Im sequence components of one network state, per `layout`.
/// Missing phases count as zero.
Eigen::RowVectorXd state_features(const NodeIndex& index, const Eigen::VectorXcd& v,
                                  const Eigen::VectorXcd& i_substation, const FeatureLayout& layout);

/// Pre-fault minus during-fault features of a record.
Eigen::RowVectorXd delta_features(const PhasorRecord& record, const FeatureLayout& layout);
Eigen::RowVectorXd delta_features(const PhasorRecord& record, std::span<const std::string> buses);

FeatureMatrix build_feature_matrix(std::span<const PhasorRecord> records, const FeatureLayout& layout);

/// Unit l2 norm per nonzero column; all-zero columns are left as is.
RowMatrix normalize_columns(const RowMatrix& x);
FeatureMatrix normalize_columns(const FeatureMatrix& x);

struct SequenceMagnitudeBlocks {
  Eigen::MatrixXd x0, x1, x2;  // n x |Q|
  Eigen::MatrixXd z;           // 3n x |Q|, [x0; x1; x2]
};

/// Per-bus sequence magnitudes of the dV block (the substation's dI half is skipped).
SequenceMagnitudeBlocks sequence_magnitude_blocks(const FeatureMatrix& normalized, std::span<const std::string> buses);

}  // namespace pmuopt
