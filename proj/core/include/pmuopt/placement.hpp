#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pmuopt/features.hpp"
#include "pmuopt/feeder.hpp"
#include "pmuopt/network.hpp"
#include "pmuopt/svm.hpp"

namespace pmuopt {

/// Subset scorers. A random-forest scorer would be added as a fourth kind
/// with its own SubsetScorer subclass; it is not provided.
enum class ScorerKind { SvmCv, CorrelationDiversity, AdmittanceSpectral };

std::string_view scorer_name(ScorerKind kind);
/// Accepts the canonical names plus "correlation" and "admittance".
std::optional<ScorerKind> parse_scorer(std::string_view name);

/// Which label drives the SVM score.
enum class ScoreTarget { Location, Type, Joint };

std::string_view score_target_name(ScoreTarget target);
std::optional<ScoreTarget> parse_score_target(std::string_view name);

/// Integer class per row: location is the index into the sorted line ids,
/// type the fault type index, joint location * 11 + type.
std::vector<int> target_labels(const FeatureMatrix& data, ScoreTarget target);

/// Larger is better for every scorer. Implementations are safe to call
/// concurrently.
class SubsetScorer {
 public:
  virtual ~SubsetScorer() = default;
  virtual double score(std::span<const std::string> buses) const = 0;
  virtual ScorerKind kind() const = 0;
};

/// Cross-validated one-vs-rest RBF-SVM accuracy on Q's (column-normalized) features.
class SvmCvScorer final : public SubsetScorer {
 public:
  SvmCvScorer(const FeatureMatrix& data, SvmConfig svm, CvConfig cv, ScoreTarget target = ScoreTarget::Location);
  double score(std::span<const std::string> buses) const override;
  ScorerKind kind() const override { return ScorerKind::SvmCv; }

 private:
  FeatureMatrix normalized_;
  std::vector<int> labels_;
  SvmConfig svm_;
  CvConfig cv_;
};

class CorrelationScorer final : public SubsetScorer {
 public:
  explicit CorrelationScorer(const FeatureMatrix& data);
  double score(std::span<const std::string> buses) const override;
  ScorerKind kind() const override { return ScorerKind::CorrelationDiversity; }

 private:
  FeatureMatrix normalized_;
};

/// Negated largest singular value of Y_au Y_uu^-1.
class AdmittanceScorer final : public SubsetScorer {
 public:
  explicit AdmittanceScorer(PositiveSequenceYbus ybus);
  double score(std::span<const std::string> buses) const override;
  ScorerKind kind() const override { return ScorerKind::AdmittanceSpectral; }

 private:
  PositiveSequenceYbus ybus_;
};

/// Pearson correlation; a zero-variance input gives 1.
double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

/// Sum over bus pairs of 1 - |rho| between stacked sequence-magnitude columns.
/// `normalized` must already be column-normalized.
double correlation_diversity(const FeatureMatrix& normalized, std::span<const std::string> buses);

/// Largest singular value: dense SVD below 200 x 200, power iteration on M^H M above.
double largest_singular_value(const Eigen::MatrixXcd& m);

/// sigma_max(Y_au Y_uu^-1) over row/column indices `monitored`; 0 when nothing is unmonitored.
double admittance_score(const Eigen::MatrixXcd& y, std::span<const std::size_t> monitored);
double admittance_score(const PositiveSequenceYbus& ybus, std::span<const std::string> monitored);

struct PlacementConfig {
  std::size_t budget = 5;  // PMU count including the substation
  ScorerKind scorer = ScorerKind::SvmCv;
  ScoreTarget target = ScoreTarget::Location;
  SvmConfig svm;
  CvConfig cv;
  bool refine = true;
  int radius = 2;
  double epsilon = 0.0025;
  std::uint64_t seed = 0;
  unsigned jobs = 1;  // concurrent candidate evaluations
  /// Called after each iteration with |Q|, the bus added and score(Q).
  std::function<void(std::size_t, const std::string&, double)> on_step;

  void validate() const;
};

struct Refinement {
  std::size_t step = 0;  // |Q| when the swap happened
  std::string replaced;
  std::string replacement;
  double score_before = 0.0;
  double score_after = 0.0;
};

struct PlacementResult {
  std::vector<std::string> selected;   // substation first
  std::vector<std::string> additions;  // greedy picks in order, before swaps
  std::vector<double> step_scores;     // score(Q) after each iteration
  std::vector<double> trajectory;      // running best of step_scores
  std::vector<Refinement> refinements;
  std::size_t recommended_count = 1;
  bool budget_truncated = false;  // budget exceeded the candidate count
};

/// Greedy forward selection with neighborhood refinement. `candidates`
/// are the selectable buses; the substation is always kept.
PlacementResult fsnr(const SubsetScorer& scorer, const BusGraph& topology, const std::string& substation,
                     std::span<const std::string> candidates, const PlacementConfig& config);

/// fsnr with refinement off.
PlacementResult forward_select(const SubsetScorer& scorer, const BusGraph& topology, const std::string& substation,
                               std::span<const std::string> candidates, const PlacementConfig& config);

/// Rebuilds the final set from additions and the refinement log.
std::vector<std::string> replay(const std::string& substation, const PlacementResult& result);

/// Smallest count k (1-based) with trajectory[k-1] >= max - epsilon.
std::size_t recommend_count(std::span<const double> trajectory, double epsilon);

struct AdmittancePlacement {
  std::vector<std::string> buses;
  std::vector<double> scores;  // admittance score after each step
};

/// Starts at the substation and adds the bus minimizing the admittance score; ties by ascending id.
AdmittancePlacement greedy_admittance_placement(const PositiveSequenceYbus& ybus, const std::string& substation,
                                                std::size_t m);

std::unique_ptr<SubsetScorer> make_scorer(const PlacementConfig& config, const FeatureMatrix& data,
                                          const PositiveSequenceYbus* ybus);

/// One-shot score of Q with the configured scorer.
double score_subset(const FeatureMatrix& data, const PositiveSequenceYbus* ybus, std::span<const std::string> buses,
                    const PlacementConfig& config);

}  // namespace pmuopt
