#pragma once

#include <cstdint>
#include <functional>
#include <list>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "pmuopt/features.hpp"

namespace pmuopt {

/// Working-set rule for SMO. Both keep the maximal violator as i;
/// MaxViolatingPair takes the minimal violator as j, SecondOrder the j with
/// the largest guaranteed decrease of the dual objective.
enum class WorkingSet { MaxViolatingPair, SecondOrder };

struct SvmConfig {
  double c = 1500.0;
  double gamma = 500.0;
  double tolerance = 1e-3;
  std::size_t max_iterations = 0;      // 0: max(10^7, 100 n)
  std::size_t cache_entries = 1u << 24;  // kernel values held by the row cache
  WorkingSet selection = WorkingSet::SecondOrder;
  bool shrinking = true;  // drop bound multipliers that cannot enter the working set
  std::uint64_t seed = 0;

  void validate() const;
};

double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma);

/// exp(-gamma |xi - xj|^2) for every row pair, via one matrix product.
Eigen::MatrixXd rbf_gram(const RowMatrix& x, double gamma);

/// LRU cache of kernel rows. `fill(i, out)` writes K(i, 0..n-1).
/// At least two rows are always kept, so the two rows of an SMO step coexist.
class KernelCache {
 public:
  using Fill = std::function<void(std::size_t, std::span<double>)>;

  KernelCache(std::size_t n, std::size_t budget_entries, Fill fill);

  std::size_t size() const { return n_; }
  std::span<const double> row(std::size_t i);
  std::size_t capacity_rows() const { return capacity_; }
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  std::size_t n_;
  std::size_t capacity_;
  Fill fill_;
  std::list<std::size_t> lru_;  // front = most recent
  struct Slot {
    std::vector<double> values;
    std::list<std::size_t>::iterator pos;
  };
  std::unordered_map<std::size_t, Slot> slots_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// Kernel rows of an explicit data matrix.
KernelCache::Fill rbf_rows(const RowMatrix& x, double gamma);

struct DualSolution {
  std::vector<double> alpha;
  double bias = 0.0;
  double objective = 0.0;  // dual objective sum(alpha) - alpha'Q alpha / 2
  std::size_t iterations = 0;
  bool converged = false;
};

/// SMO on the soft-margin dual.
/// `y` holds +1/-1 and `kernel` rows of K (labels are applied here).
DualSolution solve_dual(KernelCache& kernel, std::span<const double> y, const SvmConfig& config);

struct BinarySvmModel {
  RowMatrix support_vectors;
  std::vector<double> alphas;
  std::vector<double> signs;
  double bias = 0.0;
  double gamma = 1.0;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;

  std::size_t dimension() const { return static_cast<std::size_t>(support_vectors.cols()); }
};

/// Multipliers at or below this are dropped from the stored model.
inline constexpr double kSupportThreshold = 1e-8;

BinarySvmModel train_binary(const RowMatrix& x, std::span<const int> y, const SvmConfig& config);
double decision_value(const BinarySvmModel& model, std::span<const double> x);

struct MulticlassSvmModel {
  std::vector<int> classes;  // ascending
  std::vector<BinarySvmModel> models;

  std::vector<double> decision_values(std::span<const double> x) const;
  int predict(std::span<const double> x) const;
};

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax_lowest(std::span<const double> values);

MulticlassSvmModel train_ovr(const RowMatrix& x, std::span<const int> labels, const SvmConfig& config);

struct CvConfig {
  std::size_t folds = 5;
  bool stratified = true;
  std::uint64_t seed = 0;
  unsigned jobs = 1;

  void validate() const;
};

/// Fold id per sample. Stratified assignment shuffles each class with a
/// seeded stream and deals members round-robin across folds.
std::vector<std::size_t> assign_folds(std::span<const int> labels, const CvConfig& config);

/// Mean held-out accuracy over the folds. All binary problems of one fold
/// share a kernel cache backed by a precomputed Gram matrix.
double cv_accuracy(const RowMatrix& x, std::span<const int> labels, const SvmConfig& svm, const CvConfig& cv);

}  // namespace pmuopt
