#pragma once

// Placement fixtures shared by the unit and acceptance suites.

#include <atomic>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pmuopt/placement.hpp"
#include "pmuopt/random.hpp"

namespace fixtures {

using namespace pmuopt;

using SetFn = std::function<double(const std::set<std::string>&)>;

// Score from an arbitrary set function; order within Q is ignored.
class TableScorer final : public SubsetScorer {
 public:
  explicit TableScorer(SetFn f) : f_(std::move(f)) {}
  double score(std::span<const std::string> buses) const override {
    ++calls;
    return f_(std::set<std::string>(buses.begin(), buses.end()));
  }
  ScorerKind kind() const override { return ScorerKind::SvmCv; }
  mutable std::atomic<int> calls{0};

 private:
  SetFn f_;
};

inline BusGraph graph(const std::vector<std::string>& nodes, const std::vector<std::pair<std::string, std::string>>& edges) {
  return BusGraph(nodes, edges);
}

// Path s - a - b - v - c - f.
inline const std::vector<std::string> kSix{"s", "a", "b", "v", "c", "f"};
inline BusGraph six_path() { return graph(kSix, {{"s", "a"}, {"a", "b"}, {"b", "v"}, {"v", "c"}, {"c", "f"}}); }

struct SixWeights {
  std::map<std::string, double> w;
  double bonus = 0.0;
};

// Greedy order a, b, c; replacing b by v pays off once c is present.
inline SixWeights engineered(Rng& rng) {
  SixWeights s;
  s.w["s"] = 0.0;
  s.w["f"] = rng.uniform(0.0, 0.1);
  s.w["v"] = rng.uniform(0.2, 0.3);
  s.w["c"] = rng.uniform(0.4, 0.5);
  s.w["b"] = rng.uniform(0.6, 0.7);
  s.w["a"] = rng.uniform(0.8, 0.9);
  s.bonus = s.w["b"] - s.w["v"] + rng.uniform(0.05, 0.2);
  return s;
}

inline SetFn additive(const SixWeights& s) {
  return [s](const std::set<std::string>& q) {
    double t = 0.0;
    for (const auto& b : q) t += s.w.at(b);
    if (q.count("v") && q.count("c")) t += s.bonus;
    return t;
  };
}

// Labels are four lines; only `planted` carries class information.
inline FeatureMatrix planted_dataset(Rng& rng, const std::vector<std::string>& buses, const std::string& planted) {
  const int classes = 4, per = 25;
  FeatureMatrix fm;
  fm.layout = FeatureLayout(buses);
  fm.x.resize(classes * per, static_cast<Eigen::Index>(fm.layout.width()));
  Eigen::MatrixXd centers(classes, 6);
  for (int c = 0; c < classes; ++c)
    for (int k = 0; k < 6; ++k) centers(c, k) = 3.0 * rng.normal();
  const auto off = static_cast<Eigen::Index>(fm.layout.block(planted).offset);
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per; ++i) {
      const Eigen::Index r = c * per + i;
      for (Eigen::Index k = 0; k < fm.x.cols(); ++k) fm.x(r, k) = rng.normal();
      for (Eigen::Index k = 0; k < 6; ++k) fm.x(r, off + k) = centers(c, k) + 0.3 * rng.normal();
      fm.labels.push_back({"L" + std::to_string(c), FaultType::AG});
    }
  return fm;
}

inline SvmConfig small_svm() {
  SvmConfig s;
  s.c = 10.0;
  s.gamma = 5.0;
  return s;
}

}  // namespace fixtures
