#include "pmuopt/placement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "pmuopt/error.hpp"
#include "pmuopt/parallel.hpp"

namespace pmuopt {

std::string_view scorer_name(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::SvmCv: return "svm_cv";
    case ScorerKind::CorrelationDiversity: return "correlation_diversity";
    case ScorerKind::AdmittanceSpectral: return "admittance_spectral";
  }
  return "unknown";
}

std::optional<ScorerKind> parse_scorer(std::string_view name) {
  if (name == "svm_cv" || name == "svm") return ScorerKind::SvmCv;
  if (name == "correlation_diversity" || name == "correlation") return ScorerKind::CorrelationDiversity;
  if (name == "admittance_spectral" || name == "admittance") return ScorerKind::AdmittanceSpectral;
  return std::nullopt;
}

std::string_view score_target_name(ScoreTarget target) {
  switch (target) {
    case ScoreTarget::Location: return "location";
    case ScoreTarget::Type: return "type";
    case ScoreTarget::Joint: return "joint";
  }
  return "unknown";
}

std::optional<ScoreTarget> parse_score_target(std::string_view name) {
  if (name == "location") return ScoreTarget::Location;
  if (name == "type") return ScoreTarget::Type;
  if (name == "joint") return ScoreTarget::Joint;
  return std::nullopt;
}

std::vector<int> target_labels(const FeatureMatrix& data, ScoreTarget target) {
  std::set<std::string> lines;
  for (const auto& l : data.labels) lines.insert(l.line);
  const std::vector<std::string> sorted(lines.begin(), lines.end());
  std::vector<int> out;
  out.reserve(data.labels.size());
  for (const auto& l : data.labels) {
    const int loc = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), l.line) - sorted.begin());
    const int type = fault_type_index(l.kind);
    switch (target) {
      case ScoreTarget::Location: out.push_back(loc); break;
      case ScoreTarget::Type: out.push_back(type); break;
      case ScoreTarget::Joint: out.push_back(loc * static_cast<int>(kAllFaultTypes.size()) + type); break;
    }
  }
  return out;
}

SvmCvScorer::SvmCvScorer(const FeatureMatrix& data, SvmConfig svm, CvConfig cv, ScoreTarget target)
    : normalized_(normalize_columns(data)), labels_(target_labels(data, target)), svm_(svm), cv_(cv) {
  svm_.validate();
  cv_.validate();
}

double SvmCvScorer::score(std::span<const std::string> buses) const {
  const auto cols = normalized_.layout.columns_for(buses);
  RowMatrix x(normalized_.x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    x.col(static_cast<Eigen::Index>(c)) = normalized_.x.col(static_cast<Eigen::Index>(cols[c]));
  return cv_accuracy(x, labels_, svm_, cv_);
}

CorrelationScorer::CorrelationScorer(const FeatureMatrix& data) : normalized_(normalize_columns(data)) {}

double CorrelationScorer::score(std::span<const std::string> buses) const {
  return correlation_diversity(normalized_, buses);
}

AdmittanceScorer::AdmittanceScorer(PositiveSequenceYbus ybus) : ybus_(std::move(ybus)) {}

double AdmittanceScorer::score(std::span<const std::string> buses) const { return -admittance_score(ybus_, buses); }

double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) throw ValidationError("pearson inputs differ in length");
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double saa = da.squaredNorm();
  const double sbb = db.squaredNorm();
  if (saa == 0.0 || sbb == 0.0) return 1.0;
  const double r = da.dot(db) / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

double correlation_diversity(const FeatureMatrix& normalized, std::span<const std::string> buses) {
  if (buses.empty()) throw ValidationError("correlation score needs at least one bus");
  const SequenceMagnitudeBlocks blocks = sequence_magnitude_blocks(normalized, buses);
  double d = 0.0;
  for (Eigen::Index i = 0; i < blocks.z.cols(); ++i)
    for (Eigen::Index j = i + 1; j < blocks.z.cols(); ++j) d += 1.0 - std::abs(pearson(blocks.z.col(i), blocks.z.col(j)));
  return d;
}

double largest_singular_value(const Eigen::MatrixXcd& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() < 200 && m.cols() < 200) {
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(m);
    return svd.singularValues()(0);
  }
  // Power iteration on M^H M from a fixed start vector.
  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(m.cols());
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) += Complex(1e-3 * static_cast<double>(k % 7), 0.0);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXcd w = m.adjoint() * (m * v);
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    if (std::abs(next - lambda) <= 1e-15 * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(lambda);
}

double admittance_score(const Eigen::MatrixXcd& y, std::span<const std::size_t> monitored) {
  const auto n = static_cast<std::size_t>(y.rows());
  if (y.cols() != y.rows()) throw ValidationError("admittance matrix must be square");
  std::vector<bool> is_mon(n, false);
  for (std::size_t i : monitored) {
    if (i >= n) throw ValidationError("monitored index out of range");
    is_mon[i] = true;
  }
  std::vector<Eigen::Index> a, u;
  for (std::size_t i = 0; i < n; ++i) (is_mon[i] ? a : u).push_back(static_cast<Eigen::Index>(i));
  if (u.empty()) return 0.0;
  if (a.empty()) throw ValidationError("admittance score needs at least one monitored bus");
  const auto na = static_cast<Eigen::Index>(a.size());
  const auto nu = static_cast<Eigen::Index>(u.size());
  Eigen::MatrixXcd yau(na, nu), yuu(nu, nu);
  for (Eigen::Index r = 0; r < na; ++r)
    for (Eigen::Index c = 0; c < nu; ++c) yau(r, c) = y(a[static_cast<std::size_t>(r)], u[static_cast<std::size_t>(c)]);
  for (Eigen::Index r = 0; r < nu; ++r)
    for (Eigen::Index c = 0; c < nu; ++c) yuu(r, c) = y(u[static_cast<std::size_t>(r)], u[static_cast<std::size_t>(c)]);
  // M = Y_au Y_uu^-1, solved as Y_uu^T M^T = Y_au^T.
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(yuu.transpose());
  if (!lu.isInvertible()) {
    std::string names;
    for (Eigen::Index i : u) names += (names.empty() ? "" : ",") + std::to_string(i);
    throw ScoringError("singular Y_uu for unmonitored rows {" + names + "}");
  }
  const Eigen::MatrixXcd m = lu.solve(yau.transpose()).transpose();
  return largest_singular_value(m);
}

double admittance_score(const PositiveSequenceYbus& ybus, std::span<const std::string> monitored) {
  std::vector<std::size_t> idx;
  idx.reserve(monitored.size());
  for (const auto& b : monitored) idx.push_back(ybus.position(b));
  try {
    return admittance_score(ybus.y, idx);
  } catch (const ScoringError&) {
    std::string names;
    for (const auto& b : ybus.buses)
      if (std::find(monitored.begin(), monitored.end(), b) == monitored.end()) names += (names.empty() ? "" : ",") + b;
    throw ScoringError("singular Y_uu for unmonitored buses {" + names + "}");
  }
}

void PlacementConfig::validate() const {
  if (budget < 1) throw ValidationError("placement budget must be at least 1");
  if (!(epsilon >= 0.0)) throw ValidationError("plateau epsilon must be non-negative");
  if (radius < 1) throw ValidationError("neighbor radius must be at least 1");
  svm.validate();
  cv.validate();
}

namespace {

// Scores every candidate set base + {p}; returns the index of the strict
// maximum in `pool`'s order (ascending ids), and its score.
std::pair<std::size_t, double> best_extension(const SubsetScorer& scorer, const std::vector<std::string>& base,
                                              const std::vector<std::string>& pool, unsigned jobs) {
  std::vector<double> scores(pool.size());
  parallel_for(pool.size(), jobs, [&](std::size_t k) {
    std::vector<std::string> q = base;
    q.push_back(pool[k]);
    scores[k] = scorer.score(q);
  });
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (scores[k] > scores[best]) best = k;
  return {best, scores[best]};
}

}  // namespace

PlacementResult fsnr(const SubsetScorer& scorer, const BusGraph& topology, const std::string& substation,
                     std::span<const std::string> candidates, const PlacementConfig& config) {
  config.validate();
  std::set<std::string> avail_set(candidates.begin(), candidates.end());
  avail_set.erase(substation);
  for (const auto& c : avail_set)
    if (config.refine && !topology.contains(c)) throw ValidationError("candidate bus " + c + " is not in the topology");

  PlacementResult res;
  std::vector<std::string> q{substation};
  std::vector<std::string> available(avail_set.begin(), avail_set.end());  // kept ascending
  double base = scorer.score(q);
  res.step_scores.push_back(base);

  if (config.budget > avail_set.size() + 1) res.budget_truncated = true;
  while (q.size() < config.budget && !available.empty()) {
    const auto [k, s_add] = best_extension(scorer, q, available, config.jobs);
    const std::string pick = available[k];
    q.push_back(pick);
    available.erase(available.begin() + static_cast<std::ptrdiff_t>(k));
    res.additions.push_back(pick);
    double current = s_add;

    if (config.refine && q.size() > 3 && current > base) {
      const std::size_t prev_pos = q.size() - 2;
      const std::string p_prev = q[prev_pos];
      std::vector<std::string> pool;
      for (const auto& v : topology.neighbors(p_prev, config.radius))
        if (std::binary_search(available.begin(), available.end(), v)) pool.push_back(v);
      std::sort(pool.begin(), pool.end());
      if (!pool.empty()) {
        std::vector<double> scores(pool.size());
        parallel_for(pool.size(), config.jobs, [&](std::size_t i) {
          std::vector<std::string> trial = q;
          trial[prev_pos] = pool[i];
          scores[i] = scorer.score(trial);
        });
        std::size_t best = 0;
        for (std::size_t i = 1; i < scores.size(); ++i)
          if (scores[i] > scores[best]) best = i;
        if (scores[best] > current) {
          const std::string& v = pool[best];
          res.refinements.push_back({q.size(), p_prev, v, current, scores[best]});
          q[prev_pos] = v;
          available.erase(std::lower_bound(available.begin(), available.end(), v));
          available.insert(std::lower_bound(available.begin(), available.end(), p_prev), p_prev);
          current = scores[best];
        }
      }
    }
    res.step_scores.push_back(current);
    base = current;
    if (config.on_step) config.on_step(q.size(), pick, current);
  }

  res.selected = q;
  double best = -std::numeric_limits<double>::infinity();
  for (double s : res.step_scores) {
    best = std::max(best, s);
    res.trajectory.push_back(best);
  }
  res.recommended_count = recommend_count(res.trajectory, config.epsilon);
  return res;
}

PlacementResult forward_select(const SubsetScorer& scorer, const BusGraph& topology, const std::string& substation,
                               std::span<const std::string> candidates, const PlacementConfig& config) {
  PlacementConfig c = config;
  c.refine = false;
  return fsnr(scorer, topology, substation, candidates, c);
}

std::vector<std::string> replay(const std::string& substation, const PlacementResult& result) {
  std::vector<std::string> q{substation};
  std::size_t r = 0;
  for (const auto& a : result.additions) {
    q.push_back(a);
    while (r < result.refinements.size() && result.refinements[r].step == q.size()) {
      auto it = std::find(q.begin(), q.end(), result.refinements[r].replaced);
      if (it == q.end()) throw ValidationError("refinement log names a bus not in the set");
      *it = result.refinements[r].replacement;
      ++r;
    }
  }
  return q;
}

std::size_t recommend_count(std::span<const double> trajectory, double epsilon) {
  if (trajectory.empty()) throw ValidationError("empty trajectory");
  const double top = *std::max_element(trajectory.begin(), trajectory.end());
  for (std::size_t k = 0; k < trajectory.size(); ++k)
    if (trajectory[k] >= top - epsilon) return k + 1;
  return trajectory.size();
}

AdmittancePlacement greedy_admittance_placement(const PositiveSequenceYbus& ybus, const std::string& substation,
                                                std::size_t m) {
  if (m < 1) throw ValidationError("placement budget must be at least 1");
  std::vector<std::string> q{substation};
  AdmittancePlacement out;
  out.scores.push_back(admittance_score(ybus, q));
  std::vector<std::string> pool;
  for (const auto& b : ybus.buses)
    if (b != substation) pool.push_back(b);
  while (q.size() < m && !pool.empty()) {
    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pool.size(); ++k) {
      std::vector<std::string> trial = q;
      trial.push_back(pool[k]);
      const double s = admittance_score(ybus, trial);
      // Scores within rounding of each other count as ties.
      if (k == 0 || s < best_score - 1e-12 * std::max(1.0, std::abs(best_score))) {
        best_score = s;
        best = k;
      }
    }
    q.push_back(pool[best]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
    out.scores.push_back(best_score);
  }
  out.buses = std::move(q);
  return out;
}

std::unique_ptr<SubsetScorer> make_scorer(const PlacementConfig& config, const FeatureMatrix& data,
                                          const PositiveSequenceYbus* ybus) {
  switch (config.scorer) {
    case ScorerKind::SvmCv: return std::make_unique<SvmCvScorer>(data, config.svm, config.cv, config.target);
    case ScorerKind::CorrelationDiversity: return std::make_unique<CorrelationScorer>(data);
    case ScorerKind::AdmittanceSpectral:
      if (!ybus) throw ValidationError("admittance scorer needs the feeder topology");
      return std::make_unique<AdmittanceScorer>(*ybus);
  }
  throw ValidationError("unknown scorer");
}

double score_subset(const FeatureMatrix& data, const PositiveSequenceYbus* ybus, std::span<const std::string> buses,
                    const PlacementConfig& config) {
  if (data.layout.bus_count() > 0 &&
      std::find(buses.begin(), buses.end(), data.layout.substation()) == buses.end())
    throw ValidationError("scored set must contain the substation " + data.layout.substation());
  return make_scorer(config, data, ybus)->score(buses);
}

}  // namespace pmuopt
