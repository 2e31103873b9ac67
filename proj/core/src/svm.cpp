#include "pmuopt/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "pmuopt/error.hpp"
#include "pmuopt/parallel.hpp"
#include "pmuopt/random.hpp"

namespace pmuopt {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_finite(const RowMatrix& x) {
  if (!x.allFinite()) throw ScoringError("feature matrix contains non-finite values");
}

std::size_t iteration_budget(const SvmConfig& config, std::size_t n) {
  if (config.max_iterations > 0) return config.max_iterations;
  return std::max<std::size_t>(10'000'000, 100 * n);
}

}  // namespace

void SvmConfig::validate() const {
  if (!(c > 0.0)) throw ValidationError("svm C must be positive");
  if (!(gamma > 0.0)) throw ValidationError("svm gamma must be positive");
  if (!(tolerance > 0.0)) throw ValidationError("svm tolerance must be positive");
}

double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
  if (x.size() != y.size())
    throw ValidationError("rbf_kernel dimension mismatch: " + std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()));
  double d2 = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - y[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

Eigen::MatrixXd rbf_gram(const RowMatrix& x, double gamma) {
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Eigen::MatrixXd g = x * x.transpose();
  const Eigen::Index n = g.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d2 = std::max(0.0, sq(i) + sq(j) - 2.0 * g(i, j));
      g(i, j) = std::exp(-gamma * d2);
    }
    g(j, j) = 1.0;
  }
  return g;
}

KernelCache::KernelCache(std::size_t n, std::size_t budget_entries, Fill fill)
    : n_(n), capacity_(std::max<std::size_t>(2, n == 0 ? 2 : budget_entries / n)), fill_(std::move(fill)) {}

std::span<const double> KernelCache::row(std::size_t i) {
  auto it = slots_.find(i);
  if (it != slots_.end()) {
    ++hits_;
    lru_.splice(lru_.begin(), lru_, it->second.pos);
    return it->second.values;
  }
  ++misses_;
  std::vector<double> values;
  if (slots_.size() >= capacity_) {
    const std::size_t victim = lru_.back();
    lru_.pop_back();
    auto v = slots_.find(victim);
    values = std::move(v->second.values);
    slots_.erase(v);
  }
  values.resize(n_);
  fill_(i, values);
  lru_.push_front(i);
  auto& slot = slots_[i];
  slot.values = std::move(values);
  slot.pos = lru_.begin();
  return slot.values;
}

KernelCache::Fill rbf_rows(const RowMatrix& x, double gamma) {
  return [&x, gamma](std::size_t i, std::span<double> out) {
    Eigen::Map<Eigen::VectorXd> o(out.data(), static_cast<Eigen::Index>(out.size()));
    const auto xi = x.row(static_cast<Eigen::Index>(i));
    o = ((x.rowwise() - xi).rowwise().squaredNorm() * -gamma).array().exp().matrix();
  };
}

DualSolution solve_dual(KernelCache& kernel, std::span<const double> y, const SvmConfig& config) {
  config.validate();
  const std::size_t n = y.size();
  if (kernel.size() != n) throw ValidationError("kernel and label sizes differ");
  const double c = config.c;
  const double tol = config.tolerance;
  const std::size_t budget = iteration_budget(config, n);
  const std::size_t shrink_every = std::min<std::size_t>(n, 1000);

  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);  // Q alpha - e
  const std::vector<double> qd(n, 1.0);  // RBF diagonal

  auto upper = [&](std::size_t t) { return alpha[t] >= c; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };
  auto in_up = [&](std::size_t t) { return y[t] > 0 ? !upper(t) : !lower(t); };
  auto in_low = [&](std::size_t t) { return y[t] > 0 ? !lower(t) : !upper(t); };
  std::vector<char> up_set(n), low_set(n);
  auto refresh = [&](std::size_t t) {
    up_set[t] = in_up(t);
    low_set[t] = in_low(t);
  };
  for (std::size_t t = 0; t < n; ++t) refresh(t);
  const double* yp = y.data();
  double* gp = grad.data();
  const char* upp = up_set.data();
  const char* lowp = low_set.data();

  std::vector<std::size_t> active(n);
  std::iota(active.begin(), active.end(), 0);
  std::vector<char> is_active(n, 1);

  // Gradient of the inactive indices from the current multipliers.
  auto reconstruct = [&] {
    if (active.size() == n) return;
    for (std::size_t t = 0; t < n; ++t)
      if (!is_active[t]) grad[t] = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (alpha[j] <= 0.0) continue;
      const auto kj = kernel.row(j);
      const double aj = alpha[j] * y[j];
      for (std::size_t t = 0; t < n; ++t)
        if (!is_active[t]) grad[t] += y[t] * kj[t] * aj;
    }
    active.resize(n);
    std::iota(active.begin(), active.end(), 0);
    std::fill(is_active.begin(), is_active.end(), 1);
  };

  DualSolution sol;
  std::size_t iter = 0;
  std::size_t countdown = shrink_every;
  for (; iter < budget; ++iter) {
    double gmax = -kInf, gmin = kInf;
    std::size_t i = n, j = n;
    for (std::size_t t : active) {
      const double v = -yp[t] * gp[t];
      if (upp[t] && v > gmax) {
        gmax = v;
        i = t;
      }
      if (lowp[t] && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    if (i == n || j == n || gmax - gmin <= tol) {
      if (active.size() == n) {
        sol.converged = true;
        break;
      }
      reconstruct();
      countdown = shrink_every;
      --iter;
      continue;
    }
    if (config.shrinking && --countdown == 0) {
      countdown = shrink_every;
      std::size_t kept = 0;
      for (std::size_t t : active) {
        const double v = -yp[t] * gp[t];
        const bool up = upp[t], low = lowp[t];
        const bool drop = (up && !low && v < gmin) || (low && !up && v > gmax);
        if (drop) is_active[t] = 0;
        else active[kept++] = t;
      }
      active.resize(kept);
    }
    if (config.selection == WorkingSet::SecondOrder) {
      // Keep i; pick j in I_low maximizing the guaranteed objective decrease.
      const double* ki = kernel.row(i).data();
      double best = kInf;
      for (std::size_t t : active) {
        if (!lowp[t]) continue;
        const double b = gmax + yp[t] * gp[t];
        if (b <= 0.0) continue;
        double a = qd[i] + qd[t] - 2.0 * ki[t];
        if (a <= 0.0) a = kTau;
        const double gain = -(b * b) / a;
        if (gain < best) {
          best = gain;
          j = t;
        }
      }
    }

    const auto ki = kernel.row(i);
    const auto kj = kernel.row(j);
    const double old_i = alpha[i], old_j = alpha[j];
    if (y[i] != y[j]) {
      // With y_i != y_j the scaled Q_ij is -K_ij.
      double quad = qd[i] + qd[j] - 2.0 * ki[j];
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = qd[i] + qd[j] - 2.0 * ki[j];
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }

    const double di = (alpha[i] - old_i) * y[i];
    const double dj = (alpha[j] - old_j) * y[j];
    refresh(i);
    refresh(j);
    const double* kip = ki.data();
    const double* kjp = kj.data();
    for (std::size_t t : active) gp[t] += yp[t] * (kip[t] * di + kjp[t] * dj);
  }
  reconstruct();
  sol.iterations = iter;

  // Bias from free multipliers, else the midpoint of the feasible interval.
  double ub = kInf, lb = -kInf, sum_free = 0.0;
  std::size_t nr_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++nr_free;
      sum_free += yg;
    }
  }
  const double rho = nr_free > 0 ? sum_free / static_cast<double>(nr_free) : (ub + lb) / 2.0;
  sol.bias = -rho;

  double obj = 0.0;
  for (std::size_t t = 0; t < n; ++t) obj += alpha[t] * (1.0 - grad[t]);
  sol.objective = obj / 2.0;
  sol.alpha = std::move(alpha);
  return sol;
}

BinarySvmModel train_binary(const RowMatrix& x, std::span<const int> y, const SvmConfig& config) {
  config.validate();
  const auto n = static_cast<std::size_t>(x.rows());
  if (y.size() != n) throw ValidationError("label count does not match sample count");
  if (n < 2) throw ScoringError("binary svm needs at least two samples");
  check_finite(x);
  std::vector<double> yd(n);
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] != 1 && y[i] != -1) throw ValidationError("binary labels must be +1 or -1");
    yd[i] = y[i];
    (y[i] > 0 ? pos : neg) = true;
  }
  if (!pos || !neg) throw ScoringError("binary svm needs both classes");

  KernelCache cache(n, config.cache_entries, rbf_rows(x, config.gamma));
  const DualSolution sol = solve_dual(cache, yd, config);

  BinarySvmModel m;
  m.gamma = config.gamma;
  m.bias = sol.bias;
  m.objective = sol.objective;
  m.iterations = sol.iterations;
  m.converged = sol.converged;
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < n; ++i)
    if (sol.alpha[i] > kSupportThreshold) keep.push_back(static_cast<Eigen::Index>(i));
  m.support_vectors.resize(static_cast<Eigen::Index>(keep.size()), x.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    m.support_vectors.row(static_cast<Eigen::Index>(k)) = x.row(keep[k]);
    m.alphas.push_back(sol.alpha[static_cast<std::size_t>(keep[k])]);
    m.signs.push_back(yd[static_cast<std::size_t>(keep[k])]);
  }
  return m;
}

double decision_value(const BinarySvmModel& model, std::span<const double> x) {
  if (x.size() != model.dimension() && model.alphas.size() > 0)
    throw ValidationError("decision_value dimension mismatch: model has " + std::to_string(model.dimension()) +
                          ", probe has " + std::to_string(x.size()));
  double f = model.bias;
  const auto d = static_cast<std::size_t>(model.support_vectors.cols());
  for (std::size_t k = 0; k < model.alphas.size(); ++k) {
    const double* sv = model.support_vectors.data() + k * d;
    f += model.alphas[k] * model.signs[k] * rbf_kernel(std::span<const double>(sv, d), x, model.gamma);
  }
  return f;
}

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] > values[best]) best = k;
  return best;
}

std::vector<double> MulticlassSvmModel::decision_values(std::span<const double> x) const {
  std::vector<double> f;
  f.reserve(models.size());
  for (const auto& m : models) f.push_back(decision_value(m, x));
  return f;
}

int MulticlassSvmModel::predict(std::span<const double> x) const {
  if (classes.empty()) throw ScoringError("empty multiclass model");
  return classes[argmax_lowest(decision_values(x))];
}

namespace {

std::vector<int> class_list(std::span<const int> labels) {
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  return classes;
}

}  // namespace

MulticlassSvmModel train_ovr(const RowMatrix& x, std::span<const int> labels, const SvmConfig& config) {
  MulticlassSvmModel out;
  out.classes = class_list(labels);
  if (out.classes.size() < 2) throw ScoringError("one-vs-rest needs at least two classes");
  std::vector<int> y(labels.size());
  for (int k : out.classes) {
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == k ? 1 : -1;
    out.models.push_back(train_binary(x, y, config));
  }
  return out;
}

void CvConfig::validate() const {
  if (folds < 2) throw ValidationError("cv needs at least two folds");
}

std::vector<std::size_t> assign_folds(std::span<const int> labels, const CvConfig& config) {
  config.validate();
  const std::size_t n = labels.size();
  if (n < config.folds) throw ScoringError("fewer samples than folds");
  Rng rng(config.seed);
  std::vector<std::size_t> fold(n, 0);
  std::size_t dealer = 0;
  if (config.stratified) {
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) members[labels[i]].push_back(i);
    for (auto& [cls, idx] : members) {
      if (idx.size() < config.folds)
        throw ScoringError("class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                           " members, fewer than " + std::to_string(config.folds) + " folds");
      rng.shuffle(std::span<std::size_t>(idx));
      for (std::size_t i : idx) fold[i] = dealer++ % config.folds;
    }
  } else {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t i : idx) fold[i] = dealer++ % config.folds;
  }
  return fold;
}

double cv_accuracy(const RowMatrix& x, std::span<const int> labels, const SvmConfig& svm, const CvConfig& cv) {
  svm.validate();
  const auto n = static_cast<std::size_t>(x.rows());
  if (labels.size() != n) throw ValidationError("label count does not match sample count");
  check_finite(x);
  const std::vector<int> classes = class_list(labels);
  if (classes.size() < 2) throw ScoringError("cross-validation needs at least two classes");
  const auto fold = assign_folds(labels, cv);
  const Eigen::MatrixXd gram = rbf_gram(x, svm.gamma);

  std::vector<double> acc(cv.folds, 0.0);
  parallel_for(cv.folds, cv.jobs, [&](std::size_t f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? test : train).push_back(i);
    if (test.empty()) throw ScoringError("empty cross-validation fold");
    const std::size_t m = train.size();
    KernelCache cache(m, svm.cache_entries, [&](std::size_t r, std::span<double> out) {
      const auto col = gram.col(static_cast<Eigen::Index>(train[r]));
      for (std::size_t k = 0; k < m; ++k) out[k] = col(static_cast<Eigen::Index>(train[k]));
    });
    Eigen::MatrixXd scores(static_cast<Eigen::Index>(test.size()), static_cast<Eigen::Index>(classes.size()));
    std::vector<double> y(m);
    for (std::size_t k = 0; k < classes.size(); ++k) {
      bool pos = false, neg = false;
      for (std::size_t r = 0; r < m; ++r) {
        y[r] = labels[train[r]] == classes[k] ? 1.0 : -1.0;
        (y[r] > 0 ? pos : neg) = true;
      }
      if (!pos || !neg) throw ScoringError("training fold lacks class " + std::to_string(classes[k]));
      const DualSolution sol = solve_dual(cache, y, svm);
      std::vector<Eigen::Index> sv;
      std::vector<double> coef;
      for (std::size_t r = 0; r < m; ++r) {
        if (sol.alpha[r] <= kSupportThreshold) continue;
        sv.push_back(static_cast<Eigen::Index>(train[r]));
        coef.push_back(sol.alpha[r] * y[r]);
      }
      for (std::size_t t = 0; t < test.size(); ++t) {
        const auto col = gram.col(static_cast<Eigen::Index>(test[t]));
        double s = sol.bias;
        for (std::size_t r = 0; r < sv.size(); ++r) s += coef[r] * col(sv[r]);
        scores(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = s;
      }
    }
    std::size_t correct = 0;
    std::vector<double> row(classes.size());
    for (std::size_t t = 0; t < test.size(); ++t) {
      for (std::size_t k = 0; k < classes.size(); ++k)
        row[k] = scores(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k));
      if (classes[argmax_lowest(row)] == labels[test[t]]) ++correct;
    }
    acc[f] = static_cast<double>(correct) / static_cast<double>(test.size());
  });
  double total = 0.0;
  for (double a : acc) total += a;
  return total / static_cast<double>(cv.folds);
}

}  // namespace pmuopt
