#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "pmuopt/error.hpp"
#include "pmuopt/svm.hpp"
#include "test_support.hpp"

using namespace pmuopt;
using Catch::Approx;

namespace {

struct Binary {
  RowMatrix x;
  std::vector<int> y;
};

// Two overlapping Gaussian clouds; both classes always present.
Binary random_binary(Rng& rng, std::size_t n, std::size_t d, double shift) {
  Binary b;
  b.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i % 2 == 0 ? 1 : -1;
    b.y.push_back(label);
    for (std::size_t k = 0; k < d; ++k)
      b.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rng.normal() + label * shift;
  }
  return b;
}

std::span<const double> row(const RowMatrix& x, Eigen::Index i) {
  return {x.data() + i * x.cols(), static_cast<std::size_t>(x.cols())};
}

DualSolution dual(const Binary& b, const SvmConfig& cfg) {
  std::vector<double> y(b.y.begin(), b.y.end());
  KernelCache cache(b.y.size(), cfg.cache_entries, rbf_rows(b.x, cfg.gamma));
  return solve_dual(cache, y, cfg);
}

std::vector<int> blob_labels(std::size_t per, std::size_t k) {
  std::vector<int> labels;
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t i = 0; i < per; ++i) labels.push_back(static_cast<int>(c));
  return labels;
}

}  // namespace

TEST_CASE("rbf kernel values") {
  const std::vector<double> o{0.0, 0.0}, p{1.0, 1.0}, q{1.0};
  CHECK(rbf_kernel(o, p, 0.5) == Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(rbf_kernel(p, p, 7.0) == 1.0);
  double prev = 1.0;
  for (double g : {0.1, 1.0, 10.0, 100.0}) {
    const double k = rbf_kernel(o, p, g);
    CHECK(k < prev);
    CHECK(k > 0.0);
    prev = k;
  }
  CHECK_THROWS_AS(rbf_kernel(o, q, 1.0), ValidationError);
}

TEST_CASE("gram matrix matches pairwise evaluation") {
  Rng rng(4);
  const RowMatrix x = testsupport::random_matrix(rng, 30, 5);
  const Eigen::MatrixXd k = rbf_gram(x, 0.3);
  const Eigen::MatrixXd expect = oracle::rbf_gram(x, 0.3);
  CHECK((k - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("two separable points") {
  RowMatrix x(2, 1);
  x << 0.0, 1.0;
  const std::vector<int> y{-1, 1};
  SvmConfig cfg;
  cfg.c = 10.0;
  cfg.gamma = 1.0;
  const BinarySvmModel m = train_binary(x, y, cfg);
  // Symmetric pair: alpha = 1 / (1 - k), b = 0, f(x_i) = y_i.
  const double k = std::exp(-1.0);
  REQUIRE(m.alphas.size() == 2);
  CHECK(m.alphas[0] == Approx(1.0 / (1.0 - k)).epsilon(1e-6));
  CHECK(m.bias == Approx(0.0).margin(1e-6));
  double prev = -1e9;
  for (int s = 0; s <= 10; ++s) {
    const std::vector<double> probe{s / 10.0};
    const double f = decision_value(m, probe);
    CHECK(f > prev);
    prev = f;
  }
  CHECK(decision_value(m, row(x, 0)) < 0.0);
  CHECK(decision_value(m, row(x, 1)) > 0.0);
}

TEST_CASE("xor is learned exactly") {
  RowMatrix x(4, 2);
  x << 0, 0, 1, 1, 0, 1, 1, 0;
  const std::vector<int> y{1, 1, -1, -1};
  SvmConfig cfg;
  cfg.c = 1000.0;
  cfg.gamma = 1.0;
  const BinarySvmModel m = train_binary(x, y, cfg);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(decision_value(m, row(x, i)) * y[static_cast<std::size_t>(i)] > 0.0);

  Eigen::VectorXd yv(4);
  yv << 1, 1, -1, -1;
  const auto ref = oracle::solve_dual_qp(oracle::rbf_gram(x, 1.0), yv, 1000.0);
  CHECK(m.objective == Approx(ref.objective).epsilon(1e-4));
}

TEST_CASE("SMO agrees with a dense QP oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t n = 20 + 5 * static_cast<std::size_t>(trial);
    const Binary b = random_binary(rng, n, 3, 0.8);
    SvmConfig cfg;
    cfg.c = trial % 2 == 0 ? 1.0 : 10.0;
    cfg.gamma = 0.5;
    const DualSolution sol = dual(b, cfg);
    REQUIRE(sol.converged);

    const Eigen::MatrixXd k = oracle::rbf_gram(b.x, cfg.gamma);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = b.y[i];
    const auto ref = oracle::solve_dual_qp(k, y, cfg.c);
    CHECK(std::abs(sol.objective - ref.objective) <= 1e-4 * std::abs(ref.objective));

    const Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(sol.alpha.data(), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
      const double f = oracle::decision(k, a, y, sol.bias, i);
      const double g = oracle::decision(k, ref.alpha, y, ref.bias, i);
      CHECK(std::abs(f - g) < 1e-3);
    }
  }
}

TEST_CASE("solutions satisfy the KKT conditions and the equality constraint") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 30 + 10 * static_cast<std::size_t>(trial);
    const Binary b = random_binary(rng, n, 4, 0.5);
    SvmConfig cfg;
    cfg.c = 5.0;
    cfg.gamma = 0.25;
    cfg.shrinking = trial % 2 == 0;
    const DualSolution sol = dual(b, cfg);
    REQUIRE(sol.converged);
    const Eigen::MatrixXd k = oracle::rbf_gram(b.x, cfg.gamma);
    double balance = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      balance += sol.alpha[i] * b.y[i];
      CHECK(sol.alpha[i] >= 0.0);
      CHECK(sol.alpha[i] <= cfg.c);
      double f = sol.bias;
      for (std::size_t j = 0; j < n; ++j)
        f += sol.alpha[j] * b.y[j] * k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const double margin = b.y[i] * f;
      const double tol = cfg.tolerance;
      if (sol.alpha[i] <= 0.0) {
        CHECK(margin >= 1.0 - tol);
      } else if (sol.alpha[i] >= cfg.c) {
        CHECK(margin <= 1.0 + tol);
      } else {
        CHECK(std::abs(margin - 1.0) <= tol);
      }
    }
    CHECK(std::abs(balance) < 1e-6);
  }
}

TEST_CASE("reported objective equals a re-summation of the dual") {
  Rng rng(6);
  const Binary b = random_binary(rng, 50, 2, 0.7);
  SvmConfig cfg;
  cfg.c = 3.0;
  cfg.gamma = 1.0;
  const DualSolution sol = dual(b, cfg);
  const Eigen::MatrixXd k = oracle::rbf_gram(b.x, cfg.gamma);
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    lin += sol.alpha[i];
    for (std::size_t j = 0; j < 50; ++j)
      quad += sol.alpha[i] * sol.alpha[j] * b.y[i] * b.y[j] * k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  CHECK(sol.objective == Approx(lin - 0.5 * quad).epsilon(1e-10));
}

TEST_CASE("working-set rules and shrinking reach the same optimum") {
  Rng rng(7);
  for (int trial = 0; trial < 4; ++trial) {
    const Binary b = random_binary(rng, 120, 3, 0.4);
    SvmConfig base;
    base.c = 20.0;
    base.gamma = 0.5;
    std::vector<double> objectives;
    for (WorkingSet ws : {WorkingSet::MaxViolatingPair, WorkingSet::SecondOrder})
      for (bool shrink : {false, true}) {
        SvmConfig cfg = base;
        cfg.selection = ws;
        cfg.shrinking = shrink;
        const DualSolution sol = dual(b, cfg);
        CHECK(sol.converged);
        objectives.push_back(sol.objective);
      }
    for (double o : objectives) CHECK(o == Approx(objectives.front()).epsilon(1e-4));
  }
}

TEST_CASE("iteration budget is reported") {
  Rng rng(8);
  const Binary b = random_binary(rng, 80, 2, 0.1);
  SvmConfig cfg;
  cfg.c = 100.0;
  cfg.max_iterations = 3;
  const DualSolution sol = dual(b, cfg);
  CHECK_FALSE(sol.converged);
  CHECK(sol.iterations == 3);
}

TEST_CASE("binary model stores only the support vectors") {
  Rng rng(9);
  const Binary b = random_binary(rng, 60, 3, 1.5);
  SvmConfig cfg;
  cfg.c = 2.0;
  cfg.gamma = 0.3;
  const BinarySvmModel m = train_binary(b.x, b.y, cfg);
  const DualSolution sol = dual(b, cfg);
  const auto count = std::count_if(sol.alpha.begin(), sol.alpha.end(), [](double a) { return a > kSupportThreshold; });
  CHECK(m.alphas.size() == static_cast<std::size_t>(count));
  CHECK(m.alphas.size() < 60);
  for (double a : m.alphas) CHECK(a > kSupportThreshold);

  // Re-summation over the stored vectors.
  for (int probe = 0; probe < 20; ++probe) {
    std::vector<double> p(3);
    for (double& v : p) v = 2.0 * rng.normal();
    double f = m.bias;
    for (std::size_t k = 0; k < m.alphas.size(); ++k)
      f += m.alphas[k] * m.signs[k] * rbf_kernel(row(m.support_vectors, static_cast<Eigen::Index>(k)), p, m.gamma);
    CHECK(decision_value(m, p) == Approx(f).margin(1e-6));
  }
  const std::vector<double> wrong(2, 0.0);
  CHECK_THROWS_AS(decision_value(m, wrong), ValidationError);
}

TEST_CASE("model without support vectors returns its bias") {
  BinarySvmModel m;
  m.bias = -0.25;
  const std::vector<double> p{1.0, 2.0};
  CHECK(decision_value(m, p) == -0.25);
}

TEST_CASE("binary training input checks") {
  RowMatrix x(3, 1);
  x << 0, 1, 2;
  const SvmConfig cfg;
  const std::vector<int> one_class{1, 1, 1}, bad{1, 0, -1}, short_labels{1, -1};
  CHECK_THROWS_AS(train_binary(x, one_class, cfg), ScoringError);
  CHECK_THROWS_AS(train_binary(x, bad, cfg), ValidationError);
  CHECK_THROWS_AS(train_binary(x, short_labels, cfg), ValidationError);
  RowMatrix nan = x;
  nan(1, 0) = std::nan("");
  const std::vector<int> ok{1, -1, 1};
  CHECK_THROWS_AS(train_binary(nan, ok, cfg), ScoringError);
  SvmConfig neg;
  neg.c = -1.0;
  CHECK_THROWS_AS(train_binary(x, ok, neg), ValidationError);
}

TEST_CASE("one-vs-rest with two classes follows the binary sign") {
  Rng rng(10);
  const Binary b = random_binary(rng, 40, 2, 0.6);
  std::vector<int> labels;
  for (int v : b.y) labels.push_back(v > 0 ? 1 : 0);
  SvmConfig cfg;
  cfg.c = 5.0;
  cfg.gamma = 0.5;
  const MulticlassSvmModel ovr = train_ovr(b.x, labels, cfg);
  REQUIRE(ovr.classes == std::vector<int>{0, 1});
  const BinarySvmModel bin = train_binary(b.x, b.y, cfg);
  for (int probe = 0; probe < 50; ++probe) {
    const std::vector<double> p{rng.normal(), rng.normal()};
    const double f = decision_value(bin, p);
    if (std::abs(f) < 1e-6) continue;
    CHECK(ovr.predict(p) == (f > 0 ? 1 : 0));
  }
}

TEST_CASE("three separated blobs agree with nearest centroid") {
  Rng rng(12);
  const std::vector<std::pair<double, double>> centers{{0.0, 0.0}, {4.0, 0.0}, {0.0, 4.0}};
  const std::size_t per = 30;
  const std::vector<int> labels = blob_labels(per, 3);
  RowMatrix x(static_cast<Eigen::Index>(labels.size()), 2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& c = centers[static_cast<std::size_t>(labels[i])];
    x(static_cast<Eigen::Index>(i), 0) = c.first + 0.4 * rng.normal();
    x(static_cast<Eigen::Index>(i), 1) = c.second + 0.4 * rng.normal();
  }
  SvmConfig cfg;
  cfg.c = 10.0;
  cfg.gamma = 1.0;
  const MulticlassSvmModel m = train_ovr(x, labels, cfg);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto p = row(x, static_cast<Eigen::Index>(i));
    std::size_t nearest = 0;
    double best = 1e300;
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = std::hypot(p[0] - centers[c].first, p[1] - centers[c].second);
      if (d < best) best = d, nearest = c;
    }
    CHECK(m.predict(p) == labels[i]);
    CHECK(static_cast<int>(nearest) == labels[i]);
  }
}

TEST_CASE("constant features tie every class and the lowest wins") {
  const std::vector<int> labels = blob_labels(6, 3);
  const RowMatrix x = RowMatrix::Constant(static_cast<Eigen::Index>(labels.size()), 2, 0.5);
  SvmConfig cfg;
  cfg.c = 1.0;
  cfg.gamma = 1.0;
  const MulticlassSvmModel m = train_ovr(x, labels, cfg);
  const std::vector<double> p{0.5, 0.5};
  const auto f = m.decision_values(p);
  REQUIRE(f.size() == 3);
  CHECK(f[1] == f[0]);
  CHECK(f[2] == f[0]);
  CHECK(m.predict(p) == 0);
}

TEST_CASE("argmax chooses the lowest index among ties") {
  const std::vector<double> a{1.0, 3.0, 3.0, 2.0}, b{5.0, 5.0}, c{-1.0};
  CHECK(argmax_lowest(a) == 1);
  CHECK(argmax_lowest(b) == 0);
  CHECK(argmax_lowest(c) == 0);
}

TEST_CASE("argmax is invariant under a common strictly increasing map") {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> f(6), g(6), h(6);
    for (std::size_t k = 0; k < 6; ++k) {
      f[k] = std::round(4.0 * rng.normal()) / 4.0;  // coarse grid forces ties
      g[k] = std::atan(f[k]);
      h[k] = 3.0 * f[k] * f[k] * f[k] + f[k] - 7.0;
    }
    CHECK(argmax_lowest(g) == argmax_lowest(f));
    CHECK(argmax_lowest(h) == argmax_lowest(f));
  }
}

TEST_CASE("kernel cache evicts the least recently used row") {
  std::vector<std::size_t> fills;
  KernelCache cache(4, 8, [&](std::size_t i, std::span<double> out) {
    fills.push_back(i);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<double>(10 * i + k);
  });
  REQUIRE(cache.capacity_rows() == 2);
  CHECK(cache.row(0)[3] == 3.0);
  CHECK(cache.row(1)[2] == 12.0);
  CHECK(cache.row(0)[1] == 1.0);  // hit, 0 becomes most recent
  cache.row(2);                   // evicts 1
  cache.row(0);
  cache.row(1);
  CHECK(fills == std::vector<std::size_t>{0, 1, 2, 1});
  CHECK(cache.hits() == 2);
  CHECK(cache.misses() == 4);

  KernelCache tiny(5, 1, [](std::size_t, std::span<double> out) { std::fill(out.begin(), out.end(), 1.0); });
  CHECK(tiny.capacity_rows() == 2);
}

TEST_CASE("stratified folds deal each class evenly and deterministically") {
  std::vector<int> labels;
  for (int i = 0; i < 103; ++i) labels.push_back(i % 4 == 0 ? 7 : i % 3);
  CvConfig cv;
  const auto a = assign_folds(labels, cv);
  CHECK(a == assign_folds(labels, cv));
  for (int cls : std::set<int>(labels.begin(), labels.end())) {
    std::vector<int> count(cv.folds, 0);
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) ++count[a[i]];
    CHECK(*std::max_element(count.begin(), count.end()) - *std::min_element(count.begin(), count.end()) <= 1);
  }
  CvConfig other = cv;
  other.seed = 1;
  CHECK(assign_folds(labels, other) != a);

  std::vector<int> sparse(20, 0);
  sparse[3] = sparse[9] = 1;
  CHECK_THROWS_AS(assign_folds(sparse, cv), ScoringError);
  cv.folds = 1;
  CHECK_THROWS_AS(assign_folds(labels, cv), ValidationError);
}

TEST_CASE("cross-validation on a one-feature threshold rule") {
  Rng rng(14);
  const std::size_t n = 200;
  RowMatrix x(static_cast<Eigen::Index>(n), 3);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < 3; ++k) x(static_cast<Eigen::Index>(i), k) = rng.uniform(-1.0, 1.0);
    labels[i] = static_cast<int>(i % 2);
    x(static_cast<Eigen::Index>(i), 1) = (labels[i] ? 1.0 : -1.0) * rng.uniform(0.25, 1.0);
  }
  // Stump oracle: a single threshold on feature 1 separates the classes.
  const auto col = x.col(1);
  double neg_max = -1e9, pos_min = 1e9;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = col(static_cast<Eigen::Index>(i));
    if (labels[i]) pos_min = std::min(pos_min, v);
    else neg_max = std::max(neg_max, v);
  }
  REQUIRE(neg_max < pos_min);

  SvmConfig cfg;
  cfg.c = 1000.0;
  cfg.gamma = 0.5;
  CvConfig cv;
  CHECK(cv_accuracy(x, labels, cfg, cv) == 1.0);
}

TEST_CASE("cross-validation of permuted labels is near chance") {
  Rng rng(15);
  const std::size_t n = 2000, k = 11;
  const RowMatrix x = testsupport::random_matrix(rng, static_cast<Eigen::Index>(n), 4);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % k);
  rng.shuffle(std::span<int>(labels));
  SvmConfig cfg;
  cfg.c = 1.0;
  cfg.gamma = 1.0;
  CvConfig cv;
  const double acc = cv_accuracy(x, labels, cfg, cv);
  CHECK(std::abs(acc - 1.0 / 11.0) <= 0.05);
}

TEST_CASE("cross-validation is deterministic and thread-count independent") {
  Rng rng(16);
  const RowMatrix x = testsupport::random_matrix(rng, 150, 3);
  std::vector<int> labels(150);
  for (std::size_t i = 0; i < 150; ++i) labels[i] = x(static_cast<Eigen::Index>(i), 0) + x(static_cast<Eigen::Index>(i), 2) > 0 ? 1 : (x(static_cast<Eigen::Index>(i), 1) > 0 ? 2 : 0);
  SvmConfig cfg;
  cfg.c = 10.0;
  cfg.gamma = 1.0;
  CvConfig cv;
  const double a = cv_accuracy(x, labels, cfg, cv);
  CHECK(cv_accuracy(x, labels, cfg, cv) == a);
  cv.jobs = 3;
  CHECK(cv_accuracy(x, labels, cfg, cv) == a);
  CHECK(a > 0.5);
  CHECK(a <= 1.0);
}
