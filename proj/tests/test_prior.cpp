#include <doctest.h>

#include <mothernet/prior.hpp>

#include <algorithm>
#include <numeric>
#include <set>
#include <vector>

using namespace mothernet;

namespace {

// Counts label changes when rows are ordered by the (single) feature.
int sorted_transitions(const TabularDataset& ds) {
  std::vector<int> order(ds.rows());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return ds.X(a, 0) < ds.X(b, 0); });
  int transitions = 0;
  for (size_t i = 1; i < order.size(); ++i) {
    if (ds.y[order[i]] != ds.y[order[i - 1]]) ++transitions;
  }
  return transitions;
}

// Best single-feature threshold classifier, brute force over all split points
// and both polarities.
double stump_accuracy(const TabularDataset& ds) {
  const int n = static_cast<int>(ds.rows());
  double best = 0;
  for (int j = 0; j < ds.cols(); ++j) {
    for (float thresh : {0.5f}) {  // boolean features: the only useful cut
      for (int pol = 0; pol < 2; ++pol) {
        int hits = 0;
        for (int i = 0; i < n; ++i) {
          const int pred = (ds.X(i, j) > thresh) == (pol == 1) ? 1 : 0;
          if (pred == ds.y[i]) ++hits;
        }
        best = std::max(best, static_cast<double>(hits) / n);
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("step labels flip at each cutoff") {
  // cutoffs {0.25, 0.75}: class 0 below 0.25, 1 between, 0 above
  std::vector<float> x{0.1f, 0.3f, 0.8f, 0.2f, 0.9f};
  std::vector<int32_t> y = step_labels(x, {0.25f, 0.75f});
  CHECK(y == std::vector<int32_t>{0, 1, 0, 0, 0});
  CHECK(step_labels({0.5f}, {}) == std::vector<int32_t>{0});  // no cutoffs: all one class
}

TEST_CASE("step datasets: exactly n_steps-1 transitions in sorted order") {
  Rng rng(101);
  for (int n_steps = 1; n_steps <= 20; ++n_steps) {
    TabularDataset ds = gen_step_dataset(n_steps, 200, rng);
    CHECK(ds.cols() == 1);
    CHECK(ds.rows() == 200);
    CHECK(sorted_transitions(ds) == n_steps - 1);
    const int c = *std::max_element(ds.y.begin(), ds.y.end()) + 1;
    CHECK(c <= 2);
    CHECK(ds.n_classes == 2);  // binary family even when one step realizes a single class
  }
}

TEST_CASE("step datasets: transition count holds across seeds") {
  for (uint64_t seed : {7ull, 99ull, 12345ull}) {
    Rng rng(seed);
    for (int n_steps : {2, 5, 13, 20}) {
      TabularDataset ds = gen_step_dataset(n_steps, 128, rng);
      CHECK(sorted_transitions(ds) == n_steps - 1);
    }
  }
}

TEST_CASE("boolean datasets: full cube, positive fraction at least one third") {
  for (int rank = 1; rank <= 10; ++rank) {
    for (uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed * 31 + rank);
      TabularDataset ds = gen_boolean_dataset(rank, rng);
      REQUIRE(ds.rows() == 1024);
      REQUIRE(ds.cols() == 10);
      const int positives = std::accumulate(ds.y.begin(), ds.y.end(), 0);
      CHECK(positives * 3 >= 1024);
    }
  }
}

TEST_CASE("boolean datasets: labels match the reported formula") {
  Rng rng(55);
  for (int rank : {1, 3, 7}) {
    BooleanFormula formula;
    TabularDataset ds = gen_boolean_dataset(rank, rng, &formula);
    for (const auto& term : formula.terms) {
      CHECK(term.features.size() == static_cast<size_t>(rank));
      std::set<int> uniq(term.features.begin(), term.features.end());
      CHECK(uniq.size() == term.features.size());  // distinct features per term
    }
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
      std::vector<float> row(10);
      for (int j = 0; j < 10; ++j) row[j] = ds.X(i, j);
      CHECK(static_cast<int32_t>(formula.eval(row.data())) == ds.y[i]);
    }
  }
}

TEST_CASE("rank-1 boolean datasets are a single-feature stump") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(1000 + seed);
    TabularDataset ds = gen_boolean_dataset(1, rng);
    CHECK(stump_accuracy(ds) == 1.0);
  }
}

TEST_CASE("teacher prior: shapes, splits and class coverage") {
  PriorConfig cfg;
  cfg.max_features = 6;
  cfg.max_classes = 5;
  cfg.max_rows = 64;
  Rng rng(2024);
  std::set<int> seen_classes;
  std::set<Eigen::Index> seen_dims;
  for (int t = 0; t < 500; ++t) {
    SyntheticTask task;
    try {
      task = sample_task(cfg, rng);
    } catch (const DegenerateTaskError&) {
      continue;
    }
    task.train.validate();
    task.test.validate();
    CHECK(task.train.cols() == task.test.cols());
    CHECK(task.train.n_classes == task.test.n_classes);
    // 50/50 split, off by at most one row
    CHECK(std::abs(task.train.rows() - task.test.rows()) <= 1);
    CHECK(task.train.rows() + task.test.rows() >= 32);
    CHECK(task.train.rows() + task.test.rows() <= 64);
    CHECK(task.train.cols() >= 1);
    CHECK(task.train.cols() <= 6);
    // every class present in the training half
    std::set<int32_t> present(task.train.y.begin(), task.train.y.end());
    CHECK(static_cast<int>(present.size()) == task.train.n_classes);
    seen_classes.insert(task.train.n_classes);
    seen_dims.insert(task.train.cols());
  }
  // the sampler explores the whole configured range
  for (int c = 2; c <= 5; ++c) CHECK(seen_classes.count(c) == 1);
  for (Eigen::Index d = 1; d <= 6; ++d) CHECK(seen_dims.count(d) == 1);
}

TEST_CASE("teacher prior: constant teacher degenerates after resampling") {
  PriorConfig cfg;
  cfg.max_features = 4;
  cfg.max_classes = 4;
  cfg.max_rows = 40;
  cfg.noise_scale = 0.0f;
  Rng rng(3);
  auto constant_teacher = [](int d, int c, Rng&) {
    TeacherMlp t;
    t.w1 = MatrixF::Zero(8, d);
    t.b1 = VectorF::Zero(8);
    t.w2 = MatrixF::Zero(c, 8);
    t.b2 = VectorF::Zero(c);
    t.b2(0) = 10.0f;  // always class 0
    return t;
  };
  CHECK_THROWS_AS(sample_task(cfg, rng, constant_teacher), DegenerateTaskError);
}

TEST_CASE("teacher prior: reproducible under a fixed seed") {
  PriorConfig cfg;
  Rng a(77), b(77);
  SyntheticTask ta = sample_task(cfg, a);
  SyntheticTask tb = sample_task(cfg, b);
  CHECK(ta.train.X == tb.train.X);
  CHECK(ta.train.y == tb.train.y);
  CHECK(ta.test.X == tb.test.X);
  CHECK(ta.test.y == tb.test.y);
}

TEST_CASE("blob generator: balanced classes, requested shape") {
  Rng rng(8);
  TabularDataset ds = gen_blob_dataset(90, 3, 3, 2.0f, 0.3f, rng);
  CHECK(ds.rows() == 90);
  CHECK(ds.cols() == 3);
  CHECK(ds.n_classes == 3);
  int counts[3] = {0, 0, 0};
  for (int32_t v : ds.y) counts[v]++;
  CHECK(counts[0] == 30);
  CHECK(counts[1] == 30);
  CHECK(counts[2] == 30);
  // shuffled: the first 30 rows are not all one class
  std::set<int32_t> head(ds.y.begin(), ds.y.begin() + 30);
  CHECK(head.size() > 1);
}

TEST_CASE("blob generator: tight clusters are linearly separated") {
  Rng rng(9);
  // huge center spread, tiny noise: nearest-center labeling is exact
  TabularDataset ds = gen_blob_dataset(60, 2, 2, 10.0f, 0.01f, rng);
  MatrixF centers = MatrixF::Zero(2, 2);
  int counts[2] = {0, 0};
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    centers.row(ds.y[i]) += ds.X.row(i);
    counts[ds.y[i]]++;
  }
  centers.row(0) /= static_cast<float>(counts[0]);
  centers.row(1) /= static_cast<float>(counts[1]);
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    const float d0 = (ds.X.row(i) - centers.row(0)).squaredNorm();
    const float d1 = (ds.X.row(i) - centers.row(1)).squaredNorm();
    CHECK((d0 < d1 ? 0 : 1) == ds.y[i]);
  }
}

TEST_CASE("prior config validation") {
  PriorConfig bad;
  bad.max_classes = 11;
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  bad = PriorConfig{};
  bad.max_features = 0;
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  bad = PriorConfig{};
  bad.max_rows = 16;  // below the minimum draw of 32
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  bad = PriorConfig{};
  bad.noise_scale = -1.0f;
  CHECK_THROWS_AS(bad.validate(), ShapeError);
}
