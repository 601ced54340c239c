#include "mothernet/prior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mothernet {

void PriorConfig::validate() const {
  if (max_features < 1 || max_features > kMaxFeatures) {
    throw ShapeError("prior: max_features must be in [1, 100]");
  }
  if (max_classes < 2 || max_classes > kMaxClasses) {
    throw ShapeError("prior: max_classes must be in [2, 10]");
  }
  if (max_rows < 32) throw ShapeError("prior: max_rows must be at least 32");
  if (teacher_hidden < 1) throw ShapeError("prior: teacher_hidden must be positive");
  if (noise_scale < 0) throw ShapeError("prior: noise_scale must be non-negative");
}

MatrixF TeacherMlp::logits(const MatrixF& X) const {
  MatrixF h = (X * w1.transpose()).rowwise() + b1.transpose();
  h = h.array().tanh().matrix();
  return (h * w2.transpose()).rowwise() + b2.transpose();
}

TeacherMlp sample_teacher(int d, int c, int hidden, Rng& rng) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  TeacherMlp t;
  t.w1.resize(hidden, d);
  t.b1.resize(hidden);
  t.w2.resize(c, hidden);
  t.b2.resize(c);
  const float s1 = 1.0f / std::sqrt(static_cast<float>(d));
  const float s2 = 1.0f / std::sqrt(static_cast<float>(hidden));
  for (int i = 0; i < hidden; ++i) {
    for (int j = 0; j < d; ++j) t.w1(i, j) = normal(rng) * s1;
    t.b1(i) = 0.5f * normal(rng);
  }
  for (int i = 0; i < c; ++i) {
    for (int j = 0; j < hidden; ++j) t.w2(i, j) = normal(rng) * s2;
    t.b2(i) = 0.5f * normal(rng);
  }
  return t;
}

namespace {

TabularDataset make_slice(const MatrixF& X, const std::vector<int32_t>& y, Eigen::Index begin,
                          Eigen::Index count, int n_classes) {
  TabularDataset ds;
  ds.X = X.middleRows(begin, count);
  ds.y.assign(y.begin() + begin, y.begin() + begin + count);
  ds.n_classes = n_classes;
  ds.categorical_mask.assign(static_cast<size_t>(X.cols()), 0);
  ds.missing_mask = Matrix<uint8_t>::Zero(count, X.cols());
  return ds;
}

}  // namespace

SyntheticTask sample_task(const PriorConfig& cfg, Rng& rng) {
  return sample_task(cfg, rng, [&cfg](int d, int c, Rng& r) {
    return sample_teacher(d, c, cfg.teacher_hidden, r);
  });
}

SyntheticTask sample_task(const PriorConfig& cfg, Rng& rng, const TeacherFactory& teacher_factory) {
  cfg.validate();
  std::uniform_int_distribution<int> d_dist(1, cfg.max_features);
  std::uniform_int_distribution<int> c_dist(2, cfg.max_classes);
  std::uniform_int_distribution<int> n_dist(32, cfg.max_rows);
  std::normal_distribution<float> normal(0.0f, 1.0f);

  const int d = d_dist(rng);
  const int c = c_dist(rng);
  const int n = n_dist(rng);
  const Eigen::Index n_train = (n + 1) / 2;

  MatrixF X(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) X(i, j) = normal(rng);
  }

  for (int attempt = 0; attempt < 100; ++attempt) {
    const TeacherMlp teacher = teacher_factory(d, c, rng);
    MatrixF logits = teacher.logits(X);
    if (cfg.noise_scale > 0) {
      for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
          logits(i, j) += cfg.noise_scale * normal(rng);
        }
      }
    }
    std::vector<int32_t> y(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index arg = 0;
      logits.row(i).maxCoeff(&arg);
      y[static_cast<size_t>(i)] = static_cast<int32_t>(arg);
    }

    std::vector<uint8_t> seen(static_cast<size_t>(c), 0);
    for (Eigen::Index i = 0; i < n_train; ++i) seen[static_cast<size_t>(y[static_cast<size_t>(i)])] = 1;
    if (std::all_of(seen.begin(), seen.end(), [](uint8_t s) { return s != 0; })) {
      SyntheticTask task;
      task.train = make_slice(X, y, 0, n_train, c);
      task.test = make_slice(X, y, n_train, n - n_train, c);
      return task;
    }
  }
  throw DegenerateTaskError("sample_task: some class never appeared in the training half after 100 labelings (d=" +
                            std::to_string(d) + ", c=" + std::to_string(c) + ", n=" + std::to_string(n) + ")");
}

std::vector<int32_t> step_labels(const std::vector<float>& x, const std::vector<float>& cutoffs) {
  std::vector<float> sorted_cuts = cutoffs;
  std::sort(sorted_cuts.begin(), sorted_cuts.end());
  std::vector<int32_t> y(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const auto flips = std::lower_bound(sorted_cuts.begin(), sorted_cuts.end(), x[i]) -
                       sorted_cuts.begin();  // cutoffs strictly below x[i]
    y[i] = static_cast<int32_t>(flips % 2);
  }
  return y;
}

namespace {

int count_transitions(const std::vector<float>& x, const std::vector<int32_t>& y) {
  std::vector<size_t> order(x.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&x](size_t a, size_t b) { return x[a] < x[b]; });
  int transitions = 0;
  for (size_t i = 1; i < order.size(); ++i) {
    if (y[order[i]] != y[order[i - 1]]) ++transitions;
  }
  return transitions;
}

}  // namespace

TabularDataset gen_step_dataset(int n_steps, int n, Rng& rng) {
  if (n_steps < 1) throw ShapeError("gen_step_dataset: n_steps must be at least 1");
  if (n < 2) throw ShapeError("gen_step_dataset: need at least 2 samples");
  if (n < n_steps) {
    throw ShapeError("gen_step_dataset: " + std::to_string(n) + " samples cannot realize " +
                     std::to_string(n_steps - 1) + " transitions");
  }
  std::uniform_real_distribution<float> uniform(0.0f, 1.0f);
  std::vector<float> x(static_cast<size_t>(n));
  for (auto& v : x) v = uniform(rng);

  std::vector<float> cuts(static_cast<size_t>(n_steps - 1));
  std::vector<int32_t> y;
  constexpr int kMaxDraws = 10000;
  for (int attempt = 0;; ++attempt) {
    if (attempt >= kMaxDraws) {
      throw DegenerateTaskError("gen_step_dataset: could not realize the requested step count");
    }
    for (auto& cv : cuts) cv = uniform(rng);
    y = step_labels(x, cuts);
    if (count_transitions(x, y) == n_steps - 1) break;
  }

  TabularDataset ds;
  ds.X.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) ds.X(i, 0) = x[static_cast<size_t>(i)];
  ds.y = std::move(y);
  ds.n_classes = 2;
  ds.categorical_mask.assign(1, 0);
  ds.missing_mask = Matrix<uint8_t>::Zero(n, 1);
  return ds;
}

bool BooleanFormula::eval(const float* row) const {
  for (const BooleanTerm& term : terms) {
    bool sat = true;
    for (size_t k = 0; k < term.features.size(); ++k) {
      const bool bit = row[term.features[k]] != 0.0f;
      if (bit == static_cast<bool>(term.negated[k])) {
        sat = false;
        break;
      }
    }
    if (sat) return true;
  }
  return false;
}

BooleanTerm sample_boolean_term(int rank, int n_features, Rng& rng) {
  if (rank < 1 || rank > n_features) throw ShapeError("boolean term rank out of range");
  std::vector<int> pool(static_cast<size_t>(n_features));
  std::iota(pool.begin(), pool.end(), 0);
  BooleanTerm term;
  for (int k = 0; k < rank; ++k) {
    std::uniform_int_distribution<int> pick(0, n_features - 1 - k);
    const int idx = pick(rng);
    term.features.push_back(pool[static_cast<size_t>(idx)]);
    pool.erase(pool.begin() + idx);
    std::uniform_int_distribution<int> coin(0, 1);
    term.negated.push_back(static_cast<uint8_t>(coin(rng)));
  }
  return term;
}

TabularDataset gen_boolean_dataset(int rank, Rng& rng, BooleanFormula* out_formula) {
  constexpr int kBits = 10;
  constexpr int kRows = 1 << kBits;
  if (rank < 1 || rank > kBits) throw ShapeError("gen_boolean_dataset: rank must be in [1, 10]");

  MatrixF X(kRows, kBits);
  for (int i = 0; i < kRows; ++i) {
    for (int j = 0; j < kBits; ++j) X(i, j) = static_cast<float>((i >> j) & 1);
  }

  BooleanFormula formula;
  std::vector<int32_t> y(kRows, 0);
  int positives = 0;
  while (positives * 3 < kRows) {
    formula.terms.push_back(sample_boolean_term(rank, kBits, rng));
    positives = 0;
    for (int i = 0; i < kRows; ++i) {
      y[static_cast<size_t>(i)] = formula.eval(X.row(i).data()) ? 1 : 0;
      positives += y[static_cast<size_t>(i)];
    }
  }

  TabularDataset ds;
  ds.X = std::move(X);
  ds.y = std::move(y);
  ds.n_classes = 2;
  ds.categorical_mask.assign(kBits, 1);  // binary inputs are categories
  ds.missing_mask = Matrix<uint8_t>::Zero(kRows, kBits);
  if (out_formula) *out_formula = std::move(formula);
  return ds;
}

TabularDataset gen_blob_dataset(int n, int d, int c, float center_scale, float noise, Rng& rng) {
  if (n < c || c < 2 || d < 1) throw ShapeError("gen_blob_dataset: bad shape request");
  std::normal_distribution<float> normal(0.0f, 1.0f);
  MatrixF centers(c, d);
  for (int k = 0; k < c; ++k) {
    for (int j = 0; j < d; ++j) centers(k, j) = center_scale * normal(rng);
  }
  TabularDataset ds;
  ds.X.resize(n, d);
  ds.y.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int k = i % c;
    for (int j = 0; j < d; ++j) ds.X(i, j) = centers(k, j) + noise * normal(rng);
    ds.y[static_cast<size_t>(i)] = k;
  }
  // shuffle rows so contiguous slices are class-mixed
  std::vector<Eigen::Index> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  MatrixF Xs(n, d);
  std::vector<int32_t> ys(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Xs.row(i) = ds.X.row(perm[static_cast<size_t>(i)]);
    ys[static_cast<size_t>(i)] = ds.y[static_cast<size_t>(perm[static_cast<size_t>(i)])];
  }
  ds.X = std::move(Xs);
  ds.y = std::move(ys);
  ds.n_classes = c;
  ds.categorical_mask.assign(static_cast<size_t>(d), 0);
  ds.missing_mask = Matrix<uint8_t>::Zero(n, d);
  return ds;
}

}  // namespace mothernet
