#include "mothernet/bench.hpp"

#include <algorithm>
#include <chrono>
#include <vector>

#include <json.hpp>

#include "mothernet/inference.hpp"

namespace mothernet {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

BenchReport bench_inference(const TransformerWeights<float>& w, const TabularDataset& train,
                            int n_rows, int batch_size, int repeats, uint64_t seed) {
  if (n_rows < 1 || batch_size < 1 || repeats < 1) {
    throw ShapeError("bench: rows, batch size and repeats must be positive");
  }
  using clock = std::chrono::steady_clock;
  BenchReport report;
  report.n_rows = n_rows;
  report.batch_size = batch_size;
  report.repeats = repeats;

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixF X(n_rows, train.X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = static_cast<float>(normal(rng));
  }

  const auto t_fit0 = clock::now();
  const ChildNetwork<float> net = icl_fit(w, train);
  report.fit_seconds = std::chrono::duration<double>(clock::now() - t_fit0).count();

  auto child_pass = [&]() {
    for (int start = 0; start < n_rows; start += batch_size) {
      const int len = std::min(batch_size, n_rows - start);
      volatile float sink = predict_proba_raw(net, X.middleRows(start, len)).sum();
      (void)sink;
    }
  };
  auto encoder_pass = [&]() {
    for (int start = 0; start < n_rows; start += batch_size) {
      const int len = std::min(batch_size, n_rows - start);
      const ChildNetwork<float> fresh = icl_fit(w, train);  // full re-encode per batch
      volatile float sink = predict_proba_raw(fresh, X.middleRows(start, len)).sum();
      (void)sink;
    }
  };

  child_pass();  // warmup, not timed
  const uint64_t passes_before = transformer_forward_count().load();
  std::vector<double> child_times;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = clock::now();
    child_pass();
    child_times.push_back(std::chrono::duration<double>(clock::now() - t0).count());
  }
  report.encoder_passes_child_path = transformer_forward_count().load() - passes_before;

  std::vector<double> encoder_times;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = clock::now();
    encoder_pass();
    encoder_times.push_back(std::chrono::duration<double>(clock::now() - t0).count());
  }

  report.child_seconds = median(child_times);
  report.encoder_path_seconds = median(encoder_times);
  report.child_rows_per_sec = n_rows / report.child_seconds;
  report.encoder_path_rows_per_sec = n_rows / report.encoder_path_seconds;
  report.speedup = report.encoder_path_seconds / report.child_seconds;
  return report;
}

std::string bench_report_json(const BenchReport& r) {
  nlohmann::json j{{"n_rows", r.n_rows},
                   {"batch_size", r.batch_size},
                   {"repeats", r.repeats},
                   {"fit_seconds", r.fit_seconds},
                   {"child_seconds", r.child_seconds},
                   {"encoder_path_seconds", r.encoder_path_seconds},
                   {"child_rows_per_sec", r.child_rows_per_sec},
                   {"encoder_path_rows_per_sec", r.encoder_path_rows_per_sec},
                   {"speedup", r.speedup},
                   {"encoder_passes_child_path", r.encoder_passes_child_path}};
  return j.dump(2);
}

}  // namespace mothernet
