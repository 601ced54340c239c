#include "mothernet/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <thread>

namespace mothernet {

namespace {

// Average 1-based ranks; ties share the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& values) {
  const size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

double auc_binary(const std::vector<double>& scores, const std::vector<uint8_t>& positive) {
  const size_t n = scores.size();
  size_t n_pos = 0;
  for (uint8_t p : positive) n_pos += p;
  const size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw UndefinedMetricError("AUC needs both positives and negatives");
  }
  const std::vector<double> ranks = average_ranks(scores);
  double rank_sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (positive[i]) rank_sum += ranks[i];
  }
  const double u = rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  return splitmix64(splitmix64(splitmix64(seed ^ a) ^ b) ^ c);
}

}  // namespace

double roc_auc_ovr(const MatrixF& probs, const std::vector<int32_t>& y) {
  if (static_cast<Eigen::Index>(y.size()) != probs.rows()) {
    throw ShapeError("AUC: label count mismatch");
  }
  if (probs.rows() < 2) throw UndefinedMetricError("AUC needs at least two rows");
  const int c = static_cast<int>(probs.cols());
  std::vector<int> counts(static_cast<size_t>(c), 0);
  for (int32_t label : y) {
    if (label < 0 || label >= c) throw ShapeError("AUC: label outside probability columns");
    counts[static_cast<size_t>(label)] += 1;
  }
  int present = 0;
  for (int count : counts) present += count > 0 ? 1 : 0;
  if (present < 2) {
    throw UndefinedMetricError("AUC undefined: only one class present in the labels");
  }
  double sum = 0.0;
  for (int k = 0; k < c; ++k) {
    if (counts[static_cast<size_t>(k)] == 0) continue;
    std::vector<double> scores(y.size());
    std::vector<uint8_t> positive(y.size());
    for (size_t i = 0; i < y.size(); ++i) {
      scores[i] = probs(static_cast<Eigen::Index>(i), k);
      positive[i] = y[i] == k ? 1 : 0;
    }
    sum += auc_binary(scores, positive);
  }
  return sum / present;
}

std::vector<double> normalize_scores(const std::vector<double>& scores) {
  if (scores.empty()) return {};
  const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  if (*mx == *mn) {
    std::fill(out.begin(), out.end(), 0.5);
    return out;
  }
  for (size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - *mn) / (*mx - *mn);
  return out;
}

std::vector<SplitIdx> stratified_splits(const TabularDataset& ds, int n_splits, uint64_t seed) {
  ds.validate();
  if (n_splits < 1) throw ShapeError("splits: count must be positive");
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<size_t>(ds.n_classes));
  for (size_t i = 0; i < ds.y.size(); ++i) {
    by_class[static_cast<size_t>(ds.y[i])].push_back(static_cast<Eigen::Index>(i));
  }
  for (size_t k = 0; k < by_class.size(); ++k) {
    if (!by_class[k].empty() && by_class[k].size() < 2) {
      throw StratificationError("class " + std::to_string(k) +
                                " has a single row; it cannot appear in both halves");
    }
  }
  Rng master(seed);
  std::vector<SplitIdx> splits;
  splits.reserve(static_cast<size_t>(n_splits));
  for (int s = 0; s < n_splits; ++s) {
    Rng rng(master());
    SplitIdx split;
    for (const auto& rows : by_class) {
      std::vector<Eigen::Index> shuffled = rows;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      const size_t n_train = (shuffled.size() + 1) / 2;
      for (size_t i = 0; i < shuffled.size(); ++i) {
        (i < n_train ? split.train : split.test).push_back(shuffled[i]);
      }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    splits.push_back(std::move(split));
  }
  return splits;
}

TabularDataset subset(const TabularDataset& ds, const std::vector<Eigen::Index>& rows) {
  TabularDataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), ds.X.cols());
  out.y.reserve(rows.size());
  out.categorical_mask = ds.categorical_mask;
  out.n_classes = ds.n_classes;
  out.label_names = ds.label_names;
  const bool has_missing = ds.missing_mask.size() > 0;
  if (has_missing) out.missing_mask.resize(static_cast<Eigen::Index>(rows.size()), ds.X.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    const Eigen::Index r = rows[i];
    if (r < 0 || r >= ds.X.rows()) throw ShapeError("subset: row index out of range");
    out.X.row(static_cast<Eigen::Index>(i)) = ds.X.row(r);
    out.y.push_back(ds.y[static_cast<size_t>(r)]);
    if (has_missing) out.missing_mask.row(static_cast<Eigen::Index>(i)) = ds.missing_mask.row(r);
  }
  return out;
}

EvalReport evaluate(const std::vector<std::pair<std::string, TabularDataset>>& datasets,
                    const std::vector<Algorithm>& algorithms, int n_splits, uint64_t seed,
                    int threads) {
  if (datasets.empty()) throw ShapeError("evaluate: no datasets");
  if (algorithms.empty()) throw ShapeError("evaluate: no algorithms");
  if (n_splits < 1) throw ShapeError("evaluate: split count must be positive");
  const size_t nd = datasets.size(), na = algorithms.size();

  // Splits are per dataset, independent of the algorithm list.
  std::vector<std::vector<SplitIdx>> splits(nd);
  std::vector<std::string> split_errors(nd);
  for (size_t di = 0; di < nd; ++di) {
    try {
      splits[di] = stratified_splits(datasets[di].second, n_splits, mix_seed(seed, di, 0, 0));
    } catch (const std::exception& e) {
      split_errors[di] = e.what();
    }
  }

  EvalReport report;
  for (const auto& [name, ds] : datasets) report.datasets.push_back(name);
  for (const auto& a : algorithms) report.algorithms.push_back(a.name);
  report.cells.assign(nd, std::vector<CellResult>(na));

  struct Job {
    size_t di, ai;
  };
  std::vector<Job> jobs;
  for (size_t di = 0; di < nd; ++di) {
    for (size_t ai = 0; ai < na; ++ai) jobs.push_back({di, ai});
  }

  auto run_job = [&](const Job& job) {
    CellResult& cell = report.cells[job.di][job.ai];
    if (!split_errors[job.di].empty()) {
      cell.failed = true;
      cell.error = split_errors[job.di];
      return;
    }
    const TabularDataset& ds = datasets[job.di].second;
    std::vector<double> aucs;
    try {
      for (size_t si = 0; si < splits[job.di].size(); ++si) {
        const SplitIdx& split = splits[job.di][si];
        const TabularDataset train = subset(ds, split.train);
        const TabularDataset test = subset(ds, split.test);
        const uint64_t fit_seed = mix_seed(seed, job.di + 1, job.ai + 1, si + 1);
        const auto t0 = std::chrono::steady_clock::now();
        Predictor predict = algorithms[job.ai].fit(train, fit_seed);
        const auto t1 = std::chrono::steady_clock::now();
        const MatrixF probs = predict(test.X);
        const auto t2 = std::chrono::steady_clock::now();
        cell.fit_seconds += std::chrono::duration<double>(t1 - t0).count();
        cell.predict_seconds += std::chrono::duration<double>(t2 - t1).count();
        if (probs.rows() != test.X.rows() || probs.cols() != ds.n_classes) {
          throw ShapeError("predictor returned a misshaped probability matrix");
        }
        aucs.push_back(roc_auc_ovr(probs, test.y));
      }
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
      return;
    }
    double mean = 0.0;
    for (double a : aucs) mean += a;
    mean /= static_cast<double>(aucs.size());
    double var = 0.0;
    for (double a : aucs) var += (a - mean) * (a - mean);
    var /= static_cast<double>(aucs.size());
    cell.mean_auc = mean;
    cell.std_auc = std::sqrt(var);
  };

  if (threads <= 1) {
    for (const Job& job : jobs) run_job(job);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&]() {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        run_job(jobs[i]);
      }
    };
    std::vector<std::thread> pool;
    const int n_workers = std::min<int>(threads, static_cast<int>(jobs.size()));
    pool.reserve(static_cast<size_t>(n_workers));
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Aggregate over the datasets where every algorithm produced a score.
  report.ranked.assign(nd, true);
  report.normalized.assign(nd, std::vector<double>(na, 0.0));
  report.mean_rank.assign(na, 0.0);
  report.mean_normalized.assign(na, 0.0);
  size_t n_ranked = 0;
  for (size_t di = 0; di < nd; ++di) {
    for (size_t ai = 0; ai < na; ++ai) {
      if (report.cells[di][ai].failed) report.ranked[di] = false;
    }
    if (!report.ranked[di]) continue;
    n_ranked += 1;
    std::vector<double> aucs(na);
    for (size_t ai = 0; ai < na; ++ai) aucs[ai] = report.cells[di][ai].mean_auc;
    report.normalized[di] = normalize_scores(aucs);
    std::vector<double> neg(na);
    for (size_t ai = 0; ai < na; ++ai) neg[ai] = -aucs[ai];  // rank 1 = best
    const std::vector<double> ranks = average_ranks(neg);
    for (size_t ai = 0; ai < na; ++ai) {
      report.mean_rank[ai] += ranks[ai];
      report.mean_normalized[ai] += report.normalized[di][ai];
    }
  }
  if (n_ranked > 0) {
    for (size_t ai = 0; ai < na; ++ai) {
      report.mean_rank[ai] /= static_cast<double>(n_ranked);
      report.mean_normalized[ai] /= static_cast<double>(n_ranked);
    }
  }
  return report;
}

std::string eval_report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "dataset,algorithm,mean_auc,std_auc,normalized_auc,in_ranking,fit_seconds,"
        "predict_seconds,error\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (size_t di = 0; di < report.datasets.size(); ++di) {
    for (size_t ai = 0; ai < report.algorithms.size(); ++ai) {
      const CellResult& cell = report.cells[di][ai];
      os << report.datasets[di] << ',' << report.algorithms[ai] << ',';
      if (cell.failed) {
        os << ",,,";
      } else {
        os << num(cell.mean_auc) << ',' << num(cell.std_auc) << ',';
        os << (report.ranked[di] ? num(report.normalized[di][ai]) : std::string()) << ',';
      }
      os << (report.ranked[di] ? "yes" : "no") << ',';
      os << num(cell.fit_seconds) << ',' << num(cell.predict_seconds) << ',';
      std::string err = cell.error;
      for (char& ch : err) {
        if (ch == ',' || ch == '\n') ch = ';';
      }
      os << err << '\n';
    }
  }
  os << "\nalgorithm,mean_rank,mean_normalized_auc\n";
  for (size_t ai = 0; ai < report.algorithms.size(); ++ai) {
    os << report.algorithms[ai] << ',' << num(report.mean_rank[ai]) << ','
       << num(report.mean_normalized[ai]) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// decision-boundary rasterizer

namespace {

struct Rgb {
  int r, g, b;
};

constexpr Rgb kPalette[10] = {
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},  {148, 103, 189},
    {140, 86, 75},  {227, 119, 194}, {127, 127, 127}, {188, 189, 34}, {23, 190, 207}};

std::string rgb_hex(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

// Cell fill: blend the argmax class colour towards white as confidence drops
// to 1/c (so an indifferent model renders a flat neutral field).
std::string cell_color(const Eigen::Ref<const Eigen::RowVectorXf>& p) {
  Eigen::Index best = 0;
  p.maxCoeff(&best);
  const double c = static_cast<double>(p.size());
  const double conf = (p(best) - 1.0 / c) / (1.0 - 1.0 / c + 1e-12);
  const double t = std::clamp(conf, 0.0, 1.0) * 0.85;
  const Rgb base = kPalette[best % 10];
  Rgb mixed{static_cast<int>(255 + (base.r - 255) * t), static_cast<int>(255 + (base.g - 255) * t),
            static_cast<int>(255 + (base.b - 255) * t)};
  return rgb_hex(mixed);
}

}  // namespace

BoundaryPlot plot_boundary(const Predictor& predict, const TabularDataset& ds, int resolution,
                           double margin) {
  ds.validate();
  if (ds.X.cols() != 2) {
    throw ShapeError("boundary plot: dataset must have exactly two features");
  }
  if (resolution < 2) throw ShapeError("boundary plot: resolution must be at least 2");

  BoundaryPlot plot;
  plot.resolution = resolution;
  plot.x_min = ds.X.col(0).minCoeff() - margin;
  plot.x_max = ds.X.col(0).maxCoeff() + margin;
  plot.y_min = ds.X.col(1).minCoeff() - margin;
  plot.y_max = ds.X.col(1).maxCoeff() + margin;
  const double dx = (plot.x_max - plot.x_min) / resolution;
  const double dy = (plot.y_max - plot.y_min) / resolution;

  MatrixF grid(static_cast<Eigen::Index>(resolution) * resolution, 2);
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      grid(static_cast<Eigen::Index>(i) * resolution + j, 0) =
          static_cast<float>(plot.x_min + (j + 0.5) * dx);
      grid(static_cast<Eigen::Index>(i) * resolution + j, 1) =
          static_cast<float>(plot.y_min + (i + 0.5) * dy);
    }
  }
  plot.grid_probs = predict(grid);
  if (plot.grid_probs.rows() != grid.rows()) {
    throw ShapeError("boundary plot: predictor dropped rows");
  }

  // SVG: y axis points up, so raster row i (y_min at i=0) lands at the
  // bottom. Adjacent same-colour cells merge into one rect per row.
  const int px = 600;
  const double sx = static_cast<double>(px) / resolution;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px << "\" height=\"" << px
      << "\" viewBox=\"0 0 " << px << ' ' << px << "\">\n";
  char buf[160];
  for (int i = 0; i < resolution; ++i) {
    const double top = px - (i + 1) * sx;
    int j = 0;
    while (j < resolution) {
      const std::string color =
          cell_color(plot.grid_probs.row(static_cast<Eigen::Index>(i) * resolution + j));
      int j2 = j + 1;
      while (j2 < resolution &&
             cell_color(plot.grid_probs.row(static_cast<Eigen::Index>(i) * resolution + j2)) ==
                 color) {
        ++j2;
      }
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\"/>\n",
                    j * sx, top, (j2 - j) * sx + 0.05, sx + 0.05, color.c_str());
      svg << buf;
      j = j2;
    }
  }
  for (Eigen::Index r = 0; r < ds.X.rows(); ++r) {
    const double cx = (ds.X(r, 0) - plot.x_min) / (plot.x_max - plot.x_min) * px;
    const double cy = px - (ds.X(r, 1) - plot.y_min) / (plot.y_max - plot.y_min) * px;
    const Rgb c = kPalette[static_cast<size_t>(ds.y[static_cast<size_t>(r)]) % 10];
    std::snprintf(buf, sizeof buf,
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"%s\" stroke=\"black\" "
                  "stroke-width=\"1\"/>\n",
                  cx, cy, rgb_hex(c).c_str());
    svg << buf;
  }
  svg << "</svg>\n";
  plot.svg = svg.str();
  return plot;
}

}  // namespace mothernet
