// Evaluation: one-vs-rest AUC, stratified cross-dataset comparison with
// normalized scores and mean ranks, reference baselines (logistic
// regression, k-nearest-neighbours, a supervised MLP with a sampled
// hyperparameter draw), and a decision-boundary rasterizer for
// two-dimensional tasks.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mothernet/dataset.hpp"
#include "mothernet/encoder.hpp"

namespace mothernet {

// Macro average of the per-class one-vs-rest ROC AUC over the classes that
// appear in y, ties handled by average ranks. Throws UndefinedMetricError
// when fewer than two classes appear.
double roc_auc_ovr(const MatrixF& probs, const std::vector<int32_t>& y);

// Min-max rescaling to [0, 1]; an all-equal vector maps to 0.5 everywhere.
std::vector<double> normalize_scores(const std::vector<double>& scores);

struct SplitIdx {
  std::vector<Eigen::Index> train, test;
};

// Deterministic class-stratified 50/50 splits (train takes the ceiling per
// class). A class with fewer than two rows cannot appear on both sides.
std::vector<SplitIdx> stratified_splits(const TabularDataset& ds, int n_splits, uint64_t seed);

TabularDataset subset(const TabularDataset& ds, const std::vector<Eigen::Index>& rows);

using Predictor = std::function<MatrixF(const MatrixF&)>;
using FitFn = std::function<Predictor(const TabularDataset& train, uint64_t seed)>;

struct Algorithm {
  std::string name;
  FitFn fit;
};

struct CellResult {
  double mean_auc = 0.0;
  double std_auc = 0.0;
  double fit_seconds = 0.0;      // summed over splits
  double predict_seconds = 0.0;  // summed over splits
  bool failed = false;
  std::string error;
};

struct EvalReport {
  std::vector<std::string> datasets;
  std::vector<std::string> algorithms;
  std::vector<std::vector<CellResult>> cells;   // [dataset][algorithm]
  std::vector<bool> ranked;                     // dataset counted in aggregates?
  std::vector<std::vector<double>> normalized;  // [dataset][algorithm], only when ranked
  std::vector<double> mean_rank;                // per algorithm, over ranked datasets
  std::vector<double> mean_normalized;          // per algorithm, over ranked datasets
};

// Fits every algorithm on every dataset across the splits, timing fit and
// predict separately. A dataset where any algorithm fails stays in the
// report but is excluded from normalization and ranking.
EvalReport evaluate(const std::vector<std::pair<std::string, TabularDataset>>& datasets,
                    const std::vector<Algorithm>& algorithms, int n_splits, uint64_t seed,
                    int threads = 1);

std::string eval_report_csv(const EvalReport& report);

// Baselines. Each fit draws its hyperparameters from the given seed, so a
// baseline is one honest draw from its search space, not a tuned best-of.
Algorithm logreg_baseline();
Algorithm knn_baseline();
Algorithm mlp_baseline();

// The hypernetwork as a drop-in algorithm (ensembled in-context fitting).
Algorithm mothernet_algorithm(std::shared_ptr<const TransformerWeights<float>> weights,
                              int ensemble_k = 8);

struct BoundaryPlot {
  int resolution = 0;
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  // Cell centers: x = x_min + (j + 0.5) dx, y = y_min + (i + 0.5) dy with
  // dx = (x_max - x_min)/resolution; row i*resolution + j holds the
  // predicted distribution at cell (i, j).
  MatrixF grid_probs;
  std::string svg;
};

// Rasterizes a predictor over the bounding box of a two-feature dataset
// (expanded by `margin` on every side) and renders an SVG heat map with the
// training points on top.
BoundaryPlot plot_boundary(const Predictor& predict, const TabularDataset& ds,
                           int resolution = 200, double margin = 0.5);

}  // namespace mothernet
