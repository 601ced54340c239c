// Distillation: compress a fitted (usually ensembled) model into one dense
// MLP by training against the teacher's soft probabilities with
// cross-entropy. With one-hot targets the loss reduces exactly to ordinary
// supervised training, which the tests exploit.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mothernet/types.hpp"

namespace mothernet {

struct DistillConfig {
  int hidden = 128;
  int layers = 2;  // hidden layers
  int epochs = 300;
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 0;

  void validate() const {
    if (hidden < 1 || layers < 1) throw ShapeError("distill config: bad architecture");
    if (epochs < 0) throw ShapeError("distill config: negative epochs");
    if (lr <= 0) throw ShapeError("distill config: learning rate must be positive");
  }
};

template <typename T>
struct DenseMlp {
  std::vector<Matrix<T>> w;  // hidden layers then output, each rows×fan_in
  std::vector<Vector<T>> b;

  int in_dim() const { return static_cast<int>(w.front().cols()); }
  int out_dim() const { return static_cast<int>(w.back().rows()); }

  Matrix<T> logits(const Matrix<T>& X) const {
    if (X.cols() != in_dim()) throw ShapeError("dense mlp: feature width mismatch");
    Matrix<T> h = X;
    for (size_t l = 0; l + 1 < w.size(); ++l) {
      h = (((h * w[l].transpose()).rowwise() + b[l].transpose()).array().max(T(0))).matrix();
    }
    return (h * w.back().transpose()).rowwise() + b.back().transpose();
  }

  Matrix<T> predict_proba(const Matrix<T>& X) const {
    Matrix<T> L = logits(X);
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
      const T m = L.row(i).maxCoeff();
      L.row(i) = (L.row(i).array() - m).exp();
      L.row(i) /= L.row(i).sum();
    }
    return L;
  }

  template <typename U>
  DenseMlp<U> cast() const {
    DenseMlp<U> out;
    for (const auto& m : w) out.w.push_back(m.template cast<U>());
    for (const auto& v : b) out.b.push_back(v.template cast<U>());
    return out;
  }
};

using DenseMlpF = DenseMlp<float>;

template <typename T>
DenseMlp<T> make_dense_mlp(int in_dim, int out_dim, int hidden, int layers, Rng& rng) {
  if (in_dim < 1 || out_dim < 1 || hidden < 1 || layers < 1) {
    throw ShapeError("dense mlp: dimensions must be positive");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMlp<T> mlp;
  int fan_in = in_dim;
  for (int l = 0; l < layers; ++l) {
    Matrix<T> wl(hidden, fan_in);
    const double std = std::sqrt(2.0 / fan_in);
    for (Eigen::Index i = 0; i < wl.rows(); ++i) {
      for (Eigen::Index j = 0; j < wl.cols(); ++j) wl(i, j) = static_cast<T>(std * normal(rng));
    }
    mlp.w.push_back(std::move(wl));
    mlp.b.push_back(Vector<T>::Zero(hidden));
    fan_in = hidden;
  }
  Matrix<T> wo(out_dim, fan_in);
  const double std = std::sqrt(2.0 / fan_in);
  for (Eigen::Index i = 0; i < wo.rows(); ++i) {
    for (Eigen::Index j = 0; j < wo.cols(); ++j) wo(i, j) = static_cast<T>(std * normal(rng));
  }
  mlp.w.push_back(std::move(wo));
  mlp.b.push_back(Vector<T>::Zero(out_dim));
  return mlp;
}

// Mean cross-entropy between target rows (any distributions) and the model's
// softmax outputs; optional parameter gradients.
template <typename T>
T dense_soft_ce(const DenseMlp<T>& mlp, const Matrix<T>& X, const Matrix<T>& targets,
                std::vector<Matrix<T>>* dw, std::vector<Vector<T>>* db) {
  const Eigen::Index n = X.rows();
  if (n < 1) throw ShapeError("distill: empty batch");
  if (targets.rows() != n) throw ShapeError("distill: target row count mismatch");
  if (targets.cols() != mlp.out_dim()) throw ShapeError("distill: target width mismatch");

  std::vector<Matrix<T>> acts;  // layer inputs
  acts.push_back(X);
  std::vector<Matrix<T>> preacts;
  for (size_t l = 0; l + 1 < mlp.w.size(); ++l) {
    Matrix<T> z = (acts.back() * mlp.w[l].transpose()).rowwise() + mlp.b[l].transpose();
    preacts.push_back(z);
    acts.push_back(z.array().max(T(0)).matrix());
  }
  const Matrix<T> L =
      (acts.back() * mlp.w.back().transpose()).rowwise() + mlp.b.back().transpose();

  Matrix<T> P(n, L.cols());
  T loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const T m = L.row(i).maxCoeff();
    const auto shifted = (L.row(i).array() - m).eval();
    const T lse = m + std::log(shifted.exp().sum());
    P.row(i) = (L.row(i).array() - lse).exp().matrix();
    loss -= (targets.row(i).array() * (L.row(i).array() - lse)).sum();
  }
  loss /= static_cast<T>(n);
  if (!dw) return loss;

  dw->assign(mlp.w.size(), Matrix<T>());
  db->assign(mlp.b.size(), Vector<T>());
  Matrix<T> delta = (P - targets) / static_cast<T>(n);
  for (size_t l = mlp.w.size(); l-- > 0;) {
    (*dw)[l] = delta.transpose() * acts[l];
    (*db)[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = (delta * mlp.w[l]).cwiseProduct(
          (preacts[l - 1].array() > T(0)).template cast<T>().matrix());
    }
  }
  return loss;
}

template <typename T>
struct DistillResult {
  DenseMlp<T> student;
  std::vector<T> epoch_losses;  // pre-step loss per epoch
};

// Full-batch Adam against fixed soft targets.
template <typename T>
DistillResult<T> distill_probs(const Matrix<T>& X, const Matrix<T>& targets,
                               const DistillConfig& cfg) {
  cfg.validate();
  if (X.rows() != targets.rows()) throw ShapeError("distill: row count mismatch");
  if (X.rows() < 1) throw ShapeError("distill: empty training set");
  for (Eigen::Index i = 0; i < targets.rows(); ++i) {
    const T s = targets.row(i).sum();
    if (std::abs(static_cast<double>(s) - 1.0) > 1e-3 || targets.row(i).minCoeff() < T(0)) {
      throw ShapeError("distill: target row " + std::to_string(i) +
                       " is not a probability distribution");
    }
  }
  Rng rng(cfg.seed);
  DistillResult<T> result;
  result.student = make_dense_mlp<T>(static_cast<int>(X.cols()),
                                     static_cast<int>(targets.cols()), cfg.hidden, cfg.layers, rng);
  auto& mlp = result.student;
  std::vector<Matrix<T>> mw(mlp.w.size()), vw(mlp.w.size());
  std::vector<Vector<T>> mb(mlp.b.size()), vb(mlp.b.size());
  for (size_t l = 0; l < mlp.w.size(); ++l) {
    mw[l] = Matrix<T>::Zero(mlp.w[l].rows(), mlp.w[l].cols());
    vw[l] = mw[l];
    mb[l] = Vector<T>::Zero(mlp.b[l].size());
    vb[l] = mb[l];
  }
  std::vector<Matrix<T>> dw;
  std::vector<Vector<T>> db;
  const T b1 = T(cfg.beta1), b2 = T(cfg.beta2), eps = T(cfg.adam_eps), lr = T(cfg.lr);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const T loss = dense_soft_ce(mlp, X, targets, &dw, &db);
    result.epoch_losses.push_back(loss);
    const T bc1 = T(1) - std::pow(b1, T(epoch + 1));
    const T bc2 = T(1) - std::pow(b2, T(epoch + 1));
    for (size_t l = 0; l < mlp.w.size(); ++l) {
      mw[l] = b1 * mw[l] + (T(1) - b1) * dw[l];
      vw[l] = (b2 * vw[l].array() + (T(1) - b2) * dw[l].array().square()).matrix();
      mlp.w[l].array() -= lr * (mw[l].array() / bc1) / ((vw[l].array() / bc2).sqrt() + eps);
      mb[l] = b1 * mb[l] + (T(1) - b1) * db[l];
      vb[l] = (b2 * vb[l].array() + (T(1) - b2) * db[l].array().square()).matrix();
      mlp.b[l].array() -= lr * (mb[l].array() / bc1) / ((vb[l].array() / bc2).sqrt() + eps);
    }
  }
  return result;
}

// MNCH1 container, kind 1 (dense distilled MLP).
void export_dense(const DenseMlpF& mlp, const std::string& path);
DenseMlpF import_dense(const std::string& path);

}  // namespace mothernet
