#include <algorithm>
#include <cmath>
#include <numeric>

#include "mothernet/distill.hpp"
#include "mothernet/eval.hpp"
#include "mothernet/inference.hpp"

namespace mothernet {

namespace {

// Per-column z-scoring fitted on the training half; constant columns pass
// through unscaled.
struct Standardizer {
  VectorF mean, inv_std;

  static Standardizer fit(const MatrixF& X) {
    Standardizer s;
    s.mean = X.colwise().mean().transpose();
    s.inv_std.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const float var =
          (X.col(j).array() - s.mean(j)).square().sum() / static_cast<float>(X.rows());
      s.inv_std(j) = var > 0 ? 1.f / std::sqrt(var) : 1.f;
    }
    return s;
  }

  MatrixF transform(const MatrixF& X) const {
    if (X.cols() != mean.size()) throw ShapeError("standardizer: column count mismatch");
    return (X.rowwise() - mean.transpose()).array().rowwise() *
           inv_std.transpose().array();
  }
};

MatrixF one_hot_targets(const std::vector<int32_t>& y, int n_classes) {
  MatrixF t = MatrixF::Zero(static_cast<Eigen::Index>(y.size()), n_classes);
  for (size_t i = 0; i < y.size(); ++i) t(static_cast<Eigen::Index>(i), y[i]) = 1.f;
  return t;
}

double loguniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

// ---------------------------------------------------------------------------
// multinomial logistic regression

struct LogRegParams {
  double c_inv_strength;  // sklearn-style C
  int penalty;            // 0 none, 1 l2, 2 l1
  int max_iter;
  bool fit_intercept;
};

Predictor fit_logreg(const TabularDataset& train, uint64_t seed) {
  Rng rng(seed);
  LogRegParams hp;
  hp.c_inv_strength = loguniform(rng, std::exp(-5.0), std::log(5.0));
  hp.penalty = std::uniform_int_distribution<int>(0, 2)(rng);
  hp.max_iter = std::uniform_int_distribution<int>(50, 500)(rng);
  hp.fit_intercept = std::uniform_int_distribution<int>(0, 1)(rng) == 1;

  const auto scaler = Standardizer::fit(train.X);
  const MatrixF Xs = scaler.transform(train.X);
  const int c = train.n_classes, d = static_cast<int>(Xs.cols());
  const Eigen::Index n = Xs.rows();
  const MatrixF targets = one_hot_targets(train.y, c);

  MatrixF W = MatrixF::Zero(c, d);
  VectorF b = VectorF::Zero(c);
  MatrixF mW = W, vW = W;
  VectorF mb = b, vb = b;
  const float lr = 0.1f, b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
  // penalty weight matching the "C * sum of losses + penalty" convention,
  // rescaled for a mean loss
  const float lambda = static_cast<float>(1.0 / (hp.c_inv_strength * static_cast<double>(n)));

  for (int it = 1; it <= hp.max_iter; ++it) {
    MatrixF L = Xs * W.transpose();
    if (hp.fit_intercept) L.rowwise() += b.transpose();
    MatrixF P(n, c);
    for (Eigen::Index i = 0; i < n; ++i) {
      const float m = L.row(i).maxCoeff();
      P.row(i) = (L.row(i).array() - m).exp();
      P.row(i) /= P.row(i).sum();
    }
    const MatrixF dL = (P - targets) / static_cast<float>(n);
    MatrixF gW = dL.transpose() * Xs;
    if (hp.penalty == 1) gW += lambda * W;
    const float bc1 = 1.f - std::pow(b1, static_cast<float>(it));
    const float bc2 = 1.f - std::pow(b2, static_cast<float>(it));
    mW = b1 * mW + (1.f - b1) * gW;
    vW = (b2 * vW.array() + (1.f - b2) * gW.array().square()).matrix();
    W.array() -= lr * (mW.array() / bc1) / ((vW.array() / bc2).sqrt() + eps);
    if (hp.penalty == 2) {
      // proximal step for the l1 penalty
      const float thresh = lr * lambda;
      W = W.unaryExpr([thresh](float w) {
        return w > thresh ? w - thresh : (w < -thresh ? w + thresh : 0.f);
      });
    }
    if (hp.fit_intercept) {
      const VectorF gb = dL.colwise().sum().transpose();
      mb = b1 * mb + (1.f - b1) * gb;
      vb = (b2 * vb.array() + (1.f - b2) * gb.array().square()).matrix();
      b.array() -= lr * (mb.array() / bc1) / ((vb.array() / bc2).sqrt() + eps);
    }
  }

  const bool intercept = hp.fit_intercept;
  return [scaler, W, b, intercept](const MatrixF& X) {
    const MatrixF Xs = scaler.transform(X);
    MatrixF L = Xs * W.transpose();
    if (intercept) L.rowwise() += b.transpose();
    MatrixF P(L.rows(), L.cols());
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
      const float m = L.row(i).maxCoeff();
      P.row(i) = (L.row(i).array() - m).exp();
      P.row(i) /= P.row(i).sum();
    }
    return P;
  };
}

// ---------------------------------------------------------------------------
// k-nearest-neighbours

Predictor fit_knn(const TabularDataset& train, uint64_t seed) {
  Rng rng(seed);
  int k = std::uniform_int_distribution<int>(1, 16)(rng);
  k = std::min<int>(k, static_cast<int>(train.X.rows()));

  const auto scaler = Standardizer::fit(train.X);
  const MatrixF Xs = scaler.transform(train.X);
  const std::vector<int32_t> labels = train.y;
  const int c = train.n_classes;

  return [scaler, Xs, labels, c, k](const MatrixF& X) {
    const MatrixF Q = scaler.transform(X);
    MatrixF P = MatrixF::Zero(Q.rows(), c);
    std::vector<std::pair<float, Eigen::Index>> dist(static_cast<size_t>(Xs.rows()));
    for (Eigen::Index i = 0; i < Q.rows(); ++i) {
      for (Eigen::Index t = 0; t < Xs.rows(); ++t) {
        dist[static_cast<size_t>(t)] = {(Xs.row(t) - Q.row(i)).squaredNorm(), t};
      }
      std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
      for (int j = 0; j < k; ++j) {
        P(i, labels[static_cast<size_t>(dist[static_cast<size_t>(j)].second)]) += 1.f;
      }
      P.row(i) /= static_cast<float>(k);
    }
    return P;
  };
}

// ---------------------------------------------------------------------------
// supervised MLP with one hyperparameter draw per fit

struct MlpParams {
  int hidden;
  double lr;
  int epochs;
  double dropout;
  int layers;
  double weight_decay;
};

MlpParams sample_mlp_params(Rng& rng) {
  const int hiddens[] = {16, 32, 64, 128, 256, 512};
  const int epoch_choices[] = {10, 100, 1000};
  const double dropouts[] = {0.0, 0.1, 0.3};
  MlpParams p;
  p.hidden = hiddens[std::uniform_int_distribution<int>(0, 5)(rng)];
  p.lr = loguniform(rng, 1e-5, 1e-2);
  p.epochs = epoch_choices[std::uniform_int_distribution<int>(0, 2)(rng)];
  p.dropout = dropouts[std::uniform_int_distribution<int>(0, 2)(rng)];
  p.layers = std::uniform_int_distribution<int>(1, 3)(rng);
  p.weight_decay = loguniform(rng, 1e-5, 1e-2);
  return p;
}

Predictor fit_mlp(const TabularDataset& train, uint64_t seed) {
  Rng rng(seed);
  const MlpParams hp = sample_mlp_params(rng);

  const auto scaler = Standardizer::fit(train.X);
  const MatrixF Xs = scaler.transform(train.X);
  const MatrixF targets = one_hot_targets(train.y, train.n_classes);

  DenseMlpF mlp = make_dense_mlp<float>(static_cast<int>(Xs.cols()), train.n_classes, hp.hidden,
                                        hp.layers, rng);
  std::vector<MatrixF> mw(mlp.w.size()), vw(mlp.w.size());
  std::vector<VectorF> mb(mlp.b.size()), vb(mlp.b.size());
  for (size_t l = 0; l < mlp.w.size(); ++l) {
    mw[l] = MatrixF::Zero(mlp.w[l].rows(), mlp.w[l].cols());
    vw[l] = mw[l];
    mb[l] = VectorF::Zero(mlp.b[l].size());
    vb[l] = mb[l];
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
  const float lr = static_cast<float>(hp.lr);
  const float wd = static_cast<float>(hp.weight_decay);
  std::vector<MatrixF> dw;
  std::vector<VectorF> db;
  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    // Inverted dropout on hidden units via row scaling (commutes with relu);
    // gradients for the live network come from rescaling the masked ones.
    DenseMlpF active = mlp;
    std::vector<VectorF> masks(mlp.w.size() - 1);
    if (hp.dropout > 0) {
      const float inv_keep = 1.f / (1.f - static_cast<float>(hp.dropout));
      for (size_t l = 0; l + 1 < mlp.w.size(); ++l) {
        masks[l] = VectorF::Ones(mlp.w[l].rows());
        for (Eigen::Index i = 0; i < masks[l].size(); ++i) {
          masks[l](i) = unit(rng) >= hp.dropout ? inv_keep : 0.f;
          active.w[l].row(i) *= masks[l](i);
          active.b[l](i) *= masks[l](i);
        }
      }
    }
    dense_soft_ce(active, Xs, targets, &dw, &db);
    if (hp.dropout > 0) {
      for (size_t l = 0; l + 1 < mlp.w.size(); ++l) {
        dw[l] = masks[l].asDiagonal() * dw[l];
        db[l] = db[l].cwiseProduct(masks[l]);
      }
    }
    const float bc1 = 1.f - std::pow(b1, static_cast<float>(epoch));
    const float bc2 = 1.f - std::pow(b2, static_cast<float>(epoch));
    for (size_t l = 0; l < mlp.w.size(); ++l) {
      MatrixF g = dw[l] + wd * mlp.w[l];
      mw[l] = b1 * mw[l] + (1.f - b1) * g;
      vw[l] = (b2 * vw[l].array() + (1.f - b2) * g.array().square()).matrix();
      mlp.w[l].array() -= lr * (mw[l].array() / bc1) / ((vw[l].array() / bc2).sqrt() + eps);
      mb[l] = b1 * mb[l] + (1.f - b1) * db[l];
      vb[l] = (b2 * vb[l].array() + (1.f - b2) * db[l].array().square()).matrix();
      mlp.b[l].array() -= lr * (mb[l].array() / bc1) / ((vb[l].array() / bc2).sqrt() + eps);
    }
  }

  return [scaler, mlp](const MatrixF& X) { return mlp.predict_proba(scaler.transform(X)); };
}

}  // namespace

Algorithm logreg_baseline() { return {"logreg", fit_logreg}; }
Algorithm knn_baseline() { return {"knn", fit_knn}; }
Algorithm mlp_baseline() { return {"mlp", fit_mlp}; }

Algorithm mothernet_algorithm(std::shared_ptr<const TransformerWeights<float>> weights,
                              int ensemble_k) {
  if (!weights) throw ShapeError("mothernet algorithm: null weights");
  FitFn fit = [weights, ensemble_k](const TabularDataset& train, uint64_t seed) -> Predictor {
    EnsembleModel model = fit_ensemble(*weights, train, ensemble_k, seed);
    return [model = std::move(model)](const MatrixF& X) { return model.predict_proba(X); };
  };
  return {"mothernet", std::move(fit)};
}

}  // namespace mothernet
