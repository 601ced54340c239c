// The child classifier: a two-hidden-layer MLP whose per-layer weights are
// low-rank products of generated factors (unpacked from the flat vector phi)
// and fixed factors owned by the hypernetwork. The fixed side is a rank-r
// down-projection per layer input: wf1 maps (padded) features to rank space
// and wf2 maps hidden activations to rank space for both the second hidden
// layer and the output layer. Generated matrices project rank space back up:
//
//   h1     = relu(wp1 · (wf1_act · x) + b1)
//   h2     = relu(wp2 · (wf2 · h1)  + b2)
//   logits = wp3_act · (wf2 · h2) + b3_act
//
// "act" marks task slicing: wf1 keeps its first f columns, wp3/b3 keep their
// first c rows. Densified, the layers are W1 = wp1·wf1 (h×f), W2 = wp2·wf2
// (h×h), W3 = wp3·wf2 (c×h).
#pragma once

#include "mothernet/dataset.hpp"
#include "mothernet/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace mothernet {

struct ChildConfig {
  int hidden = 64;                   // h
  int rank = 8;                      // r
  int d_max = kMaxFeatures;          // padded feature budget
  int n_class_slots = kMaxClasses;   // N: output units the hypernetwork always emits

  // phi layout: [wp1 (h*r) | b1 (h) | wp2 (h*r) | b2 (h) | wp3 (N*r) | b3 (N)],
  // matrices row-major.
  int phi_len() const { return 2 * hidden * rank + n_class_slots * rank + 2 * hidden + n_class_slots; }

  void validate() const {
    if (hidden < 1 || rank < 1) throw ShapeError("child config: hidden and rank must be positive");
    if (d_max < 1 || d_max > kMaxFeatures) throw ShapeError("child config: bad d_max");
    if (n_class_slots < 1 || n_class_slots > kMaxClasses) {
      throw ShapeError("child config: bad n_class_slots");
    }
  }
};

template <typename T>
struct PhiParts {
  Matrix<T> wp1, wp2, wp3;  // h×r, h×r, N×r
  Vector<T> b1, b2, b3;     // h, h, N
};

template <typename T>
PhiParts<T> unpack_phi(const Vector<T>& phi, const ChildConfig& cfg) {
  cfg.validate();
  if (phi.size() != cfg.phi_len()) {
    throw ShapeError("phi layout: expected " + std::to_string(cfg.phi_len()) + " values, got " +
                     std::to_string(phi.size()));
  }
  const int h = cfg.hidden, r = cfg.rank, N = cfg.n_class_slots;
  PhiParts<T> p;
  Eigen::Index off = 0;
  auto take_mat = [&](int rows, int cols) {
    Matrix<T> m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) m(i, j) = phi(off++);
    }
    return m;
  };
  auto take_vec = [&](int len) {
    Vector<T> v(len);
    for (int i = 0; i < len; ++i) v(i) = phi(off++);
    return v;
  };
  p.wp1 = take_mat(h, r);
  p.b1 = take_vec(h);
  p.wp2 = take_mat(h, r);
  p.b2 = take_vec(h);
  p.wp3 = take_mat(N, r);
  p.b3 = take_vec(N);
  return p;
}

template <typename T>
Vector<T> pack_phi(const PhiParts<T>& p, const ChildConfig& cfg) {
  cfg.validate();
  const int h = cfg.hidden, r = cfg.rank, N = cfg.n_class_slots;
  if (p.wp1.rows() != h || p.wp1.cols() != r || p.wp2.rows() != h || p.wp2.cols() != r ||
      p.wp3.rows() != N || p.wp3.cols() != r || p.b1.size() != h || p.b2.size() != h ||
      p.b3.size() != N) {
    throw ShapeError("phi layout: part shapes do not match the child config");
  }
  Vector<T> phi(cfg.phi_len());
  Eigen::Index off = 0;
  auto put_mat = [&](const Matrix<T>& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) phi(off++) = m(i, j);
    }
  };
  auto put_vec = [&](const Vector<T>& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) phi(off++) = v(i);
  };
  put_mat(p.wp1);
  put_vec(p.b1);
  put_mat(p.wp2);
  put_vec(p.b2);
  put_mat(p.wp3);
  put_vec(p.b3);
  return phi;
}

// A task-sliced child ready for prediction. Inputs are rows in the active
// feature space, already carrying the training-time 100/f scale.
template <typename T>
struct ChildNetwork {
  ChildConfig cfg;
  int f = 0;  // active features
  int c = 0;  // active classes
  Matrix<T> wp1, wp2;  // h×r
  Matrix<T> wp3;       // c×r (active rows of the generated N×r map)
  Vector<T> b1, b2;    // h
  Vector<T> b3;        // c
  Matrix<T> wf1;       // r×f (active columns of the fixed r×d_max factor)
  Matrix<T> wf2;       // r×h

  // First-layer rank projection. Kept as an explicit ordered loop so a net
  // sliced to f features and an unsliced net fed the zero-padded row produce
  // bit-identical sums: the tail terms are w*0, which leave the accumulator
  // untouched. fp-contract must be off here — under contract=fast the
  // compiler may fuse s += w*x into an fma in some unroll slots and not
  // others, and the slot layout depends on the trip count, so the same j can
  // round differently in the sliced and padded runs. noinline pins a single
  // compiled instance.
  __attribute__((noinline, optimize("fp-contract=off"))) Vector<T> input_rank(
      const Vector<T>& x) const {
    Vector<T> u = Vector<T>::Zero(cfg.rank);
    for (int k = 0; k < cfg.rank; ++k) {
      T s = 0;
      for (Eigen::Index j = 0; j < x.size(); ++j) s += wf1(k, j) * x(j);
      u(k) = s;
    }
    return u;
  }

  // Output matvec, same story along the class dimension: a c-row slice of wp3
  // must produce the same floats as the full N-row matrix.
  __attribute__((noinline, optimize("fp-contract=off"))) Vector<T> output_logits(
      const Vector<T>& u3) const {
    Vector<T> out(c);
    for (int i = 0; i < c; ++i) {
      T s = b3(i);
      for (int k = 0; k < cfg.rank; ++k) s += wp3(i, k) * u3(k);
      out(i) = s;
    }
    return out;
  }

  // noinline: the hidden-layer matvecs are shape-identical between the sliced
  // and padded evaluations, so a single compiled instance guarantees they
  // round identically too.
  [[gnu::noinline]] Vector<T> forward_logits(const Vector<T>& x) const {
    if (x.size() != f) throw ShapeError("child forward: expected " + std::to_string(f) + " features");
    if (!x.allFinite()) throw NumericError("child forward: non-finite input");
    const Vector<T> u1 = input_rank(x);
    const Vector<T> h1 = ((wp1 * u1 + b1).array().max(T(0))).matrix();
    const Vector<T> h2 = ((wp2 * (wf2 * h1) + b2).array().max(T(0))).matrix();
    return output_logits(wf2 * h2);
  }

  Vector<T> forward(const Vector<T>& x) const {
    Vector<T> l = forward_logits(x);
    const T m = l.maxCoeff();
    Vector<T> e = (l.array() - m).exp().matrix();
    return e / e.sum();
  }

  // Row-by-row prediction; rows are independent by construction.
  Matrix<T> predict_proba(const Matrix<T>& X) const {
    if (X.cols() != f) throw ShapeError("child predict: expected " + std::to_string(f) + " features");
    Matrix<T> P(X.rows(), c);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      P.row(i) = forward(X.row(i).transpose()).transpose();
    }
    return P;
  }

  template <typename U>
  ChildNetwork<U> cast() const {
    ChildNetwork<U> out;
    out.cfg = cfg;
    out.f = f;
    out.c = c;
    out.wp1 = wp1.template cast<U>();
    out.wp2 = wp2.template cast<U>();
    out.wp3 = wp3.template cast<U>();
    out.b1 = b1.template cast<U>();
    out.b2 = b2.template cast<U>();
    out.b3 = b3.template cast<U>();
    out.wf1 = wf1.template cast<U>();
    out.wf2 = wf2.template cast<U>();
    return out;
  }
};

// Slices phi and the fixed factors down to a task with f features and c
// classes. wf1_full is r×d_max, wf2 is r×hidden.
template <typename T>
ChildNetwork<T> assemble_child(const Vector<T>& phi, const Matrix<T>& wf1_full,
                               const Matrix<T>& wf2, int f, int c, const ChildConfig& cfg) {
  cfg.validate();
  if (f < 1 || f > cfg.d_max) throw ShapeError("assemble_child: f out of range");
  if (c < 1 || c > cfg.n_class_slots) throw ShapeError("assemble_child: c out of range");
  if (wf1_full.rows() != cfg.rank || wf1_full.cols() != cfg.d_max) {
    throw ShapeError("assemble_child: wf1 must be rank × d_max");
  }
  if (wf2.rows() != cfg.rank || wf2.cols() != cfg.hidden) {
    throw ShapeError("assemble_child: wf2 must be rank × hidden");
  }
  PhiParts<T> p = unpack_phi(phi, cfg);
  ChildNetwork<T> net;
  net.cfg = cfg;
  net.f = f;
  net.c = c;
  net.wp1 = std::move(p.wp1);
  net.b1 = std::move(p.b1);
  net.wp2 = std::move(p.wp2);
  net.b2 = std::move(p.b2);
  net.wp3 = p.wp3.topRows(c);
  net.b3 = p.b3.head(c);
  net.wf1 = wf1_full.leftCols(f);
  net.wf2 = wf2;
  return net;
}

// Gradients in the shapes of the active child; wf1 is the r×f active block.
template <typename T>
struct ChildGrads {
  Matrix<T> wp1, wp2, wp3;
  Vector<T> b1, b2, b3;
  Matrix<T> wf1, wf2;
};

// Mean cross-entropy of the child on (X, y) plus, when requested, gradients
// with respect to the generated parameters and the fixed factors. X rows live
// in the active feature space with the 100/f scale applied.
template <typename T>
T child_loss_and_grads(const ChildNetwork<T>& net, const Matrix<T>& X,
                       const std::vector<int32_t>& y, ChildGrads<T>* grads) {
  const Eigen::Index n = X.rows();
  if (n < 1) throw ShapeError("child loss: empty batch");
  if (X.cols() != net.f) throw ShapeError("child loss: feature mismatch");
  if (static_cast<Eigen::Index>(y.size()) != n) throw ShapeError("child loss: label count mismatch");
  for (int32_t label : y) {
    if (label < 0 || label >= net.c) throw ShapeError("child loss: label out of range");
  }

  const Matrix<T> U1 = X * net.wf1.transpose();                                   // n×r
  const Matrix<T> Z1 = (U1 * net.wp1.transpose()).rowwise() + net.b1.transpose(); // n×h
  const Matrix<T> H1 = Z1.array().max(T(0)).matrix();
  const Matrix<T> U2 = H1 * net.wf2.transpose();                                  // n×r
  const Matrix<T> Z2 = (U2 * net.wp2.transpose()).rowwise() + net.b2.transpose();
  const Matrix<T> H2 = Z2.array().max(T(0)).matrix();
  const Matrix<T> U3 = H2 * net.wf2.transpose();                                  // n×r
  const Matrix<T> L = (U3 * net.wp3.transpose()).rowwise() + net.b3.transpose();  // n×c

  // log-sum-exp rows, probabilities, loss
  Matrix<T> P(n, net.c);
  T loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const T m = L.row(i).maxCoeff();
    Vector<T> e = (L.row(i).array() - m).exp().matrix().transpose();
    const T s = e.sum();
    P.row(i) = (e / s).transpose();
    loss += m + std::log(s) - L(i, y[static_cast<size_t>(i)]);
  }
  loss /= static_cast<T>(n);
  if (!grads) return loss;

  Matrix<T> dL = P;
  for (Eigen::Index i = 0; i < n; ++i) dL(i, y[static_cast<size_t>(i)]) -= T(1);
  dL /= static_cast<T>(n);

  grads->wp3 = dL.transpose() * U3;  // c×r
  grads->b3 = dL.colwise().sum().transpose();
  const Matrix<T> dU3 = dL * net.wp3;                                    // n×r
  grads->wf2 = dU3.transpose() * H2;                                     // r×h (output layer share)
  Matrix<T> dH2 = dU3 * net.wf2;                                         // n×h
  const Matrix<T> dZ2 =
      (dH2.array() * (Z2.array() > T(0)).template cast<T>()).matrix();
  grads->wp2 = dZ2.transpose() * U2;
  grads->b2 = dZ2.colwise().sum().transpose();
  const Matrix<T> dU2 = dZ2 * net.wp2;
  grads->wf2 += dU2.transpose() * H1;                                    // hidden layer share
  Matrix<T> dH1 = dU2 * net.wf2;
  const Matrix<T> dZ1 =
      (dH1.array() * (Z1.array() > T(0)).template cast<T>()).matrix();
  grads->wp1 = dZ1.transpose() * U1;
  grads->b1 = dZ1.colwise().sum().transpose();
  const Matrix<T> dU1 = dZ1 * net.wp1;
  grads->wf1 = dU1.transpose() * X;  // r×f
  return loss;
}

// Scatters active-shape child gradients into a full phi-length vector
// (inactive output rows stay zero).
template <typename T>
Vector<T> pack_child_grads(const ChildGrads<T>& g, const ChildConfig& cfg, int c) {
  PhiParts<T> p;
  p.wp1 = g.wp1;
  p.b1 = g.b1;
  p.wp2 = g.wp2;
  p.b2 = g.b2;
  p.wp3 = Matrix<T>::Zero(cfg.n_class_slots, cfg.rank);
  p.wp3.topRows(c) = g.wp3;
  p.b3 = Vector<T>::Zero(cfg.n_class_slots);
  p.b3.head(c) = g.b3;
  return pack_phi(p, cfg);
}

struct FinetuneConfig {
  int epochs = 10;
  double lr = 1e-2;
  double weight_decay = 0.0;
  double dropout = 0.0;  // applied to h1/h2 during finetuning steps
  uint64_t seed = 0;
};

// Full-batch gradient descent on the generated parameters only (the fixed
// factors stay frozen). Returns the pre-step training loss per epoch;
// epochs = 0 leaves the network untouched.
template <typename T>
std::vector<T> finetune_child(ChildNetwork<T>& net, const Matrix<T>& X,
                              const std::vector<int32_t>& y, const FinetuneConfig& cfg) {
  if (cfg.epochs < 0) throw ShapeError("finetune: negative epoch count");
  if (cfg.dropout < 0 || cfg.dropout >= 1) throw ShapeError("finetune: dropout must be in [0,1)");
  std::vector<T> losses;
  losses.reserve(static_cast<size_t>(cfg.epochs));
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Inverted dropout on hidden units, one mask per unit per step, realized
    // by scaling the unit's generated row. Scaling commutes with relu, so
    // this masks h1/h2 exactly; the chain rule puts the same scale on the
    // row's gradient.
    ChildNetwork<T> active = net;
    Vector<T> m1 = Vector<T>::Ones(net.cfg.hidden);
    Vector<T> m2 = Vector<T>::Ones(net.cfg.hidden);
    if (cfg.dropout > 0) {
      const T inv_keep = T(1) / (T(1) - T(cfg.dropout));
      for (int i = 0; i < net.cfg.hidden; ++i) {
        m1(i) = unit(rng) >= cfg.dropout ? inv_keep : T(0);
        m2(i) = unit(rng) >= cfg.dropout ? inv_keep : T(0);
        active.wp1.row(i) *= m1(i);
        active.b1(i) *= m1(i);
        active.wp2.row(i) *= m2(i);
        active.b2(i) *= m2(i);
      }
    }
    ChildGrads<T> g;
    const T loss = child_loss_and_grads(active, X, y, &g);
    losses.push_back(loss);
    if (cfg.dropout > 0) {
      g.wp1 = m1.asDiagonal() * g.wp1;
      g.b1 = g.b1.cwiseProduct(m1);
      g.wp2 = m2.asDiagonal() * g.wp2;
      g.b2 = g.b2.cwiseProduct(m2);
    }
    const T lr = T(cfg.lr);
    const T wd = T(cfg.weight_decay);
    auto step = [&](auto& param, const auto& grad) { param -= lr * (grad + wd * param); };
    step(net.wp1, g.wp1);
    step(net.b1, g.b1);
    step(net.wp2, g.wp2);
    step(net.b2, g.b2);
    step(net.wp3, g.wp3);
    step(net.b3, g.b3);
  }
  return losses;
}

// MNCH1 container (kind 0 = low-rank child). Self-describing: config, f, c
// and every tensor with its shape. import_child rejects containers holding a
// different model kind.
void export_child(const ChildNetwork<float>& net, const std::string& path);
ChildNetwork<float> import_child(const std::string& path);
std::string child_debug_json(const ChildNetwork<float>& net);

// Reads just the container header: 0 = low-rank child, 1 = dense distilled
// MLP.
uint8_t peek_child_kind(const std::string& path);

}  // namespace mothernet
