// The hypernetwork: training rows become tokens (input projection + label
// projection, no positional encoding), pass through pre-norm transformer
// layers with full unmasked attention, get pooled into per-class slots, and a
// two-layer decoder maps the pooled embedding to the child parameter vector
// phi. Forward and reverse passes are hand-written; the reverse pass
// accumulates into a parallel TransformerWeights holding gradients.
#pragma once

#include "mothernet/childnet.hpp"
#include "mothernet/dataset.hpp"
#include "mothernet/types.hpp"

#include <atomic>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace mothernet {

struct EncoderConfig {
  int embed_dim = 64;       // m
  int layers = 3;           // L
  int heads = 4;
  int ff_hidden = 256;
  int decoder_hidden = 256;

  void validate() const {
    if (embed_dim < 1 || layers < 0 || heads < 1 || ff_hidden < 1 || decoder_hidden < 1) {
      throw ShapeError("encoder config: dimensions must be positive");
    }
    if (embed_dim % heads != 0) throw ShapeError("encoder config: heads must divide embed_dim");
  }

  // Laptop-scale default used by most workflows.
  static EncoderConfig desk() { return {64, 3, 4, 256, 256}; }
  // Full-scale configuration; constructs and runs but is not trained here.
  static EncoderConfig full() { return {512, 12, 4, 2048, 4096}; }
  // Minimal configuration for float64 gradient verification.
  static EncoderConfig tiny() { return {8, 1, 2, 32, 16}; }
};

inline ChildConfig desk_child() { return ChildConfig{64, 8, kMaxFeatures, kMaxClasses}; }
inline ChildConfig full_child() { return ChildConfig{512, 32, kMaxFeatures, kMaxClasses}; }
inline ChildConfig tiny_child() { return ChildConfig{8, 2, kMaxFeatures, kMaxClasses}; }

// Counts full transformer passes; the benchmark uses it to prove that child
// prediction never re-enters the encoder.
std::atomic<uint64_t>& transformer_forward_count();

template <typename T>
struct TransformerLayerWeights {
  Matrix<T> ln1_g, ln1_b;    // m×1
  Matrix<T> wq, wk, wv, wo;  // m×m
  Matrix<T> bq, bk, bv, bo;  // m×1
  Matrix<T> ln2_g, ln2_b;    // m×1
  Matrix<T> ff_w1;           // ff×m
  Matrix<T> ff_b1;           // ff×1
  Matrix<T> ff_w2;           // m×ff
  Matrix<T> ff_b2;           // m×1
};

template <typename T>
struct TransformerWeights {
  EncoderConfig enc;
  ChildConfig child;

  Matrix<T> input_w;  // m×d_max
  Matrix<T> input_b;  // m×1
  Matrix<T> label_w;  // m×N
  std::vector<TransformerLayerWeights<T>> layers;
  Matrix<T> dec_w1;  // decoder_hidden × N*m
  Matrix<T> dec_b1;  // decoder_hidden × 1
  Matrix<T> dec_w2;  // phi_len × decoder_hidden
  Matrix<T> dec_b2;  // phi_len × 1
  Matrix<T> wf1;     // rank × d_max (fixed child factor, input side)
  Matrix<T> wf2;     // rank × hidden (fixed child factor, shared by layer 2 and the output layer)

  // Every tensor in a fixed order; gradients, Adam moments and checkpoints
  // all walk this list.
  std::vector<Matrix<T>*> tensor_list();
  std::vector<const Matrix<T>*> tensor_list() const;
  std::vector<std::pair<std::string, const Matrix<T>*>> named_tensors() const;
  std::vector<std::pair<std::string, Matrix<T>*>> named_tensors();

  Eigen::Index parameter_count() const;

  template <typename U>
  TransformerWeights<U> cast() const;

  static TransformerWeights zeros(const EncoderConfig& e, const ChildConfig& c);
  // Training initialization: N(0, 0.02) projections everywhere, unit
  // layernorm gains, zero biases, child factors scaled by their fan-in.
  static TransformerWeights init_training(const EncoderConfig& e, const ChildConfig& c, Rng& rng);
  // Dense random initialization; gradient tests want every path active.
  static TransformerWeights init_random(const EncoderConfig& e, const ChildConfig& c, Rng& rng,
                                        T scale = T(0.1));
};

// ---------------------------------------------------------------------------
// construction

template <typename T>
TransformerWeights<T> TransformerWeights<T>::zeros(const EncoderConfig& e, const ChildConfig& c) {
  e.validate();
  c.validate();
  const int m = e.embed_dim, ff = e.ff_hidden, dh = e.decoder_hidden;
  const int N = c.n_class_slots;
  TransformerWeights w;
  w.enc = e;
  w.child = c;
  w.input_w = Matrix<T>::Zero(m, c.d_max);
  w.input_b = Matrix<T>::Zero(m, 1);
  w.label_w = Matrix<T>::Zero(m, N);
  w.layers.resize(static_cast<size_t>(e.layers));
  for (auto& l : w.layers) {
    l.ln1_g = Matrix<T>::Zero(m, 1);
    l.ln1_b = Matrix<T>::Zero(m, 1);
    l.wq = Matrix<T>::Zero(m, m);
    l.wk = Matrix<T>::Zero(m, m);
    l.wv = Matrix<T>::Zero(m, m);
    l.wo = Matrix<T>::Zero(m, m);
    l.bq = Matrix<T>::Zero(m, 1);
    l.bk = Matrix<T>::Zero(m, 1);
    l.bv = Matrix<T>::Zero(m, 1);
    l.bo = Matrix<T>::Zero(m, 1);
    l.ln2_g = Matrix<T>::Zero(m, 1);
    l.ln2_b = Matrix<T>::Zero(m, 1);
    l.ff_w1 = Matrix<T>::Zero(ff, m);
    l.ff_b1 = Matrix<T>::Zero(ff, 1);
    l.ff_w2 = Matrix<T>::Zero(m, ff);
    l.ff_b2 = Matrix<T>::Zero(m, 1);
  }
  w.dec_w1 = Matrix<T>::Zero(dh, N * m);
  w.dec_b1 = Matrix<T>::Zero(dh, 1);
  w.dec_w2 = Matrix<T>::Zero(c.phi_len(), dh);
  w.dec_b2 = Matrix<T>::Zero(c.phi_len(), 1);
  w.wf1 = Matrix<T>::Zero(c.rank, c.d_max);
  w.wf2 = Matrix<T>::Zero(c.rank, c.hidden);
  return w;
}

template <typename T>
TransformerWeights<T> TransformerWeights<T>::init_training(const EncoderConfig& e,
                                                           const ChildConfig& c, Rng& rng) {
  TransformerWeights w = zeros(e, c);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](Matrix<T>& mat, double std) {
    for (Eigen::Index i = 0; i < mat.rows(); ++i) {
      for (Eigen::Index j = 0; j < mat.cols(); ++j) mat(i, j) = static_cast<T>(std * normal(rng));
    }
  };
  fill(w.input_w, 0.02);
  fill(w.label_w, 0.02);
  for (auto& l : w.layers) {
    l.ln1_g.setOnes();
    l.ln2_g.setOnes();
    fill(l.wq, 0.02);
    fill(l.wk, 0.02);
    fill(l.wv, 0.02);
    fill(l.wo, 0.02);
    fill(l.ff_w1, 0.02);
    fill(l.ff_w2, 0.02);
  }
  fill(w.dec_w1, 0.02);
  // The head emitting phi must NOT start at zero: phi == 0 means every
  // generated child matrix is zero, so all hidden relus sit at 0 and the only
  // phi coordinates with nonzero gradient are the output biases -- a saddle
  // the optimizer can never leave (the child then just predicts class priors).
  fill(w.dec_w2, 0.02);
  fill(w.wf1, 1.0 / std::sqrt(static_cast<double>(c.d_max)));
  fill(w.wf2, 1.0 / std::sqrt(static_cast<double>(c.hidden)));
  return w;
}

template <typename T>
TransformerWeights<T> TransformerWeights<T>::init_random(const EncoderConfig& e,
                                                         const ChildConfig& c, Rng& rng, T scale) {
  TransformerWeights w = zeros(e, c);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Matrix<T>* t : w.tensor_list()) {
    for (Eigen::Index i = 0; i < t->rows(); ++i) {
      for (Eigen::Index j = 0; j < t->cols(); ++j) (*t)(i, j) = scale * static_cast<T>(normal(rng));
    }
  }
  for (auto& l : w.layers) {
    l.ln1_g = l.ln1_g.array() + T(1);  // keep layernorm gains near one
    l.ln2_g = l.ln2_g.array() + T(1);
  }
  return w;
}

template <typename T>
std::vector<Matrix<T>*> TransformerWeights<T>::tensor_list() {
  std::vector<Matrix<T>*> out;
  out.push_back(&input_w);
  out.push_back(&input_b);
  out.push_back(&label_w);
  for (auto& l : layers) {
    for (Matrix<T>* t : {&l.ln1_g, &l.ln1_b, &l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo,
                         &l.bo, &l.ln2_g, &l.ln2_b, &l.ff_w1, &l.ff_b1, &l.ff_w2, &l.ff_b2}) {
      out.push_back(t);
    }
  }
  for (Matrix<T>* t : {&dec_w1, &dec_b1, &dec_w2, &dec_b2, &wf1, &wf2}) out.push_back(t);
  return out;
}

template <typename T>
std::vector<const Matrix<T>*> TransformerWeights<T>::tensor_list() const {
  auto& self = const_cast<TransformerWeights&>(*this);
  std::vector<const Matrix<T>*> out;
  for (Matrix<T>* t : self.tensor_list()) out.push_back(t);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const Matrix<T>*>> TransformerWeights<T>::named_tensors() const {
  std::vector<std::pair<std::string, const Matrix<T>*>> out;
  out.emplace_back("input_proj.w", &input_w);
  out.emplace_back("input_proj.b", &input_b);
  out.emplace_back("label_proj.w", &label_w);
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string p = "layers." + std::to_string(i) + ".";
    out.emplace_back(p + "ln1.g", &l.ln1_g);
    out.emplace_back(p + "ln1.b", &l.ln1_b);
    out.emplace_back(p + "attn.wq", &l.wq);
    out.emplace_back(p + "attn.bq", &l.bq);
    out.emplace_back(p + "attn.wk", &l.wk);
    out.emplace_back(p + "attn.bk", &l.bk);
    out.emplace_back(p + "attn.wv", &l.wv);
    out.emplace_back(p + "attn.bv", &l.bv);
    out.emplace_back(p + "attn.wo", &l.wo);
    out.emplace_back(p + "attn.bo", &l.bo);
    out.emplace_back(p + "ln2.g", &l.ln2_g);
    out.emplace_back(p + "ln2.b", &l.ln2_b);
    out.emplace_back(p + "ff.w1", &l.ff_w1);
    out.emplace_back(p + "ff.b1", &l.ff_b1);
    out.emplace_back(p + "ff.w2", &l.ff_w2);
    out.emplace_back(p + "ff.b2", &l.ff_b2);
  }
  out.emplace_back("decoder.w1", &dec_w1);
  out.emplace_back("decoder.b1", &dec_b1);
  out.emplace_back("decoder.w2", &dec_w2);
  out.emplace_back("decoder.b2", &dec_b2);
  out.emplace_back("child.wf1", &wf1);
  out.emplace_back("child.wf2", &wf2);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Matrix<T>*>> TransformerWeights<T>::named_tensors() {
  std::vector<std::pair<std::string, Matrix<T>*>> out;
  const auto named = const_cast<const TransformerWeights&>(*this).named_tensors();
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.emplace_back(name, const_cast<Matrix<T>*>(t));
  return out;
}

template <typename T>
Eigen::Index TransformerWeights<T>::parameter_count() const {
  Eigen::Index n = 0;
  for (const Matrix<T>* t : tensor_list()) n += t->size();
  return n;
}

template <typename T>
template <typename U>
TransformerWeights<U> TransformerWeights<T>::cast() const {
  TransformerWeights<U> out = TransformerWeights<U>::zeros(enc, child);
  auto src = tensor_list();
  auto dst = out.tensor_list();
  for (size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<U>();
  return out;
}

// ---------------------------------------------------------------------------
// forward

inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
T gelu_scalar(T x) {
  return x * T(0.5) * (T(1) + std::erf(x * T(M_SQRT1_2)));
}

template <typename T>
T gelu_grad_scalar(T x) {
  const T phi = T(0.5) * (T(1) + std::erf(x * T(M_SQRT1_2)));
  const T pdf = std::exp(T(-0.5) * x * x) * T(0.3989422804014326779);
  return phi + x * pdf;
}

template <typename T>
struct EncoderCache {
  Matrix<T> xp;      // n×d_max padded inputs (embed backward needs them)
  Matrix<T> tokens;  // n×m
  struct Layer {
    Matrix<T> x_in;        // block input
    Matrix<T> xhat1;       // ln1 normalized (pre gain/shift)
    Vector<T> rs1;         // per-row 1/std
    Matrix<T> a;           // ln1 output
    Matrix<T> q, k, v;     // n×m
    std::vector<Matrix<T>> attn;  // per-head row softmax, n×n
    Matrix<T> o;           // concatenated head outputs
    Matrix<T> x_mid;       // after attention residual
    Matrix<T> xhat2;
    Vector<T> rs2;
    Matrix<T> b;           // ln2 output
    Matrix<T> f1;          // ff preactivation, n×ff
    Matrix<T> g;           // gelu(f1)
  };
  std::vector<Layer> layers;
  Matrix<T> h;                    // final hidden states
  Vector<T> e;                    // pooled embedding, N*m
  std::vector<int> class_counts;  // per slot
  Vector<T> zc;                   // decoder hidden preactivation
  Vector<T> act;                  // relu(zc)
  Vector<T> phi;
};

template <typename T>
Matrix<T> embed_tokens(const TransformerWeights<T>& w, const Matrix<T>& xp,
                       const std::vector<int32_t>& y) {
  const int N = w.child.n_class_slots;
  if (xp.cols() != w.child.d_max) throw ShapeError("embed: rows must be padded to d_max");
  if (static_cast<Eigen::Index>(y.size()) != xp.rows()) throw ShapeError("embed: label count mismatch");
  if (!xp.allFinite()) throw NumericError("embed: non-finite input");
  Matrix<T> tok = (xp * w.input_w.transpose()).rowwise() + w.input_b.col(0).transpose();
  for (Eigen::Index i = 0; i < tok.rows(); ++i) {
    const int32_t label = y[static_cast<size_t>(i)];
    if (label < 0 || label >= N) throw ShapeError("embed: label outside class-slot range");
    tok.row(i) += w.label_w.col(label).transpose();
  }
  return tok;
}

namespace detail {

// y = gain ⊙ (x-mean)/std + shift, per row; returns normalized rows and
// reciprocal stds for the backward pass.
template <typename T>
Matrix<T> layernorm_rows(const Matrix<T>& x, const Matrix<T>& gain, const Matrix<T>& shift,
                         Matrix<T>& xhat, Vector<T>& rs) {
  const Eigen::Index n = x.rows(), m = x.cols();
  xhat.resize(n, m);
  rs.resize(n);
  Matrix<T> out(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mu = x.row(i).mean();
    const T var = (x.row(i).array() - mu).square().sum() / static_cast<T>(m);
    const T r = T(1) / std::sqrt(var + T(kLayerNormEps));
    rs(i) = r;
    xhat.row(i) = ((x.row(i).array() - mu) * r).matrix();
    out.row(i) = (xhat.row(i).array() * gain.col(0).transpose().array() +
                  shift.col(0).transpose().array())
                     .matrix();
  }
  return out;
}

// Accumulates gain/shift gradients and returns the input gradient.
template <typename T>
Matrix<T> layernorm_backward(const Matrix<T>& dout, const Matrix<T>& xhat, const Vector<T>& rs,
                             const Matrix<T>& gain, Matrix<T>& dgain, Matrix<T>& dshift) {
  const Eigen::Index n = dout.rows(), m = dout.cols();
  dgain.col(0) += (dout.array() * xhat.array()).colwise().sum().transpose().matrix();
  dshift.col(0) += dout.colwise().sum().transpose();
  Matrix<T> dx(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto dxhat = (dout.row(i).array() * gain.col(0).transpose().array()).eval();
    const T mean_dxhat = dxhat.mean();
    const T mean_dxhat_xhat = (dxhat * xhat.row(i).array()).mean();
    dx.row(i) =
        ((dxhat - mean_dxhat - xhat.row(i).array() * mean_dxhat_xhat) * rs(i)).matrix();
  }
  return dx;
}

}  // namespace detail

// Full unmasked self-attention among the training tokens; order information
// never enters, so the rows are permutation-equivariant.
template <typename T>
Matrix<T> transformer_forward(const TransformerWeights<T>& w, const Matrix<T>& tokens,
                              EncoderCache<T>* cache) {
  if (!tokens.allFinite()) throw NumericError("transformer: non-finite tokens");
  if (tokens.cols() != w.enc.embed_dim) throw ShapeError("transformer: token width mismatch");
  transformer_forward_count().fetch_add(1, std::memory_order_relaxed);
  const Eigen::Index n = tokens.rows();
  const int m = w.enc.embed_dim;
  const int heads = w.enc.heads;
  const int hd = m / heads;
  const T inv_sqrt_hd = T(1) / std::sqrt(static_cast<T>(hd));

  if (cache) cache->layers.resize(w.layers.size());
  Matrix<T> x = tokens;
  for (size_t li = 0; li < w.layers.size(); ++li) {
    const auto& l = w.layers[li];
    typename EncoderCache<T>::Layer* cl = cache ? &cache->layers[li] : nullptr;
    Matrix<T> xhat1;
    Vector<T> rs1;
    const Matrix<T> a = detail::layernorm_rows(x, l.ln1_g, l.ln1_b, xhat1, rs1);
    const Matrix<T> q = (a * l.wq.transpose()).rowwise() + l.bq.col(0).transpose();
    const Matrix<T> k = (a * l.wk.transpose()).rowwise() + l.bk.col(0).transpose();
    const Matrix<T> v = (a * l.wv.transpose()).rowwise() + l.bv.col(0).transpose();

    Matrix<T> o(n, m);
    std::vector<Matrix<T>> probs;
    if (cl) probs.resize(static_cast<size_t>(heads));
    for (int hh = 0; hh < heads; ++hh) {
      const auto qh = q.middleCols(hh * hd, hd);
      const auto kh = k.middleCols(hh * hd, hd);
      const auto vh = v.middleCols(hh * hd, hd);
      Matrix<T> s = qh * kh.transpose() * inv_sqrt_hd;  // n×n
      for (Eigen::Index i = 0; i < n; ++i) {
        const T mx = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - mx).exp();
        s.row(i) /= s.row(i).sum();
      }
      o.middleCols(hh * hd, hd) = s * vh;
      if (cl) probs[static_cast<size_t>(hh)] = std::move(s);
    }
    const Matrix<T> attn_out = (o * l.wo.transpose()).rowwise() + l.bo.col(0).transpose();
    Matrix<T> x_mid = x + attn_out;

    Matrix<T> xhat2;
    Vector<T> rs2;
    const Matrix<T> b = detail::layernorm_rows(x_mid, l.ln2_g, l.ln2_b, xhat2, rs2);
    const Matrix<T> f1 = (b * l.ff_w1.transpose()).rowwise() + l.ff_b1.col(0).transpose();
    Matrix<T> g(n, f1.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = gelu_scalar(f1(i, j));
    }
    const Matrix<T> f2 = (g * l.ff_w2.transpose()).rowwise() + l.ff_b2.col(0).transpose();

    if (cl) {
      cl->x_in = std::move(x);
      cl->xhat1 = std::move(xhat1);
      cl->rs1 = std::move(rs1);
      cl->a = a;
      cl->q = q;
      cl->k = k;
      cl->v = v;
      cl->attn = std::move(probs);
      cl->o = std::move(o);
      cl->x_mid = x_mid;
      cl->xhat2 = std::move(xhat2);
      cl->rs2 = std::move(rs2);
      cl->b = b;
      cl->f1 = f1;
      cl->g = g;
    }
    x = std::move(x_mid);
    x += f2;
  }
  return x;
}

// Mean of hidden states per class slot; absent classes stay exactly zero.
template <typename T>
Vector<T> class_average_pool(const Matrix<T>& h, const std::vector<int32_t>& y, int n_slots,
                             std::vector<int>* counts_out = nullptr) {
  const Eigen::Index m = h.cols();
  if (static_cast<Eigen::Index>(y.size()) != h.rows()) throw ShapeError("pool: label count mismatch");
  Vector<T> e = Vector<T>::Zero(static_cast<Eigen::Index>(n_slots) * m);
  std::vector<int> counts(static_cast<size_t>(n_slots), 0);
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    const int32_t label = y[static_cast<size_t>(i)];
    if (label < 0 || label >= n_slots) throw ShapeError("pool: label outside slot range");
    e.segment(label * m, m) += h.row(i).transpose();
    counts[static_cast<size_t>(label)] += 1;
  }
  for (int k = 0; k < n_slots; ++k) {
    if (counts[static_cast<size_t>(k)] > 0) {
      e.segment(k * m, m) /= static_cast<T>(counts[static_cast<size_t>(k)]);
    }
  }
  if (counts_out) *counts_out = std::move(counts);
  return e;
}

template <typename T>
Vector<T> decode_phi(const TransformerWeights<T>& w, const Vector<T>& e,
                     Vector<T>* zc_out = nullptr, Vector<T>* act_out = nullptr) {
  if (e.size() != w.dec_w1.cols()) throw ShapeError("decode: pooled embedding size mismatch");
  Vector<T> zc = w.dec_w1 * e + w.dec_b1.col(0);
  Vector<T> act = zc.array().max(T(0)).matrix();
  Vector<T> phi = w.dec_w2 * act + w.dec_b2.col(0);
  if (zc_out) *zc_out = std::move(zc);
  if (act_out) *act_out = std::move(act);
  return phi;
}

// Padded rows + labels -> phi. With a cache, everything needed for the
// backward pass is retained; without one, memory stays flat.
template <typename T>
Vector<T> encode_phi(const TransformerWeights<T>& w, const Matrix<T>& xp,
                     const std::vector<int32_t>& y, EncoderCache<T>* cache = nullptr) {
  Matrix<T> tokens = embed_tokens(w, xp, y);
  if (cache) {
    cache->xp = xp;
    cache->tokens = tokens;
  }
  Matrix<T> h = transformer_forward(w, tokens, cache);
  std::vector<int> counts;
  Vector<T> e = class_average_pool(h, y, w.child.n_class_slots, &counts);
  Vector<T> zc, act;
  Vector<T> phi = decode_phi(w, e, &zc, &act);
  if (cache) {
    cache->h = std::move(h);
    cache->e = e;
    cache->class_counts = std::move(counts);
    cache->zc = std::move(zc);
    cache->act = std::move(act);
    cache->phi = phi;
  }
  return phi;
}

// Reverse pass for encode_phi: scatters d(loss)/d(phi) back through decoder,
// pooling, transformer layers and the embedding, accumulating parameter
// gradients into `grad` (which must share the forward configuration).
template <typename T>
void encode_phi_backward(const TransformerWeights<T>& w, const EncoderCache<T>& cache,
                         const std::vector<int32_t>& y, const Vector<T>& dphi,
                         TransformerWeights<T>& grad) {
  const Eigen::Index n = cache.tokens.rows();
  const int m = w.enc.embed_dim;
  const int heads = w.enc.heads;
  const int hd = m / heads;
  const T inv_sqrt_hd = T(1) / std::sqrt(static_cast<T>(hd));

  // decoder
  grad.dec_w2 += dphi * cache.act.transpose();
  grad.dec_b2.col(0) += dphi;
  Vector<T> dact = w.dec_w2.transpose() * dphi;
  Vector<T> dzc = (dact.array() * (cache.zc.array() > T(0)).template cast<T>()).matrix();
  grad.dec_w1 += dzc * cache.e.transpose();
  grad.dec_b1.col(0) += dzc;
  Vector<T> de = w.dec_w1.transpose() * dzc;

  // class-average pooling
  Matrix<T> dx = Matrix<T>::Zero(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int32_t label = y[static_cast<size_t>(i)];
    dx.row(i) = de.segment(label * m, m).transpose() /
                static_cast<T>(cache.class_counts[static_cast<size_t>(label)]);
  }

  // transformer layers, reversed
  for (int li = static_cast<int>(w.layers.size()) - 1; li >= 0; --li) {
    const auto& l = w.layers[static_cast<size_t>(li)];
    auto& gl = grad.layers[static_cast<size_t>(li)];
    const auto& cl = cache.layers[static_cast<size_t>(li)];

    // x_out = x_mid + ff(ln2(x_mid))
    const Matrix<T>& df2 = dx;
    gl.ff_w2 += df2.transpose() * cl.g;
    gl.ff_b2.col(0) += df2.colwise().sum().transpose();
    Matrix<T> dg = df2 * l.ff_w2;
    Matrix<T> df1(dg.rows(), dg.cols());
    for (Eigen::Index i = 0; i < df1.rows(); ++i) {
      for (Eigen::Index j = 0; j < df1.cols(); ++j) {
        df1(i, j) = dg(i, j) * gelu_grad_scalar(cl.f1(i, j));
      }
    }
    gl.ff_w1 += df1.transpose() * cl.b;
    gl.ff_b1.col(0) += df1.colwise().sum().transpose();
    Matrix<T> db = df1 * l.ff_w1;
    Matrix<T> dx_mid = dx;  // residual branch
    dx_mid += detail::layernorm_backward(db, cl.xhat2, cl.rs2, l.ln2_g, gl.ln2_g, gl.ln2_b);

    // x_mid = x_in + wo(attention(ln1(x_in)))
    const Matrix<T>& dattn_out = dx_mid;
    gl.wo += dattn_out.transpose() * cl.o;
    gl.bo.col(0) += dattn_out.colwise().sum().transpose();
    Matrix<T> do_ = dattn_out * l.wo;

    Matrix<T> dq(n, m), dk(n, m), dv(n, m);
    for (int hh = 0; hh < heads; ++hh) {
      const auto& p = cl.attn[static_cast<size_t>(hh)];
      const auto doh = do_.middleCols(hh * hd, hd);
      const auto vh = cl.v.middleCols(hh * hd, hd);
      const auto qh = cl.q.middleCols(hh * hd, hd);
      const auto kh = cl.k.middleCols(hh * hd, hd);
      Matrix<T> dp = doh * vh.transpose();           // n×n
      dv.middleCols(hh * hd, hd) = p.transpose() * doh;
      Matrix<T> ds(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const T dot = dp.row(i).cwiseProduct(p.row(i)).sum();
        ds.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
      }
      dq.middleCols(hh * hd, hd) = ds * kh * inv_sqrt_hd;
      dk.middleCols(hh * hd, hd) = ds.transpose() * qh * inv_sqrt_hd;
    }

    gl.wq += dq.transpose() * cl.a;
    gl.bq.col(0) += dq.colwise().sum().transpose();
    gl.wk += dk.transpose() * cl.a;
    gl.bk.col(0) += dk.colwise().sum().transpose();
    gl.wv += dv.transpose() * cl.a;
    gl.bv.col(0) += dv.colwise().sum().transpose();
    Matrix<T> da = dq * l.wq + dk * l.wk + dv * l.wv;
    Matrix<T> dx_in = dx_mid;  // residual branch
    dx_in += detail::layernorm_backward(da, cl.xhat1, cl.rs1, l.ln1_g, gl.ln1_g, gl.ln1_b);
    dx = std::move(dx_in);
  }

  // embedding
  grad.input_w += dx.transpose() * cache.xp;
  grad.input_b.col(0) += dx.colwise().sum().transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    grad.label_w.col(y[static_cast<size_t>(i)]) += dx.row(i).transpose();
  }
}

}  // namespace mothernet
