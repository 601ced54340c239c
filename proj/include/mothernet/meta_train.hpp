// Meta-training: sample synthetic tasks, push each training half through the
// hypernetwork, score the generated child on the held-out half, and follow
// the averaged gradient with Adam under a cosine learning-rate schedule.
// Everything is sampled and reduced in a fixed order, so a (seed, config)
// pair reproduces the same weights bit for bit.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mothernet/encoder.hpp"
#include "mothernet/prior.hpp"

namespace mothernet {

struct TrainConfig {
  int total_steps = 20000;
  double base_lr = 3e-5;
  double lr_floor = 0.0;
  int cosine_horizon = 0;  // 0: use total_steps
  // (first_step, batch_size) milestones, ascending; empty selects the default
  // ramp 8 / 16 / 32 over equal thirds of the run.
  std::vector<std::pair<int, int>> batch_schedule;
  double grad_clip = 1.0;  // global-norm ceiling; <= 0 disables
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int checkpoint_every = 0;  // extra periodic checkpoints when > 0
  uint64_t seed = 1;

  void validate() const;
  std::vector<std::pair<int, int>> resolved_schedule() const;
};

// Cosine decay from base_lr to floor_lr across `horizon` steps, flat at the
// floor afterwards.
double cosine_lr(int step, double base_lr, int horizon, double floor_lr = 0.0);

int batch_size_at(const std::vector<std::pair<int, int>>& schedule, int step);

// Loss of one task: the child generated from the training half, scored with
// mean cross-entropy on the held-out half. With `grad`, accumulates d(loss)
// w.r.t. every hypernetwork tensor into it.
template <typename T>
T task_loss(const TransformerWeights<T>& w, const SyntheticTask& task,
            TransformerWeights<T>* grad = nullptr) {
  const int f = static_cast<int>(task.train.X.cols());
  const int c = task.train.n_classes;
  const Matrix<T> xp_train = pad_and_scale<T>(task.train.X.cast<T>());
  EncoderCache<T> cache;
  const Vector<T> phi = encode_phi(w, xp_train, task.train.y, grad ? &cache : nullptr);
  const ChildNetwork<T> net = assemble_child(phi, w.wf1, w.wf2, f, c, w.child);
  const Matrix<T> x_test = pad_and_scale<T>(task.test.X.cast<T>()).leftCols(f);
  if (!grad) return child_loss_and_grads<T>(net, x_test, task.test.y, nullptr);

  ChildGrads<T> g;
  const T loss = child_loss_and_grads(net, x_test, task.test.y, &g);
  const Vector<T> dphi = pack_child_grads(g, w.child, c);
  grad->wf1.leftCols(f) += g.wf1;
  grad->wf2 += g.wf2;
  encode_phi_backward(w, cache, task.train.y, dphi, *grad);
  return loss;
}

struct AdamState {
  TransformerWeights<float> m, v;
  int64_t t = 0;

  static AdamState zeros(const EncoderConfig& e, const ChildConfig& c) {
    return AdamState{TransformerWeights<float>::zeros(e, c),
                     TransformerWeights<float>::zeros(e, c), 0};
  }
};

double global_grad_norm(const TransformerWeights<float>& g);
void clip_global_norm(TransformerWeights<float>& g, double max_norm);
void adam_step(TransformerWeights<float>& w, const TransformerWeights<float>& grad, AdamState& s,
               double lr, double beta1, double beta2, double eps);

// One optimizer step over an explicit task batch (mean loss and gradient,
// tasks reduced in order). Returns the batch loss. Throws DivergenceError on
// a non-finite loss or gradient, leaving the weights untouched.
float train_step(TransformerWeights<float>& w, const std::vector<SyntheticTask>& batch,
                 AdamState& adam, const TrainConfig& cfg, double lr);

struct StepLog {
  int step;
  double lr;
  int batch;
  double loss;
};

struct TrainResult {
  TransformerWeights<float> weights;
  std::vector<StepLog> log;
};

// Full meta-training run. With a non-empty out_dir, writes train_log.jsonl,
// periodic checkpoints (ckpt_<step>.mnck) and final.mnck there. On
// divergence the last checkpoint on disk is retained and DivergenceError is
// thrown.
TrainResult meta_train(const EncoderConfig& enc, const ChildConfig& child,
                       const PriorConfig& prior, const TrainConfig& cfg,
                       const std::string& out_dir = "",
                       const std::function<void(const StepLog&)>& on_step = {});

// Central-difference check of the full reverse pass on the float64 minimal
// configuration. Each selected coordinate passes when
// |analytic - numeric| <= rel_tol * max(|analytic|, |numeric|) or the
// difference is below abs_floor. coords_per_tensor <= 0 checks every
// coordinate.
struct GradCheckReport {
  int checked = 0;
  int failed = 0;
  double max_rel_err = 0.0;   // over coords above the absolute floor
  double mean_abs_err = 0.0;
  std::string worst_tensor;
  int worst_row = 0;
  int worst_col = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

GradCheckReport gradcheck_encoder(uint64_t seed, int coords_per_tensor, double fd_step = 1e-4,
                                  double rel_tol = 1e-4, double abs_floor = 1e-7);

}  // namespace mothernet
