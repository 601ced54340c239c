#include "mothernet/meta_train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mothernet/checkpoint.hpp"

namespace mothernet {

void TrainConfig::validate() const {
  if (total_steps < 1) throw ShapeError("train config: total_steps must be positive");
  if (base_lr < 0 || lr_floor < 0 || lr_floor > base_lr) {
    throw ShapeError("train config: need 0 <= lr_floor <= base_lr");
  }
  if (cosine_horizon < 0) throw ShapeError("train config: negative cosine horizon");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1 || adam_eps <= 0) {
    throw ShapeError("train config: bad Adam constants");
  }
  if (checkpoint_every < 0) throw ShapeError("train config: negative checkpoint interval");
  int prev_step = -1;
  for (const auto& [start, size] : batch_schedule) {
    if (start <= prev_step) throw ShapeError("train config: batch schedule must be ascending");
    if (size < 1) throw ShapeError("train config: batch sizes must be positive");
    prev_step = start;
  }
  if (!batch_schedule.empty() && batch_schedule.front().first != 0) {
    throw ShapeError("train config: batch schedule must start at step 0");
  }
}

std::vector<std::pair<int, int>> TrainConfig::resolved_schedule() const {
  if (!batch_schedule.empty()) return batch_schedule;
  const int third = total_steps / 3;
  std::vector<std::pair<int, int>> s;
  s.emplace_back(0, 8);
  if (third > 0) {
    s.emplace_back(third, 16);
    s.emplace_back(2 * third, 32);
  }
  return s;
}

double cosine_lr(int step, double base_lr, int horizon, double floor_lr) {
  if (horizon < 1) throw ShapeError("cosine_lr: horizon must be positive");
  const double s = std::min(std::max(step, 0), horizon);
  const double cos01 = 0.5 * (1.0 + std::cos(M_PI * s / static_cast<double>(horizon)));
  return floor_lr + (base_lr - floor_lr) * cos01;
}

int batch_size_at(const std::vector<std::pair<int, int>>& schedule, int step) {
  if (schedule.empty()) throw ShapeError("batch_size_at: empty schedule");
  int size = schedule.front().second;
  for (const auto& [start, s] : schedule) {
    if (step >= start) size = s;
  }
  return size;
}

double global_grad_norm(const TransformerWeights<float>& g) {
  double sq = 0.0;
  for (const MatrixF* t : g.tensor_list()) {
    for (Eigen::Index i = 0; i < t->rows(); ++i) {
      for (Eigen::Index j = 0; j < t->cols(); ++j) {
        const double v = (*t)(i, j);
        sq += v * v;
      }
    }
  }
  return std::sqrt(sq);
}

void clip_global_norm(TransformerWeights<float>& g, double max_norm) {
  if (max_norm <= 0) return;
  const double norm = global_grad_norm(g);
  if (norm <= max_norm) return;
  const float scale = static_cast<float>(max_norm / norm);
  for (MatrixF* t : g.tensor_list()) *t *= scale;
}

void adam_step(TransformerWeights<float>& w, const TransformerWeights<float>& grad, AdamState& s,
               double lr, double beta1, double beta2, double eps) {
  s.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(s.t));
  auto wt = w.tensor_list();
  auto gt = grad.tensor_list();
  auto mt = s.m.tensor_list();
  auto vt = s.v.tensor_list();
  const float b1 = static_cast<float>(beta1), b2 = static_cast<float>(beta2);
  for (size_t k = 0; k < wt.size(); ++k) {
    MatrixF& m = *mt[k];
    MatrixF& v = *vt[k];
    const MatrixF& g = *gt[k];
    m = b1 * m + (1.f - b1) * g;
    v = (b2 * v.array() + (1.f - b2) * g.array().square()).matrix();
    const auto mhat = m.array() / static_cast<float>(bc1);
    const auto vhat = v.array() / static_cast<float>(bc2);
    wt[k]->array() -= static_cast<float>(lr) * mhat / (vhat.sqrt() + static_cast<float>(eps));
  }
}

namespace {

bool all_finite(const TransformerWeights<float>& w) {
  for (const MatrixF* t : w.tensor_list()) {
    if (!t->allFinite()) return false;
  }
  return true;
}

SyntheticTask draw_task(const PriorConfig& prior, Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    try {
      return sample_task(prior, rng);
    } catch (const DegenerateTaskError&) {
      // extraordinarily unlucky draw; move on to the next one
    }
  }
  throw DegenerateTaskError("prior produced 1000 degenerate tasks in a row");
}

}  // namespace

float train_step(TransformerWeights<float>& w, const std::vector<SyntheticTask>& batch,
                 AdamState& adam, const TrainConfig& cfg, double lr) {
  if (batch.empty()) throw ShapeError("train_step: empty batch");
  auto grad = TransformerWeights<float>::zeros(w.enc, w.child);
  float loss = 0.f;
  for (const SyntheticTask& task : batch) {
    loss += task_loss(w, task, &grad);
  }
  const float inv = 1.f / static_cast<float>(batch.size());
  loss *= inv;
  for (MatrixF* t : grad.tensor_list()) *t *= inv;
  if (!std::isfinite(loss) || !all_finite(grad)) {
    throw DivergenceError("non-finite loss or gradient");
  }
  clip_global_norm(grad, cfg.grad_clip);
  adam_step(w, grad, adam, lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
  return loss;
}

TrainResult meta_train(const EncoderConfig& enc, const ChildConfig& child,
                       const PriorConfig& prior, const TrainConfig& cfg,
                       const std::string& out_dir,
                       const std::function<void(const StepLog&)>& on_step) {
  cfg.validate();
  prior.validate();
  if (prior.max_features > child.d_max) {
    throw ShapeError("meta_train: prior features exceed the child feature budget");
  }
  if (prior.max_classes > child.n_class_slots) {
    throw ShapeError("meta_train: prior classes exceed the child class slots");
  }

  std::ofstream log_os;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log_os.open(out_dir + "/train_log.jsonl", std::ios::trunc);
    if (!log_os) throw FormatError("cannot open training log in '" + out_dir + "'");
  }

  Rng rng(cfg.seed);
  auto w = TransformerWeights<float>::init_training(enc, child, rng);
  AdamState adam = AdamState::zeros(enc, child);
  const auto schedule = cfg.resolved_schedule();
  const int horizon = cfg.cosine_horizon > 0 ? cfg.cosine_horizon : cfg.total_steps;

  TrainResult result;
  result.log.reserve(static_cast<size_t>(cfg.total_steps));
  for (int step = 0; step < cfg.total_steps; ++step) {
    const int batch_size = batch_size_at(schedule, step);
    const double lr = cosine_lr(step, cfg.base_lr, horizon, cfg.lr_floor);
    std::vector<SyntheticTask> batch;
    batch.reserve(static_cast<size_t>(batch_size));
    for (int b = 0; b < batch_size; ++b) batch.push_back(draw_task(prior, rng));

    float loss;
    try {
      loss = train_step(w, batch, adam, cfg, lr);
    } catch (const DivergenceError&) {
      throw DivergenceError("training diverged at step " + std::to_string(step) +
                            "; the last checkpoint on disk is intact");
    }

    const StepLog entry{step, lr, batch_size, static_cast<double>(loss)};
    result.log.push_back(entry);
    if (on_step) on_step(entry);
    if (log_os) {
      nlohmann::json j{{"step", entry.step}, {"lr", entry.lr}, {"batch", entry.batch},
                       {"loss", entry.loss}};
      log_os << j.dump() << '\n';
    }
    if (!out_dir.empty() && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) {
      save_checkpoint(w, out_dir + "/ckpt_" + std::to_string(step + 1) + ".mnck");
      log_os.flush();
    }
  }
  if (!out_dir.empty()) save_checkpoint(w, out_dir + "/final.mnck");
  result.weights = std::move(w);
  return result;
}

GradCheckReport gradcheck_encoder(uint64_t seed, int coords_per_tensor, double fd_step,
                                  double rel_tol, double abs_floor) {
  Rng rng(seed);
  auto w =
      TransformerWeights<double>::init_random(EncoderConfig::tiny(), tiny_child(), rng, 0.1);
  PriorConfig prior;
  prior.max_features = 6;
  prior.max_classes = 3;
  prior.max_rows = 32;
  SyntheticTask task = sample_task(prior, rng);

  auto grad = TransformerWeights<double>::zeros(w.enc, w.child);
  task_loss(w, task, &grad);

  GradCheckReport report;
  double abs_err_sum = 0.0;
  auto tensors = w.tensor_list();
  auto grads = grad.tensor_list();
  const auto names = w.named_tensors();
  for (size_t k = 0; k < tensors.size(); ++k) {
    Matrix<double>& t = *tensors[k];
    std::vector<std::pair<Eigen::Index, Eigen::Index>> coords;
    if (coords_per_tensor <= 0 || coords_per_tensor >= t.size()) {
      for (Eigen::Index i = 0; i < t.rows(); ++i) {
        for (Eigen::Index j = 0; j < t.cols(); ++j) coords.emplace_back(i, j);
      }
    } else {
      std::uniform_int_distribution<Eigen::Index> ri(0, t.rows() - 1), ci(0, t.cols() - 1);
      for (int s = 0; s < coords_per_tensor; ++s) coords.emplace_back(ri(rng), ci(rng));
    }
    for (const auto& [i, j] : coords) {
      const double orig = t(i, j);
      t(i, j) = orig + fd_step;
      const double lp = task_loss(w, task);
      t(i, j) = orig - fd_step;
      const double lm = task_loss(w, task);
      t(i, j) = orig;
      const double numeric = (lp - lm) / (2.0 * fd_step);
      const double analytic = (*grads[k])(i, j);
      const double abs_err = std::abs(analytic - numeric);
      const double scale = std::max(std::abs(analytic), std::abs(numeric));
      report.checked += 1;
      abs_err_sum += abs_err;
      const bool ok = abs_err <= rel_tol * scale || abs_err <= abs_floor;
      const double rel = abs_err > abs_floor && scale > 0 ? abs_err / scale : 0.0;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_tensor = names[k].first;
        report.worst_row = static_cast<int>(i);
        report.worst_col = static_cast<int>(j);
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
      if (!ok) report.failed += 1;
    }
  }
  report.mean_abs_err = report.checked > 0 ? abs_err_sum / report.checked : 0.0;
  return report;
}

}  // namespace mothernet
