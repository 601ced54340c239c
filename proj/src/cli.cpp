#include "mothernet/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mothernet/bench.hpp"
#include "mothernet/checkpoint.hpp"
#include "mothernet/distill.hpp"
#include "mothernet/eval.hpp"
#include "mothernet/inference.hpp"
#include "mothernet/meta_train.hpp"
#include "mothernet/prior.hpp"

namespace mothernet {

namespace {

using nlohmann::json;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

TabularDataset cli_load_dataset(const std::string& path, const std::string& target_column,
                                const std::vector<std::string>& categorical_columns,
                                bool require_target) {
  if (ends_with(path, ".mnds")) return load_mnds(path);
  return load_csv(path, target_column, categorical_columns, require_target);
}

std::vector<std::string> class_names(const TabularDataset& ds, int n_classes) {
  std::vector<std::string> names;
  for (int k = 0; k < n_classes; ++k) {
    if (k < static_cast<int>(ds.label_names.size()) && !ds.label_names[k].empty()) {
      names.push_back(ds.label_names[k]);
    } else {
      names.push_back("class_" + std::to_string(k));
    }
  }
  return names;
}

void write_probs_csv(const std::string& path, const MatrixF& probs,
                     const std::vector<std::string>& names) {
  if (probs.cols() != static_cast<Eigen::Index>(names.size())) {
    throw ShapeError("probability columns do not match the class names");
  }
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  for (size_t k = 0; k < names.size(); ++k) os << "p_" << names[k] << ',';
  os << "prediction\n";
  char buf[32];
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < probs.cols(); ++k) {
      if (probs(i, k) > probs(i, best)) best = k;  // ties keep the lowest index
    }
    for (Eigen::Index k = 0; k < probs.cols(); ++k) {
      std::snprintf(buf, sizeof buf, "%.6f", static_cast<double>(probs(i, k)));
      os << buf << ',';
    }
    os << names[static_cast<size_t>(best)] << '\n';
  }
  if (!os) throw FormatError("short write to " + path);
}

void write_dataset_csv(const TabularDataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  for (Eigen::Index j = 0; j < ds.X.cols(); ++j) os << 'f' << j << ',';
  os << "target\n";
  char buf[32];
  const auto names = class_names(ds, ds.n_classes);
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(ds.X(i, j)));
      os << buf << ',';
    }
    os << names[static_cast<size_t>(ds.y[static_cast<size_t>(i)])] << '\n';
  }
  if (!os) throw FormatError("short write to " + path);
}

void write_manifest(const std::string& path, const std::string& command, const json& options) {
  json j{{"tool", "mothernet"}, {"version", kVersion}, {"command", command},
         {"options", options}};
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os << j.dump(2) << '\n';
}

EncoderConfig preset_encoder(const std::string& preset) {
  if (preset == "desk") return EncoderConfig::desk();
  if (preset == "full") return EncoderConfig::full();
  if (preset == "tiny") return EncoderConfig::tiny();
  throw ShapeError("unknown preset '" + preset + "'");
}

ChildConfig preset_child(const std::string& preset) {
  if (preset == "desk") return desk_child();
  if (preset == "full") return full_child();
  if (preset == "tiny") return tiny_child();
  throw ShapeError("unknown preset '" + preset + "'");
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Hypernetwork for tabular classification: one transformer forward pass "
               "turns a training set into a small ready-to-use classifier."};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "Read options from a TOML file (sections per subcommand)");

  // ---- prior ------------------------------------------------------------
  auto* prior_cmd = app.add_subcommand("prior", "Sample a synthetic task or diagnostic dataset");
  std::string prior_kind = "teacher";
  uint64_t prior_seed = 0;
  std::string prior_out, prior_csv;
  int prior_n = 128, prior_d = 2, prior_c = 2, prior_steps = 3, prior_rank = 2;
  double prior_center = 3.0, prior_noise = 0.5;
  PriorConfig prior_cfg;
  prior_cmd->add_option("--kind", prior_kind, "teacher | step | boolean | blobs")
      ->check(CLI::IsMember({"teacher", "step", "boolean", "blobs"}))
      ->capture_default_str();
  prior_cmd->add_option("--seed", prior_seed, "RNG seed")->capture_default_str();
  prior_cmd->add_option("--out", prior_out, "Output dataset (.mnds)")->required();
  prior_cmd->add_option("--csv", prior_csv, "Also write the dataset as CSV");
  prior_cmd->add_option("--n", prior_n, "Rows (step/blobs)")->capture_default_str();
  prior_cmd->add_option("--d", prior_d, "Features (blobs)")->capture_default_str();
  prior_cmd->add_option("--c", prior_c, "Classes (blobs)")->capture_default_str();
  prior_cmd->add_option("--n-steps", prior_steps, "Steps (step kind)")->capture_default_str();
  prior_cmd->add_option("--rank", prior_rank, "Term rank (boolean kind)")->capture_default_str();
  prior_cmd->add_option("--center-scale", prior_center, "Blob center scale")->capture_default_str();
  prior_cmd->add_option("--noise", prior_noise, "Blob noise scale")->capture_default_str();
  prior_cmd->add_option("--max-features", prior_cfg.max_features, "Teacher prior: feature cap")
      ->capture_default_str();
  prior_cmd->add_option("--max-classes", prior_cfg.max_classes, "Teacher prior: class cap")
      ->capture_default_str();
  prior_cmd->add_option("--max-rows", prior_cfg.max_rows, "Teacher prior: row cap")
      ->capture_default_str();
  prior_cmd->callback([&]() {
    Rng rng(prior_seed);
    TabularDataset ds;
    if (prior_kind == "teacher") {
      SyntheticTask task = sample_task(prior_cfg, rng);
      const Eigen::Index n_train = task.train.X.rows();
      ds = task.train;
      ds.X.conservativeResize(n_train + task.test.X.rows(), Eigen::NoChange);
      ds.X.bottomRows(task.test.X.rows()) = task.test.X;
      ds.y.insert(ds.y.end(), task.test.y.begin(), task.test.y.end());
      ds.missing_mask = Matrix<uint8_t>::Zero(ds.X.rows(), ds.X.cols());
    } else if (prior_kind == "step") {
      ds = gen_step_dataset(prior_steps, prior_n, rng);
    } else if (prior_kind == "boolean") {
      ds = gen_boolean_dataset(prior_rank, rng);
    } else {
      ds = gen_blob_dataset(prior_n, prior_d, prior_c, static_cast<float>(prior_center),
                            static_cast<float>(prior_noise), rng);
    }
    save_mnds(ds, prior_out);
    if (!prior_csv.empty()) write_dataset_csv(ds, prior_csv);
    json opts{{"kind", prior_kind}, {"seed", prior_seed}, {"out", prior_out},
              {"rows", ds.X.rows()}, {"features", ds.X.cols()}, {"classes", ds.n_classes}};
    write_manifest(prior_out + ".manifest.json", "prior", opts);
    std::cout << "wrote " << prior_out << ": " << ds.X.rows() << " rows, " << ds.X.cols()
              << " features, " << ds.n_classes << " classes\n";
  });

  // ---- meta-train ---------------------------------------------------------
  auto* train_cmd = app.add_subcommand("meta-train", "Meta-train the hypernetwork on the prior");
  std::string train_preset = "desk";
  std::string train_out_dir;
  TrainConfig train_cfg;
  PriorConfig train_prior;
  int log_every = 100;
  std::vector<std::string> schedule_items;
  train_cmd->add_option("--preset", train_preset, "desk | tiny | full")
      ->check(CLI::IsMember({"desk", "tiny", "full"}))
      ->capture_default_str();
  train_cmd->add_option("--out-dir", train_out_dir, "Run directory")->required();
  train_cmd->add_option("--steps", train_cfg.total_steps, "Optimizer steps")->capture_default_str();
  train_cmd->add_option("--base-lr", train_cfg.base_lr, "Peak learning rate")->capture_default_str();
  train_cmd->add_option("--lr-floor", train_cfg.lr_floor, "Cosine floor")->capture_default_str();
  train_cmd->add_option("--horizon", train_cfg.cosine_horizon, "Cosine horizon (0 = steps)")
      ->capture_default_str();
  train_cmd->add_option("--grad-clip", train_cfg.grad_clip, "Global-norm clip (<=0 off)")
      ->capture_default_str();
  train_cmd->add_option("--seed", train_cfg.seed, "RNG seed")->capture_default_str();
  train_cmd->add_option("--checkpoint-every", train_cfg.checkpoint_every,
                        "Periodic checkpoint interval (0 = final only)")
      ->capture_default_str();
  train_cmd
      ->add_option("--batch-schedule", schedule_items,
                   "step:size milestones (default 8/16/32 over thirds)")
      ->delimiter(',');
  train_cmd->add_option("--max-features", train_prior.max_features, "Prior feature cap")
      ->capture_default_str();
  train_cmd->add_option("--max-classes", train_prior.max_classes, "Prior class cap")
      ->capture_default_str();
  train_cmd->add_option("--max-rows", train_prior.max_rows, "Prior row cap")->capture_default_str();
  train_cmd->add_option("--teacher-hidden", train_prior.teacher_hidden, "Prior teacher width")
      ->capture_default_str();
  train_cmd->add_option("--noise", train_prior.noise_scale, "Prior label noise")
      ->capture_default_str();
  train_cmd->add_option("--log-every", log_every, "Progress print interval")->capture_default_str();
  train_cmd->callback([&]() {
    for (const std::string& item : schedule_items) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        throw ShapeError("bad --batch-schedule item '" + item + "', expected step:size");
      }
      train_cfg.batch_schedule.emplace_back(std::stoi(item.substr(0, colon)),
                                            std::stoi(item.substr(colon + 1)));
    }
    const EncoderConfig enc = preset_encoder(train_preset);
    const ChildConfig child = preset_child(train_preset);
    json opts{{"preset", train_preset},
              {"steps", train_cfg.total_steps},
              {"base_lr", train_cfg.base_lr},
              {"lr_floor", train_cfg.lr_floor},
              {"grad_clip", train_cfg.grad_clip},
              {"seed", train_cfg.seed},
              {"checkpoint_every", train_cfg.checkpoint_every},
              {"prior",
               {{"max_features", train_prior.max_features},
                {"max_classes", train_prior.max_classes},
                {"max_rows", train_prior.max_rows},
                {"teacher_hidden", train_prior.teacher_hidden},
                {"noise_scale", train_prior.noise_scale}}},
              {"parameters", TransformerWeights<float>::zeros(enc, child).parameter_count()}};
    std::filesystem::create_directories(train_out_dir);
    write_manifest(train_out_dir + "/manifest.json", "meta-train", opts);
    auto progress = [&](const StepLog& s) {
      if (log_every > 0 && (s.step % log_every == 0 || s.step + 1 == train_cfg.total_steps)) {
        std::printf("step %6d  lr %.3e  batch %2d  loss %.4f\n", s.step, s.lr, s.batch, s.loss);
        std::fflush(stdout);
      }
    };
    meta_train(enc, child, train_prior, train_cfg, train_out_dir, progress);
    std::cout << "final weights: " << train_out_dir << "/final.mnck\n";
  });

  // ---- icl ----------------------------------------------------------------
  auto* icl_cmd =
      app.add_subcommand("icl", "Fit in context on a training set and predict a test set");
  std::string icl_weights, icl_train, icl_test, icl_out = "probs.csv";
  std::string icl_target = "target";
  std::vector<std::string> icl_categorical;
  int icl_k = 8;
  uint64_t icl_seed = 0;
  icl_cmd->add_option("--weights", icl_weights, "Checkpoint (.mnck)")->required();
  icl_cmd->add_option("--train", icl_train, "Training data (.csv or .mnds)")->required();
  icl_cmd->add_option("--test", icl_test, "Rows to predict (.csv or .mnds)")->required();
  icl_cmd->add_option("--out", icl_out, "Probability CSV")->capture_default_str();
  icl_cmd->add_option("--target-column", icl_target, "Label column in CSV input")
      ->capture_default_str();
  icl_cmd->add_option("--categorical", icl_categorical, "Categorical column names")->delimiter(',');
  icl_cmd->add_option("--ensemble", icl_k, "Ensemble members")->capture_default_str();
  icl_cmd->add_option("--seed", icl_seed, "Ensemble seed")->capture_default_str();
  icl_cmd->callback([&]() {
    const auto w = load_checkpoint(icl_weights);
    const TabularDataset train = cli_load_dataset(icl_train, icl_target, icl_categorical, true);
    const TabularDataset test = cli_load_dataset(icl_test, icl_target, icl_categorical, false);
    if (test.X.cols() != train.X.cols()) {
      throw ShapeError("train and test disagree on feature count");
    }
    const EnsembleModel model = fit_ensemble(w, train, icl_k, icl_seed);
    const MatrixF probs = model.predict_proba(test.X);
    write_probs_csv(icl_out, probs, class_names(train, train.n_classes));
    json opts{{"weights", icl_weights}, {"train", icl_train}, {"test", icl_test},
              {"ensemble", icl_k},      {"seed", icl_seed},   {"out", icl_out}};
    write_manifest(icl_out + ".manifest.json", "icl", opts);
    std::cout << "wrote " << icl_out << " (" << probs.rows() << " rows)\n";
  });

  // ---- export-child ---------------------------------------------------------
  auto* export_cmd =
      app.add_subcommand("export-child", "Fit in context and save the child network");
  std::string exp_weights, exp_train, exp_out = "child.mnch", exp_json;
  std::string exp_target = "target";
  std::vector<std::string> exp_categorical;
  export_cmd->add_option("--weights", exp_weights, "Checkpoint (.mnck)")->required();
  export_cmd->add_option("--train", exp_train, "Training data (.csv or .mnds)")->required();
  export_cmd->add_option("--out", exp_out, "Child container (.mnch)")->capture_default_str();
  export_cmd->add_option("--json", exp_json, "Also dump the child as JSON");
  export_cmd->add_option("--target-column", exp_target, "Label column in CSV input")
      ->capture_default_str();
  export_cmd->add_option("--categorical", exp_categorical, "Categorical column names")
      ->delimiter(',');
  export_cmd->callback([&]() {
    const auto w = load_checkpoint(exp_weights);
    const TabularDataset train = cli_load_dataset(exp_train, exp_target, exp_categorical, true);
    const ChildNetwork<float> child = icl_fit(w, train);
    export_child(child, exp_out);
    if (!exp_json.empty()) {
      std::ofstream os(exp_json);
      if (!os) throw FormatError("cannot open " + exp_json + " for writing");
      os << child_debug_json(child) << '\n';
    }
    json opts{{"weights", exp_weights}, {"train", exp_train}, {"out", exp_out},
              {"features", child.f},    {"classes", child.c}};
    write_manifest(exp_out + ".manifest.json", "export-child", opts);
    std::cout << "wrote " << exp_out << " (f=" << child.f << ", c=" << child.c << ")\n";
  });

  // ---- predict ---------------------------------------------------------------
  auto* predict_cmd = app.add_subcommand("predict", "Predict with a saved child or student");
  std::string pred_model, pred_data, pred_out = "probs.csv";
  std::string pred_target = "target";
  std::vector<std::string> pred_categorical;
  predict_cmd->add_option("--model", pred_model, "Model container (.mnch)")->required();
  predict_cmd->add_option("--data", pred_data, "Rows to predict (.csv or .mnds)")->required();
  predict_cmd->add_option("--out", pred_out, "Probability CSV")->capture_default_str();
  predict_cmd->add_option("--target-column", pred_target, "Label column if present")
      ->capture_default_str();
  predict_cmd->add_option("--categorical", pred_categorical, "Categorical column names")
      ->delimiter(',');
  predict_cmd->callback([&]() {
    const TabularDataset data = cli_load_dataset(pred_data, pred_target, pred_categorical, false);
    MatrixF probs;
    const uint8_t kind = peek_child_kind(pred_model);
    if (kind == 0) {
      const ChildNetwork<float> child = import_child(pred_model);
      probs = predict_proba_raw(child, data.X);
    } else if (kind == 1) {
      const DenseMlpF student = import_dense(pred_model);
      probs = student.predict_proba(data.X);
    } else {
      throw FormatError(pred_model + ": unknown model kind " + std::to_string(kind));
    }
    std::vector<std::string> names;
    for (Eigen::Index k = 0; k < probs.cols(); ++k) names.push_back("class_" + std::to_string(k));
    write_probs_csv(pred_out, probs, names);
    json opts{{"model", pred_model}, {"data", pred_data}, {"out", pred_out},
              {"model_kind", kind}};
    write_manifest(pred_out + ".manifest.json", "predict", opts);
    std::cout << "wrote " << pred_out << " (" << probs.rows() << " rows)\n";
  });

  // ---- distill -----------------------------------------------------------------
  auto* distill_cmd =
      app.add_subcommand("distill", "Distill an ensembled in-context fit into a dense MLP");
  std::string dis_weights, dis_train, dis_out = "student.mnch", dis_losses;
  std::string dis_target = "target";
  std::vector<std::string> dis_categorical;
  int dis_k = 8;
  uint64_t dis_seed = 0;
  DistillConfig dis_cfg;
  distill_cmd->add_option("--weights", dis_weights, "Checkpoint (.mnck)")->required();
  distill_cmd->add_option("--train", dis_train, "Training data (.csv or .mnds)")->required();
  distill_cmd->add_option("--out", dis_out, "Student container (.mnch)")->capture_default_str();
  distill_cmd->add_option("--losses", dis_losses, "Write the per-epoch loss curve (JSONL)");
  distill_cmd->add_option("--target-column", dis_target, "Label column in CSV input")
      ->capture_default_str();
  distill_cmd->add_option("--categorical", dis_categorical, "Categorical column names")
      ->delimiter(',');
  distill_cmd->add_option("--ensemble", dis_k, "Teacher ensemble members")->capture_default_str();
  distill_cmd->add_option("--seed", dis_seed, "Seed (teacher and student)")->capture_default_str();
  distill_cmd->add_option("--epochs", dis_cfg.epochs, "Training epochs")->capture_default_str();
  distill_cmd->add_option("--hidden", dis_cfg.hidden, "Student width")->capture_default_str();
  distill_cmd->add_option("--layers", dis_cfg.layers, "Student hidden layers")
      ->capture_default_str();
  distill_cmd->add_option("--lr", dis_cfg.lr, "Student learning rate")->capture_default_str();
  distill_cmd->callback([&]() {
    const auto w = load_checkpoint(dis_weights);
    const TabularDataset train = cli_load_dataset(dis_train, dis_target, dis_categorical, true);
    const EnsembleModel teacher = fit_ensemble(w, train, dis_k, dis_seed);
    const MatrixF targets = teacher.predict_proba(train.X);
    dis_cfg.seed = dis_seed;
    const DistillResult<float> result = distill_probs<float>(train.X, targets, dis_cfg);
    export_dense(result.student, dis_out);
    if (!dis_losses.empty()) {
      std::ofstream os(dis_losses);
      if (!os) throw FormatError("cannot open " + dis_losses + " for writing");
      for (size_t e = 0; e < result.epoch_losses.size(); ++e) {
        os << json{{"epoch", e}, {"loss", result.epoch_losses[e]}}.dump() << '\n';
      }
    }
    json opts{{"weights", dis_weights}, {"train", dis_train},     {"out", dis_out},
              {"ensemble", dis_k},      {"epochs", dis_cfg.epochs}, {"hidden", dis_cfg.hidden},
              {"layers", dis_cfg.layers}, {"lr", dis_cfg.lr},      {"seed", dis_seed}};
    write_manifest(dis_out + ".manifest.json", "distill", opts);
    const double final_loss =
        result.epoch_losses.empty() ? 0.0 : static_cast<double>(result.epoch_losses.back());
    std::cout << "wrote " << dis_out << " (final distillation loss " << final_loss << ")\n";
  });

  // ---- eval ---------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Compare algorithms across datasets");
  std::string eval_weights, eval_out_dir = "eval_out";
  std::vector<std::string> eval_data;
  std::string eval_target = "target";
  std::vector<std::string> eval_categorical;
  std::vector<std::string> eval_algos = {"mothernet", "logreg", "knn", "mlp"};
  int eval_splits = 5, eval_threads = 1, eval_k = 8;
  uint64_t eval_seed = 0;
  eval_cmd->add_option("--weights", eval_weights, "Checkpoint (needed for mothernet)");
  eval_cmd->add_option("--data", eval_data, "Datasets (.csv or .mnds), repeatable")->required();
  eval_cmd->add_option("--out-dir", eval_out_dir, "Report directory")->capture_default_str();
  eval_cmd->add_option("--target-column", eval_target, "Label column in CSV input")
      ->capture_default_str();
  eval_cmd->add_option("--categorical", eval_categorical, "Categorical column names")
      ->delimiter(',');
  eval_cmd->add_option("--algorithms", eval_algos, "mothernet | logreg | knn | mlp")
      ->delimiter(',');
  eval_cmd->add_option("--splits", eval_splits, "Stratified splits per dataset")
      ->capture_default_str();
  eval_cmd->add_option("--threads", eval_threads, "Worker threads")->capture_default_str();
  eval_cmd->add_option("--ensemble", eval_k, "Ensemble members for mothernet")
      ->capture_default_str();
  eval_cmd->add_option("--seed", eval_seed, "Master seed")->capture_default_str();
  eval_cmd->callback([&]() {
    std::vector<std::pair<std::string, TabularDataset>> datasets;
    for (const std::string& path : eval_data) {
      datasets.emplace_back(std::filesystem::path(path).stem().string(),
                            cli_load_dataset(path, eval_target, eval_categorical, true));
    }
    std::shared_ptr<const TransformerWeights<float>> weights;
    std::vector<Algorithm> algos;
    for (const std::string& name : eval_algos) {
      if (name == "mothernet") {
        if (eval_weights.empty()) {
          throw ShapeError("--weights is required when the algorithm list has mothernet");
        }
        if (!weights) {
          weights = std::make_shared<const TransformerWeights<float>>(
              load_checkpoint(eval_weights));
        }
        algos.push_back(mothernet_algorithm(weights, eval_k));
      } else if (name == "logreg") {
        algos.push_back(logreg_baseline());
      } else if (name == "knn") {
        algos.push_back(knn_baseline());
      } else if (name == "mlp") {
        algos.push_back(mlp_baseline());
      } else {
        throw ShapeError("unknown algorithm '" + name + "'");
      }
    }
    const EvalReport report = evaluate(datasets, algos, eval_splits, eval_seed, eval_threads);
    std::filesystem::create_directories(eval_out_dir);
    {
      std::ofstream os(eval_out_dir + "/results.csv");
      if (!os) throw FormatError("cannot write results.csv");
      os << eval_report_csv(report);
    }
    json opts{{"datasets", eval_data},   {"algorithms", eval_algos}, {"splits", eval_splits},
              {"seed", eval_seed},       {"threads", eval_threads},  {"ensemble", eval_k},
              {"weights", eval_weights}};
    write_manifest(eval_out_dir + "/manifest.json", "eval", opts);
    std::printf("%-20s %12s %12s\n", "algorithm", "mean rank", "mean norm");
    for (size_t ai = 0; ai < report.algorithms.size(); ++ai) {
      std::printf("%-20s %12.3f %12.3f\n", report.algorithms[ai].c_str(), report.mean_rank[ai],
                  report.mean_normalized[ai]);
    }
    std::cout << "report: " << eval_out_dir << "/results.csv\n";
  });

  // ---- plot-boundary ----------------------------------------------------------
  auto* plot_cmd = app.add_subcommand("plot-boundary", "Rasterize a 2-feature decision surface");
  std::string plot_weights, plot_train, plot_out = "boundary.svg";
  std::string plot_target = "target";
  std::vector<std::string> plot_categorical;
  int plot_res = 200, plot_k = 8;
  double plot_margin = 0.5;
  uint64_t plot_seed = 0;
  plot_cmd->add_option("--weights", plot_weights, "Checkpoint (.mnck)")->required();
  plot_cmd->add_option("--train", plot_train, "Training data with two features")->required();
  plot_cmd->add_option("--out", plot_out, "Output SVG")->capture_default_str();
  plot_cmd->add_option("--target-column", plot_target, "Label column in CSV input")
      ->capture_default_str();
  plot_cmd->add_option("--categorical", plot_categorical, "Categorical column names")
      ->delimiter(',');
  plot_cmd->add_option("--resolution", plot_res, "Grid cells per axis")->capture_default_str();
  plot_cmd->add_option("--margin", plot_margin, "Padding around the data box")
      ->capture_default_str();
  plot_cmd->add_option("--ensemble", plot_k, "Ensemble members")->capture_default_str();
  plot_cmd->add_option("--seed", plot_seed, "Ensemble seed")->capture_default_str();
  plot_cmd->callback([&]() {
    const auto w = load_checkpoint(plot_weights);
    const TabularDataset train = cli_load_dataset(plot_train, plot_target, plot_categorical, true);
    const EnsembleModel model = fit_ensemble(w, train, plot_k, plot_seed);
    const BoundaryPlot plot = plot_boundary(
        [&model](const MatrixF& X) { return model.predict_proba(X); }, train, plot_res,
        plot_margin);
    std::ofstream os(plot_out);
    if (!os) throw FormatError("cannot open " + plot_out + " for writing");
    os << plot.svg;
    json opts{{"weights", plot_weights}, {"train", plot_train},   {"out", plot_out},
              {"resolution", plot_res},  {"margin", plot_margin}, {"ensemble", plot_k},
              {"seed", plot_seed}};
    write_manifest(plot_out + ".manifest.json", "plot-boundary", opts);
    std::cout << "wrote " << plot_out << '\n';
  });

  // ---- bench --------------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "Compare child inference with encoder re-runs");
  std::string bench_weights, bench_train, bench_out;
  std::string bench_target = "target";
  std::vector<std::string> bench_categorical;
  int bench_rows = 10000, bench_batch = 128, bench_repeats = 5;
  uint64_t bench_seed = 0;
  bench_cmd->add_option("--weights", bench_weights, "Checkpoint (.mnck)")->required();
  bench_cmd->add_option("--train", bench_train, "Training data (.csv or .mnds)")->required();
  bench_cmd->add_option("--out", bench_out, "Write the report JSON here (default stdout)");
  bench_cmd->add_option("--target-column", bench_target, "Label column in CSV input")
      ->capture_default_str();
  bench_cmd->add_option("--categorical", bench_categorical, "Categorical column names")
      ->delimiter(',');
  bench_cmd->add_option("--rows", bench_rows, "Prediction rows")->capture_default_str();
  bench_cmd->add_option("--batch", bench_batch, "Prediction batch size")->capture_default_str();
  bench_cmd->add_option("--repeats", bench_repeats, "Timed repeats (median)")
      ->capture_default_str();
  bench_cmd->add_option("--seed", bench_seed, "Synthetic row seed")->capture_default_str();
  bench_cmd->callback([&]() {
    const auto w = load_checkpoint(bench_weights);
    const TabularDataset train =
        cli_load_dataset(bench_train, bench_target, bench_categorical, true);
    const BenchReport report =
        bench_inference(w, train, bench_rows, bench_batch, bench_repeats, bench_seed);
    const std::string text = bench_report_json(report);
    if (bench_out.empty()) {
      std::cout << text << '\n';
    } else {
      std::ofstream os(bench_out);
      if (!os) throw FormatError("cannot open " + bench_out + " for writing");
      os << text << '\n';
      json opts{{"weights", bench_weights}, {"train", bench_train},   {"rows", bench_rows},
                {"batch", bench_batch},     {"repeats", bench_repeats}, {"seed", bench_seed}};
      write_manifest(bench_out + ".manifest.json", "bench", opts);
      std::cout << "wrote " << bench_out << " (speedup " << report.speedup << "x)\n";
    }
  });

  // ---- gradcheck ------------------------------------------------------------------
  auto* grad_cmd =
      app.add_subcommand("gradcheck", "Verify the reverse pass against central differences");
  uint64_t grad_seed = 7;
  int grad_coords = 0;
  double grad_step = 1e-4;
  grad_cmd->add_option("--seed", grad_seed, "RNG seed")->capture_default_str();
  grad_cmd->add_option("--coords-per-tensor", grad_coords, "Coordinates per tensor (0 = all)")
      ->capture_default_str();
  grad_cmd->add_option("--step", grad_step, "Finite-difference step")->capture_default_str();
  grad_cmd->callback([&]() {
    const GradCheckReport report = gradcheck_encoder(grad_seed, grad_coords, grad_step);
    json j{{"checked", report.checked},
           {"failed", report.failed},
           {"max_rel_err", report.max_rel_err},
           {"mean_abs_err", report.mean_abs_err},
           {"worst_tensor", report.worst_tensor},
           {"worst_row", report.worst_row},
           {"worst_col", report.worst_col},
           {"worst_analytic", report.worst_analytic},
           {"worst_numeric", report.worst_numeric}};
    std::cout << j.dump(2) << '\n';
    if (report.failed > 0) throw NumericError("gradient check failed");
  });

  // build argv for CLI11
  std::vector<std::string> argv_store;
  argv_store.push_back("mothernet");
  for (const std::string& a : args) argv_store.push_back(a);
  std::vector<const char*> argv;
  for (const std::string& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace mothernet
