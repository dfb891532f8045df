// SPDX-License-Identifier: Apache-2.0
// `train-mil` and `topk`: weakly supervised bag classification and
// attention-ranked patch reporting.
#include <fstream>
#include <iostream>
#include <memory>
#include <set>

#include "cers/errors.hpp"
#include "cers/metrics.hpp"
#include "cers/splits.hpp"
#include "commands.hpp"
#include "common.hpp"
#include "config.hpp"
#include "csv_util.hpp"

namespace cers::cli {

namespace {

struct TrainMilParams {
  std::string config;
  std::string manifest;
  std::string out;
  std::string preds_out;
  std::string labels_out;
  std::string report;
  int folds = 5;
  int val_fold = 0;
  int classes = 0;  // 0 = infer from labels
  int latent = 512;
  int hidden = 384;
  double dropout = 0.25;
  bool per_class_attention = false;
  double lr = 1e-4;
  int epochs = 100;
  int patience = 10;
  double instance_loss_weight = 0.0;
  int instance_top_k = 8;
  int bootstrap = 0;
  std::uint64_t seed = default_seed();
  ParamRegistry registry;
};

void run_train_mil(TrainMilParams& p) {
  if (p.manifest.empty()) throw ConfigError("missing required option: manifest");
  if (p.out.empty()) throw ConfigError("missing required option: out");
  if (p.val_fold < 0 || p.val_fold >= p.folds)
    throw ConfigError("val_fold must lie in [0, folds)");

  const LoadedDataset data = load_dataset(p.manifest, /*require_labels=*/true);
  int classes = p.classes;
  if (classes == 0)
    for (int label : data.labels) classes = std::max(classes, label + 1);
  if (classes < 2) throw DataError("training needs at least two classes");

  const DatasetSplit split = stratified_kfold(data.labels, p.folds, p.seed);
  std::vector<BagSample> train, val;
  std::vector<std::size_t> val_indices;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    if (split.fold_of[i] == p.val_fold) {
      val.push_back(data.samples[i]);
      val_indices.push_back(i);
    } else {
      train.push_back(data.samples[i]);
    }
  }

  GatedMilConfig model_config;
  model_config.dim = data.dim;
  model_config.latent = p.latent;
  model_config.hidden = p.hidden;
  model_config.classes = classes;
  model_config.dropout = p.dropout;
  model_config.per_class_attention = p.per_class_attention;
  model_config.instance_head = p.instance_loss_weight > 0.0;

  MilTrainConfig train_config;
  train_config.lr = p.lr;
  train_config.max_epochs = p.epochs;
  train_config.patience = p.patience;
  train_config.seed = p.seed;
  train_config.instance_loss_weight = p.instance_loss_weight;
  train_config.instance_top_k = p.instance_top_k;

  const MilTrainResult result = train_mil(train, val, model_config, train_config);
  save_mil_model(result.model, p.out);

  // Held-out predictions for the downstream `eval` step.
  std::vector<int> y_true, y_pred;
  std::vector<double> y_score;
  for (const auto& bag : val) {
    const MilOutput out = mil_forward(bag.instances, result.model);
    Eigen::Index arg = 0;
    out.logits.maxCoeff(&arg);
    y_true.push_back(bag.label);
    y_pred.push_back(static_cast<int>(arg));
    if (classes == 2) y_score.push_back(binary_score(out.logits));
  }

  if (!p.preds_out.empty()) {
    std::ofstream out(p.preds_out, std::ios::trunc);
    if (!out) throw DataError("cannot write " + p.preds_out);
    out << (classes == 2 ? "slide_id,pred,score\n" : "slide_id,pred\n");
    for (std::size_t i = 0; i < val_indices.size(); ++i) {
      out << data.slide_ids[val_indices[i]] << ',' << y_pred[i];
      if (classes == 2) out << ',' << format_double(y_score[i]);
      out << '\n';
    }
  }
  if (!p.labels_out.empty()) {
    std::ofstream out(p.labels_out, std::ios::trunc);
    if (!out) throw DataError("cannot write " + p.labels_out);
    out << "label\n";
    for (int label : y_true) out << label << '\n';
  }

  const ClassificationMetrics metrics = classification_metrics(y_true, y_pred, classes);
  std::cout << "epochs=" << result.train_loss.size()
            << " best_epoch=" << result.best_epoch
            << " val_bacc=" << metrics.balanced_accuracy
            << " config_hash=" << p.registry.hash("train-mil") << "\n";

  if (!p.report.empty()) {
    EvalReport report;
    report.seed = p.seed;
    report.n_bootstrap = p.bootstrap;
    report.config_hash = p.registry.hash("train-mil");
    report.timestamp = current_timestamp();
    report.metrics["bacc"] = {metrics.balanced_accuracy, {}, {}};
    report.metrics["acc"] = {metrics.accuracy, {}, {}};
    report.metrics["f1"] = {metrics.f1, {}, {}};
    if (classes == 2) {
      report.metrics["auc"] = {roc_auc(y_score, y_true), {}, {}};
      if (metrics.sensitivity) report.metrics["sensitivity"] = {*metrics.sensitivity, {}, {}};
      if (metrics.specificity) report.metrics["specificity"] = {*metrics.specificity, {}, {}};
    }
    emit_report(report, p.report);
  }
}

struct TopkParams {
  std::string config;
  std::string bag;
  std::string model;
  std::string out;  // empty = stdout
  int k = 8;
  std::uint64_t seed = default_seed();
  ParamRegistry registry;
};

void run_topk(TopkParams& p) {
  if (p.bag.empty()) throw ConfigError("missing required option: bag");
  if (p.model.empty()) throw ConfigError("missing required option: model");

  const EmbeddingBag bag = read_bag_file(p.bag);
  const GatedMilModel model = load_mil_model(p.model);
  const auto ranked = top_k_patches(bag, model, p.k);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!p.out.empty()) {
    file.open(p.out, std::ios::trunc);
    if (!file) throw DataError("cannot write " + p.out);
    out = &file;
  }
  *out << "rank,x,y,attention\n";
  for (std::size_t i = 0; i < ranked.size(); ++i)
    *out << (i + 1) << ',' << ranked[i].coord[0] << ',' << ranked[i].coord[1] << ','
         << format_double(ranked[i].attention) << '\n';
}

}  // namespace

void register_train_mil(CLI::App& app) {
  auto p = std::make_shared<TrainMilParams>();
  CLI::App* sub = app.add_subcommand(
      "train-mil", "Train the gated-attention MIL classifier on a bag manifest");
  CLI::Option* cfg = sub->add_option("--config", p->config, "JSON config file");
  p->registry.bind(sub->add_option("--manifest", p->manifest, "bag manifest CSV"),
                   "manifest", p->manifest);
  p->registry.bind(sub->add_option("--out", p->out, "model JSON output"), "out", p->out);
  p->registry.bind(sub->add_option("--preds-out", p->preds_out,
                                   "held-out predictions CSV"),
                   "preds_out", p->preds_out);
  p->registry.bind(sub->add_option("--labels-out", p->labels_out,
                                   "held-out labels CSV"),
                   "labels_out", p->labels_out);
  p->registry.bind(sub->add_option("--report", p->report, "metrics report JSON"),
                   "report", p->report);
  p->registry.bind(sub->add_option("--folds", p->folds, "stratified fold count"),
                   "folds", p->folds);
  p->registry.bind(sub->add_option("--val-fold", p->val_fold, "held-out fold index"),
                   "val_fold", p->val_fold);
  p->registry.bind(sub->add_option("--classes", p->classes, "class count (0 = infer)"),
                   "classes", p->classes);
  p->registry.bind(sub->add_option("--latent", p->latent, "projection width"),
                   "latent", p->latent);
  p->registry.bind(sub->add_option("--hidden", p->hidden, "gating width"), "hidden",
                   p->hidden);
  p->registry.bind(sub->add_option("--dropout", p->dropout, "dropout rate"), "dropout",
                   p->dropout);
  p->registry.bind(sub->add_flag("--per-class-attention", p->per_class_attention,
                                 "one attention vector per class"),
                   "per_class_attention", p->per_class_attention);
  p->registry.bind(sub->add_option("--lr", p->lr, "Adam learning rate"), "lr", p->lr);
  p->registry.bind(sub->add_option("--epochs", p->epochs, "epoch cap"), "epochs",
                   p->epochs);
  p->registry.bind(sub->add_option("--patience", p->patience, "early-stop patience"),
                   "patience", p->patience);
  p->registry.bind(sub->add_option("--instance-loss-weight", p->instance_loss_weight,
                                   "auxiliary instance-loss weight (0 = off)"),
                   "instance_loss_weight", p->instance_loss_weight);
  p->registry.bind(sub->add_option("--instance-top-k", p->instance_top_k,
                                   "instances per side in the auxiliary loss"),
                   "instance_top_k", p->instance_top_k);
  p->registry.bind(sub->add_option("--bootstrap", p->bootstrap,
                                   "bootstrap replicates for report CIs"),
                   "bootstrap", p->bootstrap);
  p->registry.bind(sub->add_option("--seed", p->seed, "training seed"), "seed", p->seed);
  sub->callback([p, cfg] {
    if (cfg->count() > 0) p->registry.apply_config_file(p->config);
    run_train_mil(*p);
  });
}

void register_topk(CLI::App& app) {
  auto p = std::make_shared<TopkParams>();
  CLI::App* sub = app.add_subcommand(
      "topk", "Rank a bag's patches by attention under a trained model");
  CLI::Option* cfg = sub->add_option("--config", p->config, "JSON config file");
  p->registry.bind(sub->add_option("--bag", p->bag, "CEB1 bag file"), "bag", p->bag);
  p->registry.bind(sub->add_option("--model", p->model, "model JSON"), "model",
                   p->model);
  p->registry.bind(sub->add_option("--k", p->k, "patches to emit"), "k", p->k);
  p->registry.bind(sub->add_option("--out", p->out, "output CSV (default stdout)"),
                   "out", p->out);
  p->registry.bind(sub->add_option("--seed", p->seed, "unused; kept for uniformity"),
                   "seed", p->seed);
  sub->callback([p, cfg] {
    if (cfg->count() > 0) p->registry.apply_config_file(p->config);
    run_topk(*p);
  });
}

}  // namespace cers::cli
