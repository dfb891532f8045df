// SPDX-License-Identifier: Apache-2.0
// `train-arpl` and `detect`: open-set training over bags and confidence
// thresholding of scored slides.
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>

#include "cers/arpl.hpp"
#include "cers/errors.hpp"
#include "cers/metrics.hpp"
#include "cers/splits.hpp"
#include "commands.hpp"
#include "common.hpp"
#include "config.hpp"
#include "csv_util.hpp"

namespace cers::cli {

namespace {

struct TrainArplParams {
  std::string config;
  std::string manifest;
  std::string ood_manifest;
  std::string out;
  std::string scores_out;
  std::string report;
  int folds = 5;
  int val_fold = 0;
  int classes = 0;
  int latent = 512;
  int hidden = 384;
  double dropout = 0.25;
  double lr = 1e-4;
  int epochs = 100;
  int patience = 10;
  double gamma = 1.0;
  double lambda_o = 0.1;
  std::uint64_t seed = default_seed();
  ParamRegistry registry;
};

void run_train_arpl(TrainArplParams& p) {
  if (p.manifest.empty()) throw ConfigError("missing required option: manifest");
  if (p.out.empty()) throw ConfigError("missing required option: out");
  if (p.val_fold < 0 || p.val_fold >= p.folds)
    throw ConfigError("val_fold must lie in [0, folds)");

  const LoadedDataset data = load_dataset(p.manifest, /*require_labels=*/true);
  int classes = p.classes;
  if (classes == 0)
    for (int label : data.labels) classes = std::max(classes, label + 1);
  if (classes < 2) throw DataError("open-set training needs at least two classes");

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

  ArplTrainConfig config;
  config.lr = p.lr;
  config.max_epochs = p.epochs;
  config.patience = p.patience;
  config.seed = p.seed;
  config.temperature = p.gamma;
  config.margin_weight = p.lambda_o;
  config.body.dim = data.dim;
  config.body.latent = p.latent;
  config.body.hidden = p.hidden;
  config.body.classes = classes;
  config.body.dropout = p.dropout;

  const ArplTrainResult result = train_arpl(train, val, config);
  const GatedMilModel& body = *result.body;

  // Closed-set accuracy on the held-out fold.
  std::vector<int> y_true, y_pred;
  std::vector<double> in_conf;
  for (const auto& bag : val) {
    y_true.push_back(bag.label);
    y_pred.push_back(arpl_bag_predict(bag.instances, body, result.head));
    in_conf.push_back(arpl_bag_confidence(bag.instances, body, result.head));
  }
  const ClassificationMetrics metrics = classification_metrics(y_true, y_pred, classes);

  // Confidence separation against the OOD cohort, when provided.
  std::vector<double> all_conf = in_conf;
  std::vector<bool> all_ood(in_conf.size(), false);
  std::vector<std::string> all_ids;
  for (std::size_t i : val_indices) all_ids.push_back(data.slide_ids[i]);
  std::vector<double> ood_conf;
  if (!p.ood_manifest.empty()) {
    const LoadedDataset ood = load_dataset(p.ood_manifest, /*require_labels=*/false);
    for (std::size_t i = 0; i < ood.samples.size(); ++i) {
      const double c =
          arpl_bag_confidence(ood.samples[i].instances, body, result.head);
      ood_conf.push_back(c);
      all_conf.push_back(c);
      all_ood.push_back(true);
      all_ids.push_back(ood.slide_ids[i]);
    }
  }

  std::optional<double> threshold;
  std::optional<double> detection_rate;
  std::optional<double> gap;
  if (!ood_conf.empty()) {
    const double in_mean =
        std::accumulate(in_conf.begin(), in_conf.end(), 0.0) / in_conf.size();
    const double ood_mean =
        std::accumulate(ood_conf.begin(), ood_conf.end(), 0.0) / ood_conf.size();
    gap = in_mean - ood_mean;
    threshold = bimodal_threshold(all_conf);
    const OodDetection det = detect_ood(all_conf, all_ood, *threshold);
    detection_rate = det.detection_rate;
  }

  save_arpl_head(result.head, &body, threshold, p.out);

  if (!p.scores_out.empty()) {
    std::ofstream out(p.scores_out, std::ios::trunc);
    if (!out) throw DataError("cannot write " + p.scores_out);
    out << "slide_id,confidence,is_ood\n";
    for (std::size_t i = 0; i < all_conf.size(); ++i)
      out << all_ids[i] << ',' << format_double(all_conf[i]) << ','
          << (all_ood[i] ? 1 : 0) << '\n';
  }

  std::cout << "epochs=" << result.train_loss.size()
            << " closed_set_bacc=" << metrics.balanced_accuracy;
  if (gap) std::cout << " confidence_gap=" << *gap;
  if (detection_rate) std::cout << " detection_rate=" << *detection_rate;
  std::cout << " config_hash=" << p.registry.hash("train-arpl") << "\n";

  if (!p.report.empty()) {
    EvalReport report;
    report.seed = p.seed;
    report.config_hash = p.registry.hash("train-arpl");
    report.timestamp = current_timestamp();
    report.metrics["closed_set_bacc"] = {metrics.balanced_accuracy, {}, {}};
    if (gap) report.metrics["confidence_gap"] = {*gap, {}, {}};
    if (threshold) report.metrics["threshold"] = {*threshold, {}, {}};
    if (detection_rate) report.metrics["detection_rate"] = {*detection_rate, {}, {}};
    emit_report(report, p.report);
  }
}

struct DetectParams {
  std::string config;
  std::string head;
  std::string scores;
  std::string out;      // flags CSV, empty = stdout
  std::string summary;  // summary JSON path
  double threshold = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = default_seed();
  ParamRegistry registry;
};

void run_detect(DetectParams& p) {
  if (p.scores.empty()) throw ConfigError("missing required option: scores");

  const ConfidenceTable table = read_confidence_table(p.scores);
  if (table.confidences.empty()) throw DataError("no scored slides in " + p.scores);

  double threshold = p.threshold;
  if (std::isnan(threshold) && !p.head.empty()) {
    const LoadedArplHead head = load_arpl_head(p.head);
    if (head.threshold) threshold = *head.threshold;
  }
  if (std::isnan(threshold)) threshold = bimodal_threshold(table.confidences);

  const std::vector<bool> is_ood =
      table.has_ood ? table.is_ood : std::vector<bool>(table.confidences.size(), false);
  const OodDetection det = detect_ood(table.confidences, is_ood, threshold);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!p.out.empty()) {
    file.open(p.out, std::ios::trunc);
    if (!file) throw DataError("cannot write " + p.out);
    out = &file;
  }
  *out << "slide_id,confidence,flag\n";
  for (std::size_t i = 0; i < table.confidences.size(); ++i)
    *out << table.slide_ids[i] << ',' << format_double(table.confidences[i]) << ','
         << (det.flagged[i] ? 1 : 0) << '\n';

  nlohmann::json summary;
  summary["threshold"] = threshold;
  summary["n"] = table.confidences.size();
  if (table.has_ood) {
    double in_sum = 0.0, ood_sum = 0.0;
    std::size_t in_n = 0, ood_n = 0;
    for (std::size_t i = 0; i < table.confidences.size(); ++i) {
      if (is_ood[i]) {
        ood_sum += table.confidences[i];
        ++ood_n;
      } else {
        in_sum += table.confidences[i];
        ++in_n;
      }
    }
    summary["n_ood"] = ood_n;
    if (in_n > 0 && ood_n > 0)
      summary["confidence_gap"] = in_sum / in_n - ood_sum / ood_n;
    if (det.detection_rate) summary["detection_rate"] = *det.detection_rate;
    else summary["detection_rate"] = nullptr;  // explicit "no OOD" result
  }
  summary["config_hash"] = p.registry.hash("detect");
  if (!p.summary.empty()) {
    std::ofstream sout(p.summary, std::ios::trunc);
    if (!sout) throw DataError("cannot write " + p.summary);
    sout << summary.dump(2) << '\n';
  } else {
    std::cerr << summary.dump() << "\n";
  }
}

}  // namespace

void register_train_arpl(CLI::App& app) {
  auto p = std::make_shared<TrainArplParams>();
  CLI::App* sub = app.add_subcommand(
      "train-arpl",
      "Train the reciprocal-point open-set head jointly with attention pooling");
  CLI::Option* cfg = sub->add_option("--config", p->config, "JSON config file");
  p->registry.bind(sub->add_option("--manifest", p->manifest, "labeled bag manifest"),
                   "manifest", p->manifest);
  p->registry.bind(
      sub->add_option("--ood-manifest", p->ood_manifest, "held-out OOD manifest"),
      "ood_manifest", p->ood_manifest);
  p->registry.bind(sub->add_option("--out", p->out, "head JSON output"), "out", p->out);
  p->registry.bind(
      sub->add_option("--scores-out", p->scores_out, "per-slide confidence CSV"),
      "scores_out", p->scores_out);
  p->registry.bind(sub->add_option("--report", p->report, "summary report JSON"),
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
  p->registry.bind(sub->add_option("--lr", p->lr, "Adam learning rate"), "lr", p->lr);
  p->registry.bind(sub->add_option("--epochs", p->epochs, "epoch cap"), "epochs",
                   p->epochs);
  p->registry.bind(sub->add_option("--patience", p->patience, "early-stop patience"),
                   "patience", p->patience);
  p->registry.bind(sub->add_option("--gamma", p->gamma, "score temperature"), "gamma",
                   p->gamma);
  p->registry.bind(sub->add_option("--lambda-o", p->lambda_o, "margin-loss weight"),
                   "lambda_o", p->lambda_o);
  p->registry.bind(sub->add_option("--seed", p->seed, "training seed"), "seed", p->seed);
  sub->callback([p, cfg] {
    if (cfg->count() > 0) p->registry.apply_config_file(p->config);
    run_train_arpl(*p);
  });
}

void register_detect(CLI::App& app) {
  auto p = std::make_shared<DetectParams>();
  CLI::App* sub = app.add_subcommand(
      "detect", "Flag low-confidence slides as out-of-distribution");
  CLI::Option* cfg = sub->add_option("--config", p->config, "JSON config file");
  p->registry.bind(sub->add_option("--head", p->head, "trained head JSON"), "head",
                   p->head);
  p->registry.bind(sub->add_option("--scores", p->scores, "confidence CSV"), "scores",
                   p->scores);
  p->registry.bind(sub->add_option("--out", p->out, "flags CSV (default stdout)"),
                   "out", p->out);
  p->registry.bind(sub->add_option("--summary", p->summary, "summary JSON path"),
                   "summary", p->summary);
  p->registry.bind(sub->add_option("--threshold", p->threshold,
                                   "override threshold (default: head, else Otsu)"),
                   "threshold", p->threshold);
  p->registry.bind(sub->add_option("--seed", p->seed, "unused; kept for uniformity"),
                   "seed", p->seed);
  sub->callback([p, cfg] {
    if (cfg->count() > 0) p->registry.apply_config_file(p->config);
    run_detect(*p);
  });
}

}  // namespace cers::cli
