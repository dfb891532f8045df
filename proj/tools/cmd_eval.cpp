// SPDX-License-Identifier: Apache-2.0
// `textmetrics`, `calibrate`, `eval`, `report`: the scalar-metric surface.
#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include "cers/errors.hpp"
#include "cers/metrics.hpp"
#include "cers/text_metrics.hpp"
#include "commands.hpp"
#include "common.hpp"
#include "config.hpp"
#include "csv_util.hpp"

namespace cers::cli {

namespace {

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> items;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) items.push_back(item);
  return items;
}

struct TextMetricsParams {
  std::string config;
  std::string cand;
  std::string ref;
  std::string metrics = "rouge_l,bleu1,bleu3,bleu5";
  std::string out;
  std::uint64_t seed = default_seed();
  ParamRegistry registry;
};

void run_textmetrics(TextMetricsParams& p) {
  if (p.cand.empty()) throw ConfigError("missing required option: cand");
  if (p.ref.empty()) throw ConfigError("missing required option: ref");

  const auto cand_lines = read_lines(p.cand);
  const auto ref_lines = read_lines(p.ref);
  if (cand_lines.size() != ref_lines.size())
    throw DataError("candidate/reference line counts differ");
  if (cand_lines.empty()) throw DataError("empty caption files");

  for (std::size_t i = 0; i < cand_lines.size(); ++i)
    if (tokenize(cand_lines[i]).empty() || tokenize(ref_lines[i]).empty())
      std::cerr << "warning: empty caption on line " << (i + 1)
                << "; it scores 0\n";

  EvalReport report;
  report.seed = p.seed;
  report.config_hash = p.registry.hash("textmetrics");
  report.timestamp = current_timestamp();
  for (const std::string& metric : split_list(p.metrics)) {
    double value = 0.0;
    if (metric == "rouge_l") {
      double sum = 0.0;
      for (std::size_t i = 0; i < cand_lines.size(); ++i)
        sum += rouge_l_text(cand_lines[i], ref_lines[i]);
      value = sum / static_cast<double>(cand_lines.size());
    } else if (metric.rfind("bleu", 0) == 0) {
      const int n = std::stoi(metric.substr(4));
      value = bleu_n_text(cand_lines, ref_lines, n);
    } else {
      throw ConfigError("unknown text metric: " + metric);
    }
    report.metrics[metric] = {value, {}, {}};
  }

  if (!p.out.empty()) {
    emit_report(report, p.out);
  } else {
    for (const auto& [name, metric] : report.metrics)
      std::cout << name << "=" << metric.value << "\n";
  }
}

struct CalibrateParams {
  std::string config;
  std::string scores;
  std::string out;
  double target = 0.8;
  std::uint64_t seed = default_seed();
  ParamRegistry registry;
};

void run_calibrate(CalibrateParams& p) {
  if (p.scores.empty()) throw ConfigError("missing required option: scores");

  const ScoreLabelTable table = read_score_label_table(p.scores);
  const double threshold = calibrate_threshold(table.scores, table.labels, p.target);

  double tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < table.scores.size(); ++i) {
    const bool predicted = table.scores[i] >= threshold;
    if (table.labels[i] == 1) (predicted ? tp : fn) += 1.0;
    else (predicted ? fp : tn) += 1.0;
  }
  const double sensitivity = tp / (tp + fn);
  const double specificity = tn + fp > 0 ? tn / (tn + fp) : 0.0;

  EvalReport report;
  report.seed = p.seed;
  report.config_hash = p.registry.hash("calibrate");
  report.timestamp = current_timestamp();
  report.metrics["threshold"] = {threshold, {}, {}};
  report.metrics["target_sensitivity"] = {p.target, {}, {}};
  report.metrics["sensitivity"] = {sensitivity, {}, {}};
  report.metrics["specificity"] = {specificity, {}, {}};
  if (!p.out.empty()) emit_report(report, p.out);
  std::cout << "threshold=" << format_double(threshold)
            << " sensitivity=" << sensitivity << " specificity=" << specificity
            << " config_hash=" << p.registry.hash("calibrate") << "\n";
}

struct EvalParams {
  std::string config;
  std::string preds;
  std::string labels;
  std::string metrics = "bacc,auc,f1";
  std::string out;
  std::string csv_out;
  int bootstrap = 0;
  std::uint64_t seed = default_seed();
  ParamRegistry registry;
};

void run_eval(EvalParams& p) {
  if (p.preds.empty()) throw ConfigError("missing required option: preds");
  if (p.labels.empty()) throw ConfigError("missing required option: labels");
  if (p.out.empty()) throw ConfigError("missing required option: out");

  const PredTable preds = read_pred_table(p.preds);
  const std::vector<int> labels = read_label_column(p.labels);
  const std::size_t n = labels.size();
  if (preds.has_pred && preds.preds.size() != n)
    throw DataError("prediction/label count mismatch");
  if (preds.has_score && preds.scores.size() != n)
    throw DataError("score/label count mismatch");

  const auto requested = split_list(p.metrics);
  const std::set<std::string> pred_metrics = {"bacc", "acc",        "f1",
                                              "precision", "sensitivity",
                                              "specificity"};

  // Point value of one metric over a subset of sample indices.
  auto metric_value = [&](const std::string& name,
                          const std::vector<std::size_t>& idx) {
    std::vector<int> y_true, y_pred;
    std::vector<double> y_score;
    for (std::size_t i : idx) {
      y_true.push_back(labels[i]);
      if (preds.has_pred) y_pred.push_back(preds.preds[i]);
      if (preds.has_score) y_score.push_back(preds.scores[i]);
    }
    if (name == "auc") {
      if (!preds.has_score) throw ConfigError("metric auc needs a score column");
      return roc_auc(y_score, y_true);
    }
    if (!preds.has_pred)
      throw ConfigError("metric " + name + " needs a pred column");
    const ClassificationMetrics m = classification_metrics(y_true, y_pred);
    if (name == "bacc") return m.balanced_accuracy;
    if (name == "acc") return m.accuracy;
    if (name == "f1") return m.f1;
    if (name == "precision") return m.precision;
    if (name == "sensitivity") {
      if (!m.sensitivity) throw DataError("sensitivity needs binary labels");
      return *m.sensitivity;
    }
    if (name == "specificity") {
      if (!m.specificity) throw DataError("specificity needs binary labels");
      return *m.specificity;
    }
    throw ConfigError("unknown metric: " + name);
  };

  for (const auto& name : requested)
    if (name != "auc" && pred_metrics.count(name) == 0)
      throw ConfigError("unknown metric: " + name);

  {
    std::vector<int> check_true = labels;
    std::vector<int> check_pred = preds.has_pred ? preds.preds : labels;
    const ClassificationMetrics m = classification_metrics(check_true, check_pred);
    for (int cls : m.absent_classes)
      std::cerr << "warning: class " << cls
                << " absent from labels; excluded from balanced accuracy\n";
  }

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});

  EvalReport report;
  report.seed = p.seed;
  report.n_bootstrap = p.bootstrap;
  report.config_hash = p.registry.hash("eval");
  report.timestamp = current_timestamp();
  for (const auto& name : requested) {
    MetricValue value;
    value.value = metric_value(name, all);
    if (p.bootstrap > 0) {
      const BootstrapInterval ci = stratified_bootstrap_ci(
          labels,
          [&](const std::vector<std::size_t>& idx) { return metric_value(name, idx); },
          p.bootstrap, p.seed);
      value.ci_low = ci.low;
      value.ci_high = ci.high;
    }
    report.metrics[name] = value;
  }
  emit_report(report, p.out);
  if (!p.csv_out.empty()) write_report_csv(report, std::filesystem::path(p.csv_out));
  std::cout << "metrics=" << report.metrics.size()
            << " config_hash=" << report.config_hash << "\n";
}

struct ReportParams {
  std::string config;
  std::string in;
  std::string format = "csv";
  std::string out;
  std::uint64_t seed = default_seed();
  ParamRegistry registry;
};

void run_report(ReportParams& p) {
  if (p.in.empty()) throw ConfigError("missing required option: in");
  if (p.out.empty()) throw ConfigError("missing required option: out");
  const EvalReport report = read_report_json(p.in);
  if (p.format == "csv") {
    write_report_csv(report, std::filesystem::path(p.out));
  } else if (p.format == "json") {
    write_report_json(report, p.out);
  } else {
    throw ConfigError("format must be 'json' or 'csv'");
  }
  std::cout << "metrics=" << report.metrics.size() << " format=" << p.format << "\n";
}

}  // namespace

void register_textmetrics(CLI::App& app) {
  auto p = std::make_shared<TextMetricsParams>();
  CLI::App* sub = app.add_subcommand(
      "textmetrics", "Score aligned caption files with ROUGE-L / BLEU-n");
  CLI::Option* cfg = sub->add_option("--config", p->config, "JSON config file");
  p->registry.bind(sub->add_option("--cand", p->cand, "candidate captions, one per line"),
                   "cand", p->cand);
  p->registry.bind(sub->add_option("--ref", p->ref, "reference captions, one per line"),
                   "ref", p->ref);
  p->registry.bind(sub->add_option("--metrics", p->metrics, "comma list"), "metrics",
                   p->metrics);
  p->registry.bind(sub->add_option("--out", p->out, "report JSON (default stdout)"),
                   "out", p->out);
  p->registry.bind(sub->add_option("--seed", p->seed, "recorded in the report"),
                   "seed", p->seed);
  sub->callback([p, cfg] {
    if (cfg->count() > 0) p->registry.apply_config_file(p->config);
    run_textmetrics(*p);
  });
}

void register_calibrate(CLI::App& app) {
  auto p = std::make_shared<CalibrateParams>();
  CLI::App* sub = app.add_subcommand(
      "calibrate", "Pick the sensitivity-constrained decision threshold");
  CLI::Option* cfg = sub->add_option("--config", p->config, "JSON config file");
  p->registry.bind(sub->add_option("--scores", p->scores, "CSV with score,label"),
                   "scores", p->scores);
  p->registry.bind(sub->add_option("--target", p->target, "sensitivity target"),
                   "target", p->target);
  p->registry.bind(sub->add_option("--out", p->out, "report JSON"), "out", p->out);
  p->registry.bind(sub->add_option("--seed", p->seed, "recorded in the report"),
                   "seed", p->seed);
  sub->callback([p, cfg] {
    if (cfg->count() > 0) p->registry.apply_config_file(p->config);
    run_calibrate(*p);
  });
}

void register_eval(CLI::App& app) {
  auto p = std::make_shared<EvalParams>();
  CLI::App* sub = app.add_subcommand(
      "eval", "Compute classification metrics with bootstrap intervals");
  CLI::Option* cfg = sub->add_option("--config", p->config, "JSON config file");
  p->registry.bind(sub->add_option("--preds", p->preds, "predictions CSV"), "preds",
                   p->preds);
  p->registry.bind(sub->add_option("--labels", p->labels, "labels CSV"), "labels",
                   p->labels);
  p->registry.bind(sub->add_option("--metrics", p->metrics, "comma list"), "metrics",
                   p->metrics);
  p->registry.bind(sub->add_option("--bootstrap", p->bootstrap,
                                   "bootstrap replicates (0 = no CIs)"),
                   "bootstrap", p->bootstrap);
  p->registry.bind(sub->add_option("--out", p->out, "report JSON"), "out", p->out);
  p->registry.bind(sub->add_option("--csv-out", p->csv_out, "also emit a CSV report"),
                   "csv_out", p->csv_out);
  p->registry.bind(sub->add_option("--seed", p->seed, "bootstrap seed"), "seed",
                   p->seed);
  sub->callback([p, cfg] {
    if (cfg->count() > 0) p->registry.apply_config_file(p->config);
    run_eval(*p);
  });
}

void register_report(CLI::App& app) {
  auto p = std::make_shared<ReportParams>();
  CLI::App* sub =
      app.add_subcommand("report", "Convert a report between JSON and CSV");
  CLI::Option* cfg = sub->add_option("--config", p->config, "JSON config file");
  p->registry.bind(sub->add_option("--in", p->in, "input report JSON"), "in", p->in);
  p->registry.bind(sub->add_option("--format", p->format, "json|csv"), "format",
                   p->format);
  p->registry.bind(sub->add_option("--out", p->out, "output path"), "out", p->out);
  p->registry.bind(sub->add_option("--seed", p->seed, "unused; kept for uniformity"),
                   "seed", p->seed);
  sub->callback([p, cfg] {
    if (cfg->count() > 0) p->registry.apply_config_file(p->config);
    run_report(*p);
  });
}

}  // namespace cers::cli
