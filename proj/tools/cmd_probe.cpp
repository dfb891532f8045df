// SPDX-License-Identifier: Apache-2.0
// `probe` and `zeroshot`: linear probing of frozen features and
// prompt-similarity classification of stored embeddings.
#include <fstream>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>

#include "cers/bag.hpp"
#include "cers/errors.hpp"
#include "cers/probe.hpp"
#include "cers/zero_shot.hpp"
#include "commands.hpp"
#include "common.hpp"
#include "config.hpp"
#include "csv_util.hpp"

namespace cers::cli {

namespace {

// Feature rows from either a CEB1 bag (instances as rows) or a numeric CSV.
Eigen::MatrixXd load_feature_rows(const std::filesystem::path& path) {
  if (path.extension() == ".ceb") return read_bag_file(path).instances();

  const auto lines = read_lines(path);
  if (lines.empty()) throw DataError("empty feature file " + path.string());
  std::vector<std::vector<double>> rows;
  for (const auto& line : lines) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    std::vector<double> row;
    try {
      for (const auto& f : fields) row.push_back(std::stod(f));
    } catch (const std::exception&) {
      if (rows.empty()) continue;  // tolerate one header line
      throw DataError("bad feature row: " + line);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError("ragged feature row: " + line);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("no feature rows in " + path.string());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows.front().size(); ++c)
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return x;
}

struct ProbeParams {
  std::string config;
  std::string features;
  std::string labels;
  std::string out;
  std::string report;
  int classes = 0;
  double lr = 1e-4;
  int epochs = 80;
  std::uint64_t seed = default_seed();
  ParamRegistry registry;
};

void run_probe(ProbeParams& p) {
  if (p.features.empty()) throw ConfigError("missing required option: features");
  if (p.labels.empty()) throw ConfigError("missing required option: labels");
  if (p.out.empty()) throw ConfigError("missing required option: out");

  const Eigen::MatrixXd x = load_feature_rows(p.features);
  const std::vector<int> y = read_label_column(p.labels);
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw DataError("feature/label count mismatch");
  int classes = p.classes;
  if (classes == 0)
    for (int label : y) classes = std::max(classes, label + 1);

  ProbeConfig config;
  config.lr = p.lr;
  config.max_epochs = p.epochs;
  config.seed = p.seed;
  const ProbeResult result = train_linear_probe(x, y, classes, config);
  save_probe(result.probe, result.lambda, p.out);

  int correct = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    correct += probe_predict(result.probe, x.row(i)) == y[static_cast<std::size_t>(i)];
  const double accuracy = static_cast<double>(correct) / static_cast<double>(x.rows());
  std::cout << "epochs=" << result.epochs_run << " lambda=" << result.lambda
            << " train_acc=" << accuracy
            << " config_hash=" << p.registry.hash("probe") << "\n";

  if (!p.report.empty()) {
    EvalReport report;
    report.seed = p.seed;
    report.config_hash = p.registry.hash("probe");
    report.timestamp = current_timestamp();
    report.metrics["train_acc"] = {accuracy, {}, {}};
    report.metrics["lambda"] = {result.lambda, {}, {}};
    report.metrics["final_loss"] = {result.loss_history.back(), {}, {}};
    emit_report(report, p.report);
  }
}

struct ZeroshotParams {
  std::string config;
  std::string embeddings;
  std::string prompts;
  std::string out;
  std::uint64_t seed = default_seed();
  ParamRegistry registry;
};

PromptSet load_prompts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("prompt json parse error: " + std::string(e.what()));
  }
  PromptSet prompts;
  prompts.temperature = j.value("temperature", 0.07);
  const auto& classes = j.at("classes");
  if (!classes.is_array() || classes.size() < 2)
    throw DataError("prompt json needs >= 2 classes");
  const auto dim = classes[0].at("embedding").size();
  prompts.embeddings.resize(static_cast<Eigen::Index>(classes.size()),
                            static_cast<Eigen::Index>(dim));
  for (std::size_t c = 0; c < classes.size(); ++c) {
    prompts.class_names.push_back(classes[c].at("name").get<std::string>());
    const auto& emb = classes[c].at("embedding");
    if (emb.size() != dim) throw DataError("ragged prompt embeddings");
    for (std::size_t d = 0; d < dim; ++d)
      prompts.embeddings(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(d)) =
          emb[d].get<double>();
  }
  return prompts;
}

void run_zeroshot(ZeroshotParams& p) {
  if (p.embeddings.empty()) throw ConfigError("missing required option: embeddings");
  if (p.prompts.empty()) throw ConfigError("missing required option: prompts");
  if (p.out.empty()) throw ConfigError("missing required option: out");

  const Eigen::MatrixXd x = load_feature_rows(p.embeddings);
  const PromptSet prompts = load_prompts(p.prompts);

  std::ofstream out(p.out, std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.out);
  out << "index,pred,name,confidence\n";
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const ZeroShotResult result = zero_shot_classify(x.row(i), prompts);
    out << i << ',' << result.label << ','
        << prompts.class_names[static_cast<std::size_t>(result.label)] << ','
        << format_double(result.probs.maxCoeff()) << '\n';
  }
  std::cout << "classified=" << x.rows()
            << " config_hash=" << p.registry.hash("zeroshot") << "\n";
}

}  // namespace

void register_probe(CLI::App& app) {
  auto p = std::make_shared<ProbeParams>();
  CLI::App* sub = app.add_subcommand(
      "probe", "Train a ridge-regularized linear probe on frozen features");
  CLI::Option* cfg = sub->add_option("--config", p->config, "JSON config file");
  p->registry.bind(
      sub->add_option("--features", p->features, "feature rows (.ceb or CSV)"),
      "features", p->features);
  p->registry.bind(sub->add_option("--labels", p->labels, "label column CSV"),
                   "labels", p->labels);
  p->registry.bind(sub->add_option("--classes", p->classes, "class count (0 = infer)"),
                   "classes", p->classes);
  p->registry.bind(sub->add_option("--out", p->out, "probe JSON output"), "out",
                   p->out);
  p->registry.bind(sub->add_option("--report", p->report, "metrics report JSON"),
                   "report", p->report);
  p->registry.bind(sub->add_option("--lr", p->lr, "Adam learning rate"), "lr", p->lr);
  p->registry.bind(sub->add_option("--epochs", p->epochs, "epoch cap (max 80)"),
                   "epochs", p->epochs);
  p->registry.bind(sub->add_option("--seed", p->seed, "training seed"), "seed",
                   p->seed);
  sub->callback([p, cfg] {
    if (cfg->count() > 0) p->registry.apply_config_file(p->config);
    run_probe(*p);
  });
}

void register_zeroshot(CLI::App& app) {
  auto p = std::make_shared<ZeroshotParams>();
  CLI::App* sub = app.add_subcommand(
      "zeroshot", "Classify embeddings by cosine similarity to class prompts");
  CLI::Option* cfg = sub->add_option("--config", p->config, "JSON config file");
  p->registry.bind(
      sub->add_option("--embeddings", p->embeddings, "embedding rows (.ceb or CSV)"),
      "embeddings", p->embeddings);
  p->registry.bind(sub->add_option("--prompts", p->prompts, "prompt set JSON"),
                   "prompts", p->prompts);
  p->registry.bind(sub->add_option("--out", p->out, "predictions CSV"), "out", p->out);
  p->registry.bind(sub->add_option("--seed", p->seed, "unused; kept for uniformity"),
                   "seed", p->seed);
  sub->callback([p, cfg] {
    if (cfg->count() > 0) p->registry.apply_config_file(p->config);
    run_zeroshot(*p);
  });
}

}  // namespace cers::cli
