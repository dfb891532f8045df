// SPDX-License-Identifier: Apache-2.0
#include "cers/probe.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <random>
#include <set>

#include "cers/adam.hpp"
#include "cers/errors.hpp"
#include "cers/rng.hpp"

namespace cers {

namespace {

using json = nlohmann::json;

// Mean CE + lambda * |W|_F^2 and its gradient, full batch.
double probe_objective(const Eigen::MatrixXd& x, const std::vector<int>& y,
                       const LinearProbe& probe, double lambda,
                       Eigen::MatrixXd* dw, Eigen::VectorXd* db) {
  const Eigen::Index n = x.rows();
  const Eigen::Index c = probe.weights.rows();
  Eigen::MatrixXd logits = x * probe.weights.transpose();
  logits.rowwise() += probe.bias.transpose();

  double loss = 0.0;
  Eigen::MatrixXd dlogits(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    const Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
    const double sum = e.sum();
    loss += m + std::log(sum) - logits(i, y[static_cast<std::size_t>(i)]);
    dlogits.row(i) = (e / sum).matrix().transpose();
    dlogits(i, y[static_cast<std::size_t>(i)]) -= 1.0;
  }
  loss /= static_cast<double>(n);
  loss += lambda * probe.weights.squaredNorm();
  if (dw != nullptr) {
    dlogits /= static_cast<double>(n);
    *dw = dlogits.transpose() * x + 2.0 * lambda * probe.weights;
    *db = dlogits.colwise().sum();
  }
  return loss;
}

}  // namespace

double probe_lambda(int emb_dim, int classes) {
  if (emb_dim < 1 || classes < 1) throw ConfigError("lambda needs M >= 1 and C >= 1");
  return 100.0 / (static_cast<double>(emb_dim) * static_cast<double>(classes));
}

ProbeResult train_linear_probe(const Eigen::MatrixXd& x, const std::vector<int>& y,
                               int classes, const ProbeConfig& config,
                               const Eigen::MatrixXd* val_x,
                               const std::vector<int>* val_y) {
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw DataError("feature/label count mismatch");
  if (classes < 2) throw ConfigError("probe needs at least two classes");
  if (config.max_epochs > 80) throw ConfigError("probe epochs are capped at 80");
  std::set<int> seen(y.begin(), y.end());
  if (seen.size() < 2) throw DataError("training labels cover a single class");
  for (int label : seen)
    if (label < 0 || label >= classes) throw DataError("label out of range");

  const int m = static_cast<int>(x.cols());
  ProbeResult result;
  result.lambda = probe_lambda(m, classes);

  Rng rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(m));
  result.probe.weights.resize(classes, m);
  for (Eigen::Index r = 0; r < classes; ++r)
    for (Eigen::Index c = 0; c < m; ++c) result.probe.weights(r, c) = normal(rng);
  result.probe.bias = Eigen::VectorXd::Zero(classes);

  const Eigen::Index n_params = result.probe.weights.size() + classes;
  Eigen::VectorXd params(n_params);
  auto pack = [&](const LinearProbe& p, Eigen::VectorXd& flat) {
    Eigen::Index pos = 0;
    for (Eigen::Index r = 0; r < p.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < p.weights.cols(); ++c) flat(pos++) = p.weights(r, c);
    flat.segment(pos, p.bias.size()) = p.bias;
  };
  auto unpack = [&](const Eigen::VectorXd& flat, LinearProbe& p) {
    Eigen::Index pos = 0;
    for (Eigen::Index r = 0; r < p.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < p.weights.cols(); ++c) p.weights(r, c) = flat(pos++);
    p.bias = flat.segment(pos, p.bias.size());
  };
  pack(result.probe, params);

  Adam adam(n_params, AdamConfig{.lr = config.lr});
  double best = std::numeric_limits<double>::infinity();
  int stall = 0;
  double lr = config.lr;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    unpack(params, result.probe);
    Eigen::MatrixXd dw;
    Eigen::VectorXd db;
    const double train_loss =
        probe_objective(x, y, result.probe, result.lambda, &dw, &db);
    if (!std::isfinite(train_loss)) throw NumericError("non-finite probe loss");

    Eigen::VectorXd grad(n_params);
    LinearProbe g{dw, db};
    pack(g, grad);
    adam.step(params, grad);
    ++result.epochs_run;

    unpack(params, result.probe);
    double monitored = train_loss;
    if (val_x != nullptr && val_y != nullptr && val_x->rows() > 0)
      monitored = probe_objective(*val_x, *val_y, result.probe, result.lambda,
                                  nullptr, nullptr);
    result.loss_history.push_back(monitored);
    result.lr_history.push_back(lr);

    if (monitored < best - 1e-12) {
      best = monitored;
      stall = 0;
    } else if (++stall >= config.plateau_patience) {
      stall = 0;
      const double next = lr * config.plateau_factor;
      if (next < config.lr_floor) break;  // schedule floor reached
      lr = next;
      adam.set_lr(lr);
    }
  }
  unpack(params, result.probe);
  return result;
}

Eigen::VectorXd probe_logits(const LinearProbe& probe, const Eigen::VectorXd& x) {
  if (x.size() != probe.weights.cols()) throw DataError("probe input dimension mismatch");
  return probe.weights * x + probe.bias;
}

int probe_predict(const LinearProbe& probe, const Eigen::VectorXd& x) {
  Eigen::Index arg = 0;
  probe_logits(probe, x).maxCoeff(&arg);
  return static_cast<int>(arg);
}

void save_probe(const LinearProbe& probe, double lambda,
                const std::filesystem::path& path) {
  json j;
  j["classes"] = probe.weights.rows();
  j["dim"] = probe.weights.cols();
  j["lambda"] = lambda;
  json rows = json::array();
  for (Eigen::Index r = 0; r < probe.weights.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < probe.weights.cols(); ++c)
      row.push_back(probe.weights(r, c));
    rows.push_back(std::move(row));
  }
  j["weights"] = std::move(rows);
  j["bias"] = std::vector<double>(probe.bias.begin(), probe.bias.end());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

LinearProbe load_probe(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("probe json parse error: " + std::string(e.what()));
  }
  const auto classes = j.at("classes").get<Eigen::Index>();
  const auto dim = j.at("dim").get<Eigen::Index>();
  LinearProbe probe;
  probe.weights.resize(classes, dim);
  const auto& rows = j.at("weights");
  if (static_cast<Eigen::Index>(rows.size()) != classes)
    throw DataError("probe json: bad weight shape");
  for (Eigen::Index r = 0; r < classes; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != dim)
      throw DataError("probe json: bad weight shape");
    for (Eigen::Index c = 0; c < dim; ++c)
      probe.weights(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  const auto& bias = j.at("bias");
  if (static_cast<Eigen::Index>(bias.size()) != classes)
    throw DataError("probe json: bad bias shape");
  probe.bias.resize(classes);
  for (Eigen::Index i = 0; i < classes; ++i)
    probe.bias(i) = bias[static_cast<std::size_t>(i)].get<double>();
  return probe;
}

}  // namespace cers
