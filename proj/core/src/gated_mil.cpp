// SPDX-License-Identifier: Apache-2.0
#include "cers/gated_mil.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <set>

#include "cers/errors.hpp"
#include "mil_json.hpp"

namespace cers {

namespace {

using json = nlohmann::json;

Eigen::VectorXd softmax(const Eigen::VectorXd& x) {
  const double m = x.maxCoeff();
  Eigen::VectorXd e = (x.array() - m).exp();
  return e / e.sum();
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double stddev,
                                Rng& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
  return m;
}

// Dropout multiplier matrix: entries are 0 or 1/keep (inverted dropout).
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate,
                             Rng* rng) {
  if (rng == nullptr || rate <= 0.0) return Eigen::MatrixXd::Ones(rows, cols);
  const double keep = 1.0 - rate;
  std::bernoulli_distribution drop(rate);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = drop(*rng) ? 0.0 : 1.0 / keep;
  return m;
}

void copy_in(Eigen::VectorXd& flat, Eigen::Index& pos, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat(pos++) = m(r, c);
}

void copy_in(Eigen::VectorXd& flat, Eigen::Index& pos, const Eigen::VectorXd& v) {
  flat.segment(pos, v.size()) = v;
  pos += v.size();
}

void copy_out(const Eigen::VectorXd& flat, Eigen::Index& pos, Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat(pos++);
}

void copy_out(const Eigen::VectorXd& flat, Eigen::Index& pos, Eigen::VectorXd& v) {
  v = flat.segment(pos, v.size());
  pos += v.size();
}

struct InstanceTerm {
  double loss = 0.0;
  Eigen::MatrixXd dlatent;    // N x latent
  Eigen::MatrixXd dhead;      // 2 x latent
  Eigen::VectorXd dhead_bias; // 2
};

// CLAM-style auxiliary term: the top-k attention instances of a bag are
// pseudo-labeled in-class, the bottom-k out-of-class, and a small linear
// head is trained on them. Selection follows the current attention and is
// treated as fixed within the step.
InstanceTerm instance_loss_term(const MilTrace& trace, const GatedMilModel& model,
                                int label, int top_k) {
  InstanceTerm term;
  const Eigen::Index n = trace.latent.rows();
  const Eigen::Index latent = trace.latent.cols();
  term.dlatent = Eigen::MatrixXd::Zero(n, latent);
  term.dhead = Eigen::MatrixXd::Zero(2, latent);
  term.dhead_bias = Eigen::VectorXd::Zero(2);
  if (n < 2) return term;

  const Eigen::Index head_row =
      model.config().per_class_attention ? static_cast<Eigen::Index>(label) : 0;
  const Eigen::VectorXd attn = trace.attention.row(head_row);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (attn(a) != attn(b)) return attn(a) > attn(b);
    return a < b;
  });

  const Eigen::Index k =
      std::min<Eigen::Index>(std::max(top_k, 1), n / 2);
  std::vector<std::pair<Eigen::Index, int>> picks;
  for (Eigen::Index i = 0; i < k; ++i) picks.emplace_back(order[static_cast<std::size_t>(i)], 1);
  for (Eigen::Index i = 0; i < k; ++i)
    picks.emplace_back(order[static_cast<std::size_t>(n - 1 - i)], 0);

  const double scale = 1.0 / static_cast<double>(picks.size());
  for (const auto& [idx, pseudo] : picks) {
    const Eigen::VectorXd logits =
        model.inst_head * trace.latent.row(idx).transpose() + model.inst_head_bias;
    term.loss += scale * cross_entropy(logits, pseudo);
    Eigen::VectorXd dlogits = softmax(logits);
    dlogits(pseudo) -= 1.0;
    dlogits *= scale;
    term.dhead += dlogits * trace.latent.row(idx);
    term.dhead_bias += dlogits;
    term.dlatent.row(idx) += (model.inst_head.transpose() * dlogits).transpose();
  }
  return term;
}

}  // namespace

GatedMilModel::GatedMilModel(const GatedMilConfig& config, std::uint64_t seed)
    : config_(config) {
  if (config.dim < 1 || config.latent < 1 || config.hidden < 1 || config.classes < 2)
    throw ConfigError("gated MIL model needs dim/latent/hidden >= 1 and classes >= 2");
  if (config.dropout < 0.0 || config.dropout >= 1.0)
    throw ConfigError("dropout must be in [0,1)");
  Rng rng(seed);
  const int heads = config.per_class_attention ? config.classes : 1;
  proj = gaussian_matrix(config.latent, config.dim, 1.0 / std::sqrt(config.dim), rng);
  proj_bias = Eigen::VectorXd::Zero(config.latent);
  gate_tanh =
      gaussian_matrix(config.hidden, config.latent, 1.0 / std::sqrt(config.latent), rng);
  gate_tanh_bias = Eigen::VectorXd::Zero(config.hidden);
  gate_sig =
      gaussian_matrix(config.hidden, config.latent, 1.0 / std::sqrt(config.latent), rng);
  gate_sig_bias = Eigen::VectorXd::Zero(config.hidden);
  attn = gaussian_matrix(heads, config.hidden, 1.0 / std::sqrt(config.hidden), rng);
  classifier =
      gaussian_matrix(config.classes, config.latent, 1.0 / std::sqrt(config.latent), rng);
  classifier_bias = Eigen::VectorXd::Zero(config.classes);
  if (config.instance_head) {
    inst_head = gaussian_matrix(2, config.latent, 1.0 / std::sqrt(config.latent), rng);
    inst_head_bias = Eigen::VectorXd::Zero(2);
  }
}

Eigen::Index GatedMilModel::parameter_count() const {
  Eigen::Index n = proj.size() + proj_bias.size() + gate_tanh.size() +
                   gate_tanh_bias.size() + gate_sig.size() + gate_sig_bias.size() +
                   attn.size() + classifier.size() + classifier_bias.size();
  if (config_.instance_head) n += inst_head.size() + inst_head_bias.size();
  return n;
}

Eigen::VectorXd GatedMilModel::to_vector() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index pos = 0;
  copy_in(flat, pos, proj);
  copy_in(flat, pos, proj_bias);
  copy_in(flat, pos, gate_tanh);
  copy_in(flat, pos, gate_tanh_bias);
  copy_in(flat, pos, gate_sig);
  copy_in(flat, pos, gate_sig_bias);
  copy_in(flat, pos, attn);
  copy_in(flat, pos, classifier);
  copy_in(flat, pos, classifier_bias);
  if (config_.instance_head) {
    copy_in(flat, pos, inst_head);
    copy_in(flat, pos, inst_head_bias);
  }
  return flat;
}

void GatedMilModel::from_vector(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count())
    throw DataError("parameter vector length mismatch");
  Eigen::Index pos = 0;
  copy_out(flat, pos, proj);
  copy_out(flat, pos, proj_bias);
  copy_out(flat, pos, gate_tanh);
  copy_out(flat, pos, gate_tanh_bias);
  copy_out(flat, pos, gate_sig);
  copy_out(flat, pos, gate_sig_bias);
  copy_out(flat, pos, attn);
  copy_out(flat, pos, classifier);
  copy_out(flat, pos, classifier_bias);
  if (config_.instance_head) {
    copy_out(flat, pos, inst_head);
    copy_out(flat, pos, inst_head_bias);
  }
}

MilTrace mil_forward_trace(const Eigen::MatrixXd& instances,
                           const GatedMilModel& model, RunMode mode,
                           Rng* dropout_rng) {
  const auto& cfg = model.config();
  if (instances.cols() != cfg.dim)
    throw DataError("bag dimension " + std::to_string(instances.cols()) +
                    " does not match model dimension " + std::to_string(cfg.dim));
  if (instances.rows() < 1) throw DataError("bag has no instances");

  Rng* rng = (mode == RunMode::train) ? dropout_rng : nullptr;
  const Eigen::Index n = instances.rows();
  const int heads = cfg.per_class_attention ? cfg.classes : 1;

  MilTrace t;
  t.input = instances;
  Eigen::MatrixXd pre = instances * model.proj.transpose();
  pre.rowwise() += model.proj_bias.transpose();
  Eigen::MatrixXd latent_relu = pre.cwiseMax(0.0);
  t.latent_drop = dropout_mask(n, cfg.latent, cfg.dropout, rng);
  t.latent = latent_relu.cwiseProduct(t.latent_drop);
  // ReLU derivative is recovered from latent_relu > 0, so only the dropped
  // activations and the mask are kept.
  t.latent_relu = std::move(latent_relu);

  Eigen::MatrixXd pre_t = t.latent * model.gate_tanh.transpose();
  pre_t.rowwise() += model.gate_tanh_bias.transpose();
  t.gate_t = pre_t.array().tanh();
  Eigen::MatrixXd pre_s = t.latent * model.gate_sig.transpose();
  pre_s.rowwise() += model.gate_sig_bias.transpose();
  t.gate_s = (1.0 / (1.0 + (-pre_s.array()).exp())).matrix();

  t.gated_drop = dropout_mask(n, cfg.hidden, cfg.dropout, rng);
  t.gated = t.gate_t.cwiseProduct(t.gate_s).cwiseProduct(t.gated_drop);

  const Eigen::MatrixXd scores = model.attn * t.gated.transpose();  // heads x N
  t.attention.resize(heads, n);
  for (int h = 0; h < heads; ++h)
    t.attention.row(h) = softmax(scores.row(h).transpose()).transpose();
  t.pooled = t.attention * t.latent;  // heads x latent

  t.logits.resize(cfg.classes);
  if (cfg.per_class_attention) {
    for (int c = 0; c < cfg.classes; ++c)
      t.logits(c) = model.classifier.row(c).dot(t.pooled.row(c)) +
                    model.classifier_bias(c);
  } else {
    t.logits = model.classifier * t.pooled.row(0).transpose() + model.classifier_bias;
  }
  return t;
}

MilOutput mil_forward(const Eigen::MatrixXd& instances, const GatedMilModel& model,
                      RunMode mode, Rng* dropout_rng) {
  const MilTrace t = mil_forward_trace(instances, model, mode, dropout_rng);
  MilOutput out;
  out.logits = t.logits;
  Eigen::Index head = 0;
  if (model.config().per_class_attention) t.logits.maxCoeff(&head);
  out.attention = t.attention.row(head);
  return out;
}

double cross_entropy(const Eigen::VectorXd& logits, int label) {
  if (label < 0 || label >= logits.size())
    throw DataError("label out of range");
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits(label);
}

double mil_loss(const Eigen::MatrixXd& instances, int label,
                const GatedMilModel& model) {
  const MilTrace t = mil_forward_trace(instances, model, RunMode::eval, nullptr);
  return cross_entropy(t.logits, label);
}

namespace {

Eigen::VectorXd backward_impl(const MilTrace& t, const GatedMilModel& model,
                              const Eigen::VectorXd& dlogits,
                              const Eigen::MatrixXd* dpooled_override,
                              const InstanceTerm* inst) {
  const auto& cfg = model.config();
  const int heads = cfg.per_class_attention ? cfg.classes : 1;
  const Eigen::Index n = t.latent.rows();

  Eigen::MatrixXd dclassifier = Eigen::MatrixXd::Zero(cfg.classes, cfg.latent);
  Eigen::VectorXd dclassifier_bias = Eigen::VectorXd::Zero(cfg.classes);
  Eigen::MatrixXd dpooled = Eigen::MatrixXd::Zero(heads, cfg.latent);

  if (dpooled_override != nullptr) {
    dpooled = *dpooled_override;
  } else if (cfg.per_class_attention) {
    for (int c = 0; c < cfg.classes; ++c) {
      dclassifier.row(c) = dlogits(c) * t.pooled.row(c);
      dpooled.row(c) = dlogits(c) * model.classifier.row(c);
      dclassifier_bias(c) = dlogits(c);
    }
  } else {
    dclassifier = dlogits * t.pooled.row(0);
    dclassifier_bias = dlogits;
    dpooled.row(0) = (model.classifier.transpose() * dlogits).transpose();
  }

  Eigen::MatrixXd dlatent = Eigen::MatrixXd::Zero(n, cfg.latent);
  Eigen::MatrixXd dgated = Eigen::MatrixXd::Zero(n, cfg.hidden);
  Eigen::MatrixXd dattn = Eigen::MatrixXd::Zero(heads, cfg.hidden);
  for (int h = 0; h < heads; ++h) {
    const Eigen::VectorXd a = t.attention.row(h);
    const Eigen::VectorXd da = t.latent * dpooled.row(h).transpose();  // N
    dlatent += a * dpooled.row(h);
    const double dot = a.dot(da);
    const Eigen::VectorXd dscore = (a.array() * (da.array() - dot)).matrix();
    dattn.row(h) = (t.gated.transpose() * dscore).transpose();
    dgated += dscore * model.attn.row(h);
  }

  if (inst != nullptr) dlatent += inst->dlatent;

  const Eigen::MatrixXd dg_pre = dgated.cwiseProduct(t.gated_drop);
  const Eigen::MatrixXd dt = dg_pre.cwiseProduct(t.gate_s);
  const Eigen::MatrixXd ds = dg_pre.cwiseProduct(t.gate_t);
  const Eigen::MatrixXd dpre_t =
      dt.cwiseProduct((1.0 - t.gate_t.array().square()).matrix());
  const Eigen::MatrixXd dpre_s = ds.cwiseProduct(
      t.gate_s.cwiseProduct((1.0 - t.gate_s.array()).matrix()));

  const Eigen::MatrixXd dgate_tanh = dpre_t.transpose() * t.latent;
  const Eigen::VectorXd dgate_tanh_bias = dpre_t.colwise().sum();
  const Eigen::MatrixXd dgate_sig = dpre_s.transpose() * t.latent;
  const Eigen::VectorXd dgate_sig_bias = dpre_s.colwise().sum();

  dlatent += dpre_t * model.gate_tanh + dpre_s * model.gate_sig;

  const Eigen::MatrixXd drelu = dlatent.cwiseProduct(t.latent_drop);
  const Eigen::MatrixXd dpre_proj =
      drelu.cwiseProduct((t.latent_relu.array() > 0.0).cast<double>().matrix());
  const Eigen::MatrixXd dproj = dpre_proj.transpose() * t.input;
  const Eigen::VectorXd dproj_bias = dpre_proj.colwise().sum();

  Eigen::VectorXd flat(model.parameter_count());
  Eigen::Index pos = 0;
  copy_in(flat, pos, dproj);
  copy_in(flat, pos, dproj_bias);
  copy_in(flat, pos, dgate_tanh);
  copy_in(flat, pos, dgate_tanh_bias);
  copy_in(flat, pos, dgate_sig);
  copy_in(flat, pos, dgate_sig_bias);
  copy_in(flat, pos, dattn);
  copy_in(flat, pos, dclassifier);
  copy_in(flat, pos, dclassifier_bias);
  if (cfg.instance_head) {
    if (inst != nullptr) {
      copy_in(flat, pos, inst->dhead);
      copy_in(flat, pos, inst->dhead_bias);
    } else {
      copy_in(flat, pos, Eigen::MatrixXd::Zero(2, cfg.latent).eval());
      copy_in(flat, pos, Eigen::VectorXd::Zero(2).eval());
    }
  }
  return flat;
}

}  // namespace

Eigen::VectorXd mil_backward(const MilTrace& trace, const GatedMilModel& model,
                             const Eigen::VectorXd& dlogits) {
  return backward_impl(trace, model, dlogits, nullptr, nullptr);
}

Eigen::VectorXd mil_backward_from_pooled(const MilTrace& trace,
                                         const GatedMilModel& model,
                                         const Eigen::VectorXd& dpooled) {
  if (model.config().per_class_attention)
    throw ConfigError("pooled-embedding backward requires shared attention");
  Eigen::MatrixXd dp(1, dpooled.size());
  dp.row(0) = dpooled.transpose();
  return backward_impl(trace, model, Eigen::VectorXd::Zero(model.config().classes),
                       &dp, nullptr);
}

Eigen::VectorXd mil_gradients(const Eigen::MatrixXd& instances, int label,
                              const GatedMilModel& model) {
  const MilTrace t = mil_forward_trace(instances, model, RunMode::eval, nullptr);
  Eigen::VectorXd dlogits = softmax(t.logits);
  dlogits(label) -= 1.0;
  return mil_backward(t, model, dlogits);
}

MilTrainResult train_mil(const std::vector<BagSample>& train,
                         const std::vector<BagSample>& val,
                         const GatedMilConfig& model_config,
                         const MilTrainConfig& train_config) {
  if (train.empty()) throw DataError("empty training set");
  std::set<int> seen;
  for (const auto& b : train) {
    if (b.label < 0 || b.label >= model_config.classes)
      throw DataError("label out of range in training set");
    seen.insert(b.label);
  }
  if (seen.size() < 2)
    throw DataError("training folds must contain at least two classes");
  if (train_config.instance_loss_weight > 0.0 && !model_config.instance_head)
    throw ConfigError("instance_loss_weight requires instance_head");

  GatedMilModel model(model_config, derive_seed(train_config.seed, 0));
  Rng dropout_rng(derive_seed(train_config.seed, 1));
  Rng shuffle_rng(derive_seed(train_config.seed, 2));

  Eigen::VectorXd params = model.to_vector();
  Adam adam(params.size(), AdamConfig{.lr = train_config.lr});

  MilTrainResult result;
  Eigen::VectorXd best_params = params;
  double best_loss = std::numeric_limits<double>::infinity();
  int stall = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < train_config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      const BagSample& bag = train[idx];
      model.from_vector(params);
      const MilTrace trace =
          mil_forward_trace(bag.instances, model, RunMode::train, &dropout_rng);
      double loss = cross_entropy(trace.logits, bag.label);
      Eigen::VectorXd dlogits = softmax(trace.logits);
      dlogits(bag.label) -= 1.0;

      Eigen::VectorXd grad;
      if (train_config.instance_loss_weight > 0.0) {
        InstanceTerm term = instance_loss_term(trace, model, bag.label,
                                               train_config.instance_top_k);
        const double w = train_config.instance_loss_weight;
        loss += w * term.loss;
        term.dlatent *= w;
        term.dhead *= w;
        term.dhead_bias *= w;
        grad = backward_impl(trace, model, dlogits, nullptr, &term);
      } else {
        grad = mil_backward(trace, model, dlogits);
      }
      if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
      adam.step(params, grad);
      epoch_loss += loss;
    }
    model.from_vector(params);
    result.train_loss.push_back(epoch_loss / static_cast<double>(train.size()));

    double monitored;
    if (!val.empty()) {
      double vloss = 0.0;
      for (const auto& bag : val) vloss += mil_loss(bag.instances, bag.label, model);
      monitored = vloss / static_cast<double>(val.size());
      result.val_loss.push_back(monitored);
    } else {
      monitored = result.train_loss.back();
    }
    if (!std::isfinite(monitored)) throw NumericError("non-finite validation loss");

    if (monitored < best_loss) {
      best_loss = monitored;
      best_params = params;
      result.best_epoch = epoch;
      stall = 0;
    } else if (++stall >= train_config.patience) {
      break;
    }
  }

  model.from_vector(best_params);
  result.model = std::move(model);
  return result;
}

std::vector<RankedPatch> top_k_patches(const EmbeddingBag& bag,
                                       const GatedMilModel& model, int k) {
  const MilOutput out = mil_forward(bag.instances(), model);
  const int n = static_cast<int>(bag.size());
  k = std::clamp(k, 0, n);

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (out.attention(a) != out.attention(b)) return out.attention(a) > out.attention(b);
    return a < b;
  });

  std::vector<RankedPatch> ranked;
  ranked.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const int idx = order[static_cast<std::size_t>(i)];
    ranked.push_back({bag.coords[static_cast<std::size_t>(idx)],
                      out.attention(idx), idx});
  }
  return ranked;
}

void save_mil_model(const GatedMilModel& model, const std::filesystem::path& path) {
  const json j = detail::mil_model_to_json(model);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

GatedMilModel load_mil_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("model json parse error: " + std::string(e.what()));
  }
  return detail::mil_model_from_json(j);
}

namespace detail {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols,
                                 const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw DataError(std::string("model json: bad shape for ") + name);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw DataError(std::string("model json: bad shape for ") + name);
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, Eigen::Index n, const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
    throw DataError(std::string("model json: bad shape for ") + name);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json mil_model_to_json(const GatedMilModel& model) {
  const auto& cfg = model.config();
  json j;
  j["dim"] = cfg.dim;
  j["latent"] = cfg.latent;
  j["hidden"] = cfg.hidden;
  j["classes"] = cfg.classes;
  j["dropout"] = cfg.dropout;
  j["per_class_attention"] = cfg.per_class_attention;
  j["instance_head"] = cfg.instance_head;
  j["proj"] = matrix_to_json(model.proj);
  j["proj_bias"] = std::vector<double>(model.proj_bias.begin(), model.proj_bias.end());
  j["gate_tanh"] = matrix_to_json(model.gate_tanh);
  j["gate_tanh_bias"] =
      std::vector<double>(model.gate_tanh_bias.begin(), model.gate_tanh_bias.end());
  j["gate_sig"] = matrix_to_json(model.gate_sig);
  j["gate_sig_bias"] =
      std::vector<double>(model.gate_sig_bias.begin(), model.gate_sig_bias.end());
  j["attn"] = matrix_to_json(model.attn);
  j["classifier"] = matrix_to_json(model.classifier);
  j["classifier_bias"] = std::vector<double>(model.classifier_bias.begin(),
                                             model.classifier_bias.end());
  if (cfg.instance_head) {
    j["inst_head"] = matrix_to_json(model.inst_head);
    j["inst_head_bias"] =
        std::vector<double>(model.inst_head_bias.begin(), model.inst_head_bias.end());
  }
  return j;
}

GatedMilModel mil_model_from_json(const json& j) {
  GatedMilConfig cfg;
  cfg.dim = j.at("dim").get<int>();
  cfg.latent = j.at("latent").get<int>();
  cfg.hidden = j.at("hidden").get<int>();
  cfg.classes = j.at("classes").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.per_class_attention = j.at("per_class_attention").get<bool>();
  cfg.instance_head = j.value("instance_head", false);

  GatedMilModel model(cfg, 0);
  const int heads = cfg.per_class_attention ? cfg.classes : 1;
  model.proj = matrix_from_json(j.at("proj"), cfg.latent, cfg.dim, "proj");
  model.proj_bias = vector_from_json(j.at("proj_bias"), cfg.latent, "proj_bias");
  model.gate_tanh =
      matrix_from_json(j.at("gate_tanh"), cfg.hidden, cfg.latent, "gate_tanh");
  model.gate_tanh_bias =
      vector_from_json(j.at("gate_tanh_bias"), cfg.hidden, "gate_tanh_bias");
  model.gate_sig =
      matrix_from_json(j.at("gate_sig"), cfg.hidden, cfg.latent, "gate_sig");
  model.gate_sig_bias =
      vector_from_json(j.at("gate_sig_bias"), cfg.hidden, "gate_sig_bias");
  model.attn = matrix_from_json(j.at("attn"), heads, cfg.hidden, "attn");
  model.classifier =
      matrix_from_json(j.at("classifier"), cfg.classes, cfg.latent, "classifier");
  model.classifier_bias =
      vector_from_json(j.at("classifier_bias"), cfg.classes, "classifier_bias");
  if (cfg.instance_head) {
    model.inst_head = matrix_from_json(j.at("inst_head"), 2, cfg.latent, "inst_head");
    model.inst_head_bias =
        vector_from_json(j.at("inst_head_bias"), 2, "inst_head_bias");
  }
  return model;
}

}  // namespace detail

}  // namespace cers
