// SPDX-License-Identifier: Apache-2.0
#include "cers/arpl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <set>

#include "cers/errors.hpp"
#include "cers/otsu.hpp"
#include "mil_json.hpp"

namespace cers {

namespace {

using json = nlohmann::json;

Eigen::VectorXd softmax(const Eigen::VectorXd& x) {
  const double m = x.maxCoeff();
  Eigen::VectorXd e = (x.array() - m).exp();
  return e / e.sum();
}

double euclid_score(const Eigen::VectorXd& z, const Eigen::VectorXd& point) {
  // d_e = |z - P|^2 / d, the dimension-normalized squared distance.
  return (z - point).squaredNorm() / static_cast<double>(z.size());
}

void check_dims(const Eigen::VectorXd& z, const ReciprocalPointHead& head) {
  if (z.size() != head.points.cols())
    throw DataError("feature dimension " + std::to_string(z.size()) +
                    " does not match head dimension " +
                    std::to_string(head.points.cols()));
}

struct FlatHead {
  // Reciprocal points plus margin as the tail of a flat parameter vector.
  static Eigen::Index size(const ReciprocalPointHead& head) {
    return head.points.size() + 1;
  }
  static void pack(const ReciprocalPointHead& head, Eigen::VectorXd& flat,
                   Eigen::Index offset) {
    for (Eigen::Index r = 0; r < head.points.rows(); ++r)
      for (Eigen::Index c = 0; c < head.points.cols(); ++c)
        flat(offset++) = head.points(r, c);
    flat(offset) = head.margin;
  }
  static void unpack(const Eigen::VectorXd& flat, Eigen::Index offset,
                     ReciprocalPointHead& head) {
    for (Eigen::Index r = 0; r < head.points.rows(); ++r)
      for (Eigen::Index c = 0; c < head.points.cols(); ++c)
        head.points(r, c) = flat(offset++);
    head.margin = std::max(0.0, flat(offset));  // projected back to R >= 0
  }
};

}  // namespace

void validate(const ReciprocalPointHead& head) {
  if (head.points.rows() < 2) throw ConfigError("reciprocal-point head needs K >= 2");
  if (head.margin < 0.0) throw ConfigError("margin R must be >= 0");
  if (!(head.temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (head.margin_weight < 0.0) throw ConfigError("margin weight must be >= 0");
}

ArplScore arpl_score(const Eigen::VectorXd& z, const ReciprocalPointHead& head) {
  check_dims(z, head);
  const Eigen::Index k = head.points.rows();
  ArplScore out;
  out.scores.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double de = euclid_score(z, head.points.row(i));
    const double dd = z.dot(head.points.row(i));
    out.scores(i) = de - dd;
  }
  out.probs = softmax(head.temperature * out.scores);
  out.confidence = out.probs.maxCoeff();
  return out;
}

double arpl_loss(const Eigen::VectorXd& z, int label, const ReciprocalPointHead& head) {
  const ArplScore s = arpl_score(z, head);
  if (label < 0 || label >= s.scores.size()) throw DataError("label out of range");
  const double ce = cross_entropy(head.temperature * s.scores, label);
  const double de = euclid_score(z, head.points.row(label));
  const double gap = de - head.margin;
  return ce + head.margin_weight * gap * gap;
}

ArplGradients arpl_gradients(const Eigen::VectorXd& z, int label,
                             const ReciprocalPointHead& head) {
  const ArplScore s = arpl_score(z, head);
  if (label < 0 || label >= s.scores.size()) throw DataError("label out of range");
  const double d = static_cast<double>(z.size());

  ArplGradients g;
  g.d_points = Eigen::MatrixXd::Zero(head.points.rows(), head.points.cols());
  g.d_input = Eigen::VectorXd::Zero(z.size());

  // Cross-entropy part: dCE/ds_k = gamma * (p_k - [k == label]).
  for (Eigen::Index k = 0; k < head.points.rows(); ++k) {
    double ds = head.temperature * s.probs(k);
    if (k == label) ds -= head.temperature;
    const Eigen::VectorXd point = head.points.row(k);
    g.d_points.row(k) += ds * (2.0 / d * (point - z) - z).transpose();
    g.d_input += ds * (2.0 / d * (z - point) - point);
  }
  // Margin part: lambda_o * (d_e(z, P_label) - R)^2.
  const Eigen::VectorXd point = head.points.row(label);
  const double gap = euclid_score(z, point) - head.margin;
  const double w = head.margin_weight;
  g.d_points.row(label) += (4.0 * w * gap / d) * (point - z).transpose();
  g.d_input += (4.0 * w * gap / d) * (z - point);
  g.d_margin = -2.0 * w * gap;
  return g;
}

namespace {

struct JointState {
  GatedMilModel body;
  ReciprocalPointHead head;
  bool joint = false;

  Eigen::VectorXd pooled(const BagSample& bag, RunMode mode, Rng* rng,
                         MilTrace* trace_out) const {
    MilTrace t = mil_forward_trace(bag.instances, body, mode, rng);
    if (trace_out) *trace_out = t;
    return t.pooled.row(0);
  }
};

ArplTrainResult train_impl(const std::vector<BagSample>& train,
                           const std::vector<BagSample>& val,
                           const ArplTrainConfig& config, bool joint) {
  if (train.empty()) throw DataError("empty training set");
  std::set<int> seen;
  for (const auto& b : train) seen.insert(b.label);
  if (seen.size() < 2) throw DataError("open-set training needs at least two classes");

  const int classes = joint ? config.body.classes
                            : (*seen.rbegin() + 1);
  const Eigen::Index feat_dim =
      joint ? config.body.latent : train.front().instances.cols();

  ArplTrainResult result;
  ReciprocalPointHead head;
  head.temperature = config.temperature;
  head.margin_weight = config.margin_weight;
  {
    Rng rng(derive_seed(config.seed, 10));
    std::normal_distribution<double> normal(0.0, 0.1);
    head.points.resize(classes, feat_dim);
    for (Eigen::Index r = 0; r < head.points.rows(); ++r)
      for (Eigen::Index c = 0; c < head.points.cols(); ++c)
        head.points(r, c) = normal(rng);
  }

  GatedMilModel body;
  if (joint) {
    if (config.body.per_class_attention)
      throw ConfigError("joint open-set training requires shared attention");
    body = GatedMilModel(config.body, derive_seed(config.seed, 0));
  }
  Rng dropout_rng(derive_seed(config.seed, 1));
  Rng shuffle_rng(derive_seed(config.seed, 2));

  // R starts at the mean in-class distance of the untrained features.
  {
    double sum = 0.0;
    for (const auto& bag : train) {
      Eigen::VectorXd z;
      if (joint) {
        const MilTrace t = mil_forward_trace(bag.instances, body, RunMode::eval);
        z = t.pooled.row(0);
      } else {
        z = bag.instances.row(0);
      }
      sum += euclid_score(z, head.points.row(bag.label));
    }
    head.margin = sum / static_cast<double>(train.size());
  }

  const Eigen::Index body_size = joint ? body.parameter_count() : 0;
  Eigen::VectorXd params(body_size + FlatHead::size(head));
  if (joint) params.head(body_size) = body.to_vector();
  FlatHead::pack(head, params, body_size);

  Adam adam(params.size(), AdamConfig{.lr = config.lr});
  Eigen::VectorXd best_params = params;
  double best_loss = std::numeric_limits<double>::infinity();
  int stall = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto eval_loss = [&](const BagSample& bag) {
    Eigen::VectorXd z;
    if (joint) {
      const MilTrace t = mil_forward_trace(bag.instances, body, RunMode::eval);
      z = t.pooled.row(0);
    } else {
      z = bag.instances.row(0);
    }
    return arpl_loss(z, bag.label, head);
  };

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      const BagSample& bag = train[idx];
      if (joint) body.from_vector(params.head(body_size));
      FlatHead::unpack(params, body_size, head);

      Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
      double loss;
      if (joint) {
        MilTrace trace = mil_forward_trace(bag.instances, body, RunMode::train,
                                           &dropout_rng);
        const Eigen::VectorXd z = trace.pooled.row(0);
        loss = arpl_loss(z, bag.label, head);
        const ArplGradients g = arpl_gradients(z, bag.label, head);
        grad.head(body_size) = mil_backward_from_pooled(trace, body, g.d_input);
        Eigen::VectorXd head_grad(FlatHead::size(head));
        Eigen::Index pos = 0;
        for (Eigen::Index r = 0; r < g.d_points.rows(); ++r)
          for (Eigen::Index c = 0; c < g.d_points.cols(); ++c)
            head_grad(pos++) = g.d_points(r, c);
        head_grad(pos) = g.d_margin;
        grad.tail(FlatHead::size(head)) = head_grad;
      } else {
        const Eigen::VectorXd z = bag.instances.row(0);
        loss = arpl_loss(z, bag.label, head);
        const ArplGradients g = arpl_gradients(z, bag.label, head);
        Eigen::Index pos = 0;
        for (Eigen::Index r = 0; r < g.d_points.rows(); ++r)
          for (Eigen::Index c = 0; c < g.d_points.cols(); ++c)
            grad(pos++) = g.d_points(r, c);
        grad(pos) = g.d_margin;
      }
      if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
      adam.step(params, grad);
      epoch_loss += loss;
    }
    if (joint) body.from_vector(params.head(body_size));
    FlatHead::unpack(params, body_size, head);
    result.train_loss.push_back(epoch_loss / static_cast<double>(train.size()));

    double monitored;
    if (!val.empty()) {
      double vloss = 0.0;
      for (const auto& bag : val) vloss += eval_loss(bag);
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
    } else if (++stall >= config.patience) {
      break;
    }
  }

  if (joint) {
    body.from_vector(best_params.head(body_size));
    result.body = std::move(body);
  }
  FlatHead::unpack(best_params, body_size, head);
  result.head = std::move(head);
  return result;
}

}  // namespace

ArplTrainResult train_arpl(const std::vector<BagSample>& train,
                           const std::vector<BagSample>& val,
                           const ArplTrainConfig& config) {
  if (!config.joint_pooling)
    throw ConfigError("bag-level training requires joint_pooling; use "
                      "train_arpl_features for fixed features");
  return train_impl(train, val, config, /*joint=*/true);
}

ArplTrainResult train_arpl_features(const Eigen::MatrixXd& train_x,
                                    const std::vector<int>& train_y,
                                    const Eigen::MatrixXd& val_x,
                                    const std::vector<int>& val_y,
                                    const ArplTrainConfig& config) {
  if (static_cast<std::size_t>(train_x.rows()) != train_y.size() ||
      static_cast<std::size_t>(val_x.rows()) != val_y.size())
    throw DataError("feature/label count mismatch");
  // Each feature row becomes a single-instance bag so the loop is shared.
  std::vector<BagSample> train, val;
  train.reserve(train_y.size());
  for (Eigen::Index i = 0; i < train_x.rows(); ++i)
    train.push_back({train_x.row(i), train_y[static_cast<std::size_t>(i)]});
  val.reserve(val_y.size());
  for (Eigen::Index i = 0; i < val_x.rows(); ++i)
    val.push_back({val_x.row(i), val_y[static_cast<std::size_t>(i)]});
  return train_impl(train, val, config, /*joint=*/false);
}

double arpl_bag_confidence(const Eigen::MatrixXd& instances,
                           const GatedMilModel& body,
                           const ReciprocalPointHead& head) {
  const MilTrace t = mil_forward_trace(instances, body, RunMode::eval);
  return arpl_score(t.pooled.row(0), head).confidence;
}

int arpl_bag_predict(const Eigen::MatrixXd& instances, const GatedMilModel& body,
                     const ReciprocalPointHead& head) {
  const MilTrace t = mil_forward_trace(instances, body, RunMode::eval);
  const ArplScore s = arpl_score(t.pooled.row(0), head);
  Eigen::Index arg = 0;
  s.scores.maxCoeff(&arg);
  return static_cast<int>(arg);
}

double bimodal_threshold(const std::vector<double>& confidences) {
  if (confidences.size() < 2) throw DataError("no bimodality: need >= 2 values");
  const auto [min_it, max_it] =
      std::minmax_element(confidences.begin(), confidences.end());
  const double lo = *min_it, hi = *max_it;
  if (lo == hi) throw DataError("no bimodality: all confidences equal");

  constexpr int kBins = 256;
  const double width = (hi - lo) / kBins;
  std::vector<std::uint64_t> hist(kBins, 0);
  for (double v : confidences) {
    int bin = static_cast<int>((v - lo) / width);
    bin = std::clamp(bin, 0, kBins - 1);
    ++hist[static_cast<std::size_t>(bin)];
  }
  const std::optional<int> split = otsu_split(hist);
  if (!split) throw DataError("no bimodality: degenerate histogram");
  return lo + (static_cast<double>(*split) + 1.0) * width;
}

OodDetection detect_ood(const std::vector<double>& confidences,
                        const std::vector<bool>& is_ood, double threshold) {
  if (!std::isfinite(threshold)) throw ConfigError("threshold must be finite");
  if (confidences.size() != is_ood.size())
    throw DataError("confidence/label count mismatch");
  OodDetection out;
  out.flagged.resize(confidences.size());
  std::size_t ood_total = 0, ood_flagged = 0;
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    out.flagged[i] = confidences[i] < threshold;
    if (is_ood[i]) {
      ++ood_total;
      if (out.flagged[i]) ++ood_flagged;
    }
  }
  if (ood_total > 0)
    out.detection_rate = static_cast<double>(ood_flagged) /
                         static_cast<double>(ood_total);
  return out;
}

void save_arpl_head(const ReciprocalPointHead& head, const GatedMilModel* body,
                    std::optional<double> threshold,
                    const std::filesystem::path& path) {
  json j;
  j["points"] = detail::matrix_to_json(head.points);
  j["margin"] = head.margin;
  j["temperature"] = head.temperature;
  j["margin_weight"] = head.margin_weight;
  if (threshold) j["threshold"] = *threshold;
  if (body) j["body"] = detail::mil_model_to_json(*body);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

LoadedArplHead load_arpl_head(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("head json parse error: " + std::string(e.what()));
  }
  LoadedArplHead out;
  const auto& pts = j.at("points");
  if (!pts.is_array() || pts.empty()) throw DataError("head json: bad points");
  const auto rows = static_cast<Eigen::Index>(pts.size());
  const auto cols = static_cast<Eigen::Index>(pts[0].size());
  out.head.points = detail::matrix_from_json(pts, rows, cols, "points");
  out.head.margin = j.at("margin").get<double>();
  out.head.temperature = j.at("temperature").get<double>();
  out.head.margin_weight = j.at("margin_weight").get<double>();
  if (j.contains("threshold")) out.threshold = j.at("threshold").get<double>();
  if (j.contains("body")) out.body = detail::mil_model_from_json(j.at("body"));
  validate(out.head);
  return out;
}

}  // namespace cers
