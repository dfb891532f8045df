// SPDX-License-Identifier: Apache-2.0
#include "cers/seg_head.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "cers/adam.hpp"
#include "cers/errors.hpp"
#include "cers/rng.hpp"

namespace cers {

namespace {

// Per-token class probabilities, g*g x C.
Eigen::MatrixXd token_probs(const SegHead& head, const Eigen::MatrixXd& tokens) {
  Eigen::MatrixXd logits = tokens * head.weights.transpose();
  logits.rowwise() += head.bias.transpose();
  Eigen::MatrixXd probs(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
    probs.row(i) = (e / e.sum()).matrix().transpose();
  }
  return probs;
}

struct SampleGrad {
  double loss = 0.0;
  Eigen::MatrixXd dw;
  Eigen::VectorXd db;
};

// Dice loss over the upsampled foreground maps, averaged over classes
// 1..C-1, plus its gradient w.r.t. the head parameters.
SampleGrad dice_sample(const SegHead& head, int classes,
                       const Eigen::MatrixXd& tokens, const Eigen::MatrixXd& mask,
                       bool want_grad) {
  constexpr double kEps = 1e-6;
  const int g = head.token_grid;
  const int up = head.upsample;
  const Eigen::Index side = static_cast<Eigen::Index>(g) * up;
  if (mask.rows() != side || mask.cols() != side)
    throw DataError("mask resolution does not match token_grid * upsample");
  if (tokens.rows() != static_cast<Eigen::Index>(g) * g)
    throw DataError("token count does not match token_grid^2");

  const Eigen::MatrixXd probs = token_probs(head, tokens);
  const double block = static_cast<double>(up) * up;

  SampleGrad out;
  Eigen::MatrixXd dprobs;
  if (want_grad) dprobs = Eigen::MatrixXd::Zero(probs.rows(), probs.cols());

  // Per-class sums; the upsampled map repeats each token prob up*up times.
  for (int c = 1; c < classes; ++c) {
    double inter = 0.0;   // sum p * t
    double pred_sum = 0.0;
    double target_sum = 0.0;
    std::vector<double> token_t(static_cast<std::size_t>(g) * g, 0.0);
    for (Eigen::Index ty = 0; ty < g; ++ty) {
      for (Eigen::Index tx = 0; tx < g; ++tx) {
        const Eigen::Index token = ty * g + tx;
        double t_in_block = 0.0;
        for (Eigen::Index y = ty * up; y < (ty + 1) * up; ++y)
          for (Eigen::Index x = tx * up; x < (tx + 1) * up; ++x)
            if (static_cast<int>(mask(y, x)) == c) t_in_block += 1.0;
        token_t[static_cast<std::size_t>(token)] = t_in_block;
        inter += probs(token, c) * t_in_block;
        pred_sum += probs(token, c) * block;
        target_sum += t_in_block;
      }
    }
    const double a = 2.0 * inter + kEps;
    const double b = pred_sum + target_sum + kEps;
    out.loss += (1.0 - a / b) / static_cast<double>(classes - 1);
    if (want_grad) {
      // d(1 - A/B)/dp_pixel = -(2 t - A/B)/B; token prob feeds up*up pixels.
      const double scale = 1.0 / static_cast<double>(classes - 1);
      for (Eigen::Index token = 0; token < probs.rows(); ++token) {
        const double t_sum = token_t[static_cast<std::size_t>(token)];
        dprobs(token, c) += scale * (-(2.0 * t_sum * b - a * block) / (b * b));
      }
    }
  }

  if (want_grad) {
    // Softmax backward per token row, then the linear layer.
    Eigen::MatrixXd dlogits(probs.rows(), probs.cols());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      const double dot = dprobs.row(i).dot(probs.row(i));
      dlogits.row(i) =
          (probs.row(i).array() * (dprobs.row(i).array() - dot)).matrix();
    }
    out.dw = dlogits.transpose() * tokens;
    out.db = dlogits.colwise().sum();
  }
  return out;
}

double mean_class_iou(const SegHead& head, int classes,
                      const Eigen::MatrixXd& tokens, const Eigen::MatrixXd& mask) {
  const Eigen::MatrixXd probs = token_probs(head, tokens);
  const int g = head.token_grid;
  const int up = head.upsample;
  double total = 0.0;
  for (int c = 1; c < classes; ++c) {
    std::int64_t inter = 0, uni = 0;
    for (Eigen::Index ty = 0; ty < g; ++ty) {
      for (Eigen::Index tx = 0; tx < g; ++tx) {
        Eigen::Index arg = 0;
        probs.row(ty * g + tx).maxCoeff(&arg);
        const bool pred = static_cast<int>(arg) == c;
        for (Eigen::Index y = ty * up; y < (ty + 1) * up; ++y)
          for (Eigen::Index x = tx * up; x < (tx + 1) * up; ++x) {
            const bool truth = static_cast<int>(mask(y, x)) == c;
            if (pred && truth) ++inter;
            if (pred || truth) ++uni;
          }
      }
    }
    total += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  return total / static_cast<double>(classes - 1);
}

}  // namespace

double dice_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                 double eps) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw DataError("dice: shape mismatch");
  if ((pred.array() < 0.0).any() || (pred.array() > 1.0).any())
    throw DataError("dice: predictions must lie in [0,1]");
  const double inter = (pred.array() * target.array()).sum();
  return 1.0 - (2.0 * inter + eps) / (pred.sum() + target.sum() + eps);
}

double iou_score(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                 double threshold) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw DataError("iou: shape mismatch");
  std::int64_t inter = 0, uni = 0;
  for (Eigen::Index r = 0; r < pred.rows(); ++r)
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      const bool p = pred(r, c) >= threshold;
      const bool t = target(r, c) != 0.0;
      if (p && t) ++inter;
      if (p || t) ++uni;
    }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Eigen::MatrixXd seg_predict(const SegHead& head, const Eigen::MatrixXd& tokens) {
  const int g = head.token_grid;
  const int up = head.upsample;
  if (tokens.rows() != static_cast<Eigen::Index>(g) * g)
    throw DataError("token count does not match token_grid^2");
  const Eigen::MatrixXd probs = token_probs(head, tokens);
  Eigen::MatrixXd map(static_cast<Eigen::Index>(g) * up,
                      static_cast<Eigen::Index>(g) * up);
  for (Eigen::Index ty = 0; ty < g; ++ty)
    for (Eigen::Index tx = 0; tx < g; ++tx) {
      const double p = probs(ty * g + tx, 1);
      for (Eigen::Index y = ty * up; y < (ty + 1) * up; ++y)
        for (Eigen::Index x = tx * up; x < (tx + 1) * up; ++x) map(y, x) = p;
    }
  return map;
}

SegTrainResult train_seg_head(const std::vector<Eigen::MatrixXd>& token_features,
                              const std::vector<Eigen::MatrixXd>& masks,
                              const SegHeadConfig& config,
                              const std::vector<Eigen::MatrixXd>* val_features,
                              const std::vector<Eigen::MatrixXd>* val_masks) {
  if (token_features.empty() || token_features.size() != masks.size())
    throw DataError("feature/mask count mismatch");
  if (config.classes < 2) throw ConfigError("segmentation needs >= 2 classes");
  if (config.optimizer.max_epochs > 80)
    throw ConfigError("segmentation epochs are capped at 80");

  bool any_foreground = false;
  for (const auto& mask : masks)
    if ((mask.array() > 0.0).any()) {
      any_foreground = true;
      break;
    }
  if (!any_foreground)
    throw DataError("every training mask is empty; nothing to segment");

  const int dim = static_cast<int>(token_features.front().cols());

  SegTrainResult result;
  result.head.token_grid = config.token_grid;
  result.head.upsample = config.upsample;
  Rng rng(config.optimizer.seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(dim));
  result.head.weights.resize(config.classes, dim);
  for (Eigen::Index r = 0; r < config.classes; ++r)
    for (Eigen::Index c = 0; c < dim; ++c) result.head.weights(r, c) = normal(rng);
  result.head.bias = Eigen::VectorXd::Zero(config.classes);

  const Eigen::Index n_params = result.head.weights.size() + config.classes;
  Eigen::VectorXd params(n_params);
  auto pack = [&](const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                  Eigen::VectorXd& flat) {
    Eigen::Index pos = 0;
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat(pos++) = w(r, c);
    flat.segment(pos, b.size()) = b;
  };
  auto unpack = [&](const Eigen::VectorXd& flat) {
    Eigen::Index pos = 0;
    for (Eigen::Index r = 0; r < result.head.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < result.head.weights.cols(); ++c)
        result.head.weights(r, c) = flat(pos++);
    result.head.bias = flat.segment(pos, result.head.bias.size());
  };
  pack(result.head.weights, result.head.bias, params);

  Adam adam(n_params, AdamConfig{.lr = config.optimizer.lr});
  double best = std::numeric_limits<double>::infinity();
  int stall = 0;
  double lr = config.optimizer.lr;

  for (int epoch = 0; epoch < config.optimizer.max_epochs; ++epoch) {
    unpack(params);
    double loss = 0.0;
    Eigen::MatrixXd dw = Eigen::MatrixXd::Zero(config.classes, dim);
    Eigen::VectorXd db = Eigen::VectorXd::Zero(config.classes);
    for (std::size_t i = 0; i < token_features.size(); ++i) {
      const SampleGrad g = dice_sample(result.head, config.classes,
                                       token_features[i], masks[i], true);
      loss += g.loss;
      dw += g.dw;
      db += g.db;
    }
    const double n = static_cast<double>(token_features.size());
    loss /= n;
    dw /= n;
    db /= n;
    if (!std::isfinite(loss)) throw NumericError("non-finite segmentation loss");

    Eigen::VectorXd grad(n_params);
    pack(dw, db, grad);
    adam.step(params, grad);
    ++result.epochs_run;

    unpack(params);
    double monitored = loss;
    if (val_features != nullptr && val_masks != nullptr && !val_features->empty()) {
      double vloss = 0.0;
      for (std::size_t i = 0; i < val_features->size(); ++i)
        vloss += dice_sample(result.head, config.classes, (*val_features)[i],
                             (*val_masks)[i], false)
                     .loss;
      monitored = vloss / static_cast<double>(val_features->size());
    }
    result.loss_history.push_back(monitored);

    if (monitored < best - 1e-12) {
      best = monitored;
      stall = 0;
    } else if (++stall >= config.optimizer.plateau_patience) {
      stall = 0;
      const double next = lr * config.optimizer.plateau_factor;
      if (next < config.optimizer.lr_floor) break;
      lr = next;
      adam.set_lr(lr);
    }
  }
  unpack(params);

  result.val_iou = std::numeric_limits<double>::quiet_NaN();
  if (val_features != nullptr && val_masks != nullptr && !val_features->empty()) {
    double total = 0.0;
    for (std::size_t i = 0; i < val_features->size(); ++i)
      total += mean_class_iou(result.head, config.classes, (*val_features)[i],
                              (*val_masks)[i]);
    result.val_iou = total / static_cast<double>(val_features->size());
  }
  return result;
}

}  // namespace cers
