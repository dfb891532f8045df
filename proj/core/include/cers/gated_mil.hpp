// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "cers/adam.hpp"
#include "cers/bag.hpp"
#include "cers/rng.hpp"

namespace cers {

struct GatedMilConfig {
  int dim = 0;          // input embedding dimension D
  int latent = 512;     // projection width
  int hidden = 384;     // gating width
  int classes = 2;
  double dropout = 0.25;
  bool per_class_attention = false;  // one attention vector per class
  bool instance_head = false;        // optional instance-level classifier
};

/// Gated-attention MIL head: ReLU projection into the latent space, a
/// tanh/sigmoid gating pair feeding attention weights, attention-weighted
/// pooling, and a linear classifier on the pooled embedding.
class GatedMilModel {
 public:
  GatedMilModel() = default;
  GatedMilModel(const GatedMilConfig& config, std::uint64_t seed);

  const GatedMilConfig& config() const { return config_; }

  Eigen::Index parameter_count() const;
  Eigen::VectorXd to_vector() const;
  void from_vector(const Eigen::VectorXd& flat);

  // Parameters. `attn` has one row per attention head (1 or C).
  Eigen::MatrixXd proj;        // latent x dim
  Eigen::VectorXd proj_bias;   // latent
  Eigen::MatrixXd gate_tanh;   // hidden x latent
  Eigen::VectorXd gate_tanh_bias;
  Eigen::MatrixXd gate_sig;    // hidden x latent
  Eigen::VectorXd gate_sig_bias;
  Eigen::MatrixXd attn;        // heads x hidden
  Eigen::MatrixXd classifier;  // classes x latent
  Eigen::VectorXd classifier_bias;
  Eigen::MatrixXd inst_head;   // 2 x latent (only when config.instance_head)
  Eigen::VectorXd inst_head_bias;

 private:
  GatedMilConfig config_;
};

struct MilOutput {
  Eigen::VectorXd logits;     // C
  Eigen::VectorXd attention;  // N, non-negative, sums to 1
};

/// Full forward pass record, kept so the backward pass can reuse the exact
/// dropout masks of the step.
struct MilTrace {
  Eigen::MatrixXd input;        // N x D
  Eigen::MatrixXd latent_relu;  // N x latent, after ReLU, before dropout
  Eigen::MatrixXd latent;       // N x latent, after ReLU and dropout
  Eigen::MatrixXd latent_drop;  // dropout mask / keep-prob scaling, N x latent
  Eigen::MatrixXd gate_t;       // N x hidden
  Eigen::MatrixXd gate_s;       // N x hidden
  Eigen::MatrixXd gated;        // N x hidden, after dropout
  Eigen::MatrixXd gated_drop;   // N x hidden
  Eigen::MatrixXd attention;    // heads x N (rows sum to 1)
  Eigen::MatrixXd pooled;       // heads x latent
  Eigen::VectorXd logits;       // C
};

MilTrace mil_forward_trace(const Eigen::MatrixXd& instances,
                           const GatedMilModel& model,
                           RunMode mode = RunMode::eval, Rng* dropout_rng = nullptr);

/// Eval-style forward: logits and the attention over instances. In
/// per-class-attention mode the reported attention row belongs to the
/// argmax class.
MilOutput mil_forward(const Eigen::MatrixXd& instances, const GatedMilModel& model,
                      RunMode mode = RunMode::eval, Rng* dropout_rng = nullptr);

double cross_entropy(const Eigen::VectorXd& logits, int label);

/// Cross-entropy loss of the eval-mode forward; used by gradient checks.
double mil_loss(const Eigen::MatrixXd& instances, int label,
                const GatedMilModel& model);

/// Analytic gradients of cross-entropy w.r.t. every parameter, laid out as
/// in to_vector(). Computed on the eval-mode forward (no dropout).
Eigen::VectorXd mil_gradients(const Eigen::MatrixXd& instances, int label,
                              const GatedMilModel& model);

/// Backward pass from d(loss)/d(logits) through the trace (which may carry
/// train-mode dropout masks).
Eigen::VectorXd mil_backward(const MilTrace& trace, const GatedMilModel& model,
                             const Eigen::VectorXd& dlogits);

/// Backward pass from d(loss)/d(pooled embedding), for heads that replace
/// the classifier (e.g. reciprocal-point training). Shared-attention only.
Eigen::VectorXd mil_backward_from_pooled(const MilTrace& trace,
                                         const GatedMilModel& model,
                                         const Eigen::VectorXd& dpooled);

struct BagSample {
  Eigen::MatrixXd instances;
  int label = 0;
};

struct MilTrainConfig {
  double lr = 1e-4;
  int max_epochs = 100;
  int patience = 10;        // early stop on stalled validation loss
  std::uint64_t seed = 0;
  double instance_loss_weight = 0.0;  // > 0 enables the instance head term
  int instance_top_k = 8;
};

struct MilTrainResult {
  GatedMilModel model;  // parameters at the best validation epoch
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = -1;
};

/// One-bag-at-a-time Adam training, deterministic under the config seed.
/// Needs at least two classes in `train`; keeps the best-validation model.
MilTrainResult train_mil(const std::vector<BagSample>& train,
                         const std::vector<BagSample>& val,
                         const GatedMilConfig& model_config,
                         const MilTrainConfig& train_config);

struct RankedPatch {
  std::array<std::int32_t, 2> coord;
  double attention = 0.0;
  int instance = 0;
};

/// Top-K instances by attention, descending; ties break on instance index.
/// K clamps to the bag size.
std::vector<RankedPatch> top_k_patches(const EmbeddingBag& bag,
                                       const GatedMilModel& model, int k);

void save_mil_model(const GatedMilModel& model, const std::filesystem::path& path);
GatedMilModel load_mil_model(const std::filesystem::path& path);

}  // namespace cers
