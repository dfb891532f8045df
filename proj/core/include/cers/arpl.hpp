// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "cers/gated_mil.hpp"
#include "cers/rng.hpp"

namespace cers {

/// Reciprocal-point head: one learnable point per known class plus a shared
/// margin. Known-class features score high against their own point
/// (squared-distance minus dot product), so low max-probability signals an
/// out-of-distribution input.
struct ReciprocalPointHead {
  Eigen::MatrixXd points;      // K x d
  double margin = 0.0;         // R >= 0, learned
  double temperature = 1.0;    // gamma
  double margin_weight = 0.1;  // lambda_o
};

void validate(const ReciprocalPointHead& head);

struct ArplScore {
  Eigen::VectorXd scores;  // s_k = |z - P_k|^2 / d - z . P_k
  Eigen::VectorXd probs;   // softmax(gamma * s)
  double confidence = 0.0; // max probability
};

ArplScore arpl_score(const Eigen::VectorXd& z, const ReciprocalPointHead& head);

/// CE(probs, label) + lambda_o * (d_e(z, P_label) - R)^2.
double arpl_loss(const Eigen::VectorXd& z, int label, const ReciprocalPointHead& head);

struct ArplGradients {
  Eigen::MatrixXd d_points;  // K x d
  double d_margin = 0.0;
  Eigen::VectorXd d_input;   // d, for joint training of the pooling body
};

ArplGradients arpl_gradients(const Eigen::VectorXd& z, int label,
                             const ReciprocalPointHead& head);

struct ArplTrainConfig {
  double lr = 1e-4;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  double margin_weight = 0.1;
  bool joint_pooling = true;  // train a gated-attention body end to end
  GatedMilConfig body;        // used when joint_pooling
};

struct ArplTrainResult {
  ReciprocalPointHead head;
  std::optional<GatedMilModel> body;  // present when joint_pooling
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = -1;
};

/// Joint training: gated-attention pooling feeds the reciprocal-point head,
/// optimized end to end with Adam. Closed-set predictions are argmax of the
/// scores. Deterministic under seed.
ArplTrainResult train_arpl(const std::vector<BagSample>& train,
                           const std::vector<BagSample>& val,
                           const ArplTrainConfig& config);

/// Head-only variant over fixed feature vectors (rows of X).
ArplTrainResult train_arpl_features(const Eigen::MatrixXd& train_x,
                                    const std::vector<int>& train_y,
                                    const Eigen::MatrixXd& val_x,
                                    const std::vector<int>& val_y,
                                    const ArplTrainConfig& config);

/// Confidence of a bag under a jointly trained model.
double arpl_bag_confidence(const Eigen::MatrixXd& instances,
                           const GatedMilModel& body, const ReciprocalPointHead& head);
int arpl_bag_predict(const Eigen::MatrixXd& instances, const GatedMilModel& body,
                     const ReciprocalPointHead& head);

/// Otsu's threshold over a 256-bin histogram of the confidences on
/// [min, max]. Requires at least two distinct values ("no bimodality").
double bimodal_threshold(const std::vector<double>& confidences);

struct OodDetection {
  std::vector<bool> flagged;              // confidence < threshold
  std::optional<double> detection_rate;   // empty when no true OOD present
};

OodDetection detect_ood(const std::vector<double>& confidences,
                        const std::vector<bool>& is_ood, double threshold);

/// Head + optional body + chosen threshold as one JSON artifact.
void save_arpl_head(const ReciprocalPointHead& head, const GatedMilModel* body,
                    std::optional<double> threshold,
                    const std::filesystem::path& path);
struct LoadedArplHead {
  ReciprocalPointHead head;
  std::optional<GatedMilModel> body;
  std::optional<double> threshold;
};
LoadedArplHead load_arpl_head(const std::filesystem::path& path);

}  // namespace cers
