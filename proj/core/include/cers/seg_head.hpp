// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "cers/probe.hpp"

namespace cers {

/// Soft Dice loss: 1 - (2 sum(p*t) + eps) / (sum(p) + sum(t) + eps).
/// pred entries must lie in [0, 1]; shapes must match.
double dice_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                 double eps = 1e-6);

/// Intersection-over-union of the thresholded prediction against a binary
/// target. Empty-against-empty is defined as 1.0.
double iou_score(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                 double threshold = 0.5);

/// Per-token linear classifier over a g x g token grid, upsampled
/// (nearest-neighbor) to mask resolution.
struct SegHead {
  Eigen::MatrixXd weights;  // C x d
  Eigen::VectorXd bias;     // C
  int token_grid = 14;      // g
  int upsample = 16;        // mask side = g * upsample
};

struct SegHeadConfig {
  int token_grid = 14;
  int upsample = 16;
  int classes = 2;
  ProbeConfig optimizer;  // same Adam + plateau + 80-epoch regimen
};

/// Foreground probability map (class 1) at mask resolution for a sample's
/// g*g x d token feature matrix.
Eigen::MatrixXd seg_predict(const SegHead& head, const Eigen::MatrixXd& tokens);

struct SegTrainResult {
  SegHead head;
  std::vector<double> loss_history;
  int epochs_run = 0;
  double val_iou = 0.0;  // NaN when no validation set given
};

/// Dice-loss optimization of the linear head. token_features holds one
/// g*g x d matrix per sample; masks hold binary targets at g*upsample
/// resolution. Errors when every training mask is empty.
SegTrainResult train_seg_head(const std::vector<Eigen::MatrixXd>& token_features,
                              const std::vector<Eigen::MatrixXd>& masks,
                              const SegHeadConfig& config,
                              const std::vector<Eigen::MatrixXd>* val_features = nullptr,
                              const std::vector<Eigen::MatrixXd>* val_masks = nullptr);

}  // namespace cers
