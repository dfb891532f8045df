// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace cers {

/// Linear-probe regimen: Adam at 1e-4, reduce-on-plateau (halve when the
/// monitored loss stalls for `plateau_patience` epochs), hard stop at 80
/// epochs or when a reduction would fall below the floor. The ridge
/// coefficient is always 100 / (M * C), never user-set.
struct ProbeConfig {
  double lr = 1e-4;
  int max_epochs = 80;
  int plateau_patience = 5;
  double plateau_factor = 0.5;
  double lr_floor = 1e-6;
  std::uint64_t seed = 0;
};

double probe_lambda(int emb_dim, int classes);

struct LinearProbe {
  Eigen::MatrixXd weights;  // C x M
  Eigen::VectorXd bias;     // C
};

struct ProbeResult {
  LinearProbe probe;
  double lambda = 0.0;
  std::vector<double> loss_history;  // monitored loss per epoch
  std::vector<double> lr_history;
  int epochs_run = 0;
};

/// Minimizes mean CE + lambda * |W|_F^2 on frozen features (rows of x).
/// Plateau monitoring uses the validation set when given, else training
/// loss. Deterministic under seed.
ProbeResult train_linear_probe(const Eigen::MatrixXd& x, const std::vector<int>& y,
                               int classes, const ProbeConfig& config,
                               const Eigen::MatrixXd* val_x = nullptr,
                               const std::vector<int>* val_y = nullptr);

Eigen::VectorXd probe_logits(const LinearProbe& probe, const Eigen::VectorXd& x);
int probe_predict(const LinearProbe& probe, const Eigen::VectorXd& x);

void save_probe(const LinearProbe& probe, double lambda,
                const std::filesystem::path& path);
LinearProbe load_probe(const std::filesystem::path& path);

}  // namespace cers
