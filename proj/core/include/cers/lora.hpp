// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "cers/rng.hpp"

namespace cers {

/// Low-rank adapter on a frozen base matrix: effective weight
/// W~ = W0 + scale * U * V, with U zero-initialized and V Gaussian so the
/// merged matrix equals W0 exactly at initialization.
struct LoraLayer {
  Eigen::MatrixXd base;   // W0, d2 x d1, frozen
  Eigen::MatrixXd up;     // U, d2 x r
  Eigen::MatrixXd down;   // V, r x d1
  double scale = 64.0;    // alpha
  double dropout = 0.25;  // adapter-path dropout rate

  int rank() const { return static_cast<int>(up.cols()); }
};

/// U = 0, V ~ N(0, 1/r). Requires rank < min(d1, d2).
LoraLayer lora_init(const Eigen::MatrixXd& base, int rank, double scale,
                    std::uint64_t seed);

Eigen::MatrixXd lora_merge(const LoraLayer& layer);

/// base * x + scale * U * (V * x'), where x' is the adapter-path input with
/// dropout applied in train mode. The base path never sees dropout.
Eigen::VectorXd lora_forward(const Eigen::VectorXd& x, const LoraLayer& layer,
                             RunMode mode = RunMode::eval, Rng* dropout_rng = nullptr);

/// Two-layer ReLU perceptron used as the cross-modal mapping layer shape.
struct ProjectionMlp {
  static constexpr int kDefaultHidden = 3584;

  Eigen::MatrixXd w1;  // hidden x in
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // out x hidden
  Eigen::VectorXd b2;
};

ProjectionMlp make_projection_mlp(int in_dim, int out_dim,
                                  int hidden = ProjectionMlp::kDefaultHidden,
                                  std::uint64_t seed = 0);
Eigen::VectorXd projection_forward(const ProjectionMlp& mlp, const Eigen::VectorXd& x);

}  // namespace cers
