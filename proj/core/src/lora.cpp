// SPDX-License-Identifier: Apache-2.0
#include "cers/lora.hpp"

#include <cmath>
#include <random>

#include "cers/errors.hpp"

namespace cers {

LoraLayer lora_init(const Eigen::MatrixXd& base, int rank, double scale,
                    std::uint64_t seed) {
  const Eigen::Index d2 = base.rows();
  const Eigen::Index d1 = base.cols();
  if (rank < 1) throw ConfigError("rank must be >= 1");
  if (rank >= std::min(d1, d2))
    throw ConfigError("rank " + std::to_string(rank) + " must be < min(" +
                      std::to_string(d1) + ", " + std::to_string(d2) + ")");

  LoraLayer layer;
  layer.base = base;
  layer.scale = scale;
  layer.up = Eigen::MatrixXd::Zero(d2, rank);
  layer.down.resize(rank, d1);
  Rng rng(seed);
  // sigma = 1/sqrt(r) keeps the adapter output variance O(1).
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(rank));
  for (Eigen::Index r = 0; r < layer.down.rows(); ++r)
    for (Eigen::Index c = 0; c < layer.down.cols(); ++c)
      layer.down(r, c) = normal(rng);
  return layer;
}

Eigen::MatrixXd lora_merge(const LoraLayer& layer) {
  return layer.base + layer.scale * (layer.up * layer.down);
}

Eigen::VectorXd lora_forward(const Eigen::VectorXd& x, const LoraLayer& layer,
                             RunMode mode, Rng* dropout_rng) {
  if (x.size() != layer.base.cols())
    throw DataError("input dimension " + std::to_string(x.size()) +
                    " does not match layer dimension " +
                    std::to_string(layer.base.cols()));
  Eigen::VectorXd adapter_in = x;
  if (mode == RunMode::train && dropout_rng != nullptr && layer.dropout > 0.0) {
    const double keep = 1.0 - layer.dropout;
    std::bernoulli_distribution drop(layer.dropout);
    for (Eigen::Index i = 0; i < adapter_in.size(); ++i)
      adapter_in(i) = drop(*dropout_rng) ? 0.0 : adapter_in(i) / keep;
  }
  return layer.base * x + layer.scale * (layer.up * (layer.down * adapter_in));
}

ProjectionMlp make_projection_mlp(int in_dim, int out_dim, int hidden,
                                  std::uint64_t seed) {
  if (in_dim < 1 || out_dim < 1 || hidden < 1)
    throw ConfigError("projection dims must be >= 1");
  ProjectionMlp mlp;
  Rng rng(seed);
  std::normal_distribution<double> n1(0.0, 1.0 / std::sqrt(in_dim));
  std::normal_distribution<double> n2(0.0, 1.0 / std::sqrt(hidden));
  mlp.w1.resize(hidden, in_dim);
  for (Eigen::Index r = 0; r < mlp.w1.rows(); ++r)
    for (Eigen::Index c = 0; c < mlp.w1.cols(); ++c) mlp.w1(r, c) = n1(rng);
  mlp.b1 = Eigen::VectorXd::Zero(hidden);
  mlp.w2.resize(out_dim, hidden);
  for (Eigen::Index r = 0; r < mlp.w2.rows(); ++r)
    for (Eigen::Index c = 0; c < mlp.w2.cols(); ++c) mlp.w2(r, c) = n2(rng);
  mlp.b2 = Eigen::VectorXd::Zero(out_dim);
  return mlp;
}

Eigen::VectorXd projection_forward(const ProjectionMlp& mlp, const Eigen::VectorXd& x) {
  if (x.size() != mlp.w1.cols()) throw DataError("projection input dimension mismatch");
  const Eigen::VectorXd h = (mlp.w1 * x + mlp.b1).cwiseMax(0.0);
  return mlp.w2 * h + mlp.b2;
}

}  // namespace cers
