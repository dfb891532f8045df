// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <vector>

namespace cers {

/// Embedding-space separability statistics over labeled points.
/// Pairwise values are reported per unordered class pair together with
/// their means. Classes with fewer than two points are excluded (and
/// listed) rather than failing the whole computation.
struct ClusterStats {
  double silhouette = 0.0;
  double davies_bouldin = 0.0;
  double mean_centroid_cosine_distance = 0.0;
  double mean_wasserstein1 = 0.0;
  double mean_symmetric_kl = 0.0;

  struct PairStat {
    int class_a = 0;
    int class_b = 0;
    double cosine_distance = 0.0;  // 1 - cos(centroid_a, centroid_b)
    double wasserstein1 = 0.0;     // on the centroid-difference axis
    double symmetric_kl = 0.0;     // diagonal-Gaussian fits, variance floor 1e-6
  };
  std::vector<PairStat> pairs;
  std::vector<int> excluded_classes;
};

ClusterStats cluster_stats(const Eigen::MatrixXd& embeddings,
                           const std::vector<int>& labels);

/// Wasserstein-1 distance between two 1-D empirical distributions
/// (CDF-difference integral; handles unequal sample counts).
double wasserstein1(std::vector<double> a, std::vector<double> b);

}  // namespace cers
