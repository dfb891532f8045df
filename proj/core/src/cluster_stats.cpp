// SPDX-License-Identifier: Apache-2.0
#include "cers/cluster_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "cers/errors.hpp"

namespace cers {

namespace {

constexpr double kVarianceFloor = 1e-6;

double diag_gaussian_kl(const Eigen::VectorXd& mean0, const Eigen::VectorXd& var0,
                        const Eigen::VectorXd& mean1, const Eigen::VectorXd& var1) {
  double kl = 0.0;
  for (Eigen::Index d = 0; d < mean0.size(); ++d) {
    const double diff = mean0(d) - mean1(d);
    kl += std::log(var1(d) / var0(d)) + (var0(d) + diff * diff) / var1(d) - 1.0;
  }
  return 0.5 * kl;
}

}  // namespace

double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DataError("wasserstein needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());

  // Integrate |F_a - F_b| between consecutive breakpoints of the pooled sample.
  double distance = 0.0;
  std::size_t i = 0, j = 0;
  double prev = std::min(a.front(), b.front());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  while (i < a.size() || j < b.size()) {
    const double next_a = i < a.size() ? a[i] : std::numeric_limits<double>::infinity();
    const double next_b = j < b.size() ? b[j] : std::numeric_limits<double>::infinity();
    const double current = std::min(next_a, next_b);
    distance += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) *
                (current - prev);
    while (i < a.size() && a[i] == current) ++i;
    while (j < b.size() && b[j] == current) ++j;
    prev = current;
  }
  return distance;
}

ClusterStats cluster_stats(const Eigen::MatrixXd& embeddings,
                           const std::vector<int>& labels) {
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size())
    throw DataError("embedding/label count mismatch");

  std::map<int, std::vector<Eigen::Index>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[labels[i]].push_back(static_cast<Eigen::Index>(i));

  ClusterStats out;
  std::vector<int> usable;
  for (const auto& [cls, members] : by_class) {
    if (members.size() < 2)
      out.excluded_classes.push_back(cls);
    else
      usable.push_back(cls);
  }
  if (usable.size() < 2)
    throw DataError("cluster stats need at least two classes with >= 2 points");

  const Eigen::Index dim = embeddings.cols();
  std::map<int, Eigen::VectorXd> centroid;
  std::map<int, Eigen::VectorXd> variance;  // diagonal, ML estimate, floored
  std::map<int, double> dispersion;         // mean distance to centroid
  for (int cls : usable) {
    const auto& members = by_class[cls];
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index idx : members) mean += embeddings.row(idx).transpose();
    mean /= static_cast<double>(members.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
    double disp = 0.0;
    for (Eigen::Index idx : members) {
      const Eigen::VectorXd diff = embeddings.row(idx).transpose() - mean;
      var += diff.cwiseProduct(diff);
      disp += diff.norm();
    }
    var /= static_cast<double>(members.size());
    var = var.cwiseMax(kVarianceFloor);
    centroid[cls] = std::move(mean);
    variance[cls] = std::move(var);
    dispersion[cls] = disp / static_cast<double>(members.size());
  }

  // Silhouette over points of usable classes.
  {
    std::vector<Eigen::Index> points;
    std::vector<int> point_class;
    for (int cls : usable)
      for (Eigen::Index idx : by_class[cls]) {
        points.push_back(idx);
        point_class.push_back(cls);
      }
    double total = 0.0;
    for (std::size_t p = 0; p < points.size(); ++p) {
      std::map<int, double> sum_dist;
      for (std::size_t q = 0; q < points.size(); ++q) {
        if (p == q) continue;
        sum_dist[point_class[q]] +=
            (embeddings.row(points[p]) - embeddings.row(points[q])).norm();
      }
      const int own = point_class[p];
      const double own_count = static_cast<double>(by_class[own].size() - 1);
      const double a = own_count > 0.0 ? sum_dist[own] / own_count : 0.0;
      double b = std::numeric_limits<double>::infinity();
      for (int cls : usable) {
        if (cls == own) continue;
        b = std::min(b, sum_dist[cls] / static_cast<double>(by_class[cls].size()));
      }
      const double denom = std::max(a, b);
      total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    out.silhouette = total / static_cast<double>(points.size());
  }

  // Davies-Bouldin: mean over classes of the worst dispersion-to-separation
  // ratio against any other class.
  {
    double total = 0.0;
    for (int ci : usable) {
      double worst = 0.0;
      for (int cj : usable) {
        if (ci == cj) continue;
        const double separation = (centroid[ci] - centroid[cj]).norm();
        worst = std::max(worst, (dispersion[ci] + dispersion[cj]) / separation);
      }
      total += worst;
    }
    out.davies_bouldin = total / static_cast<double>(usable.size());
  }

  // Pairwise statistics.
  for (std::size_t a = 0; a < usable.size(); ++a) {
    for (std::size_t b = a + 1; b < usable.size(); ++b) {
      const int ca = usable[a], cb = usable[b];
      ClusterStats::PairStat pair;
      pair.class_a = ca;
      pair.class_b = cb;

      const Eigen::VectorXd& ma = centroid[ca];
      const Eigen::VectorXd& mb = centroid[cb];
      const double norm_prod = ma.norm() * mb.norm();
      pair.cosine_distance = norm_prod == 0.0 ? 0.0 : 1.0 - ma.dot(mb) / norm_prod;

      // 1-D projections onto the normalized centroid-difference axis.
      Eigen::VectorXd axis = mb - ma;
      const double axis_norm = axis.norm();
      if (axis_norm > 0.0) axis /= axis_norm;
      std::vector<double> proj_a, proj_b;
      for (Eigen::Index idx : by_class[ca])
        proj_a.push_back(embeddings.row(idx).dot(axis));
      for (Eigen::Index idx : by_class[cb])
        proj_b.push_back(embeddings.row(idx).dot(axis));
      pair.wasserstein1 = wasserstein1(std::move(proj_a), std::move(proj_b));

      pair.symmetric_kl =
          0.5 * (diag_gaussian_kl(centroid[ca], variance[ca], centroid[cb], variance[cb]) +
                 diag_gaussian_kl(centroid[cb], variance[cb], centroid[ca], variance[ca]));
      out.pairs.push_back(pair);
    }
  }

  double cos_sum = 0.0, w_sum = 0.0, kl_sum = 0.0;
  for (const auto& pair : out.pairs) {
    cos_sum += pair.cosine_distance;
    w_sum += pair.wasserstein1;
    kl_sum += pair.symmetric_kl;
  }
  const double n_pairs = static_cast<double>(out.pairs.size());
  out.mean_centroid_cosine_distance = cos_sum / n_pairs;
  out.mean_wasserstein1 = w_sum / n_pairs;
  out.mean_symmetric_kl = kl_sum / n_pairs;
  return out;
}

}  // namespace cers
