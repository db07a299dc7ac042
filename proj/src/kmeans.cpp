#include "klrom/kmeans.hpp"

#include <limits>
#include <random>
#include <string>

#include "klrom/errors.hpp"

namespace klrom {

namespace {

int nearest_column(const Eigen::MatrixXd& centroids, const Eigen::VectorXd& x, double* dist2 = nullptr) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (int k = 0; k < centroids.cols(); ++k) {
    const double d = (centroids.col(k) - x).squaredNorm();
    if (d < bd) {
      bd = d;
      best = k;
    }
  }
  if (dist2) *dist2 = bd;
  return best;
}

}  // namespace

int ClusterModel::nearest(const Eigen::VectorXd& mu) const { return nearest_column(centroids, mu); }

std::vector<int> ClusterModel::members(int k) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == k) out.push_back(static_cast<int>(i));
  return out;
}

ClusterModel kmeans(const Eigen::MatrixXd& samples, int num_clusters, std::uint64_t seed) {
  const int n = static_cast<int>(samples.cols());
  if (num_clusters < 1 || num_clusters > n)
    throw ConfigError("number of clusters " + std::to_string(num_clusters) + " must lie in [1, " +
                      std::to_string(n) + "]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // k-means++ seeding
  ClusterModel cm;
  cm.centroids.resize(samples.rows(), num_clusters);
  cm.centroids.col(0) = samples.col(static_cast<int>(unit(rng) * n) % n);
  Eigen::VectorXd d2(n);
  for (int i = 0; i < n; ++i) d2[i] = (samples.col(i) - cm.centroids.col(0)).squaredNorm();
  for (int k = 1; k < num_clusters; ++k) {
    const double total = d2.sum();
    int pick = 0;
    if (total > 0.0) {
      const double r = unit(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > r && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(unit(rng) * n) % n;
    }
    cm.centroids.col(k) = samples.col(pick);
    for (int i = 0; i < n; ++i) d2[i] = std::min(d2[i], (samples.col(i) - cm.centroids.col(k)).squaredNorm());
  }

  cm.assignment.assign(n, -1);
  for (int it = 0; it < 300; ++it) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      const int k = nearest_column(cm.centroids, samples.col(i));
      if (k != cm.assignment[i]) {
        cm.assignment[i] = k;
        changed = true;
      }
    }
    if (!changed && it > 0) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(samples.rows(), num_clusters);
    std::vector<int> count(num_clusters, 0);
    for (int i = 0; i < n; ++i) {
      sums.col(cm.assignment[i]) += samples.col(i);
      ++count[cm.assignment[i]];
    }
    for (int k = 0; k < num_clusters; ++k) {
      if (count[k] > 0) {
        cm.centroids.col(k) = sums.col(k) / count[k];
        continue;
      }
      // Empty cluster: reseed from the point farthest from its centroid.
      int far = 0;
      double fd = -1.0;
      for (int i = 0; i < n; ++i) {
        const double d = (samples.col(i) - cm.centroids.col(cm.assignment[i])).squaredNorm();
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      cm.centroids.col(k) = samples.col(far);
      cm.assignment[far] = k;
    }
  }
  for (int i = 0; i < n; ++i) cm.assignment[i] = nearest_column(cm.centroids, samples.col(i));
  cm.variance = 0.0;
  for (int i = 0; i < n; ++i) cm.variance += (samples.col(i) - cm.centroids.col(cm.assignment[i])).squaredNorm();
  return cm;
}

std::vector<double> variance_scan(const Eigen::MatrixXd& samples, int max_clusters, std::uint64_t seed) {
  std::vector<double> out;
  for (int k = 1; k <= max_clusters; ++k) {
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < 10; ++r) best = std::min(best, kmeans(samples, k, seed + 7919 * r).variance);
    out.push_back(best);
  }
  return out;
}

}  // namespace klrom
