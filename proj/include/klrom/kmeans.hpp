#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace klrom {

/// Partition of parameter samples (columns of an M x N_s matrix) into clusters.
struct ClusterModel {
  Eigen::MatrixXd centroids;    // M x N_c
  std::vector<int> assignment;  // per sample
  double variance = 0.0;        // sum of squared distances to assigned centroids

  int num_clusters() const { return static_cast<int>(centroids.cols()); }
  /// Nearest centroid (ties to the lowest index).
  int nearest(const Eigen::VectorXd& mu) const;
  std::vector<int> members(int k) const;
};

/// k-means++ seeding followed by Lloyd iterations (at most 300). Throws ConfigError if N_c > N_s.
ClusterModel kmeans(const Eigen::MatrixXd& samples, int num_clusters, std::uint64_t seed);

/// Best-of-10-restarts variance for N_c = 1..max_clusters.
std::vector<double> variance_scan(const Eigen::MatrixXd& samples, int max_clusters, std::uint64_t seed);

}  // namespace klrom
