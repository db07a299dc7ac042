#pragma once

#include <vector>

#include <Eigen/Dense>

namespace klrom {

/// Affine approximation of a vector-valued family by interpolation at magic points.
struct DeimApprox {
  Eigen::MatrixXd modes;            // rows x Q
  std::vector<int> magic;           // Q row indices
  Eigen::MatrixXd interpolation;    // modes(magic, :), Q x Q
  Eigen::VectorXd singular_values;  // of the snapshot matrix

  int size() const { return static_cast<int>(magic.size()); }
  /// Coefficients theta with modes(magic,:) theta = values (entries of a snapshot at the magic points).
  Eigen::VectorXd theta(const Eigen::VectorXd& values_at_magic) const;
  /// Same, reading the magic entries from a full snapshot.
  Eigen::VectorXd theta_from_snapshot(const Eigen::VectorXd& snapshot) const;
};

/// Standard DEIM index selection; ties go to the lowest index. Throws DegenerateModeError.
std::vector<int> deim_indices(const Eigen::MatrixXd& modes);

/// Euclidean POD of the snapshots with tolerance eps followed by the greedy selection.
DeimApprox deim_train(const Eigen::MatrixXd& snapshots, double eps, int max_terms = 0);

}  // namespace klrom
