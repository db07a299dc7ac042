#pragma once

#include <Eigen/Dense>

namespace klrom {

/// Cubic radial basis interpolant with a linear polynomial tail, vector valued.
/// Coordinates are normalized to the unit box given by lower/upper before evaluation.
class RbfInterpolant {
 public:
  RbfInterpolant() = default;

  /// centers: M x n, values: n x m. Throws IllPosedInterpolationError for coincident centers
  /// or fewer than M + 1 centers.
  static RbfInterpolant fit(const Eigen::MatrixXd& centers, const Eigen::MatrixXd& values,
                            const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

  /// Rebuilds an interpolant from stored coefficients.
  RbfInterpolant(Eigen::MatrixXd centers, Eigen::MatrixXd weights, Eigen::MatrixXd tail, Eigen::VectorXd lower,
                 Eigen::VectorXd upper);

  Eigen::VectorXd eval(const Eigen::VectorXd& mu) const;
  /// Jacobian m x M with respect to the unnormalized parameters.
  Eigen::MatrixXd grad(const Eigen::VectorXd& mu) const;

  const Eigen::MatrixXd& centers() const { return centers_; }  // normalized
  const Eigen::MatrixXd& weights() const { return weights_; }  // n x m
  const Eigen::MatrixXd& tail() const { return tail_; }        // (M+1) x m
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  int outputs() const { return static_cast<int>(weights_.cols()); }

 private:
  Eigen::VectorXd normalize(const Eigen::VectorXd& mu) const;

  Eigen::MatrixXd centers_, weights_, tail_;
  Eigen::VectorXd lower_, upper_;
};

}  // namespace klrom
