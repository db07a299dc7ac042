#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace klrom {

struct PodResult {
  Eigen::MatrixXd basis;            // X-orthonormal columns
  Eigen::VectorXd singular_values;  // all of them, descending
};

/// Smallest N with relative squared tail sum of sigma <= eps^2, limited to the numerical rank
/// and to max_size (if positive).
int pod_size(const Eigen::VectorXd& sigma, double eps, int max_size = 0);

/// POD of the columns of S in the norm induced by X (identity if X is null).
/// Throws EmptyBasisError for an all-zero snapshot matrix.
PodResult pod(const Eigen::MatrixXd& S, const Eigen::SparseMatrix<double>* X, double eps, int max_size = 0);

/// Sparse Cholesky of an SPD norm matrix, used to move between X-inner products and Euclidean ones.
class NormFactor {
 public:
  explicit NormFactor(const Eigen::SparseMatrix<double>& X);
  /// Y = L^T P S, so that Y^T Y = S^T X S.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& S) const;
  /// Inverse of forward.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& Y) const;

 private:
  Eigen::SparseMatrix<double> L_;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic> P_;
};

}  // namespace klrom
