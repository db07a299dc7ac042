#include "klrom/rbf.hpp"

#include "klrom/errors.hpp"

namespace klrom {

RbfInterpolant::RbfInterpolant(Eigen::MatrixXd centers, Eigen::MatrixXd weights, Eigen::MatrixXd tail,
                               Eigen::VectorXd lower, Eigen::VectorXd upper)
    : centers_(std::move(centers)),
      weights_(std::move(weights)),
      tail_(std::move(tail)),
      lower_(std::move(lower)),
      upper_(std::move(upper)) {}

Eigen::VectorXd RbfInterpolant::normalize(const Eigen::VectorXd& mu) const {
  return ((mu - lower_).array() / (upper_ - lower_).array()).matrix();
}

RbfInterpolant RbfInterpolant::fit(const Eigen::MatrixXd& centers, const Eigen::MatrixXd& values,
                                   const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  const int M = static_cast<int>(centers.rows());
  const int n = static_cast<int>(centers.cols());
  if (values.rows() != n) throw ContractError("RBF fit: one value row per center expected");
  if (n < M + 1)
    throw IllPosedInterpolationError("RBF fit needs at least " + std::to_string(M + 1) + " centers, got " +
                                     std::to_string(n));
  if (!((upper - lower).array() > 0.0).all()) throw IllPosedInterpolationError("RBF fit: empty parameter box");
  RbfInterpolant r;
  r.lower_ = lower;
  r.upper_ = upper;
  r.centers_.resize(M, n);
  for (int j = 0; j < n; ++j) r.centers_.col(j) = r.normalize(centers.col(j));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j)
      if ((r.centers_.col(i) - r.centers_.col(j)).norm() < 1e-12)
        throw IllPosedInterpolationError("RBF fit: centers " + std::to_string(j) + " and " + std::to_string(i) +
                                         " coincide");

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + M + 1, n + M + 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double d = (r.centers_.col(i) - r.centers_.col(j)).norm();
      A(i, j) = d * d * d;
    }
    A(i, n) = 1.0;
    A(n, i) = 1.0;
    for (int m = 0; m < M; ++m) {
      A(i, n + 1 + m) = r.centers_(m, i);
      A(n + 1 + m, i) = r.centers_(m, i);
    }
  }
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + M + 1, values.cols());
  rhs.topRows(n) = values;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) throw IllPosedInterpolationError("RBF saddle-point system is singular");
  const Eigen::MatrixXd sol = lu.solve(rhs);
  r.weights_ = sol.topRows(n);
  r.tail_ = sol.bottomRows(M + 1);
  return r;
}

Eigen::VectorXd RbfInterpolant::eval(const Eigen::VectorXd& mu) const {
  const Eigen::VectorXd z = normalize(mu);
  Eigen::VectorXd out = tail_.row(0).transpose();
  for (int m = 0; m < z.size(); ++m) out += z[m] * tail_.row(1 + m).transpose();
  for (int j = 0; j < centers_.cols(); ++j) {
    const double d = (z - centers_.col(j)).norm();
    out += d * d * d * weights_.row(j).transpose();
  }
  return out;
}

Eigen::MatrixXd RbfInterpolant::grad(const Eigen::VectorXd& mu) const {
  const Eigen::VectorXd z = normalize(mu);
  const int M = static_cast<int>(z.size());
  Eigen::MatrixXd g(outputs(), M);
  for (int m = 0; m < M; ++m) g.col(m) = tail_.row(1 + m).transpose();
  for (int j = 0; j < centers_.cols(); ++j) {
    const Eigen::VectorXd diff = z - centers_.col(j);
    const double d = diff.norm();
    g += 3.0 * d * weights_.row(j).transpose() * diff.transpose();
  }
  // chain rule for the normalization
  for (int m = 0; m < M; ++m) g.col(m) /= (upper_[m] - lower_[m]);
  return g;
}

}  // namespace klrom
