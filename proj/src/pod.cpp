#include "klrom/pod.hpp"

#include <limits>
#include <optional>

#include <Eigen/SparseCholesky>

#include "klrom/errors.hpp"

namespace klrom {

NormFactor::NormFactor(const Eigen::SparseMatrix<double>& X) {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(X);
  if (llt.info() != Eigen::Success) throw ContractError("POD norm matrix is not positive definite");
  L_ = llt.matrixL();
  P_ = llt.permutationP();
}

Eigen::MatrixXd NormFactor::forward(const Eigen::MatrixXd& S) const {
  return L_.transpose() * (P_ * S);
}

Eigen::MatrixXd NormFactor::backward(const Eigen::MatrixXd& Y) const {
  Eigen::MatrixXd Z = Y;
  L_.transpose().triangularView<Eigen::Upper>().solveInPlace(Z);
  return P_.transpose() * Z;
}

int pod_size(const Eigen::VectorXd& sigma, double eps, int max_size) {
  const int m = static_cast<int>(sigma.size());
  if (m == 0 || !(sigma[0] > 0.0)) return 0;
  // numerical rank
  const double floor = sigma[0] * std::numeric_limits<double>::epsilon() * std::max<int>(m, 16);
  int rank = 0;
  while (rank < m && sigma[rank] > floor) ++rank;
  Eigen::VectorXd tail(m + 1);
  tail[m] = 0.0;
  for (int i = m - 1; i >= 0; --i) tail[i] = tail[i + 1] + sigma[i] * sigma[i];
  const double total = tail[0];
  int n = rank;
  for (int k = 1; k <= rank; ++k)
    if (tail[k] <= eps * eps * total) {
      n = k;
      break;
    }
  if (max_size > 0) n = std::min(n, max_size);
  return std::max(n, 1);
}

PodResult pod(const Eigen::MatrixXd& S, const Eigen::SparseMatrix<double>* X, double eps, int max_size) {
  if (S.size() == 0 || S.isZero(0.0)) throw EmptyBasisError("POD of an all-zero snapshot matrix");
  std::optional<NormFactor> factor;
  Eigen::MatrixXd Y;
  if (X) {
    factor.emplace(*X);
    Y = factor->forward(S);
  } else {
    Y = S;
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(Y, Eigen::ComputeThinU);
  PodResult out;
  out.singular_values = svd.singularValues();
  const int n = pod_size(out.singular_values, eps, max_size);
  const Eigen::MatrixXd U = svd.matrixU().leftCols(n);
  out.basis = X ? factor->backward(U) : U;
  return out;
}

}  // namespace klrom
