#include "klrom/deim.hpp"

#include <cmath>

#include "klrom/errors.hpp"
#include "klrom/pod.hpp"

namespace klrom {

namespace {

int argmax_abs(const Eigen::VectorXd& v) {
  int best = 0;
  double bv = -1.0;
  for (int i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) > bv) {
      bv = std::abs(v[i]);
      best = i;
    }
  return best;
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& m, const std::vector<int>& rows, int cols) {
  Eigen::MatrixXd out(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = m.row(rows[i]).leftCols(cols);
  return out;
}

}  // namespace

std::vector<int> deim_indices(const Eigen::MatrixXd& modes) {
  const int q = static_cast<int>(modes.cols());
  std::vector<int> idx;
  if (q == 0) return idx;
  idx.push_back(argmax_abs(modes.col(0)));
  if (!(std::abs(modes(idx[0], 0)) > 0.0)) throw DegenerateModeError("first DEIM mode is zero");
  for (int l = 1; l < q; ++l) {
    const Eigen::MatrixXd A = rows_of(modes, idx, l);
    Eigen::VectorXd rhs(l);
    for (int i = 0; i < l; ++i) rhs[i] = modes(idx[i], l);
    const Eigen::VectorXd c = A.fullPivLu().solve(rhs);
    const Eigen::VectorXd r = modes.col(l) - modes.leftCols(l) * c;
    const int j = argmax_abs(r);
    if (!(std::abs(r[j]) > 1e-13 * modes.col(l).cwiseAbs().maxCoeff()))
      throw DegenerateModeError("DEIM mode " + std::to_string(l) + " is interpolated exactly by earlier modes");
    idx.push_back(j);
  }
  return idx;
}

Eigen::VectorXd DeimApprox::theta(const Eigen::VectorXd& values_at_magic) const {
  return interpolation.partialPivLu().solve(values_at_magic);
}

Eigen::VectorXd DeimApprox::theta_from_snapshot(const Eigen::VectorXd& snapshot) const {
  Eigen::VectorXd v(magic.size());
  for (std::size_t i = 0; i < magic.size(); ++i) v[i] = snapshot[magic[i]];
  return theta(v);
}

DeimApprox deim_train(const Eigen::MatrixXd& snapshots, double eps, int max_terms) {
  const PodResult p = pod(snapshots, nullptr, eps, max_terms);
  DeimApprox d;
  d.modes = p.basis;
  d.singular_values = p.singular_values;
  d.magic = deim_indices(d.modes);
  d.interpolation = rows_of(d.modes, d.magic, d.size());
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(d.interpolation);
  const auto& s = svd.singularValues();
  if (!(s[s.size() - 1] > 1e-14 * s[0])) throw DegenerateModeError("singular DEIM interpolation system");
  return d;
}

}  // namespace klrom
