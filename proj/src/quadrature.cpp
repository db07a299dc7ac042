#include "klrom/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "klrom/errors.hpp"

namespace klrom {

namespace {

constexpr int kMaxGaussPoints = 32;

std::pair<std::vector<double>, std::vector<double>> compute_gauss(int n) {
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // map [-1,1] -> [0,1]
    x[n - 1 - i] = 0.5 * (z + 1.0);
    w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

}  // namespace

const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n) {
  static const auto table = [] {
    std::vector<std::pair<std::vector<double>, std::vector<double>>> t(kMaxGaussPoints + 1);
    for (int k = 1; k <= kMaxGaussPoints; ++k) t[k] = compute_gauss(k);
    return t;
  }();
  if (n < 1 || n > kMaxGaussPoints)
    throw DomainError("Gauss rule size must be in [1, " + std::to_string(kMaxGaussPoints) + "]");
  return table[n];
}

double QuadratureRule::total_weight() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

void QuadratureRule::append(const QuadratureRule& other) {
  points.insert(points.end(), other.points.begin(), other.points.end());
  weights.insert(weights.end(), other.weights.begin(), other.weights.end());
}

QuadratureRule tensor_gauss(const Box& box, int n) {
  const auto& [x, w] = gauss_legendre(n);
  const Vec2 d = box.hi - box.lo;
  QuadratureRule r;
  r.points.reserve(n * n);
  r.weights.reserve(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      r.points.emplace_back(box.lo[0] + d[0] * x[i], box.lo[1] + d[1] * x[j]);
      r.weights.push_back(w[i] * w[j] * d[0] * d[1]);
    }
  return r;
}

}  // namespace klrom
