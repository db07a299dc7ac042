#pragma once

#include <vector>

#include "klrom/bspline.hpp"

namespace klrom {

/// Axis-aligned box in a parametric domain.
struct Box {
  Vec2 lo = Vec2::Zero();
  Vec2 hi = Vec2::Ones();

  double area() const { return (hi - lo).prod(); }
  Vec2 center() const { return 0.5 * (lo + hi); }
};

/// Points in parametric coordinates with their parametric weights.
struct QuadratureRule {
  std::vector<Vec2> points;
  std::vector<double> weights;

  std::size_t size() const noexcept { return points.size(); }
  double total_weight() const;
  void append(const QuadratureRule& other);
};

/// Gauss-Legendre rule with n points on [0,1]; cached per n.
const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n);

/// Tensor Gauss rule with n x n points on `box`.
QuadratureRule tensor_gauss(const Box& box, int n);

}  // namespace klrom
