#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "klrom/errors.hpp"
#include "klrom/trim.hpp"

using namespace klrom;

namespace {

double active_area(const TensorSpace& space, std::span<const ResolvedTrim> trims, int order, int depth) {
  const ElementClassification cls = classify_elements(space, trims);
  double area = 0.0;
  for (int e = 0; e < cls.num_elements(); ++e) {
    if (cls.tags[e] == ElementTag::Exterior) continue;
    area += cut_quadrature(cls.box(e), trims, order, depth).total_weight();
  }
  return area;
}

TensorSpace grid(int n, int p = 2) { return TensorSpace(KnotVector::uniform(p, n), KnotVector::uniform(p, n)); }

}  // namespace

TEST(CutQuadrature, CircleHoleArea) {
  const std::vector<ResolvedTrim> trims{ResolvedTrim::circle(Vec2(0.5, 0.5), 0.2, true)};
  const double exact = 1.0 - std::numbers::pi * 0.04;
  EXPECT_NEAR(exact, 0.8743362, 1e-7);
  EXPECT_NEAR(active_area(grid(8), trims, 4, 6), exact, 1e-5);
}

TEST(CutQuadrature, CircleAreaConvergesWithDepth) {
  const std::vector<ResolvedTrim> trims{ResolvedTrim::circle(Vec2(0.41, 0.53), 0.27, true)};
  const double exact = 1.0 - std::numbers::pi * 0.27 * 0.27;
  double prev = 1.0;
  for (int depth : {2, 4, 6}) {
    const double err = std::abs(active_area(grid(5), trims, 4, depth) - exact);
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-5);
}

TEST(CutQuadrature, KeepInsideCircle) {
  const std::vector<ResolvedTrim> trims{ResolvedTrim::circle(Vec2(0.5, 0.5), 0.3, false)};
  EXPECT_NEAR(active_area(grid(6), trims, 4, 6), std::numbers::pi * 0.09, 1e-5);
}

TEST(CutQuadrature, HalfPlane) {
  // straight line y = 0.5 traversed left to right, the right-hand side (below) removed
  const std::vector<ResolvedTrim> trims{
      ResolvedTrim::curve(KnotVector::uniform(1, 1), {Vec2(0, 0.5), Vec2(1, 0.5)}, Side::Right)};
  EXPECT_NEAR(active_area(grid(5), trims, 3, 4), 0.5, 1e-12);
  EXPECT_FALSE(trims[0].removes(Vec2(0.3, 0.7)));
  EXPECT_TRUE(trims[0].removes(Vec2(0.3, 0.2)));
}

TEST(CutQuadrature, SlantedLineIsExact) {
  // y = 0.2 + 0.5 x: the kept region above has area 1 - 0.45.
  const std::vector<ResolvedTrim> trims{
      ResolvedTrim::curve(KnotVector::uniform(1, 1), {Vec2(0, 0.2), Vec2(1, 0.7)}, Side::Right)};
  EXPECT_NEAR(active_area(grid(7), trims, 3, 3), 0.55, 1e-10);
}

TEST(CutQuadrature, QuadraticCurveArea) {
  // parabola through (0,0.3), control (0.5,0.8), (1,0.3): area below is 0.3 + (2/3)(0.5)(0.5)
  const std::vector<ResolvedTrim> trims{
      ResolvedTrim::curve(KnotVector::uniform(2, 1), {Vec2(0, 0.3), Vec2(0.5, 0.8), Vec2(1, 0.3)}, Side::Left)};
  const double below = 0.3 + 2.0 / 3.0 * 0.5 * 0.5;
  EXPECT_NEAR(active_area(grid(6), trims, 4, 5), below, 1e-8);
}

TEST(CutQuadrature, WeightsPositiveAndInside) {
  const std::vector<ResolvedTrim> trims{ResolvedTrim::circle(Vec2(0.5, 0.5), 0.33, true)};
  const Box box{Vec2(0.1, 0.1), Vec2(0.35, 0.35)};
  const QuadratureRule r = cut_quadrature(box, trims, 4, 5);
  ASSERT_GT(r.size(), 0u);
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_GT(r.weights[i], 0.0);
    EXPECT_GE(r.points[i].x(), box.lo.x());
    EXPECT_LE(r.points[i].y(), box.hi.y());
  }
}

TEST(Classification, TagsAndActiveSet) {
  const TensorSpace space = grid(4);
  const std::vector<ResolvedTrim> trims{ResolvedTrim::circle(Vec2(0.5, 0.5), 0.2, true)};
  const ElementClassification cls = classify_elements(space, trims);
  ASSERT_EQ(cls.num_elements(), 16);
  // the circle (0.3..0.7) cuts the four central elements without covering any of them
  int cut = 0, ext = 0;
  for (auto t : cls.tags) {
    cut += t == ElementTag::Cut;
    ext += t == ElementTag::Exterior;
  }
  EXPECT_EQ(cut, 4);
  EXPECT_EQ(ext, 0);
  EXPECT_EQ(cls.tag(0, 0), ElementTag::Interior);
  EXPECT_EQ(static_cast<int>(active_functions(space, cls).size()), space.num_basis());
}

TEST(Classification, ExteriorElementsDropFunctions) {
  const TensorSpace space = grid(8, 1);
  const std::vector<ResolvedTrim> trims{ResolvedTrim::circle(Vec2(0.5, 0.5), 0.4, true)};
  const ElementClassification cls = classify_elements(space, trims);
  int ext = 0;
  for (auto t : cls.tags) ext += t == ElementTag::Exterior;
  EXPECT_GT(ext, 0);
  const auto active = active_functions(space, cls);
  EXPECT_LT(static_cast<int>(active.size()), space.num_basis());
  // the center function (bilinear hat at (0.5,0.5)) is entirely inside the hole
  EXPECT_EQ(std::count(active.begin(), active.end(), space.index(4, 4)), 0);
}

TEST(Classification, FullyTrimmedThrows) {
  const TensorSpace space = grid(2);
  const std::vector<ResolvedTrim> trims{ResolvedTrim::circle(Vec2(0.5, 0.5), 0.2, false)};
  const std::vector<ResolvedTrim> everything{ResolvedTrim::circle(Vec2(0.5, 0.5), 5.0, true)};
  EXPECT_NO_THROW(active_functions(space, classify_elements(space, trims)));
  EXPECT_THROW(active_functions(space, classify_elements(space, everything)), FullyTrimmedError);
}

TEST(TrimSpec, ParameterDependence) {
  CircleTrim c;
  c.center = Vec2(0.25, 0.25);
  c.center_gradient = ParamGradient(2, 1);
  c.center_gradient << 1.0, 1.0;
  c.radius = 0.2;
  const TrimCurveSpec spec(c);
  Eigen::VectorXd mu(1);
  mu << 0.05;
  const ResolvedTrim r = spec.resolve(mu);
  EXPECT_NEAR(r.center().x(), 0.3, 1e-15);
  EXPECT_NEAR(r.center().y(), 0.3, 1e-15);
}

TEST(TrimSpec, LineCrossingsOfCurve) {
  const ResolvedTrim t =
      ResolvedTrim::curve(KnotVector::uniform(2, 1), {Vec2(0, 0.3), Vec2(0.5, 0.8), Vec2(1, 0.3)}, Side::Left);
  // y(x) = 0.3 + x (1 - x); y = 0.45 at x = 0.5 +- sqrt(0.25 - 0.15)
  auto xs = t.line_crossings(1, 0.45, 0.0, 1.0);
  std::sort(xs.begin(), xs.end());
  ASSERT_EQ(xs.size(), 2u);
  EXPECT_NEAR(xs[0], 0.5 - std::sqrt(0.1), 1e-12);
  EXPECT_NEAR(xs[1], 0.5 + std::sqrt(0.1), 1e-12);
  const auto circ = ResolvedTrim::circle(Vec2(0.5, 0.5), 0.2, true).line_crossings(0, 0.5, 0.0, 1.0);
  EXPECT_EQ(circ.size(), 2u);
}

TEST(TrimSpec, NearestPoint) {
  const auto c = ResolvedTrim::circle(Vec2(0.5, 0.5), 0.2, true);
  Vec2 tan;
  EXPECT_NEAR(c.nearest(Vec2(0.9, 0.5), &tan), 0.2, 1e-14);
  EXPECT_NEAR(std::abs(tan.y()), 1.0, 1e-14);
}
