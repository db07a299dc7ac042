#pragma once

#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "klrom/bspline.hpp"
#include "klrom/quadrature.hpp"

namespace klrom {

using ParamVector = Eigen::VectorXd;
using ParamGradient = Eigen::Matrix<double, 2, Eigen::Dynamic>;

/// Which side of an oriented curve is cut away.
enum class Side { Left, Right };

/// Circle in parametric coordinates; center(mu) = center + center_gradient * mu.
struct CircleTrim {
  Vec2 center = Vec2::Zero();
  ParamGradient center_gradient;  // 2 x M, empty means fixed
  double radius = 0.0;
  bool remove_inside = true;

  bool operator==(const CircleTrim&) const = default;
};

/// Spline curve in parametric coordinates whose control points move affinely with mu.
/// The curve is expected to cross the patch domain from boundary to boundary.
struct CurveTrim {
  KnotVector knots;
  std::vector<Vec2> control_points;
  std::vector<ParamGradient> control_point_gradients;  // empty or one 2 x M per control point
  Side removed = Side::Right;

  bool operator==(const CurveTrim&) const = default;
};

enum class Region { Kept, Removed, Cut };

/// A trim specification evaluated at a fixed parameter value.
class ResolvedTrim {
 public:
  static ResolvedTrim circle(const Vec2& center, double radius, bool remove_inside);
  static ResolvedTrim curve(const KnotVector& knots, std::vector<Vec2> control_points, Side removed);

  /// True if x lies strictly inside the cut-away region.
  bool removes(const Vec2& x) const;

  /// Position of the box relative to the cut-away region.
  Region classify(const Box& box) const;

  bool is_circle() const noexcept { return is_circle_; }

  /// Curve parameterization over t in [0,1] (circles: counter-clockwise from angle 0).
  Vec2 point(double t) const;
  Vec2 tangent(double t) const;

  /// Coordinates along the other axis where the trim boundary crosses the line
  /// {x[axis] = value}, restricted to (lo, hi). Unsorted.
  std::vector<double> line_crossings(int axis, double value, double lo, double hi) const;

  /// Distance from x to the trim boundary and the unit tangent at the nearest boundary point.
  double nearest(const Vec2& x, Vec2* tangent = nullptr) const;

  /// Interior knots of the curve parameterization (empty for circles).
  std::vector<double> interior_knots() const;

  double radius() const noexcept { return radius_; }
  const Vec2& center() const noexcept { return center_; }

 private:
  struct Bezier {
    std::vector<Vec2> cps;
    double t0 = 0.0, t1 = 1.0;
  };

  bool curve_intersects(const Box& box) const;
  bool left_of_curve(const Vec2& x, double* offset) const;
  // nearest point on the curve: segment index and local Bezier parameter
  std::pair<std::size_t, double> project(const Vec2& x) const;

  bool is_circle_ = true;
  Vec2 center_ = Vec2::Zero();
  double radius_ = 0.0;
  bool remove_inside_ = true;

  KnotVector knots_;
  std::vector<Vec2> cps_;
  std::vector<Bezier> segments_;
  Side removed_ = Side::Right;
};

/// Parameter-dependent trimming curve.
class TrimCurveSpec {
 public:
  TrimCurveSpec() = default;
  TrimCurveSpec(CircleTrim c) : def_(std::move(c)) {}
  TrimCurveSpec(CurveTrim c) : def_(std::move(c)) {}

  ResolvedTrim resolve(const ParamVector& mu) const;

  const std::variant<CircleTrim, CurveTrim>& definition() const noexcept { return def_; }
  bool operator==(const TrimCurveSpec&) const = default;

 private:
  std::variant<CircleTrim, CurveTrim> def_;
};

std::vector<ResolvedTrim> resolve_all(std::span<const TrimCurveSpec> specs, const ParamVector& mu);

enum class ElementTag { Interior, Exterior, Cut };

/// Tag of a box with respect to a set of disjoint cut-away regions.
ElementTag classify_box(const Box& box, std::span<const ResolvedTrim> trims);

/// True if x is not removed by any trim.
bool is_active_point(const Vec2& x, std::span<const ResolvedTrim> trims);

struct ElementClassification {
  std::vector<double> breaks_u, breaks_v;
  std::vector<ElementTag> tags;  // element (eu, ev) at eu + num_u() * ev

  int num_u() const { return static_cast<int>(breaks_u.size()) - 1; }
  int num_v() const { return static_cast<int>(breaks_v.size()) - 1; }
  int num_elements() const { return static_cast<int>(tags.size()); }
  Box box(int e) const;
  ElementTag tag(int eu, int ev) const { return tags[eu + num_u() * ev]; }
};

ElementClassification classify_elements(const TensorSpace& space, std::span<const ResolvedTrim> trims);
ElementClassification classify_elements(const TensorSpace& space, std::span<const TrimCurveSpec> trims,
                                        const ParamVector& mu);

/// Active function indices in background ordering. Throws FullyTrimmedError when empty.
std::vector<int> active_functions(const TensorSpace& space, const ElementClassification& cls);

/// Quadrature on the active part of `element`: Gauss for interior elements, adaptive quadtree
/// subdivision to `depth` for cut ones (masked Gauss on the deepest ambiguous leaves).
QuadratureRule cut_quadrature(const Box& element, std::span<const ResolvedTrim> trims, int order,
                              int depth);

}  // namespace klrom
