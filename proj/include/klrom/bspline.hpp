#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace klrom {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr int kMaxDegree = 5;

/// Open (clamped) knot vector on [0,1].
class KnotVector {
 public:
  KnotVector() = default;
  KnotVector(int degree, std::vector<double> knots);

  /// Open knot vector with `num_elements` equal spans.
  static KnotVector uniform(int degree, int num_elements);

  int degree() const noexcept { return degree_; }
  const std::vector<double>& knots() const noexcept { return knots_; }
  int num_basis() const noexcept { return static_cast<int>(knots_.size()) - degree_ - 1; }

  /// Span index s with knots[s] <= xi < knots[s+1]; xi == 1 maps to the last non-empty span.
  int find_span(double xi) const;

  /// Distinct knot values, i.e. element boundaries.
  std::vector<double> breakpoints() const;
  int num_elements() const { return static_cast<int>(breakpoints().size()) - 1; }

  /// Indices of the basis functions whose support touches [a, b].
  std::pair<int, int> support_range(double a, double b) const;

  /// Parameter interval of the support of function i.
  std::pair<double, double> support(int i) const {
    return {knots_[i], knots_[i + degree_ + 1]};
  }

  bool operator==(const KnotVector&) const = default;

 private:
  int degree_ = 0;
  std::vector<double> knots_;
};

/// Nonzero basis functions at a point and their derivatives up to `order`.
struct BasisDerivatives {
  int first = 0;
  int degree = 0;
  int order = 0;
  // values[k][j] is the k-th derivative of function (first + j).
  std::array<std::array<double, kMaxDegree + 1>, 3> values{};

  int count() const noexcept { return degree + 1; }
};

/// Cox-de Boor evaluation. Throws DomainError if xi is outside [0,1] or order > 2.
BasisDerivatives eval_basis(const KnotVector& kv, double xi, int deriv_order);

/// Tensor-product space in two parametric directions; function (i,j) has index i + n_u * j.
class TensorSpace {
 public:
  TensorSpace() = default;
  TensorSpace(KnotVector u, KnotVector v);

  const KnotVector& knots(int dir) const noexcept { return dir == 0 ? u_ : v_; }
  int degree() const noexcept { return u_.degree(); }
  int num_basis(int dir) const noexcept { return knots(dir).num_basis(); }
  int num_basis() const noexcept { return u_.num_basis() * v_.num_basis(); }
  int index(int i, int j) const noexcept { return i + u_.num_basis() * j; }

  bool operator==(const TensorSpace&) const = default;

 private:
  KnotVector u_;
  KnotVector v_;
};

struct GeometryPoint {
  Vec3 x = Vec3::Zero();
  Vec3 d1 = Vec3::Zero();
  Vec3 d2 = Vec3::Zero();
  Vec3 d11 = Vec3::Zero();
  Vec3 d12 = Vec3::Zero();
  Vec3 d22 = Vec3::Zero();
};

/// Spline map from the unit square into R^3.
class GeometryMap {
 public:
  GeometryMap() = default;
  GeometryMap(TensorSpace space, std::vector<Vec3> control_points);

  const TensorSpace& space() const noexcept { return space_; }
  const std::vector<Vec3>& control_points() const noexcept { return control_points_; }

  /// Diagonal of the control point bounding box.
  double scale() const noexcept { return scale_; }

  GeometryPoint eval(const Vec2& xi, int deriv_order = 2) const;
  Vec3 point(const Vec2& xi) const { return eval(xi, 0).x; }

 private:
  TensorSpace space_;
  std::vector<Vec3> control_points_;
  double scale_ = 0.0;
};

inline GeometryPoint eval_geometry(const GeometryMap& map, const Vec2& xi) { return map.eval(xi); }

/// Covariant/contravariant frame and curvature of the mapped surface at a point.
struct SurfaceFrame {
  Vec3 a1, a2, a3;
  Vec3 con1, con2;                   // a^1, a^2
  Eigen::Matrix2d metric;            // a_{ab}
  Eigen::Matrix2d inverse_metric;    // a^{ab}
  Eigen::Matrix2d curvature;         // b_{ab} = a3 . F_{,ab}
  std::array<Eigen::Matrix2d, 2> christoffel;  // christoffel[l](a,b) = F_{,ab} . a^l
  double area_element = 0.0;         // |a1 x a2|

  const Vec3& covariant(int a) const { return a == 0 ? a1 : a2; }
  const Vec3& contravariant(int a) const { return a == 0 ? con1 : con2; }
};

/// Throws SingularGeometryError if |a1 x a2| < 1e-14 * scale^2.
SurfaceFrame surface_frame(const GeometryPoint& g, double scale);
inline SurfaceFrame surface_frame(const GeometryMap& map, const Vec2& xi) {
  return surface_frame(map.eval(xi), map.scale());
}

/// Knot insertion (Boehm) in direction `dir`; the mapped surface is unchanged.
GeometryMap insert_knots(const GeometryMap& map, int dir, std::span<const double> new_knots);

/// Inserts `subdivisions - 1` equally spaced knots into every span, in both directions.
GeometryMap refine_uniform(const GeometryMap& map, int subdivisions_u, int subdivisions_v);

/// Knot vector obtained from `kv` by inserting the same knots that refine_uniform would.
KnotVector refined_knots(const KnotVector& kv, int subdivisions);

/// Least-squares fit of a vector-valued curve on `kv`; the end control points interpolate.
std::vector<Vec3> fit_curve(const KnotVector& kv, std::span<const double> params,
                            std::span<const Vec3> values);

}  // namespace klrom
