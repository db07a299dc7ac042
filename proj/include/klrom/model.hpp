#pragma once

#include <string>
#include <vector>

#include "klrom/kl_shell.hpp"
#include "klrom/multipatch.hpp"

namespace klrom {

struct ParameterBox {
  std::vector<std::string> names;
  Eigen::VectorXd lower, upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const ParamVector& mu, double tol = 0.0) const;
  ParamVector center() const { return 0.5 * (lower + upper); }
  ParamVector range() const { return upper - lower; }
};

/// Parameterized multi-patch shell model on a fixed background space.
struct Model {
  ParameterBox parameters;
  Material material;
  std::vector<Patch> patches;
  std::vector<InterfaceSpec> interfaces;
  LoadSpec load;
  QuadratureSettings quadrature;

  /// First global DOF of every patch.
  std::vector<int> offsets() const;
  int num_dofs() const;
};

/// Geometry maps and trims evaluated at one parameter value.
struct Discretization {
  std::vector<GeometryMap> maps;
  std::vector<std::vector<ResolvedTrim>> trims;
};

Discretization discretize(const Model& model, const ParamVector& mu);

/// Extended system at mu: patch blocks, interface coupling, Dirichlet and inactive DOFs.
FomSystem assemble_fom(const Model& model, const ParamVector& mu);

/// Volume t * (active physical area) at mu.
double model_volume(const Model& model, const ParamVector& mu);

/// Per-component surface H^2 Gram matrix on the untrimmed background at the reference parameter.
Eigen::SparseMatrix<double> h2_gram(const Model& model, const ParamVector& reference);

/// Flat patch origin + xi * edge_u + eta * edge_v (degree-1 geometry space).
ParametricGeometry make_plane(const Vec3& origin, const Vec3& edge_u, const Vec3& edge_v);

/// Circular cylinder segment: xi sweeps the angle in [-half_angle, half_angle] (x = R sin, z = R cos),
/// eta runs along y in [y0, y0 + length]. The arc is a least-squares spline fit.
ParametricGeometry make_cylinder_arc(double radius, double half_angle, double y0, double length, int degree,
                                     int elements);

enum class Profile { Constant, Bubble };

/// Adds mu[parameter] * amplitude * g(xi) h(eta) * direction to the geometry, with the profiles
/// represented exactly (bubble = 4 s (1 - s)) in the geometry space.
void add_shape_mode(ParametricGeometry& geo, int parameter, int num_parameters, const Vec3& direction,
                    double amplitude, Profile profile_u, Profile profile_v);

/// Open knot vector with uniform interior knots shifted by `shift` (must stay inside (0,1)).
KnotVector analysis_knots(int degree, int elements, double shift = 0.0);

/// Physical displacement at a parametric point of one patch.
Vec3 displacement_at(const Model& model, int patch, const Vec2& xi, const Eigen::VectorXd& u);

}  // namespace klrom
