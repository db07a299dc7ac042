#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "klrom/bspline.hpp"
#include "klrom/trim.hpp"

namespace klrom {

struct Material {
  double E = 1.0;
  double nu = 0.0;
  double thickness = 1.0;

  /// Throws DomainError unless E > 0, t > 0 and 0 <= nu < 0.5.
  void validate() const;
  /// Plate bending stiffness E t^3 / (12 (1 - nu^2)).
  double bending_stiffness() const;
};

/// Contravariant components C^{abcd}, stored at index 8a + 4b + 2c + d.
using ElasticityTensor = std::array<double, 16>;

inline double tensor_at(const ElasticityTensor& c, int a, int b, int l, int m) {
  return c[8 * a + 4 * b + 2 * l + m];
}

ElasticityTensor material_tensor(const SurfaceFrame& frame, const Material& mat);

/// Voigt matrix for strain vectors ordered (e11, e22, 2 e12).
Eigen::Matrix3d voigt_matrix(const ElasticityTensor& c);

/// Nonzero tensor-product basis functions at a point with parametric derivatives.
struct TensorBasis {
  std::vector<int> index;  // background function indices
  Eigen::ArrayXd N, Nu, Nv, Nuu, Nuv, Nvv;

  int count() const { return static_cast<int>(index.size()); }
};

TensorBasis eval_tensor_basis(const TensorSpace& space, const Vec2& xi, int deriv_order);

/// Covariant membrane strain alpha_ab of a field with parametric derivatives dv[a].
Eigen::Matrix2d membrane_strain(const SurfaceFrame& frame, const std::array<Vec3, 2>& dv);

/// Covariant bending strain beta_ab with Christoffel corrections; ddv = (v_11, v_12, v_22).
Eigen::Matrix2d bending_strain(const SurfaceFrame& frame, const std::array<Vec3, 2>& dv,
                               const std::array<Vec3, 3>& ddv);

/// Rotation about the edge, theta_n = -sum_a (n . a^a)(v_a . a3), for an in-surface unit normal n.
double normal_rotation(const SurfaceFrame& frame, const std::array<Vec3, 2>& dv, const Vec3& n);

/// Per-DOF strain operators; column 3k + c belongs to function k of `basis`, component c.
struct StrainOperators {
  Eigen::Matrix<double, 3, Eigen::Dynamic> membrane;
  Eigen::Matrix<double, 3, Eigen::Dynamic> bending;
};

StrainOperators strain_operators(const SurfaceFrame& frame, const TensorBasis& basis);

/// theta_n per DOF in the same column layout as strain_operators.
Eigen::RowVectorXd rotation_operator(const SurfaceFrame& frame, const TensorBasis& basis, const Vec3& n);

/// Value and parametric derivatives of a discrete displacement field.
struct FieldJet {
  Vec3 v = Vec3::Zero();
  std::array<Vec3, 2> d{Vec3::Zero(), Vec3::Zero()};
  std::array<Vec3, 3> dd{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
};

/// `coeffs` holds three components per background function (3 i + c).
FieldJet evaluate_field(const TensorSpace& space, std::span<const double> coeffs, const Vec2& xi);

/// Geometry whose control points move affinely with the parameters.
struct ParametricGeometry {
  TensorSpace space;
  std::vector<Vec3> base;
  std::vector<Eigen::Matrix<double, 3, Eigen::Dynamic>> shifts;  // empty or one 3 x M per control point

  GeometryMap at(const ParamVector& mu) const;
  bool depends_on_parameters() const { return !shifts.empty(); }
};

/// Patch edges: 0 = {eta=0}, 1 = {xi=1}, 2 = {eta=1}, 3 = {xi=0}.
enum class Edge { South = 0, East = 1, North = 2, West = 3 };

struct DirichletSpec {
  Edge edge = Edge::South;
  std::array<bool, 3> components{true, true, true};
  bool clamp = false;  // also fixes the next row of functions (zero normal rotation)
  std::optional<std::array<int, 2>> function;  // if set, only this function (i, j) is fixed
};

/// Background function indices constrained by a Dirichlet spec.
std::vector<int> dirichlet_functions(const TensorSpace& space, const DirichletSpec& spec);

struct NeumannSpec {
  Edge edge = Edge::South;
  Vec3 traction = Vec3::Zero();  // force per unit length
  double moment = 0.0;           // bending moment B_nn per unit length
};

struct LoadSpec {
  enum class Kind { Constant, ManufacturedPlate };
  Kind kind = Kind::Constant;
  Vec3 value = Vec3::Zero();  // constant body force per unit area

  /// Body force at physical point x.
  Vec3 at(const Vec3& x, const Material& mat) const;
  bool is_zero() const { return kind == Kind::Constant && value.isZero(0.0); }
};

struct QuadratureSettings {
  int order = 0;  // points per direction; 0 means p + 2
  int depth = 6;  // quadtree depth on cut elements
  // Stiffness fraction kept on the trimmed-away region of trimmed patches. 0 gives the zero
  // extension with identity rows; a positive value keeps every function of the patch in the system.
  double ersatz = 0.0;

  int resolved_order(int degree) const { return order > 0 ? order : degree + 2; }
};

struct Patch {
  int id = 0;
  ParametricGeometry geometry;
  TensorSpace analysis;
  std::vector<TrimCurveSpec> trims;
  std::vector<DirichletSpec> dirichlet;
  std::vector<NeumannSpec> neumann;

  int num_dofs() const { return 3 * analysis.num_basis(); }
};

/// Local (patch-numbered) stiffness triplets and load.
struct PatchBlock {
  std::vector<Eigen::Triplet<double>> stiffness;
  Eigen::VectorXd load;
  ElementClassification classification;
  std::vector<int> active;  // active function indices
};

PatchBlock assemble_patch(const Patch& patch, const GeometryMap& geometry, std::span<const ResolvedTrim> trims,
                          const Material& mat, const LoadSpec& load, const QuadratureSettings& quad);

/// Background function indices on an edge, optionally including the adjacent row.
std::vector<int> edge_functions(const TensorSpace& space, Edge edge, int rows = 1);

/// Extended full-order system on the background DOFs.
struct FomSystem {
  Eigen::SparseMatrix<double> stiffness;  // symmetric, identity rows on eliminated DOFs
  Eigen::VectorXd load;
  std::vector<char> active;     // per DOF
  std::vector<char> dirichlet;  // per DOF
  Eigen::VectorXd scaling;      // s_i = 1 / sqrt(K_ii)

  int size() const { return static_cast<int>(load.size()); }
  bool eliminated(int i) const { return !active[i] || dirichlet[i]; }
};

FomSystem finalize_system(int num_dofs, std::vector<Eigen::Triplet<double>> triplets, Eigen::VectorXd load,
                          std::vector<char> active, std::vector<char> dirichlet);

struct FomSolution {
  Eigen::VectorXd u;
  double compliance = 0.0;
};

FomSolution solve_fom(const FomSystem& sys);

}  // namespace klrom
