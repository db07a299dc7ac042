#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "klrom/model.hpp"
#include "klrom/rom.hpp"

namespace klrom {

struct GeometryConfig {
  std::string type = "plane";  // plane | cylinder_arc | spline
  // plane
  Vec3 origin = Vec3::Zero();
  Vec3 edge_u = Vec3::UnitX();
  Vec3 edge_v = Vec3::UnitY();
  // cylinder_arc
  double radius = 0.0;
  double half_angle_deg = 0.0;
  double y0 = 0.0;
  double length = 0.0;
  int fit_degree = 3;
  int fit_elements = 64;
  // spline
  int degree = 1;
  std::vector<double> knots_u, knots_v;
  std::vector<Vec3> control_points;
};

/// mu[parameter] * amplitude * profile_u(xi) * profile_v(eta) * direction.
struct ShapeModeConfig {
  std::string parameter;
  Vec3 direction = Vec3::UnitZ();
  double amplitude = 1.0;
  std::string profile_u = "constant";  // constant | bubble
  std::string profile_v = "constant";
};

struct AnalysisConfig {
  int degree = 2;
  std::array<int, 2> elements{8, 8};
  std::vector<double> knots_u, knots_v;  // explicit knots override `elements`
  double interior_knot_shift = 0.0;
};

/// Parameter dependence of a point, keyed by parameter name.
using PointGradient = std::map<std::string, Vec2>;

struct TrimConfig {
  std::string type = "circle";  // circle | spline_curve
  Vec2 center = Vec2::Zero();
  PointGradient center_gradient;
  double radius = 0.0;
  std::string remove = "inside";  // inside | outside
  int degree = 1;
  std::vector<double> knots;
  std::vector<Vec2> control_points;
  std::vector<PointGradient> control_point_gradients;
  std::string removed_side = "right";  // left | right
};

struct DirichletConfig {
  std::string edge = "south";
  std::array<bool, 3> components{true, true, true};
  bool clamp = false;
  std::optional<std::array<int, 2>> function;
};

struct NeumannConfig {
  std::string edge = "south";
  Vec3 traction = Vec3::Zero();
  double moment = 0.0;
};

struct PatchConfig {
  int id = 0;
  GeometryConfig geometry;
  std::vector<ShapeModeConfig> shape_modes;
  AnalysisConfig analysis;
  std::vector<TrimConfig> trims;
  std::vector<DirichletConfig> dirichlet;
  std::vector<NeumannConfig> neumann;
};

struct InterfaceSideConfig {
  int patch = 0;  // patch id
  std::optional<std::string> edge;
  std::optional<int> trim;
};

struct InterfaceConfig {
  InterfaceSideConfig a, b;
};

struct OptimizationConfig {
  std::vector<double> initial;
  std::optional<double> volume_cap;
  std::string volume_measure = "volume";  // volume (t * area) | area
  std::optional<double> displacement_cap;
  int max_iterations = 200;
};

struct ModelConfig {
  std::string name;
  std::vector<std::string> parameter_names;
  std::vector<double> lower, upper;
  Material material;
  std::string load_type = "constant";  // constant | manufactured_plate
  Vec3 load_value = Vec3::Zero();
  QuadratureSettings quadrature;
  std::vector<PatchConfig> patches;
  std::vector<InterfaceConfig> interfaces;
  RomSettings rom;
  OptimizationConfig optimization;

  ParameterBox parameter_box() const;
};

/// Parses and validates a configuration document. Throws ConfigError listing every problem
/// with its JSON path.
ModelConfig parse_config(const std::string& text);
ModelConfig load_config(const std::filesystem::path& path);

/// Canonical JSON text (all defaults written out).
std::string serialize_config(const ModelConfig& cfg);

/// Model described by a validated configuration.
Model build_model(const ModelConfig& cfg);

/// Parses "v1,v2,..." into a parameter vector of the expected dimension.
ParamVector parse_parameter_list(const std::string& text, int expected_dim);

}  // namespace klrom
