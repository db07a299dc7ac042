#pragma once

#include <optional>
#include <span>
#include <vector>

#include "klrom/kl_shell.hpp"

namespace klrom {

/// One side of a declared interface: a patch edge or one of the patch's trim curves.
struct InterfaceSide {
  int patch = 0;  // index into the model's patch list
  std::optional<Edge> edge;
  int trim = -1;

  bool operator==(const InterfaceSide&) const = default;
};

struct InterfaceSpec {
  InterfaceSide a, b;

  bool operator==(const InterfaceSpec&) const = default;
};

struct InterfacePoint {
  double s = 0.0;       // curve parameter on the active side
  double weight = 0.0;  // physical arc-length weight
  Vec3 x = Vec3::Zero();
  Vec3 tangent = Vec3::Zero();  // unit physical tangent
  std::array<Vec2, 2> xi;       // pullbacks: [0] active side, [1] other side
};

/// Interface resolved at a parameter value; side[0] is the active side.
struct Interface {
  std::array<int, 2> patch{0, 0};
  bool both_trimmed = false;
  KnotVector projection;           // degree p - 2 on the curve parameter
  std::vector<double> partition;   // merged quadrature partition in s
  double length = 0.0;
  double h = 0.0;
  std::vector<InterfacePoint> points;
};

/// Damped Gauss-Newton inversion of a map (tolerance 1e-12, at most 50 iterations).
/// Throws InterfacePairingError on non-convergence and GeometryConsistencyError if the
/// closest preimage misses x by more than 1e-6 (relative to max(1, map scale)).
Vec2 invert_map(const GeometryMap& map, const Vec3& x, const Vec2* guess = nullptr);

/// Resolves a declared interface: active side, projection space, quadrature and pullbacks.
/// `order` is the number of Gauss points per span of the merged partition (0 means p + 3).
Interface build_interface(const InterfaceSpec& spec, std::span<const Patch> patches,
                          std::span<const GeometryMap> maps, std::span<const std::vector<ResolvedTrim>> trims,
                          int order = 0);

struct PenaltyCoefficients {
  double displacement = 0.0;
  double rotation = 0.0;
};

/// Super-penalty coefficients with exponent p - 1.
PenaltyCoefficients penalty_coefficients(double length, double h, const Material& mat, int degree);

/// Projected penalty coupling block in global numbering (`offsets[i]` = first DOF of patch i).
std::vector<Eigen::Triplet<double>> assemble_coupling(const Interface& iface, std::span<const Patch> patches,
                                                      std::span<const GeometryMap> maps,
                                                      std::span<const int> offsets, const Material& mat);

}  // namespace klrom
