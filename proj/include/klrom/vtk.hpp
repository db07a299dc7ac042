#pragma once

#include <filesystem>
#include <iosfwd>

#include "klrom/model.hpp"

namespace klrom {

struct VtkStats {
  int points = 0;
  int cells = 0;
  double area = 0.0;  // physical area of the written cells (bilinear quads)
};

/// Legacy ASCII unstructured grid of quads: every element is split into s x s cells and only cells
/// whose center is active are written. `u` holds background displacement coefficients.
VtkStats write_vtk(std::ostream& os, const Model& model, const ParamVector& mu, const Eigen::VectorXd& u,
                   int subdivisions = 4);
VtkStats export_vtk(const std::filesystem::path& path, const Model& model, const ParamVector& mu,
                    const Eigen::VectorXd& u, int subdivisions = 4);

}  // namespace klrom
