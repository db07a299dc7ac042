#include "klrom/vtk.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

#include "klrom/errors.hpp"

namespace klrom {

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9e", x == 0.0 ? 0.0 : x);  // no negative zero
  return buf;
}

std::vector<double> subdivide(const std::vector<double>& breaks, int s) {
  std::vector<double> out;
  for (std::size_t e = 0; e + 1 < breaks.size(); ++e)
    for (int k = 0; k < s; ++k) out.push_back(breaks[e] + (breaks[e + 1] - breaks[e]) * k / s);
  out.push_back(breaks.back());
  return out;
}

}  // namespace

VtkStats write_vtk(std::ostream& os, const Model& model, const ParamVector& mu, const Eigen::VectorXd& u,
                   int subdivisions) {
  if (subdivisions < 1) throw DomainError("VTK subdivisions must be >= 1");
  if (u.size() != model.num_dofs())
    throw ContractError("VTK export: displacement has " + std::to_string(u.size()) + " entries, model has " +
                        std::to_string(model.num_dofs()) + " DOFs");
  const Discretization disc = discretize(model, mu);
  std::vector<Vec3> points, values;
  std::vector<std::array<int, 4>> cells;
  VtkStats st;

  for (std::size_t pi = 0; pi < model.patches.size(); ++pi) {
    const TensorSpace& space = model.patches[pi].analysis;
    const auto gu = subdivide(space.knots(0).breakpoints(), subdivisions);
    const auto gv = subdivide(space.knots(1).breakpoints(), subdivisions);
    const int nu = static_cast<int>(gu.size()), nv = static_cast<int>(gv.size());
    const int first = static_cast<int>(points.size());
    for (int j = 0; j < nv; ++j)
      for (int i = 0; i < nu; ++i) {
        const Vec2 xi(gu[i], gv[j]);
        points.push_back(disc.maps[pi].point(xi));
        values.push_back(displacement_at(model, static_cast<int>(pi), xi, u));
      }
    for (int j = 0; j + 1 < nv; ++j)
      for (int i = 0; i + 1 < nu; ++i) {
        const Vec2 c(0.5 * (gu[i] + gu[i + 1]), 0.5 * (gv[j] + gv[j + 1]));
        if (!is_active_point(c, disc.trims[pi])) continue;
        const int a = first + i + nu * j;
        cells.push_back({a, a + 1, a + 1 + nu, a + nu});
      }
  }

  for (const auto& v : values)
    if (!v.allFinite()) throw DomainError("VTK export: non-finite displacement");

  os << "# vtk DataFile Version 3.0\n";
  os << "klrom displacement\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << points.size() << " double\n";
  for (const auto& p : points) os << fmt(p[0]) << " " << fmt(p[1]) << " " << fmt(p[2]) << "\n";
  os << "CELLS " << cells.size() << " " << 5 * cells.size() << "\n";
  for (const auto& c : cells) {
    os << "4 " << c[0] << " " << c[1] << " " << c[2] << " " << c[3] << "\n";
    const Vec3 d1 = points[c[2]] - points[c[0]], d2 = points[c[3]] - points[c[1]];
    st.area += 0.5 * d1.cross(d2).norm();
  }
  os << "CELL_TYPES " << cells.size() << "\n";
  for (std::size_t k = 0; k < cells.size(); ++k) os << "9\n";
  os << "POINT_DATA " << points.size() << "\n";
  os << "VECTORS displacement double\n";
  for (const auto& v : values) os << fmt(v[0]) << " " << fmt(v[1]) << " " << fmt(v[2]) << "\n";
  if (!os) throw Error("VTK export: write failed");
  st.points = static_cast<int>(points.size());
  st.cells = static_cast<int>(cells.size());
  return st;
}

VtkStats export_vtk(const std::filesystem::path& path, const Model& model, const ParamVector& mu,
                    const Eigen::VectorXd& u, int subdivisions) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return write_vtk(out, model, mu, u, subdivisions);
}

}  // namespace klrom
