#include "klrom/kl_shell.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/SparseCholesky>

#include "klrom/errors.hpp"
#include "klrom/parallel.hpp"

namespace klrom {

void Material::validate() const {
  if (!(E > 0.0)) throw DomainError("material: Young's modulus must be positive");
  if (!(thickness > 0.0)) throw DomainError("material: thickness must be positive");
  if (!(nu >= 0.0 && nu < 0.5)) throw DomainError("material: Poisson ratio must lie in [0, 0.5)");
}

double Material::bending_stiffness() const {
  return E * thickness * thickness * thickness / (12.0 * (1.0 - nu * nu));
}

ElasticityTensor material_tensor(const SurfaceFrame& frame, const Material& mat) {
  const Eigen::Matrix2d& g = frame.inverse_metric;
  const double mu = mat.E / (2.0 * (1.0 + mat.nu));
  const double lam = 2.0 * mat.nu / (1.0 - mat.nu);
  ElasticityTensor c{};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int l = 0; l < 2; ++l)
        for (int m = 0; m < 2; ++m)
          c[8 * a + 4 * b + 2 * l + m] = mu * (g(a, l) * g(b, m) + g(a, m) * g(b, l) + lam * g(a, b) * g(l, m));
  return c;
}

Eigen::Matrix3d voigt_matrix(const ElasticityTensor& c) {
  constexpr int pairs[3][2] = {{0, 0}, {1, 1}, {0, 1}};
  Eigen::Matrix3d d;
  for (int I = 0; I < 3; ++I)
    for (int J = 0; J < 3; ++J) d(I, J) = tensor_at(c, pairs[I][0], pairs[I][1], pairs[J][0], pairs[J][1]);
  return d;
}

TensorBasis eval_tensor_basis(const TensorSpace& space, const Vec2& xi, int deriv_order) {
  const auto bu = eval_basis(space.knots(0), xi[0], deriv_order);
  const auto bv = eval_basis(space.knots(1), xi[1], deriv_order);
  const int nu = bu.count(), nv = bv.count();
  TensorBasis t;
  t.index.resize(nu * nv);
  t.N.resize(nu * nv);
  t.Nu.setZero(nu * nv);
  t.Nv.setZero(nu * nv);
  t.Nuu.setZero(nu * nv);
  t.Nuv.setZero(nu * nv);
  t.Nvv.setZero(nu * nv);
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nu; ++i) {
      const int k = i + nu * j;
      t.index[k] = space.index(bu.first + i, bv.first + j);
      t.N[k] = bu.values[0][i] * bv.values[0][j];
      if (deriv_order >= 1) {
        t.Nu[k] = bu.values[1][i] * bv.values[0][j];
        t.Nv[k] = bu.values[0][i] * bv.values[1][j];
      }
      if (deriv_order >= 2) {
        t.Nuu[k] = bu.values[2][i] * bv.values[0][j];
        t.Nuv[k] = bu.values[1][i] * bv.values[1][j];
        t.Nvv[k] = bu.values[0][i] * bv.values[2][j];
      }
    }
  return t;
}

Eigen::Matrix2d membrane_strain(const SurfaceFrame& frame, const std::array<Vec3, 2>& dv) {
  Eigen::Matrix2d a;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) a(i, j) = 0.5 * (frame.covariant(i).dot(dv[j]) + frame.covariant(j).dot(dv[i]));
  return a;
}

Eigen::Matrix2d bending_strain(const SurfaceFrame& frame, const std::array<Vec3, 2>& dv,
                               const std::array<Vec3, 3>& ddv) {
  Eigen::Matrix2d b;
  const Vec3* second[2][2] = {{&ddv[0], &ddv[1]}, {&ddv[1], &ddv[2]}};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const Vec3 cov = *second[i][j] - frame.christoffel[0](i, j) * dv[0] - frame.christoffel[1](i, j) * dv[1];
      b(i, j) = -cov.dot(frame.a3);
    }
  return b;
}

double normal_rotation(const SurfaceFrame& frame, const std::array<Vec3, 2>& dv, const Vec3& n) {
  return -(n.dot(frame.con1) * dv[0].dot(frame.a3) + n.dot(frame.con2) * dv[1].dot(frame.a3));
}

StrainOperators strain_operators(const SurfaceFrame& frame, const TensorBasis& basis) {
  const int n = basis.count();
  StrainOperators ops;
  ops.membrane.resize(3, 3 * n);
  ops.bending.resize(3, 3 * n);
  const auto& G0 = frame.christoffel[0];
  const auto& G1 = frame.christoffel[1];
  for (int k = 0; k < n; ++k) {
    const double n1 = basis.Nu[k], n2 = basis.Nv[k];
    // covariant second derivatives of the scalar basis function
    const double h11 = basis.Nuu[k] - G0(0, 0) * n1 - G1(0, 0) * n2;
    const double h22 = basis.Nvv[k] - G0(1, 1) * n1 - G1(1, 1) * n2;
    const double h12 = basis.Nuv[k] - G0(0, 1) * n1 - G1(0, 1) * n2;
    for (int c = 0; c < 3; ++c) {
      const int col = 3 * k + c;
      ops.membrane(0, col) = frame.a1[c] * n1;
      ops.membrane(1, col) = frame.a2[c] * n2;
      ops.membrane(2, col) = frame.a1[c] * n2 + frame.a2[c] * n1;
      ops.bending(0, col) = -h11 * frame.a3[c];
      ops.bending(1, col) = -h22 * frame.a3[c];
      ops.bending(2, col) = -2.0 * h12 * frame.a3[c];
    }
  }
  return ops;
}

Eigen::RowVectorXd rotation_operator(const SurfaceFrame& frame, const TensorBasis& basis, const Vec3& n) {
  const double w1 = n.dot(frame.con1), w2 = n.dot(frame.con2);
  Eigen::RowVectorXd r(3 * basis.count());
  for (int k = 0; k < basis.count(); ++k) {
    const double s = -(w1 * basis.Nu[k] + w2 * basis.Nv[k]);
    for (int c = 0; c < 3; ++c) r[3 * k + c] = s * frame.a3[c];
  }
  return r;
}

FieldJet evaluate_field(const TensorSpace& space, std::span<const double> coeffs, const Vec2& xi) {
  if (static_cast<int>(coeffs.size()) != 3 * space.num_basis())
    throw ContractError("evaluate_field: coefficient vector has wrong length");
  const TensorBasis b = eval_tensor_basis(space, xi, 2);
  FieldJet f;
  for (int k = 0; k < b.count(); ++k) {
    const Vec3 c(coeffs[3 * b.index[k]], coeffs[3 * b.index[k] + 1], coeffs[3 * b.index[k] + 2]);
    f.v += b.N[k] * c;
    f.d[0] += b.Nu[k] * c;
    f.d[1] += b.Nv[k] * c;
    f.dd[0] += b.Nuu[k] * c;
    f.dd[1] += b.Nuv[k] * c;
    f.dd[2] += b.Nvv[k] * c;
  }
  return f;
}

GeometryMap ParametricGeometry::at(const ParamVector& mu) const {
  if (shifts.empty()) return GeometryMap(space, base);
  std::vector<Vec3> cps = base;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (shifts[i].cols() == 0) continue;
    if (shifts[i].cols() != mu.size()) throw DomainError("geometry shift has wrong parameter dimension");
    cps[i] += shifts[i] * mu;
  }
  return GeometryMap(space, std::move(cps));
}

Vec3 LoadSpec::at(const Vec3& x, const Material& mat) const {
  if (kind == Kind::Constant) return value;
  const double pi = std::numbers::pi;
  const double amp = 4.0 * std::pow(pi, 4) * mat.bending_stiffness();
  return Vec3(0.0, 0.0, amp * std::sin(pi * x[0]) * std::sin(pi * x[1]));
}

std::vector<int> edge_functions(const TensorSpace& space, Edge edge, int rows) {
  const int nu = space.num_basis(0), nv = space.num_basis(1);
  std::vector<int> out;
  for (int r = 0; r < rows; ++r) {
    switch (edge) {
      case Edge::South:
        for (int i = 0; i < nu; ++i) out.push_back(space.index(i, r));
        break;
      case Edge::North:
        for (int i = 0; i < nu; ++i) out.push_back(space.index(i, nv - 1 - r));
        break;
      case Edge::West:
        for (int j = 0; j < nv; ++j) out.push_back(space.index(r, j));
        break;
      case Edge::East:
        for (int j = 0; j < nv; ++j) out.push_back(space.index(nu - 1 - r, j));
        break;
    }
  }
  return out;
}

std::vector<int> dirichlet_functions(const TensorSpace& space, const DirichletSpec& spec) {
  if (spec.function) {
    const auto [i, j] = *spec.function;
    if (i < 0 || j < 0 || i >= space.num_basis(0) || j >= space.num_basis(1))
      throw DomainError("Dirichlet function index out of range");
    return {space.index(i, j)};
  }
  return edge_functions(space, spec.edge, spec.clamp ? 2 : 1);
}

namespace {

void add_local(std::vector<Eigen::Triplet<double>>& out, const std::vector<int>& index,
               const Eigen::MatrixXd& k) {
  const int n = static_cast<int>(index.size());
  for (int a = 0; a < n; ++a)
    for (int ca = 0; ca < 3; ++ca)
      for (int b = 0; b < n; ++b)
        for (int cb = 0; cb < 3; ++cb) {
          const double v = k(3 * a + ca, 3 * b + cb);
          if (v != 0.0) out.emplace_back(3 * index[a] + ca, 3 * index[b] + cb, v);
        }
}

/// Outward in-surface unit normal of an edge at a frame.
Vec3 edge_normal(const SurfaceFrame& f, Edge edge) {
  const Vec3 tangent = (edge == Edge::South || edge == Edge::North) ? f.a1 : f.a2;
  Vec3 n = tangent.cross(f.a3).normalized();
  Vec3 outward;
  switch (edge) {
    case Edge::South: outward = -f.a2; break;
    case Edge::North: outward = f.a2; break;
    case Edge::West: outward = -f.a1; break;
    default: outward = f.a1; break;
  }
  if (n.dot(outward) < 0.0) n = -n;
  return n;
}

void assemble_neumann(const Patch& patch, const GeometryMap& geometry, const NeumannSpec& spec, int order,
                      Eigen::VectorXd& load) {
  const bool along_u = spec.edge == Edge::South || spec.edge == Edge::North;
  const double fixed = (spec.edge == Edge::North || spec.edge == Edge::East) ? 1.0 : 0.0;
  const auto breaks = patch.analysis.knots(along_u ? 0 : 1).breakpoints();
  const auto& [gx, gw] = gauss_legendre(order);
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double len = breaks[s + 1] - breaks[s];
    for (std::size_t g = 0; g < gx.size(); ++g) {
      const double t = breaks[s] + len * gx[g];
      const Vec2 xi = along_u ? Vec2(t, fixed) : Vec2(fixed, t);
      const SurfaceFrame f = surface_frame(geometry, xi);
      const double ds = (along_u ? f.a1 : f.a2).norm() * len * gw[g];
      const TensorBasis b = eval_tensor_basis(patch.analysis, xi, 1);
      const Eigen::RowVectorXd rot = rotation_operator(f, b, edge_normal(f, spec.edge));
      for (int k = 0; k < b.count(); ++k)
        for (int c = 0; c < 3; ++c)
          load[3 * b.index[k] + c] += ds * (b.N[k] * spec.traction[c] + spec.moment * rot[3 * k + c]);
    }
  }
}

}  // namespace

PatchBlock assemble_patch(const Patch& patch, const GeometryMap& geometry, std::span<const ResolvedTrim> trims,
                          const Material& mat, const LoadSpec& load, const QuadratureSettings& quad) {
  const TensorSpace& space = patch.analysis;
  const int p = space.degree();
  const int q = quad.resolved_order(p);
  const double t = mat.thickness;

  PatchBlock out;
  out.classification = classify_elements(space, trims);
  out.active = active_functions(space, out.classification);
  out.load = Eigen::VectorXd::Zero(patch.num_dofs());

  const auto& cls = out.classification;
  const int workers = std::min(thread_count(), std::max(1, cls.num_elements()));
  std::vector<std::vector<Eigen::Triplet<double>>> trip(workers);
  std::vector<Eigen::VectorXd> loads(workers, Eigen::VectorXd::Zero(patch.num_dofs()));
  const bool loaded = !load.is_zero();
  const double ersatz = trims.empty() ? 0.0 : quad.ersatz;
  std::vector<char> empty_cut(cls.num_elements(), 0);

  parallel_for(cls.num_elements(), [&](int e, int w) {
    const ElementTag tag = cls.tags[e];
    if (tag == ElementTag::Exterior && ersatz == 0.0) return;
    const Box box = cls.box(e);
    const QuadratureRule rule = tag == ElementTag::Interior   ? tensor_gauss(box, q)
                                : tag == ElementTag::Exterior ? QuadratureRule{}
                                                              : cut_quadrature(box, trims, q, quad.depth);
    if (rule.size() == 0 && tag == ElementTag::Cut) empty_cut[e] = 1;
    if (rule.size() == 0 && ersatz == 0.0) return;

    const int nloc = (p + 1) * (p + 1);
    Eigen::MatrixXd kloc = Eigen::MatrixXd::Zero(3 * nloc, 3 * nloc);
    std::vector<int> index;
    // K_e = (1 - ersatz) K_active + ersatz K_whole on non-interior elements
    auto integrate = [&](const QuadratureRule& r, double scale, bool with_load) {
      for (std::size_t g = 0; g < r.size(); ++g) {
        const Vec2& xi = r.points[g];
        const GeometryPoint gp = geometry.eval(xi);
        const SurfaceFrame f = surface_frame(gp, geometry.scale());
        const TensorBasis b = eval_tensor_basis(space, xi, 2);
        if (index.empty()) index = b.index;
        const double dA = r.weights[g] * f.area_element;
        const Eigen::Matrix3d D = voigt_matrix(material_tensor(f, mat));
        const StrainOperators ops = strain_operators(f, b);
        kloc.noalias() += (scale * t * dA) * ops.membrane.transpose() * (D * ops.membrane);
        kloc.noalias() += (scale * t * t * t / 12.0 * dA) * ops.bending.transpose() * (D * ops.bending);
        if (with_load) {
          const Vec3 fb = load.at(gp.x, mat);
          for (int k = 0; k < b.count(); ++k)
            for (int c = 0; c < 3; ++c) loads[w][3 * b.index[k] + c] += dA * b.N[k] * fb[c];
        }
      }
    };
    if (tag == ElementTag::Interior) {
      integrate(rule, 1.0, loaded);
    } else {
      integrate(rule, 1.0 - ersatz, loaded);
      if (ersatz > 0.0) integrate(tensor_gauss(box, q), ersatz, false);
    }
    add_local(trip[w], index, kloc);
  });

  // cut elements whose active part is below the quadtree resolution carry no quadrature;
  // functions supported only there are treated as inactive
  if (std::find(empty_cut.begin(), empty_cut.end(), 1) != empty_cut.end()) {
    for (int e = 0; e < cls.num_elements(); ++e)
      if (empty_cut[e]) out.classification.tags[e] = ElementTag::Exterior;
    out.active = active_functions(space, out.classification);
  }

  std::size_t total = 0;
  for (const auto& v : trip) total += v.size();
  out.stiffness.reserve(total);
  for (int w = 0; w < workers; ++w) {
    out.stiffness.insert(out.stiffness.end(), trip[w].begin(), trip[w].end());
    out.load += loads[w];
  }
  for (const auto& nspec : patch.neumann) assemble_neumann(patch, geometry, nspec, q, out.load);
  return out;
}

FomSystem finalize_system(int num_dofs, std::vector<Eigen::Triplet<double>> triplets, Eigen::VectorXd load,
                          std::vector<char> active, std::vector<char> dirichlet) {
  if (static_cast<int>(load.size()) != num_dofs || static_cast<int>(active.size()) != num_dofs ||
      static_cast<int>(dirichlet.size()) != num_dofs)
    throw ContractError("finalize_system: inconsistent DOF counts");
  FomSystem sys;
  sys.active = std::move(active);
  sys.dirichlet = std::move(dirichlet);
  auto elim = [&](int i) { return !sys.active[i] || sys.dirichlet[i]; };

  std::vector<Eigen::Triplet<double>> kept;
  kept.reserve(triplets.size() + num_dofs);
  for (const auto& tr : triplets)
    if (!elim(tr.row()) && !elim(tr.col())) kept.push_back(tr);
  triplets.clear();
  triplets.shrink_to_fit();
  for (int i = 0; i < num_dofs; ++i)
    if (elim(i)) kept.emplace_back(i, i, 1.0);
  sys.stiffness.resize(num_dofs, num_dofs);
  sys.stiffness.setFromTriplets(kept.begin(), kept.end());
  sys.stiffness.makeCompressed();

  for (int i = 0; i < num_dofs; ++i)
    if (elim(i)) load[i] = 0.0;
  sys.load = std::move(load);

  const Eigen::VectorXd diag = sys.stiffness.diagonal();
  sys.scaling.resize(num_dofs);
  for (int i = 0; i < num_dofs; ++i) {
    if (!(diag[i] > 0.0))
      throw AssemblyIntegrityError("non-positive diagonal entry " + std::to_string(diag[i]) + " at free DOF " +
                                   std::to_string(i));
    sys.scaling[i] = 1.0 / std::sqrt(diag[i]);
  }
  return sys;
}

FomSolution solve_fom(const FomSystem& sys) {
  FomSolution sol;
  const int n = sys.size();
  if (sys.load.isZero(0.0)) {
    sol.u = Eigen::VectorXd::Zero(n);
    return sol;
  }
  const auto S = sys.scaling.asDiagonal();
  const Eigen::SparseMatrix<double> A = S * sys.stiffness * S;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw SingularSystemError("sparse factorization failed");
  const Eigen::VectorXd d = ldlt.vectorD();
  if (d.minCoeff() <= 1e-13 * d.cwiseAbs().maxCoeff())
    throw SingularSystemError("stiffness matrix is singular or indefinite on the free DOFs");

  const Eigen::VectorXd b = S * sys.load;
  Eigen::VectorXd y = ldlt.solve(b);
  const double bnorm = b.norm();
  for (int it = 0; it < 3; ++it) {
    const Eigen::VectorXd r = b - A * y;
    if (r.norm() <= 1e-13 * bnorm) break;
    y += ldlt.solve(r);
  }
  sol.u = S * y;
  const double res = (sys.stiffness * sol.u - sys.load).norm() / sys.load.norm();
  if (!(res <= 1e-8)) throw SingularSystemError("FOM residual " + std::to_string(res) + " too large");
  sol.compliance = 0.5 * sol.u.dot(sys.load);
  return sol;
}

}  // namespace klrom
