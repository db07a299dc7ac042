#include "klrom/model.hpp"

#include <cmath>

#include "klrom/errors.hpp"
#include "klrom/parallel.hpp"

namespace klrom {

bool ParameterBox::contains(const ParamVector& mu, double tol) const {
  if (mu.size() != lower.size()) return false;
  for (int i = 0; i < mu.size(); ++i) {
    const double slack = tol * (upper[i] - lower[i]);
    if (mu[i] < lower[i] - slack || mu[i] > upper[i] + slack) return false;
  }
  return true;
}

std::vector<int> Model::offsets() const {
  std::vector<int> out;
  int n = 0;
  for (const auto& p : patches) {
    out.push_back(n);
    n += p.num_dofs();
  }
  return out;
}

int Model::num_dofs() const {
  int n = 0;
  for (const auto& p : patches) n += p.num_dofs();
  return n;
}

Discretization discretize(const Model& model, const ParamVector& mu) {
  if (mu.size() != model.parameters.dim())
    throw DomainError("parameter vector has " + std::to_string(mu.size()) + " entries, model expects " +
                      std::to_string(model.parameters.dim()));
  Discretization d;
  for (const auto& p : model.patches) {
    d.maps.push_back(p.geometry.at(mu));
    d.trims.push_back(resolve_all(p.trims, mu));
  }
  return d;
}

FomSystem assemble_fom(const Model& model, const ParamVector& mu) {
  const Discretization disc = discretize(model, mu);
  const auto offsets = model.offsets();
  const int n = model.num_dofs();

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd load = Eigen::VectorXd::Zero(n);
  std::vector<char> active(n, 0), dirichlet(n, 0);

  for (std::size_t pi = 0; pi < model.patches.size(); ++pi) {
    const Patch& patch = model.patches[pi];
    PatchBlock blk;
    try {
      blk = assemble_patch(patch, disc.maps[pi], disc.trims[pi], model.material, model.load, model.quadrature);
    } catch (const FullyTrimmedError& e) {
      throw FullyTrimmedError("patch " + std::to_string(patch.id) + ": " + e.what());
    }
    const int off = offsets[pi];
    trip.reserve(trip.size() + blk.stiffness.size());
    for (const auto& t : blk.stiffness) trip.emplace_back(off + t.row(), off + t.col(), t.value());
    load.segment(off, patch.num_dofs()) = blk.load;
    if (model.quadrature.ersatz > 0.0 && !patch.trims.empty())
      std::fill(active.begin() + off, active.begin() + off + patch.num_dofs(), 1);
    else
      for (int f : blk.active)
        for (int c = 0; c < 3; ++c) active[off + 3 * f + c] = 1;
    for (const auto& ds : patch.dirichlet)
      for (int f : dirichlet_functions(patch.analysis, ds))
        for (int c = 0; c < 3; ++c)
          if (ds.components[c]) dirichlet[off + 3 * f + c] = 1;
  }

  for (const auto& spec : model.interfaces) {
    const Interface iface = build_interface(spec, model.patches, disc.maps, disc.trims);
    const auto block = assemble_coupling(iface, model.patches, disc.maps, offsets, model.material);
    trip.insert(trip.end(), block.begin(), block.end());
  }
  return finalize_system(n, std::move(trip), std::move(load), std::move(active), std::move(dirichlet));
}

double model_volume(const Model& model, const ParamVector& mu) {
  const Discretization disc = discretize(model, mu);
  double area = 0.0;
  for (std::size_t pi = 0; pi < model.patches.size(); ++pi) {
    const Patch& patch = model.patches[pi];
    const auto cls = classify_elements(patch.analysis, disc.trims[pi]);
    const int q = model.quadrature.resolved_order(patch.analysis.degree());
    std::vector<double> partial(cls.num_elements(), 0.0);
    parallel_for(cls.num_elements(), [&](int e, int) {
      if (cls.tags[e] == ElementTag::Exterior) return;
      const Box box = cls.box(e);
      const QuadratureRule rule = cls.tags[e] == ElementTag::Interior
                                      ? tensor_gauss(box, q)
                                      : cut_quadrature(box, disc.trims[pi], q, model.quadrature.depth);
      double a = 0.0;
      for (std::size_t g = 0; g < rule.size(); ++g)
        a += rule.weights[g] * surface_frame(disc.maps[pi], rule.points[g]).area_element;
      partial[e] = a;
    });
    for (double a : partial) area += a;
  }
  return model.material.thickness * area;
}

Eigen::SparseMatrix<double> h2_gram(const Model& model, const ParamVector& reference) {
  const Discretization disc = discretize(model, reference);
  const auto offsets = model.offsets();
  const int n = model.num_dofs();
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t pi = 0; pi < model.patches.size(); ++pi) {
    const Patch& patch = model.patches[pi];
    const TensorSpace& space = patch.analysis;
    const int q = model.quadrature.resolved_order(space.degree());
    const auto bu = space.knots(0).breakpoints(), bv = space.knots(1).breakpoints();
    for (std::size_t ev = 0; ev + 1 < bv.size(); ++ev)
      for (std::size_t eu = 0; eu + 1 < bu.size(); ++eu) {
        const Box box{Vec2(bu[eu], bv[ev]), Vec2(bu[eu + 1], bv[ev + 1])};
        const QuadratureRule rule = tensor_gauss(box, q);
        Eigen::MatrixXd g;
        std::vector<int> index;
        for (std::size_t k = 0; k < rule.size(); ++k) {
          const SurfaceFrame f = surface_frame(disc.maps[pi], rule.points[k]);
          const TensorBasis b = eval_tensor_basis(space, rule.points[k], 2);
          if (index.empty()) {
            index = b.index;
            g = Eigen::MatrixXd::Zero(b.count(), b.count());
          }
          const double w = rule.weights[k] * f.area_element;
          const int m = b.count();
          Eigen::MatrixXd grad(2, m), hess(3, m);
          for (int j = 0; j < m; ++j) {
            grad(0, j) = b.Nu[j];
            grad(1, j) = b.Nv[j];
            const double d1 = b.Nu[j], d2 = b.Nv[j];
            hess(0, j) = b.Nuu[j] - f.christoffel[0](0, 0) * d1 - f.christoffel[1](0, 0) * d2;
            hess(1, j) = b.Nuv[j] - f.christoffel[0](0, 1) * d1 - f.christoffel[1](0, 1) * d2;
            hess(2, j) = b.Nvv[j] - f.christoffel[0](1, 1) * d1 - f.christoffel[1](1, 1) * d2;
          }
          const Eigen::Matrix2d& A = f.inverse_metric;
          // H:H with raised indices; the mixed component appears twice
          Eigen::Matrix3d W;
          W << A(0, 0) * A(0, 0), 2 * A(0, 0) * A(0, 1), A(0, 1) * A(0, 1),
              2 * A(0, 0) * A(0, 1), 2 * (A(0, 0) * A(1, 1) + A(0, 1) * A(0, 1)), 2 * A(1, 1) * A(0, 1),
              A(0, 1) * A(0, 1), 2 * A(1, 1) * A(0, 1), A(1, 1) * A(1, 1);
          g.noalias() += w * (b.N.matrix() * b.N.matrix().transpose() + grad.transpose() * A * grad +
                              hess.transpose() * W * hess);
        }
        const int off = offsets[pi];
        for (std::size_t a = 0; a < index.size(); ++a)
          for (std::size_t c = 0; c < index.size(); ++c)
            for (int comp = 0; comp < 3; ++comp)
              trip.emplace_back(off + 3 * index[a] + comp, off + 3 * index[c] + comp, g(a, c));
      }
  }
  Eigen::SparseMatrix<double> X(n, n);
  X.setFromTriplets(trip.begin(), trip.end());
  X.makeCompressed();
  return X;
}

ParametricGeometry make_plane(const Vec3& origin, const Vec3& edge_u, const Vec3& edge_v) {
  ParametricGeometry g;
  g.space = TensorSpace(KnotVector::uniform(1, 1), KnotVector::uniform(1, 1));
  g.base = {origin, origin + edge_u, origin + edge_v, origin + edge_u + edge_v};
  return g;
}

ParametricGeometry make_cylinder_arc(double radius, double half_angle, double y0, double length, int degree,
                                     int elements) {
  if (!(radius > 0.0) || !(half_angle > 0.0) || !(length > 0.0))
    throw DomainError("cylinder arc needs positive radius, angle and length");
  const KnotVector ku = KnotVector::uniform(degree, elements);
  const KnotVector kv = KnotVector::uniform(degree, 1);
  const int samples = 24 * elements + 1;
  std::vector<double> params(samples);
  std::vector<Vec3> values(samples);
  for (int i = 0; i < samples; ++i) {
    const double s = static_cast<double>(i) / (samples - 1);
    const double phi = half_angle * (2.0 * s - 1.0);
    params[i] = s;
    values[i] = Vec3(radius * std::sin(phi), 0.0, radius * std::cos(phi));
  }
  const std::vector<Vec3> arc = fit_curve(ku, params, values);
  ParametricGeometry g;
  g.space = TensorSpace(ku, kv);
  const int nv = kv.num_basis();
  for (int j = 0; j < nv; ++j) {
    // linear in eta: Greville abscissae of the open knot vector
    double greville = 0.0;
    for (int k = 1; k <= degree; ++k) greville += kv.knots()[j + k];
    greville /= degree;
    for (const Vec3& c : arc) g.base.push_back(Vec3(c[0], y0 + length * greville, c[2]));
  }
  return g;
}

namespace {

std::vector<double> profile_coefficients(const KnotVector& kv, Profile profile) {
  const int n = kv.num_basis();
  if (profile == Profile::Constant) return std::vector<double>(n, 1.0);
  const int samples = 8 * n + 1;
  std::vector<double> params(samples);
  std::vector<Vec3> values(samples);
  for (int i = 0; i < samples; ++i) {
    const double s = static_cast<double>(i) / (samples - 1);
    params[i] = s;
    values[i] = Vec3(4.0 * s * (1.0 - s), 0.0, 0.0);
  }
  const auto fit = fit_curve(kv, params, values);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = fit[i][0];
  return out;
}

}  // namespace

void add_shape_mode(ParametricGeometry& geo, int parameter, int num_parameters, const Vec3& direction,
                    double amplitude, Profile profile_u, Profile profile_v) {
  if (parameter < 0 || parameter >= num_parameters) throw DomainError("shape mode parameter index out of range");
  if (profile_u == Profile::Bubble || profile_v == Profile::Bubble) {
    if (geo.space.degree() < 2) throw DomainError("bubble profile needs a geometry of degree >= 2");
  }
  const auto cu = profile_coefficients(geo.space.knots(0), profile_u);
  const auto cv = profile_coefficients(geo.space.knots(1), profile_v);
  if (geo.shifts.empty()) geo.shifts.assign(geo.base.size(), Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, num_parameters));
  for (int j = 0; j < geo.space.num_basis(1); ++j)
    for (int i = 0; i < geo.space.num_basis(0); ++i)
      geo.shifts[geo.space.index(i, j)].col(parameter) += amplitude * cu[i] * cv[j] * direction;
}

KnotVector analysis_knots(int degree, int elements, double shift) {
  KnotVector u = KnotVector::uniform(degree, elements);
  if (shift == 0.0) return u;
  std::vector<double> k = u.knots();
  for (std::size_t i = degree + 1; i + degree + 1 < k.size(); ++i) {
    k[i] += shift;
    if (!(k[i] > 0.0 && k[i] < 1.0)) throw DomainError("knot shift moves an interior knot outside (0,1)");
  }
  return KnotVector(degree, std::move(k));
}

Vec3 displacement_at(const Model& model, int patch, const Vec2& xi, const Eigen::VectorXd& u) {
  const auto offsets = model.offsets();
  const Patch& p = model.patches.at(patch);
  const TensorBasis b = eval_tensor_basis(p.analysis, xi, 0);
  Vec3 v = Vec3::Zero();
  for (int k = 0; k < b.count(); ++k)
    for (int c = 0; c < 3; ++c) v[c] += b.N[k] * u[offsets[patch] + 3 * b.index[k] + c];
  return v;
}

}  // namespace klrom
