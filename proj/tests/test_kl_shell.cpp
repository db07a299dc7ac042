#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "klrom/errors.hpp"
#include "klrom/model.hpp"

using namespace klrom;

namespace {

Eigen::SparseMatrix<double> to_sparse(int n, const std::vector<Eigen::Triplet<double>>& t) {
  Eigen::SparseMatrix<double> K(n, n);
  K.setFromTriplets(t.begin(), t.end());
  return K;
}

GeometryMap curved_map() {
  // doubly curved patch: z = 0.3 x^2 - 0.2 y^2 + 0.1 x y, exact in the biquadratic space
  const TensorSpace s(KnotVector::uniform(2, 1), KnotVector::uniform(2, 1));
  std::vector<Vec3> cps;
  const double g[3] = {0.0, 0.5, 1.0};
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) cps.emplace_back(g[i], 1.3 * g[j], 0.0);
  // z control values for the quadratic Bernstein representation
  auto z = [&](int i, int j) {
    const double x2[3] = {0.0, 0.0, 1.0}, xy[3] = {0.0, 0.5, 1.0};
    return 0.3 * x2[i] - 0.2 * 1.69 * x2[j] + 0.1 * 1.3 * xy[i] * xy[j];
  };
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) cps[i + 3 * j].z() = z(i, j);
  return refine_uniform(GeometryMap(s, cps), 1, 1);
}

Patch curved_patch(int p, int n) {
  const GeometryMap g = curved_map();
  Patch patch;
  patch.geometry.space = g.space();
  patch.geometry.base = g.control_points();
  patch.analysis = TensorSpace(KnotVector::uniform(p, n), KnotVector::uniform(p, n));
  return patch;
}

/// Greville-interpolated coefficients of a field on the analysis space of a curved patch.
Eigen::VectorXd interpolate(const Patch& patch, const GeometryMap& map, const std::function<Vec3(const Vec3&)>& f) {
  // Least-squares projection at many points (exact when f o map lies in the space).
  const TensorSpace& s = patch.analysis;
  const int n = s.num_basis();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, 3);
  const int ne = s.knots(0).num_elements();
  for (int ev = 0; ev < ne; ++ev)
    for (int eu = 0; eu < ne; ++eu) {
      const Box box{Vec2(double(eu) / ne, double(ev) / ne), Vec2(double(eu + 1) / ne, double(ev + 1) / ne)};
      const QuadratureRule r = tensor_gauss(box, 2 * s.degree() + 3);
      for (std::size_t q = 0; q < r.size(); ++q) {
        const TensorBasis tb = eval_tensor_basis(s, r.points[q], 0);
        const Vec3 v = f(map.point(r.points[q]));
        for (int a = 0; a < tb.count(); ++a) {
          for (int c = 0; c < tb.count(); ++c) A(tb.index[a], tb.index[c]) += r.weights[q] * tb.N[a] * tb.N[c];
          b.row(tb.index[a]) += r.weights[q] * tb.N[a] * v.transpose();
        }
      }
    }
  const Eigen::MatrixXd x = A.ldlt().solve(b);
  Eigen::VectorXd u(3 * n);
  for (int i = 0; i < n; ++i) u.segment<3>(3 * i) = x.row(i).transpose();
  return u;
}

}  // namespace

TEST(Material, Validation) {
  EXPECT_THROW((Material{-1.0, 0.3, 0.1}).validate(), DomainError);
  EXPECT_THROW((Material{1.0, 0.5, 0.1}).validate(), DomainError);
  EXPECT_THROW((Material{1.0, 0.3, 0.0}).validate(), DomainError);
  EXPECT_NO_THROW((Material{1.0, 0.0, 0.1}).validate());
  EXPECT_NEAR((Material{1e6, 0.3, 0.022}).bending_stiffness(), 1e6 * std::pow(0.022, 3) / (12 * 0.91), 1e-12);
}

TEST(Material, TensorSymmetries) {
  const GeometryMap map = curved_map();
  const SurfaceFrame f = surface_frame(map, Vec2(0.3, 0.7));
  const ElasticityTensor C = material_tensor(f, Material{2.0, 0.27, 0.1});
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int l = 0; l < 2; ++l)
        for (int m = 0; m < 2; ++m) {
          const double c = tensor_at(C, a, b, l, m);
          EXPECT_NEAR(c, tensor_at(C, b, a, l, m), 1e-14);
          EXPECT_NEAR(c, tensor_at(C, a, b, m, l), 1e-14);
          EXPECT_NEAR(c, tensor_at(C, l, m, a, b), 1e-14);
        }
  const Eigen::Matrix3d V = voigt_matrix(C);
  EXPECT_LE((V - V.transpose()).norm(), 1e-14);
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(V).eigenvalues().minCoeff(), 0.0);
}

TEST(Material, PlaneTensorIsIsotropicHooke) {
  // Cartesian frame: C^{1111} = E/(1-nu^2), C^{1122} = nu E/(1-nu^2), C^{1212} = E/(2(1+nu))
  const TensorSpace s(KnotVector::uniform(1, 1), KnotVector::uniform(1, 1));
  const GeometryMap map(s, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)});
  const double E = 3.0, nu = 0.25;
  const ElasticityTensor C = material_tensor(surface_frame(map, Vec2(0.5, 0.5)), Material{E, nu, 1.0});
  EXPECT_NEAR(tensor_at(C, 0, 0, 0, 0), E / (1 - nu * nu), 1e-14);
  EXPECT_NEAR(tensor_at(C, 0, 0, 1, 1), nu * E / (1 - nu * nu), 1e-14);
  EXPECT_NEAR(tensor_at(C, 0, 1, 0, 1), E / (2 * (1 + nu)), 1e-14);
}

TEST(Strain, OperatorsMatchDirectStrains) {
  const GeometryMap map = curved_map();
  const TensorSpace space(KnotVector::uniform(3, 2), KnotVector::uniform(3, 2));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> d;
  Eigen::VectorXd u(3 * space.num_basis());
  for (int i = 0; i < u.size(); ++i) u[i] = d(rng);
  const Vec2 xi(0.31, 0.58);
  const SurfaceFrame f = surface_frame(map, xi);
  const TensorBasis tb = eval_tensor_basis(space, xi, 2);
  const StrainOperators ops = strain_operators(f, tb);
  Eigen::VectorXd local(3 * tb.count());
  for (int k = 0; k < tb.count(); ++k) local.segment<3>(3 * k) = u.segment<3>(3 * tb.index[k]);
  const FieldJet jet = evaluate_field(space, std::span<const double>(u.data(), u.size()), xi);
  const Eigen::Matrix2d a = membrane_strain(f, jet.d), b = bending_strain(f, jet.d, jet.dd);
  const Eigen::Vector3d ea = ops.membrane * local, eb = ops.bending * local;
  EXPECT_NEAR(ea[0], a(0, 0), 1e-10);
  EXPECT_NEAR(ea[1], a(1, 1), 1e-10);
  EXPECT_NEAR(ea[2], 2 * a(0, 1), 1e-10);
  EXPECT_NEAR(eb[0], b(0, 0), 1e-9);
  EXPECT_NEAR(eb[1], b(1, 1), 1e-9);
  EXPECT_NEAR(eb[2], 2 * b(0, 1), 1e-9);
}

TEST(Strain, LinearizedStrainMatchesMetricChange) {
  // alpha_ab(v) = d/de 1/2 (a_ab(x + e v) - a_ab(x)) at e = 0
  const GeometryMap map = curved_map();
  const Vec2 xi(0.4, 0.45);
  const GeometryPoint g = map.eval(xi);
  const std::array<Vec3, 2> dv{Vec3(0.3, -0.1, 0.7), Vec3(-0.2, 0.5, 0.1)};
  const double e = 1e-6;
  auto metric = [&](double s) {
    Eigen::Matrix2d m;
    const Vec3 a1 = g.d1 + s * dv[0], a2 = g.d2 + s * dv[1];
    m << a1.dot(a1), a1.dot(a2), a2.dot(a1), a2.dot(a2);
    return m;
  };
  const Eigen::Matrix2d fd = 0.5 * (metric(e) - metric(-e)) / (2 * e);
  EXPECT_LE((membrane_strain(surface_frame(map, xi), dv) - fd).norm(), 1e-8);
}

class PatchStiffness : public ::testing::Test {
 protected:
  void SetUp() override {
    patch = curved_patch(3, 3);
    map = patch.geometry.at(Eigen::VectorXd::Zero(0));
    const PatchBlock blk = assemble_patch(patch, map, {}, Material{1e3, 0.3, 0.05}, LoadSpec{}, QuadratureSettings{});
    K = to_sparse(patch.num_dofs(), blk.stiffness);
  }
  Patch patch;
  GeometryMap map;
  Eigen::SparseMatrix<double> K;
};

TEST_F(PatchStiffness, Symmetric) {
  const Eigen::SparseMatrix<double> Kt = K.transpose();
  EXPECT_LE((K - Kt).norm(), 1e-12 * K.norm());
}

TEST_F(PatchStiffness, PositiveSemidefiniteWithRigidKernel) {
  const Eigen::MatrixXd D(K);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(D).eigenvalues();
  const double scale = ev.maxCoeff();
  EXPECT_GE(ev.minCoeff(), -1e-10 * scale);
  // exactly six rigid body modes
  int zero = 0;
  for (int i = 0; i < ev.size(); ++i) zero += ev[i] < 1e-9 * scale;
  EXPECT_EQ(zero, 6);
}

TEST_F(PatchStiffness, RigidMotionsHaveZeroEnergy) {
  const double knorm = K.norm();
  for (int c = 0; c < 3; ++c) {
    Vec3 t = Vec3::Zero();
    t[c] = 1.0;
    const Eigen::VectorXd u = interpolate(patch, map, [&](const Vec3&) { return t; });
    EXPECT_LE((K * u).norm(), 1e-10 * knorm * u.norm());
  }
  // the biquadratic map lies in the bicubic analysis space, so rotations are exact too
  const Vec3 w(0.3, -0.5, 0.8);
  const Eigen::VectorXd u = interpolate(patch, map, [&](const Vec3& x) { return Vec3(w.cross(x)); });
  EXPECT_LE(u.dot(K * u), 1e-16 * knorm * u.squaredNorm());
}

TEST(Plate, NavierSimplySupportedUniformLoad) {
  // w_max = alpha q a^4 / D with alpha = (16 / pi^6) sum_{m,n odd} (-1)^{(m+n)/2-1} / (m n (m^2+n^2)^2)
  double alpha = 0.0;
  for (int m = 1; m < 400; m += 2)
    for (int n = 1; n < 400; n += 2)
      alpha += ((((m + n) / 2 - 1) % 2) ? -1.0 : 1.0) / (m * n * std::pow(m * m + n * n, 2));
  alpha *= 16.0 / std::pow(std::numbers::pi, 6);
  EXPECT_NEAR(alpha, 0.00406235, 1e-7);

  Model model;
  model.parameters.names = {"mu"};
  model.parameters.lower = Eigen::VectorXd::Zero(1);
  model.parameters.upper = Eigen::VectorXd::Ones(1);
  model.material = {1e6, 0.3, 0.02};
  Patch p;
  p.geometry = make_plane(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY());
  p.analysis = TensorSpace(analysis_knots(3, 16), analysis_knots(3, 16));
  for (int e = 0; e < 4; ++e) p.dirichlet.push_back({static_cast<Edge>(e), {true, true, true}, false, std::nullopt});
  model.patches.push_back(p);
  model.load.value = Vec3(0, 0, -1.0);
  const FomSolution sol = solve_fom(assemble_fom(model, Eigen::VectorXd::Zero(1)));
  const double w = -displacement_at(model, 0, Vec2(0.5, 0.5), sol.u).z();
  EXPECT_NEAR(w, alpha / model.material.bending_stiffness(), 2e-3 * w);
  // compliance = f . u / 2
  EXPECT_GT(sol.compliance, 0.0);
}

TEST(Plate, ClampedEdgesAreStiffer) {
  auto center = [](bool clamp) {
    Model model;
    model.parameters.names = {"mu"};
    model.parameters.lower = Eigen::VectorXd::Zero(1);
    model.parameters.upper = Eigen::VectorXd::Ones(1);
    model.material = {1e6, 0.3, 0.02};
    Patch p;
    p.geometry = make_plane(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY());
    p.analysis = TensorSpace(analysis_knots(2, 12), analysis_knots(2, 12));
    for (int e = 0; e < 4; ++e) p.dirichlet.push_back({static_cast<Edge>(e), {true, true, true}, clamp, std::nullopt});
    model.patches.push_back(p);
    model.load.value = Vec3(0, 0, -1.0);
    const FomSolution sol = solve_fom(assemble_fom(model, Eigen::VectorXd::Zero(1)));
    return -displacement_at(model, 0, Vec2(0.5, 0.5), sol.u).z() * model.material.bending_stiffness();
  };
  const double ss = center(false), cl = center(true);
  EXPECT_LT(cl, ss);
  // clamped plate: alpha = 0.00126
  EXPECT_NEAR(cl, 0.00126, 0.05 * 0.00126);
}

TEST(FomSystem, DiagonalScalingAndIdentityRows) {
  Model model;
  model.parameters.names = {"mu"};
  model.parameters.lower = Eigen::VectorXd::Zero(1);
  model.parameters.upper = Eigen::VectorXd::Ones(1);
  model.material = {1e6, 0.3, 0.02};
  Patch p;
  p.geometry = make_plane(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY());
  p.analysis = TensorSpace(analysis_knots(2, 4), analysis_knots(2, 4));
  p.dirichlet.push_back({Edge::South, {true, true, true}, true, std::nullopt});
  model.patches.push_back(p);
  model.load.value = Vec3(0, 0, -1.0);
  const FomSystem sys = assemble_fom(model, Eigen::VectorXd::Zero(1));
  int fixed = 0;
  for (int i = 0; i < sys.size(); ++i) {
    if (!sys.eliminated(i)) continue;
    ++fixed;
    EXPECT_EQ(sys.stiffness.coeff(i, i), 1.0);
    EXPECT_EQ(sys.load[i], 0.0);
  }
  EXPECT_EQ(fixed, 2 * 6 * 3);
  const FomSolution sol = solve_fom(sys);
  for (int i = 0; i < sys.size(); ++i)
    if (sys.eliminated(i)) EXPECT_EQ(sol.u[i], 0.0);
  EXPECT_NEAR(sol.compliance, 0.5 * sys.load.dot(sol.u), 1e-12 * std::abs(sol.compliance));
}
