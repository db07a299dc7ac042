// Randomized property checks. The acceptance binary runs this suite for its last criterion.
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>
#include <unistd.h>

#include "klrom/artifact_io.hpp"
#include "klrom/config.hpp"
#include "klrom/deim.hpp"
#include "klrom/kmeans.hpp"
#include "klrom/optimize.hpp"
#include "klrom/pod.hpp"
#include "klrom/rbf.hpp"
#include "klrom/rom.hpp"

using namespace klrom;
namespace fs = std::filesystem;

namespace {

const std::string kData = KLROM_TEST_DATA;

KnotVector random_knots(std::mt19937_64& rng, int p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> count(0, 6);
  std::vector<double> inner;
  for (int i = count(rng); i > 0; --i) inner.push_back(u(rng));
  std::sort(inner.begin(), inner.end());
  std::vector<double> k(p + 1, 0.0);
  k.insert(k.end(), inner.begin(), inner.end());
  k.insert(k.end(), p + 1, 1.0);
  return KnotVector(p, k);
}

GeometryMap random_surface(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> deg(2, 4);
  const int p = deg(rng);
  const TensorSpace s(random_knots(rng, p), random_knots(rng, p));
  std::normal_distribution<double> d(0.0, 0.05);
  std::vector<Vec3> cps;
  for (int j = 0; j < s.num_basis(1); ++j)
    for (int i = 0; i < s.num_basis(0); ++i) {
      const double x = double(i) / (s.num_basis(0) - 1), y = double(j) / (s.num_basis(1) - 1);
      cps.emplace_back(x + d(rng), y + d(rng), 0.4 * x * y - 0.2 * y * y + d(rng));
    }
  return GeometryMap(s, cps);
}

struct Trained {
  ModelConfig cfg;
  Model model;
  SnapshotSet snaps;
  RomArtifact art;
};

const Trained& small_roof() {
  static const Trained t = [] {
    Trained r{load_config(kData + "/small_roof.json"), {}, {}, {}};
    r.model = build_model(r.cfg);
    r.art = train(r.model, r.cfg.rom, &r.snaps);
    return r;
  }();
  return t;
}

}  // namespace

TEST(Property, PartitionOfUnity) {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const KnotVector kv = random_knots(rng, 1 + trial % 5);
    const double xi = trial % 10 == 0 ? 1.0 : u(rng);
    const auto b = eval_basis(kv, xi, 2);
    double s0 = 0, s1 = 0, s2 = 0;
    for (int j = 0; j < b.count(); ++j) {
      EXPECT_GE(b.values[0][j], -1e-15);
      s0 += b.values[0][j];
      s1 += b.values[1][j];
      s2 += b.values[2][j];
    }
    EXPECT_NEAR(s0, 1.0, 1e-14);
    EXPECT_NEAR(s1, 0.0, 1e-9 * (1 + std::abs(b.values[1][0])));
    EXPECT_NEAR(s2, 0.0, 1e-7 * (1 + std::abs(b.values[2][0])));
  }
}

TEST(Property, FrameOrthogonality) {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const GeometryMap map = random_surface(rng);
    for (int k = 0; k < 10; ++k) {
      const SurfaceFrame f = surface_frame(map, Vec2(u(rng), u(rng)));
      for (int a = 0; a < 2; ++a) {
        EXPECT_NEAR(f.a3.dot(f.covariant(a)), 0.0, 1e-12);
        for (int b = 0; b < 2; ++b) EXPECT_NEAR(f.covariant(a).dot(f.contravariant(b)), a == b, 1e-11);
      }
      EXPECT_NEAR(f.a3.norm(), 1.0, 1e-13);
    }
  }
}

TEST(Property, ElasticityTensorSymmetries) {
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const GeometryMap map = random_surface(rng);
    const Material mat{0.5 + u(rng), 0.45 * u(rng), 0.01 + u(rng)};
    const ElasticityTensor C = material_tensor(surface_frame(map, Vec2(u(rng), u(rng))), mat);
    double scale = 0;
    for (double c : C) scale = std::max(scale, std::abs(c));
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int l = 0; l < 2; ++l)
          for (int m = 0; m < 2; ++m) {
            const double c = tensor_at(C, a, b, l, m);
            EXPECT_NEAR(c, tensor_at(C, b, a, l, m), 1e-13 * scale);
            EXPECT_NEAR(c, tensor_at(C, a, b, m, l), 1e-13 * scale);
            EXPECT_NEAR(c, tensor_at(C, l, m, a, b), 1e-13 * scale);
          }
  }
}

TEST(Property, StiffnessSymmetricPsdWithTranslationKernel) {
  std::mt19937_64 rng(104);
  for (int trial = 0; trial < 4; ++trial) {
    const GeometryMap map = random_surface(rng);
    Patch patch;
    patch.geometry.space = map.space();
    patch.geometry.base = map.control_points();
    patch.analysis = TensorSpace(KnotVector::uniform(2 + trial % 2, 3), KnotVector::uniform(2 + trial % 2, 4));
    const PatchBlock blk = assemble_patch(patch, map, {}, Material{1e3, 0.3, 0.05}, LoadSpec{}, QuadratureSettings{});
    Eigen::SparseMatrix<double> K(patch.num_dofs(), patch.num_dofs());
    K.setFromTriplets(blk.stiffness.begin(), blk.stiffness.end());
    const Eigen::MatrixXd D(K);
    const double scale = D.norm();
    EXPECT_LE((D - D.transpose()).norm(), 1e-12 * scale);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(D).eigenvalues().minCoeff(), -1e-10 * scale);
    for (int c = 0; c < 3; ++c) {
      Eigen::VectorXd t = Eigen::VectorXd::Zero(patch.num_dofs());
      for (int i = c; i < t.size(); i += 3) t[i] = 1.0;
      EXPECT_LE((K * t).norm(), 1e-10 * scale * t.norm());
    }
  }
}

TEST(Property, CouplingZeroEnergyOnContinuousFields) {
  // two patches of a random quadratic surface split at u = 0.5, non-matching meshes
  std::mt19937_64 rng(105);
  std::normal_distribution<double> d(0.0, 0.2);
  for (int trial = 0; trial < 3; ++trial) {
    const double c1 = d(rng), c2 = d(rng), c3 = d(rng);
    Model m;
    m.parameters.names = {"mu"};
    m.parameters.lower = Eigen::VectorXd::Zero(1);
    m.parameters.upper = Eigen::VectorXd::Ones(1);
    m.material = {1e4, 0.3, 0.05};
    for (int k = 0; k < 2; ++k) {
      Patch patch;
      patch.geometry.space = TensorSpace(KnotVector::uniform(2, 1), KnotVector::uniform(2, 1));
      for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i) {
          const double x = 0.5 * k + 0.25 * i, y = 0.5 * j;
          // quadratic surface via Bernstein control values of z = c1 x^2 + c2 y^2 + c3 x y
          const double x0 = 0.5 * k, x1 = 0.5 * k + 0.5;
          const double bx[3] = {x0 * x0, x0 * x1, x1 * x1}, by[3] = {0.0, 0.0, 1.0};
          const double xl[3] = {x0, 0.5 * (x0 + x1), x1}, yl[3] = {0.0, 0.5, 1.0};
          patch.geometry.base.emplace_back(x, y, c1 * bx[i] + c2 * by[j] + c3 * xl[i] * yl[j]);
        }
      patch.analysis = TensorSpace(KnotVector::uniform(2, 3 + k), KnotVector::uniform(2, 4 + 2 * k));
      m.patches.push_back(patch);
    }
    m.interfaces.push_back({InterfaceSide{0, Edge::East, -1}, InterfaceSide{1, Edge::West, -1}});
    const ParamVector mu = Eigen::VectorXd::Zero(1);
    const Discretization disc = discretize(m, mu);
    const auto off = m.offsets();
    const Interface iface = build_interface(m.interfaces[0], m.patches, disc.maps, disc.trims);
    const auto trip = assemble_coupling(iface, m.patches, disc.maps, off, m.material);
    Eigen::SparseMatrix<double> K(m.num_dofs(), m.num_dofs());
    K.setFromTriplets(trip.begin(), trip.end());
    // a random rigid translation
    const Vec3 t(d(rng), d(rng), d(rng));
    Eigen::VectorXd u = Eigen::VectorXd::Zero(m.num_dofs());
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < m.patches[k].analysis.num_basis(); ++i) u.segment<3>(off[k] + 3 * i) = t;
    EXPECT_LE(std::abs(u.dot(K * u)), 1e-10 * K.norm() * u.squaredNorm());
  }
}

TEST(Property, CutQuadratureCircleArea) {
  const std::vector<ResolvedTrim> trims{ResolvedTrim::circle(Vec2(0.5, 0.5), 0.2, true)};
  for (int n : {4, 8, 16}) {
    const TensorSpace s(KnotVector::uniform(2, n), KnotVector::uniform(2, n));
    const ElementClassification cls = classify_elements(s, trims);
    double area = 0.0;
    for (int e = 0; e < cls.num_elements(); ++e)
      if (cls.tags[e] != ElementTag::Exterior) area += cut_quadrature(cls.box(e), trims, 4, 6).total_weight();
    EXPECT_NEAR(area, 0.8743362, 1e-5) << n;
  }
}

TEST(Property, PodOrthonormalityAndTail) {
  const Trained& t = small_roof();
  const Eigen::SparseMatrix<double>& X = t.art.gram;
  const PodResult r = pod(t.snaps.solutions, &X, 1e-4);
  const int N = static_cast<int>(r.basis.cols());
  ASSERT_GT(N, 0);
  const Eigen::MatrixXd G = r.basis.transpose() * (X * r.basis);
  EXPECT_LE((G - Eigen::MatrixXd::Identity(N, N)).norm(), 1e-10);
  // sum_j |s_j - P s_j|_X^2 = sum_{i > N} sigma_i^2
  const Eigen::MatrixXd& S = t.snaps.solutions;
  const Eigen::MatrixXd E = S - r.basis * (r.basis.transpose() * (X * S));
  const double lhs = (E.transpose() * (X * E)).trace();
  const double rhs = r.singular_values.tail(r.singular_values.size() - N).squaredNorm();
  EXPECT_NEAR(lhs, rhs, 1e-8 * r.singular_values.squaredNorm());
  EXPECT_LE(rhs, 1e-8 * r.singular_values.squaredNorm());
}

TEST(Property, DeimMagicPointExactness) {
  const Trained& t = small_roof();
  for (const ClusterRom& c : t.art.locals) {
    for (int j : c.samples) {
      const Eigen::VectorXd f = t.snaps.loads.col(j);
      const Eigen::VectorXd th = c.load.theta_from_snapshot(f);
      const Eigen::VectorXd approx = c.load.modes * th;
      for (int i : c.load.magic) EXPECT_LE(std::abs(approx[i] - f[i]), 1e-10 * f.cwiseAbs().maxCoeff());
    }
  }
}

TEST(Property, RbfCenterExactnessAndGradient) {
  std::mt19937_64 rng(106);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ParameterBox b;
  b.lower = Eigen::Vector2d(0.0, -2.0);
  b.upper = Eigen::Vector2d(3.0, 2.0);
  const Eigen::MatrixXd c = latin_hypercube(b, 25, 7);
  Eigen::MatrixXd v(25, 2);
  for (int j = 0; j < 25; ++j) {
    v(j, 0) = std::sin(c(0, j)) * std::cos(c(1, j));
    v(j, 1) = c(0, j) * c(0, j) - c(1, j);
  }
  const RbfInterpolant r = RbfInterpolant::fit(c, v, b.lower, b.upper);
  for (int j = 0; j < 25; ++j)
    EXPECT_LE((r.eval(c.col(j)) - v.row(j).transpose()).norm(), 1e-10 * v.norm());
  for (int k = 0; k < 20; ++k) {
    const Eigen::Vector2d mu(3 * u(rng), -2 + 4 * u(rng));
    const Eigen::MatrixXd g = r.grad(mu);
    for (int m = 0; m < 2; ++m) {
      Eigen::Vector2d h = Eigen::Vector2d::Zero();
      h[m] = 1e-6 * (b.upper[m] - b.lower[m]);
      const Eigen::VectorXd fd = (r.eval(mu + h) - r.eval(mu - h)) / (2 * h[m]);
      for (int o = 0; o < 2; ++o) EXPECT_NEAR(g(o, m), fd[o], 1e-5 * std::max(1.0, std::abs(fd[o])));
    }
  }
}

TEST(Property, AdjointIdentity) {
  // adjoint of J = f.u / 2 with K u = f solves K^T p = f / 2, hence p = u / 2
  const Trained& t = small_roof();
  const Eigen::MatrixXd tests = uniform_samples(t.art.parameters, 6, 31);
  for (int i = 0; i < tests.cols(); ++i) {
    const RomSolution s = rom_solve(t.art, tests.col(i), false);
    const Eigen::VectorXd p = s.stiffness.transpose().fullPivLu().solve(0.5 * s.load);
    EXPECT_LE((p - 0.5 * s.coeffs).norm(), 1e-10 * s.coeffs.norm());
  }
}

TEST(Property, ExactGradientMatchesFiniteDifference) {
  const Trained& t = small_roof();
  const ParameterBox& b = t.art.parameters;
  const Eigen::MatrixXd tests = uniform_samples(b, 8, 41);
  for (int i = 0; i < tests.cols(); ++i) {
    const ParamVector mu = tests.col(i);
    Eigen::VectorXd g;
    rom_compliance(t.art, mu, &g);
    // stay inside one cluster: skip points too close to a cluster switch
    const double h = 1e-5 * b.range()[0];
    ParamVector lo = mu, hi = mu;
    lo[0] -= h;
    hi[0] += h;
    if (t.art.clusters.nearest(lo) != t.art.clusters.nearest(hi)) continue;
    const Eigen::VectorXd fd =
        central_difference([&](const ParamVector& x) { return rom_compliance(t.art, x); }, mu, b, 1e-5);
    EXPECT_NEAR(g[0], fd[0], 1e-4 * std::max(std::abs(fd[0]), 1e-8 * rom_compliance(t.art, mu)));
  }
}

TEST(Property, ArtifactRoundTripBitExact) {
  const Trained& t = small_roof();
  const fs::path dir = fs::temp_directory_path() / ("klrom_prop_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  save_artifact(t.art, dir);
  const RomArtifact back = load_artifact(dir);
  fs::remove_all(dir);
  EXPECT_EQ(back.gram.nonZeros(), t.art.gram.nonZeros());
  EXPECT_EQ(Eigen::MatrixXd(back.gram), Eigen::MatrixXd(t.art.gram));
  for (std::size_t k = 0; k < t.art.locals.size(); ++k) {
    const ClusterRom &a = t.art.locals[k], &b = back.locals[k];
    EXPECT_EQ(a.basis, b.basis);
    EXPECT_EQ(a.reduced_f, b.reduced_f);
    for (std::size_t q = 0; q < a.reduced_a.size(); ++q) EXPECT_EQ(a.reduced_a[q], b.reduced_a[q]);
    EXPECT_EQ(a.load.modes, b.load.modes);
    EXPECT_EQ(a.theta_f.tail(), b.theta_f.tail());
  }
  const ParamVector mu = t.art.parameters.center();
  EXPECT_EQ(rom_solve(t.art, mu).full, rom_solve(back, mu).full);
}

TEST(Property, SeededDeterminism) {
  const Trained& t = small_roof();
  const RomArtifact again = train(t.model, t.cfg.rom);
  EXPECT_EQ(again.training, t.art.training);
  EXPECT_EQ(again.clusters.assignment, t.art.clusters.assignment);
  for (std::size_t k = 0; k < again.locals.size(); ++k) {
    EXPECT_EQ(again.locals[k].basis, t.art.locals[k].basis);
    EXPECT_EQ(again.locals[k].stiffness.magic, t.art.locals[k].stiffness.magic);
  }
  EXPECT_EQ(kmeans(t.art.training, 2, 5).assignment, kmeans(t.art.training, 2, 5).assignment);
}
