#include "klrom/multipatch.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "klrom/errors.hpp"

namespace klrom {

namespace {

std::string fmt_point(const Vec3& x) {
  std::ostringstream os;
  os.precision(10);
  os << "(" << x[0] << ", " << x[1] << ", " << x[2] << ")";
  return os.str();
}

Vec2 clamp_unit(const Vec2& xi) { return xi.cwiseMax(0.0).cwiseMin(1.0); }

}  // namespace

Vec2 invert_map(const GeometryMap& map, const Vec3& x, const Vec2* guess) {
  const double scale = std::max(1.0, map.scale());
  Vec2 xi;
  double best = std::numeric_limits<double>::infinity();
  if (guess) {
    xi = clamp_unit(*guess);
    best = (map.point(xi) - x).norm();
  }
  if (!guess || best > 1e-3 * scale) {
    constexpr int kGrid = 16;
    for (int j = 0; j <= kGrid; ++j)
      for (int i = 0; i <= kGrid; ++i) {
        const Vec2 c(static_cast<double>(i) / kGrid, static_cast<double>(j) / kGrid);
        const double d = (map.point(c) - x).norm();
        if (d < best) {
          best = d;
          xi = c;
        }
      }
  }

  bool converged = false;
  for (int it = 0; it < 50 && !converged; ++it) {
    const GeometryPoint g = map.eval(xi, 1);
    const Vec3 r = x - g.x;
    const double rn = r.norm();
    if (rn <= 1e-12 * scale) {
      converged = true;
      break;
    }
    Eigen::Matrix<double, 3, 2> J;
    J.col(0) = g.d1;
    J.col(1) = g.d2;
    const Vec2 step = (J.transpose() * J).ldlt().solve(J.transpose() * r);
    double lambda = 1.0;
    Vec2 next = clamp_unit(xi + step);
    double rnext = (x - map.point(next)).norm();
    while (rnext > rn && lambda > 1e-8) {
      lambda *= 0.5;
      next = clamp_unit(xi + lambda * step);
      rnext = (x - map.point(next)).norm();
    }
    const double moved = (next - xi).norm();
    if (rnext <= rn) xi = next;
    if (moved <= 1e-12) converged = true;
  }
  if (!converged)
    throw InterfacePairingError("map inversion did not converge for point " + fmt_point(x));
  const double miss = (map.point(xi) - x).norm();
  if (miss > 1e-6 * scale)
    throw GeometryConsistencyError("interface point " + fmt_point(x) + " is " + std::to_string(miss) +
                                   " away from the adjacent patch");
  return xi;
}

namespace {

using CurveFn = std::function<Vec2(double)>;

/// Parameter values in (0,1) where a parametric curve crosses interior knot lines of `space`.
std::vector<double> knot_crossings(const CurveFn& curve, const TensorSpace& space) {
  constexpr int kSamples = 256;
  std::vector<Vec2> pts(kSamples + 1);
  for (int k = 0; k <= kSamples; ++k) pts[k] = curve(static_cast<double>(k) / kSamples);
  std::vector<double> out;
  for (int d = 0; d < 2; ++d) {
    const auto bp = space.knots(d).breakpoints();
    for (std::size_t b = 1; b + 1 < bp.size(); ++b) {
      const double kappa = bp[b];
      for (int k = 0; k < kSamples; ++k) {
        const double fa = pts[k][d] - kappa, fb = pts[k + 1][d] - kappa;
        if ((fa < 0.0) == (fb < 0.0)) continue;
        double lo = static_cast<double>(k) / kSamples, hi = static_cast<double>(k + 1) / kSamples;
        const bool lo_neg = fa < 0.0;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          if ((curve(mid)[d] - kappa < 0.0) == lo_neg)
            lo = mid;
          else
            hi = mid;
        }
        const double s = 0.5 * (lo + hi);
        if (s > 1e-12 && s < 1.0 - 1e-12) out.push_back(s);
      }
    }
  }
  return out;
}

std::vector<double> merge_sorted(std::vector<double> v) {
  v.push_back(0.0);
  v.push_back(1.0);
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v)
    if (out.empty() || x - out.back() > 1e-12) out.push_back(x);
  out.back() = 1.0;
  return out;
}

struct SideCurve {
  CurveFn point;
  CurveFn tangent;
};

SideCurve side_curve(const InterfaceSide& side, std::span<const std::vector<ResolvedTrim>> trims) {
  if (side.edge) {
    switch (*side.edge) {
      case Edge::South: return {[](double s) { return Vec2(s, 0.0); }, [](double) { return Vec2(1.0, 0.0); }};
      case Edge::North: return {[](double s) { return Vec2(s, 1.0); }, [](double) { return Vec2(1.0, 0.0); }};
      case Edge::West: return {[](double s) { return Vec2(0.0, s); }, [](double) { return Vec2(0.0, 1.0); }};
      case Edge::East: return {[](double s) { return Vec2(1.0, s); }, [](double) { return Vec2(0.0, 1.0); }};
    }
  }
  const auto& list = trims[side.patch];
  if (side.trim < 0 || side.trim >= static_cast<int>(list.size()))
    throw InterfacePairingError("interface references missing trim " + std::to_string(side.trim) + " of patch " +
                                std::to_string(side.patch));
  const ResolvedTrim* t = &list[side.trim];
  return {[t](double s) { return clamp_unit(t->point(s)); }, [t](double s) { return t->tangent(s); }};
}

}  // namespace

Interface build_interface(const InterfaceSpec& spec, std::span<const Patch> patches,
                          std::span<const GeometryMap> maps, std::span<const std::vector<ResolvedTrim>> trims,
                          int order) {
  const int np = static_cast<int>(patches.size());
  for (const auto* s : {&spec.a, &spec.b})
    if (s->patch < 0 || s->patch >= np)
      throw InterfacePairingError("interface references unknown patch index " + std::to_string(s->patch));
  if (spec.a.patch == spec.b.patch) throw InterfacePairingError("interface joins a patch to itself");
  for (const auto* s : {&spec.a, &spec.b}) {
    if (!s->edge && (s->trim < 0 || s->trim >= static_cast<int>(trims[s->patch].size())))
      throw InterfacePairingError("interface references missing trim " + std::to_string(s->trim) + " of patch " +
                                  std::to_string(s->patch));
  }

  // Active side: an untrimmed edge if one exists, otherwise the lower patch index.
  const InterfaceSide* act = &spec.a;
  const InterfaceSide* oth = &spec.b;
  const bool a_edge = spec.a.edge.has_value(), b_edge = spec.b.edge.has_value();
  if ((b_edge && !a_edge) || (a_edge == b_edge && spec.b.patch < spec.a.patch)) std::swap(act, oth);

  Interface iface;
  iface.patch = {act->patch, oth->patch};
  iface.both_trimmed = !a_edge && !b_edge;

  const Patch& pk = patches[act->patch];
  const Patch& pl = patches[oth->patch];
  const GeometryMap& Fk = maps[act->patch];
  const GeometryMap& Fl = maps[oth->patch];
  const int p = pk.analysis.degree();
  if (p < 2) throw ProjectionSpaceError("coupling needs degree >= 2 for a degree p-2 projection space");
  const int q = order > 0 ? order : p + 3;

  const SideCurve curve = side_curve(*act, trims);

  // Pullback onto the other side with warm starts along the curve.
  std::map<double, Vec2> cache;
  auto pullback = [&](double s) -> Vec2 {
    auto it = cache.lower_bound(s);
    const Vec2* guess = nullptr;
    if (it != cache.end()) {
      if (it->first == s) return it->second;
      guess = &it->second;
    } else if (!cache.empty()) {
      guess = &std::prev(it)->second;
    }
    const Vec2 xi = invert_map(Fl, Fk.point(curve.point(s)), guess);
    cache.emplace(s, xi);
    return xi;
  };

  // Projection space: active face knots for edges. Along trim curves the knot line crossings move
  // with the parameters and spawn sliver spans, so a fixed number of uniform spans is used instead.
  std::vector<double> proj_breaks;
  if (act->edge) {
    const int dir = (*act->edge == Edge::South || *act->edge == Edge::North) ? 0 : 1;
    proj_breaks = pk.analysis.knots(dir).breakpoints();
  } else {
    const int n = static_cast<int>(std::max(pk.analysis.knots(0).breakpoints().size(),
                                            pk.analysis.knots(1).breakpoints().size())) - 1;
    for (int i = 0; i <= n; ++i) proj_breaks.push_back(static_cast<double>(i) / n);
  }
  {
    const int pp = p - 2;
    std::vector<double> k(pp + 1, 0.0);
    for (std::size_t b = 1; b + 1 < proj_breaks.size(); ++b) k.push_back(proj_breaks[b]);
    k.insert(k.end(), pp + 1, 1.0);
    iface.projection = KnotVector(pp, std::move(k));
  }

  std::vector<double> merged(proj_breaks.begin(), proj_breaks.end());
  const auto ck = knot_crossings(curve.point, pk.analysis);
  const auto cl = knot_crossings(pullback, pl.analysis);
  merged.insert(merged.end(), ck.begin(), ck.end());
  merged.insert(merged.end(), cl.begin(), cl.end());
  iface.partition = merge_sorted(std::move(merged));

  const auto& [gx, gw] = gauss_legendre(q);
  for (std::size_t seg = 0; seg + 1 < iface.partition.size(); ++seg) {
    const double s0 = iface.partition[seg], len = iface.partition[seg + 1] - s0;
    for (std::size_t g = 0; g < gx.size(); ++g) {
      InterfacePoint ip;
      ip.s = s0 + len * gx[g];
      ip.xi[0] = curve.point(ip.s);
      const GeometryPoint gp = Fk.eval(ip.xi[0], 1);
      const Vec2 ct = curve.tangent(ip.s);
      const Vec3 dx = gp.d1 * ct[0] + gp.d2 * ct[1];
      const double speed = dx.norm();
      if (!(speed > 0.0)) throw InterfacePairingError("interface curve has zero speed at s=" + std::to_string(ip.s));
      ip.x = gp.x;
      ip.tangent = dx / speed;
      ip.weight = gw[g] * len * speed;
      ip.xi[1] = pullback(ip.s);
      iface.length += ip.weight;
      iface.points.push_back(ip);
    }
  }
  iface.h = iface.length / static_cast<double>(proj_breaks.size() - 1);
  return iface;
}

PenaltyCoefficients penalty_coefficients(double length, double h, const Material& mat, int degree) {
  const double cexp = degree - 1;
  const double scale = std::pow(length, cexp - 1.0) / (1.0 - mat.nu * mat.nu);
  const double t = mat.thickness;
  return {scale * mat.E * t / std::pow(h, cexp), scale * mat.E * t * t * t / std::pow(12.0 * h, cexp)};
}

std::vector<Eigen::Triplet<double>> assemble_coupling(const Interface& iface, std::span<const Patch> patches,
                                                      std::span<const GeometryMap> maps,
                                                      std::span<const int> offsets, const Material& mat) {
  const int p = patches[iface.patch[0]].analysis.degree();
  const int nproj = iface.projection.num_basis();

  // Compact numbering of the DOFs touched by the interface.
  std::map<int, int> local;
  struct Eval {
    std::array<TensorBasis, 2> basis;
    std::array<Eigen::RowVectorXd, 2> rot;
    BasisDerivatives psi;
  };
  std::vector<Eval> evals(iface.points.size());
  for (std::size_t g = 0; g < iface.points.size(); ++g) {
    const auto& ip = iface.points[g];
    Eval& ev = evals[g];
    ev.psi = eval_basis(iface.projection, ip.s, 0);
    // The in-surface normal to the curve is taken from the active side and used for both.
    const SurfaceFrame fk = surface_frame(maps[iface.patch[0]], ip.xi[0]);
    const SurfaceFrame fl = surface_frame(maps[iface.patch[1]], ip.xi[1]);
    const Vec3 n = ip.tangent.cross(fk.a3).normalized();
    ev.basis[0] = eval_tensor_basis(patches[iface.patch[0]].analysis, ip.xi[0], 1);
    ev.basis[1] = eval_tensor_basis(patches[iface.patch[1]].analysis, ip.xi[1], 1);
    ev.rot[0] = rotation_operator(fk, ev.basis[0], n);
    ev.rot[1] = rotation_operator(fl, ev.basis[1], n);
    for (int side = 0; side < 2; ++side)
      for (int idx : ev.basis[side].index)
        for (int c = 0; c < 3; ++c) local.emplace(offsets[iface.patch[side]] + 3 * idx + c, 0);
  }
  std::vector<int> global;
  global.reserve(local.size());
  for (auto& [g, l] : local) {
    l = static_cast<int>(global.size());
    global.push_back(g);
  }
  const int nl = static_cast<int>(global.size());

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nproj, nproj);
  std::array<Eigen::MatrixXd, 3> Cu;
  for (auto& c : Cu) c = Eigen::MatrixXd::Zero(nproj, nl);
  Eigen::MatrixXd Ct = Eigen::MatrixXd::Zero(nproj, nl);

  for (std::size_t g = 0; g < iface.points.size(); ++g) {
    const double w = iface.points[g].weight;
    const Eval& ev = evals[g];
    for (int a = 0; a < ev.psi.count(); ++a)
      for (int b = 0; b < ev.psi.count(); ++b)
        M(ev.psi.first + a, ev.psi.first + b) += w * ev.psi.values[0][a] * ev.psi.values[0][b];
    for (int side = 0; side < 2; ++side) {
      const double sign = side == 0 ? 1.0 : -1.0;
      const auto& B = ev.basis[side];
      const int off = offsets[iface.patch[side]];
      for (int k = 0; k < B.count(); ++k)
        for (int c = 0; c < 3; ++c) {
          const int col = local.at(off + 3 * B.index[k] + c);
          for (int a = 0; a < ev.psi.count(); ++a) {
            const double wp = sign * w * ev.psi.values[0][a];
            Cu[c](ev.psi.first + a, col) += wp * B.N[k];
            Ct(ev.psi.first + a, col) += wp * ev.rot[side][3 * k + c];
          }
        }
    }
  }

  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success || llt.matrixLLT().diagonal().minCoeff() <= 1e-14 * std::sqrt(M.diagonal().maxCoeff()))
    throw ProjectionSpaceError("interface mass matrix is singular (degenerate interface)");
  const PenaltyCoefficients pc = penalty_coefficients(iface.length, iface.h, mat, p);

  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(nl, nl);
  for (const auto& C : Cu) {
    const Eigen::MatrixXd L = llt.matrixL().solve(C);
    block.noalias() += pc.displacement * L.transpose() * L;
  }
  {
    const Eigen::MatrixXd L = llt.matrixL().solve(Ct);
    block.noalias() += pc.rotation * L.transpose() * L;
  }
  std::vector<Eigen::Triplet<double>> out;
  out.reserve(static_cast<std::size_t>(nl) * nl);
  for (int j = 0; j < nl; ++j)
    for (int i = 0; i < nl; ++i)
      if (block(i, j) != 0.0) out.emplace_back(global[i], global[j], block(i, j));
  return out;
}

}  // namespace klrom
