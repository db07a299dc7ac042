#include "klrom/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "klrom/errors.hpp"

namespace klrom {

KnotVector::KnotVector(int degree, std::vector<double> knots) : degree_(degree), knots_(std::move(knots)) {
  // Degree 0 is only used for interface projection spaces.
  if (degree_ < 0 || degree_ > kMaxDegree)
    throw DomainError("knot vector degree " + std::to_string(degree_) + " outside [0, " +
                      std::to_string(kMaxDegree) + "]");
  const int m = static_cast<int>(knots_.size());
  if (m < 2 * (degree_ + 1))
    throw DomainError("knot vector too short for degree " + std::to_string(degree_));
  for (int i = 0; i + 1 < m; ++i) {
    if (!(knots_[i] <= knots_[i + 1])) throw DomainError("knot vector is not non-decreasing");
  }
  if (knots_.front() != 0.0 || knots_.back() != 1.0)
    throw DomainError("knot vector must span [0,1]");
  for (int i = 0; i <= degree_; ++i) {
    if (knots_[i] != 0.0 || knots_[m - 1 - i] != 1.0)
      throw DomainError("knot vector is not open: end multiplicity must be degree+1 = " +
                        std::to_string(degree_ + 1));
  }
  if (knots_[degree_ + 1] == 0.0 || knots_[m - degree_ - 2] == 1.0)
    throw DomainError("knot vector end multiplicity exceeds degree+1");
  // interior multiplicity
  int run = 1;
  for (int i = degree_ + 2; i < m - degree_ - 1; ++i) {
    run = (knots_[i] == knots_[i - 1]) ? run + 1 : 1;
    if (run > std::max(degree_, 1)) throw DomainError("interior knot multiplicity exceeds the degree");
  }
}

KnotVector KnotVector::uniform(int degree, int num_elements) {
  if (num_elements < 1) throw DomainError("uniform knot vector needs at least one element");
  std::vector<double> k(degree + 1, 0.0);
  for (int e = 1; e < num_elements; ++e) k.push_back(static_cast<double>(e) / num_elements);
  k.insert(k.end(), degree + 1, 1.0);
  return KnotVector(degree, std::move(k));
}

int KnotVector::find_span(double xi) const {
  const int n = num_basis();
  if (xi >= knots_[n]) return n - 1;
  if (xi <= knots_[degree_]) return degree_;
  auto it = std::upper_bound(knots_.begin(), knots_.end(), xi);
  int s = static_cast<int>(it - knots_.begin()) - 1;
  return std::clamp(s, degree_, n - 1);
}

std::vector<double> KnotVector::breakpoints() const {
  std::vector<double> b;
  for (double k : knots_)
    if (b.empty() || k != b.back()) b.push_back(k);
  return b;
}

std::pair<int, int> KnotVector::support_range(double a, double b) const {
  int first = -1, last = -2;
  for (int i = 0; i < num_basis(); ++i) {
    if (knots_[i] < b && knots_[i + degree_ + 1] > a) {
      if (first < 0) first = i;
      last = i;
    }
  }
  return {first, last};
}

BasisDerivatives eval_basis(const KnotVector& kv, double xi, int deriv_order) {
  if (!(xi >= 0.0 && xi <= 1.0))
    throw DomainError("basis evaluation point " + std::to_string(xi) + " outside [0,1]");
  if (deriv_order < 0 || deriv_order > 2) throw DomainError("derivative order must be in 0..2");

  const int p = kv.degree();
  const auto& U = kv.knots();
  const int s = kv.find_span(xi);

  BasisDerivatives out;
  out.first = s - p;
  out.degree = p;
  out.order = deriv_order;

  // Triangular table of basis values and knot differences.
  std::array<std::array<double, kMaxDegree + 1>, kMaxDegree + 1> ndu{};
  std::array<double, kMaxDegree + 1> left{}, right{};
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = xi - U[s + 1 - j];
    right[j] = U[s + j] - xi;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  for (int j = 0; j <= p; ++j) out.values[0][j] = ndu[j][p];

  const int n = std::min(deriv_order, p);
  std::array<std::array<double, kMaxDegree + 1>, 2> a{};
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= n; ++k) {
      double d = 0.0;
      const int rk = r - k, pk = p - k;
      if (r >= k) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = (rk >= -1) ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      out.values[k][r] = d;
      std::swap(s1, s2);
    }
  }
  int factor = p;
  for (int k = 1; k <= n; ++k) {
    for (int j = 0; j <= p; ++j) out.values[k][j] *= factor;
    factor *= (p - k);
  }
  return out;
}

TensorSpace::TensorSpace(KnotVector u, KnotVector v) : u_(std::move(u)), v_(std::move(v)) {
  if (u_.degree() != v_.degree())
    throw DomainError("tensor space requires the same degree in both directions");
}

GeometryMap::GeometryMap(TensorSpace space, std::vector<Vec3> control_points)
    : space_(std::move(space)), control_points_(std::move(control_points)) {
  if (static_cast<int>(control_points_.size()) != space_.num_basis())
    throw DomainError("geometry map: expected " + std::to_string(space_.num_basis()) +
                      " control points, got " + std::to_string(control_points_.size()));
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& p : control_points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  scale_ = (hi - lo).norm();
}

GeometryPoint GeometryMap::eval(const Vec2& xi, int deriv_order) const {
  const auto bu = eval_basis(space_.knots(0), xi[0], deriv_order);
  const auto bv = eval_basis(space_.knots(1), xi[1], deriv_order);
  GeometryPoint g;
  for (int j = 0; j < bv.count(); ++j) {
    for (int i = 0; i < bu.count(); ++i) {
      const Vec3& P = control_points_[space_.index(bu.first + i, bv.first + j)];
      g.x += bu.values[0][i] * bv.values[0][j] * P;
      if (deriv_order >= 1) {
        g.d1 += bu.values[1][i] * bv.values[0][j] * P;
        g.d2 += bu.values[0][i] * bv.values[1][j] * P;
      }
      if (deriv_order >= 2) {
        g.d11 += bu.values[2][i] * bv.values[0][j] * P;
        g.d12 += bu.values[1][i] * bv.values[1][j] * P;
        g.d22 += bu.values[0][i] * bv.values[2][j] * P;
      }
    }
  }
  return g;
}

SurfaceFrame surface_frame(const GeometryPoint& g, double scale) {
  SurfaceFrame f;
  f.a1 = g.d1;
  f.a2 = g.d2;
  const Vec3 n = f.a1.cross(f.a2);
  f.area_element = n.norm();
  if (!(f.area_element >= 1e-14 * scale * scale) || f.area_element == 0.0)
    throw SingularGeometryError("degenerate surface Jacobian (|a1 x a2| = " +
                                std::to_string(f.area_element) + ")");
  f.a3 = n / f.area_element;
  f.metric << f.a1.dot(f.a1), f.a1.dot(f.a2), f.a2.dot(f.a1), f.a2.dot(f.a2);
  f.inverse_metric = f.metric.inverse();
  f.con1 = f.inverse_metric(0, 0) * f.a1 + f.inverse_metric(0, 1) * f.a2;
  f.con2 = f.inverse_metric(1, 0) * f.a1 + f.inverse_metric(1, 1) * f.a2;
  const std::array<std::array<const Vec3*, 2>, 2> dd{{{&g.d11, &g.d12}, {&g.d12, &g.d22}}};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      f.curvature(a, b) = f.a3.dot(*dd[a][b]);
      f.christoffel[0](a, b) = f.con1.dot(*dd[a][b]);
      f.christoffel[1](a, b) = f.con2.dot(*dd[a][b]);
    }
  }
  return f;
}

namespace {

// Inserts knot u once into a curve with knots U and control points P (in place).
void insert_one(int p, std::vector<double>& U, std::vector<Vec3>& P, double u) {
  const int n = static_cast<int>(P.size());
  int k = static_cast<int>(std::upper_bound(U.begin(), U.end(), u) - U.begin()) - 1;
  k = std::clamp(k, p, n - 1);
  std::vector<Vec3> Q(n + 1);
  for (int i = 0; i <= k - p; ++i) Q[i] = P[i];
  for (int i = k - p + 1; i <= k; ++i) {
    const double alpha = (u - U[i]) / (U[i + p] - U[i]);
    Q[i] = alpha * P[i] + (1.0 - alpha) * P[i - 1];
  }
  for (int i = k + 1; i <= n; ++i) Q[i] = P[i - 1];
  U.insert(U.begin() + k + 1, u);
  P = std::move(Q);
}

}  // namespace

GeometryMap insert_knots(const GeometryMap& map, int dir, std::span<const double> new_knots) {
  const TensorSpace& sp = map.space();
  const int p = sp.degree();
  const int nu = sp.num_basis(0), nv = sp.num_basis(1);
  const int rows = dir == 0 ? nv : nu;
  const int len = dir == 0 ? nu : nv;
  std::vector<double> U_new;
  std::vector<std::vector<Vec3>> lines(rows);
  for (int r = 0; r < rows; ++r) {
    std::vector<Vec3> P(len);
    for (int t = 0; t < len; ++t)
      P[t] = map.control_points()[dir == 0 ? sp.index(t, r) : sp.index(r, t)];
    std::vector<double> U = sp.knots(dir).knots();
    for (double u : new_knots) {
      if (!(u > 0.0 && u < 1.0)) throw DomainError("inserted knot must lie in (0,1)");
      insert_one(p, U, P, u);
    }
    lines[r] = std::move(P);
    U_new = std::move(U);
  }
  KnotVector kv(p, U_new);
  TensorSpace space = dir == 0 ? TensorSpace(kv, sp.knots(1)) : TensorSpace(sp.knots(0), kv);
  std::vector<Vec3> cps(space.num_basis());
  const int new_len = kv.num_basis();
  for (int r = 0; r < rows; ++r)
    for (int t = 0; t < new_len; ++t)
      cps[dir == 0 ? space.index(t, r) : space.index(r, t)] = lines[r][t];
  return GeometryMap(std::move(space), std::move(cps));
}

namespace {
std::vector<double> midpoints_to_insert(const KnotVector& kv, int subdivisions) {
  std::vector<double> ins;
  const auto bp = kv.breakpoints();
  for (std::size_t e = 0; e + 1 < bp.size(); ++e)
    for (int s = 1; s < subdivisions; ++s)
      ins.push_back(bp[e] + (bp[e + 1] - bp[e]) * static_cast<double>(s) / subdivisions);
  return ins;
}
}  // namespace

KnotVector refined_knots(const KnotVector& kv, int subdivisions) {
  auto k = kv.knots();
  auto ins = midpoints_to_insert(kv, subdivisions);
  k.insert(k.end(), ins.begin(), ins.end());
  std::sort(k.begin(), k.end());
  return KnotVector(kv.degree(), std::move(k));
}

GeometryMap refine_uniform(const GeometryMap& map, int subdivisions_u, int subdivisions_v) {
  const auto iu = midpoints_to_insert(map.space().knots(0), subdivisions_u);
  GeometryMap out = insert_knots(map, 0, iu);
  const auto iv = midpoints_to_insert(map.space().knots(1), subdivisions_v);
  return insert_knots(out, 1, iv);
}

std::vector<Vec3> fit_curve(const KnotVector& kv, std::span<const double> params,
                            std::span<const Vec3> values) {
  const int n = kv.num_basis();
  const int m = static_cast<int>(params.size());
  if (m != static_cast<int>(values.size()) || m < n)
    throw DomainError("curve fit needs at least as many samples as control points");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
  Eigen::MatrixXd b(m, 3);
  Vec3 start = Vec3::Zero(), end = Vec3::Zero();
  for (int r = 0; r < m; ++r) {
    const auto B = eval_basis(kv, params[r], 0);
    for (int j = 0; j < B.count(); ++j) A(r, B.first + j) = B.values[0][j];
    b.row(r) = values[r].transpose();
    if (params[r] == 0.0) start = values[r];
    if (params[r] == 1.0) end = values[r];
  }
  // Clamp the end points, solve for the interior ones.
  Eigen::MatrixXd rhs = b - A.col(0) * start.transpose() - A.col(n - 1) * end.transpose();
  Eigen::MatrixXd Ai = A.middleCols(1, n - 2);
  Eigen::MatrixXd X = Ai.colPivHouseholderQr().solve(rhs);
  std::vector<Vec3> cps(n);
  cps[0] = start;
  cps[n - 1] = end;
  for (int j = 1; j < n - 1; ++j) cps[j] = X.row(j - 1).transpose();
  return cps;
}

}  // namespace klrom
