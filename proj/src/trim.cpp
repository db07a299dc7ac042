#include "klrom/trim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "klrom/errors.hpp"

namespace klrom {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a[0] * b[1] - a[1] * b[0]; }

Vec2 bezier_point(const std::vector<Vec2>& cps, double u, Vec2* d1 = nullptr, Vec2* d2 = nullptr) {
  // de Casteljau with derivative bookkeeping
  const int p = static_cast<int>(cps.size()) - 1;
  std::array<Vec2, kMaxDegree + 1> b;
  for (int i = 0; i <= p; ++i) b[i] = cps[i];
  Vec2 first = Vec2::Zero(), second = Vec2::Zero();
  for (int r = 1; r <= p; ++r) {
    if (r == p - 1 && d2) second = p * (p - 1) * (b[2] - 2.0 * b[1] + b[0]);
    if (r == p && d1) first = p * (b[1] - b[0]);
    for (int i = 0; i <= p - r; ++i) b[i] = (1.0 - u) * b[i] + u * b[i + 1];
  }
  if (p == 1 && d1) first = cps[1] - cps[0];
  if (d1) *d1 = first;
  if (d2) *d2 = (p >= 2) ? second : Vec2::Zero();
  return b[0];
}

void split_bezier(const std::vector<Vec2>& cps, std::vector<Vec2>& left, std::vector<Vec2>& right) {
  const int p = static_cast<int>(cps.size()) - 1;
  std::vector<Vec2> b = cps;
  left.resize(p + 1);
  right.resize(p + 1);
  left[0] = b[0];
  right[p] = b[p];
  for (int r = 1; r <= p; ++r) {
    for (int i = 0; i <= p - r; ++i) b[i] = 0.5 * (b[i] + b[i + 1]);
    left[r] = b[0];
    right[p - r] = b[p - r];
  }
}

bool open_box_contains(const Box& box, const Vec2& x) {
  return x[0] > box.lo[0] && x[0] < box.hi[0] && x[1] > box.lo[1] && x[1] < box.hi[1];
}

bool bezier_hits(const std::vector<Vec2>& cps, const Box& box, int depth) {
  Vec2 lo = cps[0], hi = cps[0];
  for (const auto& c : cps) {
    lo = lo.cwiseMin(c);
    hi = hi.cwiseMax(c);
  }
  // Touching the closed boundary does not count as entering the box.
  if (!(hi[0] > box.lo[0] && lo[0] < box.hi[0] && hi[1] > box.lo[1] && lo[1] < box.hi[1])) return false;
  if (open_box_contains(box, cps.front()) || open_box_contains(box, cps.back())) return true;
  if (depth > 48 || (hi - lo).norm() < 1e-14) return true;
  std::vector<Vec2> l, r;
  split_bezier(cps, l, r);
  return bezier_hits(l, box, depth + 1) || bezier_hits(r, box, depth + 1);
}

// Roots of cps(u)[axis] = value. Subdivides until the control polygon is monotone in `axis`,
// then bisects.
void bezier_line_roots(const std::vector<Vec2>& cps, int axis, double value, double lo, double hi, int depth,
                       std::vector<double>& out) {
  const int o = 1 - axis;
  double amin = cps[0][axis], amax = amin, omin = cps[0][o], omax = omin;
  for (const auto& c : cps) {
    amin = std::min(amin, c[axis]);
    amax = std::max(amax, c[axis]);
    omin = std::min(omin, c[o]);
    omax = std::max(omax, c[o]);
  }
  if (value < amin || value > amax || omax <= lo || omin >= hi) return;
  bool up = true, down = true;
  for (std::size_t i = 0; i + 1 < cps.size(); ++i) {
    const double d = cps[i + 1][axis] - cps[i][axis];
    up = up && d > 0.0;
    down = down && d < 0.0;
  }
  if (!up && !down && depth < 40) {
    std::vector<Vec2> l, r;
    split_bezier(cps, l, r);
    bezier_line_roots(l, axis, value, lo, hi, depth + 1, out);
    bezier_line_roots(r, axis, value, lo, hi, depth + 1, out);
    return;
  }
  const double f0 = cps.front()[axis] - value, f1 = cps.back()[axis] - value;
  if ((f0 < 0.0) == (f1 < 0.0) && f0 != 0.0 && f1 != 0.0) return;
  double a = 0.0, b = 1.0;
  const bool a_neg = f0 < 0.0;
  for (int it = 0; it < 60; ++it) {
    const double m = 0.5 * (a + b);
    if ((bezier_point(cps, m)[axis] - value < 0.0) == a_neg) a = m;
    else b = m;
  }
  const double y = bezier_point(cps, 0.5 * (a + b))[o];
  if (y > lo && y < hi) out.push_back(y);
}

}  // namespace

ResolvedTrim ResolvedTrim::circle(const Vec2& center, double radius, bool remove_inside) {
  if (!(radius > 0.0)) throw DomainError("trim circle radius must be positive");
  ResolvedTrim t;
  t.is_circle_ = true;
  t.center_ = center;
  t.radius_ = radius;
  t.remove_inside_ = remove_inside;
  return t;
}

ResolvedTrim ResolvedTrim::curve(const KnotVector& knots, std::vector<Vec2> control_points, Side removed) {
  if (static_cast<int>(control_points.size()) != knots.num_basis())
    throw DomainError("trim curve: control point count does not match its knot vector");
  ResolvedTrim t;
  t.is_circle_ = false;
  t.knots_ = knots;
  t.cps_ = std::move(control_points);
  t.removed_ = removed;

  // Bezier extraction by knot insertion up to multiplicity p at every interior breakpoint.
  const int p = knots.degree();
  std::vector<double> U = knots.knots();
  std::vector<Vec2> P = t.cps_;
  const auto bp = knots.breakpoints();
  for (std::size_t b = 1; b + 1 < bp.size(); ++b) {
    const double u = bp[b];
    int mult = static_cast<int>(std::count(U.begin(), U.end(), u));
    while (mult < p) {
      const int n = static_cast<int>(P.size());
      int k = static_cast<int>(std::upper_bound(U.begin(), U.end(), u) - U.begin()) - 1;
      k = std::clamp(k, p, n - 1);
      std::vector<Vec2> Q(n + 1);
      for (int i = 0; i <= k - p; ++i) Q[i] = P[i];
      for (int i = k - p + 1; i <= k; ++i) {
        const double den = U[i + p] - U[i];
        const double a = den > 0.0 ? (u - U[i]) / den : 0.0;
        Q[i] = a * P[i] + (1.0 - a) * P[i - 1];
      }
      for (int i = k + 1; i <= n; ++i) Q[i] = P[i - 1];
      U.insert(U.begin() + k + 1, u);
      P = std::move(Q);
      ++mult;
    }
  }
  for (std::size_t s = 0; s + 1 < bp.size(); ++s) {
    Bezier seg;
    seg.cps.assign(P.begin() + s * p, P.begin() + s * p + p + 1);
    seg.t0 = bp[s];
    seg.t1 = bp[s + 1];
    t.segments_.push_back(std::move(seg));
  }
  return t;
}

std::pair<std::size_t, double> ResolvedTrim::project(const Vec2& x) const {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_seg = 0;
  double best_u = 0.0;
  constexpr int kSamples = 16;
  for (std::size_t s = 0; s < segments_.size(); ++s) {
    for (int k = 0; k <= kSamples; ++k) {
      const double u = static_cast<double>(k) / kSamples;
      const double d2 = (bezier_point(segments_[s].cps, u) - x).squaredNorm();
      if (d2 < best) {
        best = d2;
        best_seg = s;
        best_u = u;
      }
    }
  }
  const auto& cps = segments_[best_seg].cps;
  double u = best_u;
  for (int it = 0; it < 30; ++it) {
    Vec2 d1, d2;
    const Vec2 b = bezier_point(cps, u, &d1, &d2);
    const double f = (b - x).dot(d1);
    const double fp = d1.squaredNorm() + (b - x).dot(d2);
    if (!(fp > 0.0)) break;
    const double un = std::clamp(u - f / fp, 0.0, 1.0);
    const bool done = std::abs(un - u) < 1e-15;
    u = un;
    if (done) break;
  }
  return {best_seg, u};
}

double ResolvedTrim::nearest(const Vec2& x, Vec2* tangent) const {
  if (is_circle_) {
    const Vec2 r = x - center_;
    const double d = r.norm();
    if (tangent) *tangent = d > 0.0 ? Vec2(-r[1] / d, r[0] / d) : Vec2(1.0, 0.0);
    return std::abs(d - radius_);
  }
  const auto [seg, u] = project(x);
  Vec2 d1;
  const Vec2 b = bezier_point(segments_[seg].cps, u, &d1);
  if (tangent) *tangent = d1.norm() > 0.0 ? Vec2(d1.normalized()) : Vec2(1.0, 0.0);
  return (b - x).norm();
}

bool ResolvedTrim::left_of_curve(const Vec2& x, double* offset) const {
  const auto [seg, u] = project(x);
  Vec2 d1;
  const Vec2 b = bezier_point(segments_[seg].cps, u, &d1);
  const double c = cross2(d1, x - b);
  if (offset) *offset = c;
  return c > 0.0;
}

bool ResolvedTrim::removes(const Vec2& x) const {
  if (is_circle_) {
    const double d = (x - center_).norm();
    return remove_inside_ ? d < radius_ : d > radius_;
  }
  double off = 0.0;
  const bool left = left_of_curve(x, &off);
  if (off == 0.0) return false;
  return removed_ == Side::Left ? left : !left;
}

bool ResolvedTrim::curve_intersects(const Box& box) const {
  for (const auto& s : segments_)
    if (bezier_hits(s.cps, box, 0)) return true;
  return false;
}

Region ResolvedTrim::classify(const Box& box) const {
  if (is_circle_) {
    const Vec2 nearest = center_.cwiseMax(box.lo).cwiseMin(box.hi);
    const double dmin = (nearest - center_).norm();
    double dmax = 0.0;
    for (double x : {box.lo[0], box.hi[0]})
      for (double y : {box.lo[1], box.hi[1]}) dmax = std::max(dmax, (Vec2(x, y) - center_).norm());
    const bool inside = dmax <= radius_;
    const bool outside = dmin >= radius_;
    if (!inside && !outside) return Region::Cut;
    return (inside == remove_inside_) ? Region::Removed : Region::Kept;
  }
  if (curve_intersects(box)) return Region::Cut;
  return removes(box.center()) ? Region::Removed : Region::Kept;
}

Vec2 ResolvedTrim::point(double t) const {
  if (is_circle_) {
    const double a = 2.0 * std::numbers::pi * t;
    return center_ + radius_ * Vec2(std::cos(a), std::sin(a));
  }
  const auto B = eval_basis(knots_, std::clamp(t, 0.0, 1.0), 0);
  Vec2 x = Vec2::Zero();
  for (int j = 0; j < B.count(); ++j) x += B.values[0][j] * cps_[B.first + j];
  return x;
}

Vec2 ResolvedTrim::tangent(double t) const {
  if (is_circle_) {
    const double a = 2.0 * std::numbers::pi * t;
    return 2.0 * std::numbers::pi * radius_ * Vec2(-std::sin(a), std::cos(a));
  }
  const auto B = eval_basis(knots_, std::clamp(t, 0.0, 1.0), 1);
  Vec2 x = Vec2::Zero();
  for (int j = 0; j < B.count(); ++j) x += B.values[1][j] * cps_[B.first + j];
  return x;
}

std::vector<double> ResolvedTrim::line_crossings(int axis, double value, double lo, double hi) const {
  std::vector<double> out;
  if (is_circle_) {
    const double d = value - center_[axis];
    if (std::abs(d) >= radius_) return out;
    const double h = std::sqrt(radius_ * radius_ - d * d);
    for (double y : {center_[1 - axis] - h, center_[1 - axis] + h})
      if (y > lo && y < hi) out.push_back(y);
    return out;
  }
  for (const auto& s : segments_) bezier_line_roots(s.cps, axis, value, lo, hi, 0, out);
  return out;
}

std::vector<double> ResolvedTrim::interior_knots() const {
  if (is_circle_) return {};
  auto bp = knots_.breakpoints();
  return {bp.begin() + 1, bp.end() - 1};
}

ResolvedTrim TrimCurveSpec::resolve(const ParamVector& mu) const {
  auto shift = [&](const ParamGradient& g) -> Vec2 {
    if (g.cols() == 0) return Vec2::Zero();
    if (g.cols() != mu.size())
      throw DomainError("trim parameter gradient has " + std::to_string(g.cols()) +
                        " columns but mu has " + std::to_string(mu.size()) + " entries");
    return g * mu;
  };
  if (const auto* c = std::get_if<CircleTrim>(&def_)) {
    return ResolvedTrim::circle(c->center + shift(c->center_gradient), c->radius, c->remove_inside);
  }
  const auto& c = std::get<CurveTrim>(def_);
  std::vector<Vec2> cps = c.control_points;
  if (!c.control_point_gradients.empty()) {
    for (std::size_t i = 0; i < cps.size(); ++i) cps[i] += shift(c.control_point_gradients[i]);
  }
  return ResolvedTrim::curve(c.knots, std::move(cps), c.removed);
}

std::vector<ResolvedTrim> resolve_all(std::span<const TrimCurveSpec> specs, const ParamVector& mu) {
  std::vector<ResolvedTrim> out;
  out.reserve(specs.size());
  for (const auto& s : specs) out.push_back(s.resolve(mu));
  return out;
}

ElementTag classify_box(const Box& box, std::span<const ResolvedTrim> trims) {
  bool cut = false;
  for (const auto& t : trims) {
    const Region r = t.classify(box);
    if (r == Region::Removed) return ElementTag::Exterior;
    if (r == Region::Cut) cut = true;
  }
  return cut ? ElementTag::Cut : ElementTag::Interior;
}

bool is_active_point(const Vec2& x, std::span<const ResolvedTrim> trims) {
  for (const auto& t : trims)
    if (t.removes(x)) return false;
  return true;
}

Box ElementClassification::box(int e) const {
  const int eu = e % num_u(), ev = e / num_u();
  return Box{Vec2(breaks_u[eu], breaks_v[ev]), Vec2(breaks_u[eu + 1], breaks_v[ev + 1])};
}

ElementClassification classify_elements(const TensorSpace& space, std::span<const ResolvedTrim> trims) {
  ElementClassification cls;
  cls.breaks_u = space.knots(0).breakpoints();
  cls.breaks_v = space.knots(1).breakpoints();
  cls.tags.resize(static_cast<std::size_t>(cls.num_u()) * cls.num_v());
  for (int e = 0; e < cls.num_elements(); ++e) cls.tags[e] = classify_box(cls.box(e), trims);
  return cls;
}

ElementClassification classify_elements(const TensorSpace& space, std::span<const TrimCurveSpec> trims,
                                        const ParamVector& mu) {
  const auto resolved = resolve_all(trims, mu);
  return classify_elements(space, resolved);
}

std::vector<int> active_functions(const TensorSpace& space, const ElementClassification& cls) {
  const int p = space.degree();
  std::vector<char> mark(space.num_basis(), 0);
  for (int e = 0; e < cls.num_elements(); ++e) {
    if (cls.tags[e] == ElementTag::Exterior) continue;
    const Box b = cls.box(e);
    const Vec2 c = b.center();
    const int fu = space.knots(0).find_span(c[0]) - p;
    const int fv = space.knots(1).find_span(c[1]) - p;
    for (int j = 0; j <= p; ++j)
      for (int i = 0; i <= p; ++i) mark[space.index(fu + i, fv + j)] = 1;
  }
  std::vector<int> active;
  for (int i = 0; i < space.num_basis(); ++i)
    if (mark[i]) active.push_back(i);
  if (active.empty()) throw FullyTrimmedError("patch is fully trimmed: no active basis functions");
  return active;
}

namespace {

// Tensor rule on Gauss lines {x[a] = const} whose other coordinate is split at trim crossings.
void line_rule(const Box& box, std::span<const ResolvedTrim> trims, int order, int a, double scale,
               QuadratureRule& out) {
  const auto& [gx, gw] = gauss_legendre(order);
  const double wa = box.hi[a] - box.lo[a];
  std::vector<double> cuts;
  for (std::size_t i = 0; i < gx.size(); ++i) {
    const double s0 = box.lo[a] + wa * gx[i];
    cuts.assign({box.lo[1 - a], box.hi[1 - a]});
    for (const auto& t : trims) {
      const auto c = t.line_crossings(a, s0, box.lo[1 - a], box.hi[1 - a]);
      cuts.insert(cuts.end(), c.begin(), c.end());
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double len = cuts[k + 1] - cuts[k];
      Vec2 mid;
      mid[a] = s0;
      mid[1 - a] = 0.5 * (cuts[k] + cuts[k + 1]);
      if (!(len > 0.0) || !is_active_point(mid, trims)) continue;
      for (std::size_t j = 0; j < gx.size(); ++j) {
        Vec2 x;
        x[a] = s0;
        x[1 - a] = cuts[k] + len * gx[j];
        out.points.push_back(x);
        out.weights.push_back(scale * wa * gw[i] * len * gw[j]);
      }
    }
  }
}

void quadtree(const Box& box, std::span<const ResolvedTrim> trims, int order, int depth, int max_depth,
              ElementTag tag, QuadratureRule& out) {
  if (tag == ElementTag::Exterior) return;
  if (tag == ElementTag::Interior) {
    out.append(tensor_gauss(box, order));
    return;
  }
  if (depth == max_depth) {
    // Gauss lines split at the trim crossings, so the rule moves smoothly with the curves. Lines
    // should cross the boundary transversally; the two families are blended by the direction of
    // the nearest boundary with a smooth weight, which avoids switching jumps.
    Vec2 tangent(1.0, 0.0);
    double dist = std::numeric_limits<double>::infinity();
    for (const auto& t : trims) {
      Vec2 tt;
      const double d = t.nearest(box.center(), &tt);
      if (d < dist) {
        dist = d;
        tangent = tt;
      }
    }
    const double s = std::clamp((tangent[0] * tangent[0] - 0.25) / 0.5, 0.0, 1.0);
    const double w_fixed_u = s * s * s * (s * (6.0 * s - 15.0) + 10.0);
    if (w_fixed_u > 0.0) line_rule(box, trims, order, 0, w_fixed_u, out);
    if (w_fixed_u < 1.0) line_rule(box, trims, order, 1, 1.0 - w_fixed_u, out);
    return;
  }
  const Vec2 c = box.center();
  const std::array<Box, 4> kids{Box{box.lo, c}, Box{Vec2(c[0], box.lo[1]), Vec2(box.hi[0], c[1])},
                                Box{Vec2(box.lo[0], c[1]), Vec2(c[0], box.hi[1])}, Box{c, box.hi}};
  for (const auto& k : kids) quadtree(k, trims, order, depth + 1, max_depth, classify_box(k, trims), out);
}

}  // namespace

QuadratureRule cut_quadrature(const Box& element, std::span<const ResolvedTrim> trims, int order, int depth) {
  if (depth < 1) throw ConfigError("cut quadrature depth must be >= 1 (got " + std::to_string(depth) + ")");
  QuadratureRule out;
  quadtree(element, trims, order, 0, depth, classify_box(element, trims), out);
  return out;
}

}  // namespace klrom
