#include "klrom/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "klrom/errors.hpp"

namespace klrom {

using json = nlohmann::ordered_json;

namespace {

const char* const kEdgeNames[4] = {"south", "east", "north", "west"};

std::optional<Edge> edge_from_name(const std::string& s) {
  for (int i = 0; i < 4; ++i)
    if (s == kEdgeNames[i]) return static_cast<Edge>(i);
  return std::nullopt;
}

/// Walks a JSON document while collecting issues with their paths.
class Reader {
 public:
  std::vector<std::string> issues;

  void fail(const std::string& path, const std::string& what) { issues.push_back(path + ": " + what); }

  bool object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
      if (!ok.count(k)) fail(join(path, k), "unknown key");
    return true;
  }

  static std::string join(const std::string& path, const std::string& key) { return path + "." + key; }
  static std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

  const json* field(const json& j, const std::string& path, const char* key, bool required) {
    if (!j.is_object()) return nullptr;
    auto it = j.find(key);
    if (it == j.end()) {
      if (required) fail(join(path, key), "missing required key");
      return nullptr;
    }
    return &*it;
  }

  bool number(const json& j, const std::string& path, double& out) {
    if (!j.is_number()) {
      fail(path, "expected a number");
      return false;
    }
    out = j.get<double>();
    if (!std::isfinite(out)) {
      fail(path, "number must be finite");
      return false;
    }
    return true;
  }

  bool integer(const json& j, const std::string& path, int& out) {
    if (!j.is_number_integer()) {
      fail(path, "expected an integer");
      return false;
    }
    out = j.get<int>();
    return true;
  }

  bool string(const json& j, const std::string& path, std::string& out,
              std::initializer_list<const char*> choices = {}) {
    if (!j.is_string()) {
      fail(path, "expected a string");
      return false;
    }
    out = j.get<std::string>();
    if (choices.size() == 0) return true;
    std::string list;
    for (const char* c : choices) {
      if (out == c) return true;
      list += (list.empty() ? "" : ", ") + std::string(c);
    }
    fail(path, "'" + out + "' is not one of: " + list);
    return false;
  }

  bool boolean(const json& j, const std::string& path, bool& out) {
    if (!j.is_boolean()) {
      fail(path, "expected true or false");
      return false;
    }
    out = j.get<bool>();
    return true;
  }

  bool numbers(const json& j, const std::string& path, std::vector<double>& out, int size = -1) {
    if (!j.is_array()) {
      fail(path, "expected an array of numbers");
      return false;
    }
    if (size >= 0 && static_cast<int>(j.size()) != size) {
      fail(path, "expected " + std::to_string(size) + " entries, got " + std::to_string(j.size()));
      return false;
    }
    out.clear();
    bool good = true;
    for (std::size_t i = 0; i < j.size(); ++i) {
      double v = 0.0;
      good = number(j[i], at(path, i), v) && good;
      out.push_back(v);
    }
    return good;
  }

  bool vec3(const json& j, const std::string& path, Vec3& out) {
    std::vector<double> v;
    if (!numbers(j, path, v, 3)) return false;
    out = Vec3(v[0], v[1], v[2]);
    return true;
  }

  bool vec2(const json& j, const std::string& path, Vec2& out) {
    std::vector<double> v;
    if (!numbers(j, path, v, 2)) return false;
    out = Vec2(v[0], v[1]);
    return true;
  }

  // Optional scalar helpers: leave `out` untouched when the key is absent.
  template <class T, class F>
  void opt(const json& obj, const std::string& path, const char* key, T& out, F&& read) {
    if (const json* v = field(obj, path, key, false)) read(*v, join(path, key), out);
  }
  template <class T, class F>
  void req(const json& obj, const std::string& path, const char* key, T& out, F&& read) {
    if (const json* v = field(obj, path, key, true)) read(*v, join(path, key), out);
  }
};

#define KLROM_READ(method) [&](const json& v, const std::string& p, auto& o) { r.method(v, p, o); }

void read_knots(Reader& r, const json& obj, const std::string& path, const char* key, std::vector<double>& out) {
  if (const json* v = r.field(obj, path, key, true)) r.numbers(*v, Reader::join(path, key), out);
}

/// Structural checks of an open knot vector without constructing it.
void check_knots(Reader& r, const std::string& path, int degree, const std::vector<double>& k, int* num_basis) {
  if (num_basis) *num_basis = -1;
  if (k.size() < static_cast<std::size_t>(2 * degree + 2)) {
    r.fail(path, "degree " + std::to_string(degree) + " needs at least " + std::to_string(2 * degree + 2) +
                     " knots");
    return;
  }
  for (std::size_t i = 1; i < k.size(); ++i)
    if (k[i] < k[i - 1]) {
      r.fail(path, "knots must be non-decreasing");
      return;
    }
  int front = 0, back = 0;
  for (double x : k) front += x == k.front();
  for (double x : k) back += x == k.back();
  if (front != degree + 1 || back != degree + 1) {
    r.fail(path, "end knot multiplicity must equal degree + 1 = " + std::to_string(degree + 1));
    return;
  }
  if (k.front() != 0.0 || k.back() != 1.0) {
    r.fail(path, "knot vector must span [0, 1]");
    return;
  }
  std::size_t i = degree + 1;
  while (i + degree + 1 < k.size()) {
    std::size_t j = i;
    while (j + 1 < k.size() - degree - 1 && k[j + 1] == k[i]) ++j;
    if (static_cast<int>(j - i + 1) > std::max(degree, 1)) {
      r.fail(path, "interior knot multiplicity exceeds the degree");
      return;
    }
    i = j + 1;
  }
  if (num_basis) *num_basis = static_cast<int>(k.size()) - degree - 1;
}

PointGradient read_gradient(Reader& r, const json& j, const std::string& path) {
  PointGradient g;
  if (!j.is_object()) {
    r.fail(path, "expected an object mapping parameter names to [du, dv]");
    return g;
  }
  for (const auto& [k, v] : j.items()) {
    Vec2 d;
    if (r.vec2(v, Reader::join(path, k), d)) g[k] = d;
  }
  return g;
}

void read_geometry(Reader& r, const json& j, const std::string& path, GeometryConfig& g, const std::string& patch) {
  if (!r.object(j, path,
                {"type", "origin", "edge_u", "edge_v", "radius", "half_angle_deg", "y0", "length", "fit_degree",
                 "fit_elements", "degree", "knots_u", "knots_v", "control_points"}))
    return;
  r.req(j, path, "type", g.type, [&](const json& v, const std::string& p, std::string& o) {
    r.string(v, p, o, {"plane", "cylinder_arc", "spline"});
  });
  auto only = [&](std::initializer_list<const char*> keys) {
    std::set<std::string> ok(keys.begin(), keys.end());
    ok.insert("type");
    for (const auto& [k, v] : j.items())
      if (!ok.count(k)) r.fail(Reader::join(path, k), "not valid for geometry type '" + g.type + "'");
  };
  if (g.type == "plane") {
    only({"origin", "edge_u", "edge_v"});
    r.opt(j, path, "origin", g.origin, KLROM_READ(vec3));
    r.opt(j, path, "edge_u", g.edge_u, KLROM_READ(vec3));
    r.opt(j, path, "edge_v", g.edge_v, KLROM_READ(vec3));
    if (g.edge_u.cross(g.edge_v).norm() <= 0.0) r.fail(path, "plane edges are parallel");
  } else if (g.type == "cylinder_arc") {
    only({"radius", "half_angle_deg", "y0", "length", "fit_degree", "fit_elements"});
    r.req(j, path, "radius", g.radius, KLROM_READ(number));
    r.req(j, path, "half_angle_deg", g.half_angle_deg, KLROM_READ(number));
    r.opt(j, path, "y0", g.y0, KLROM_READ(number));
    r.req(j, path, "length", g.length, KLROM_READ(number));
    r.opt(j, path, "fit_degree", g.fit_degree, KLROM_READ(integer));
    r.opt(j, path, "fit_elements", g.fit_elements, KLROM_READ(integer));
    if (!(g.radius > 0.0) || !(g.length > 0.0)) r.fail(path, "radius and length must be positive");
    if (!(g.half_angle_deg > 0.0 && g.half_angle_deg < 180.0)) r.fail(path, "half_angle_deg must lie in (0, 180)");
    if (g.fit_degree < 2 || g.fit_degree > kMaxDegree) r.fail(Reader::join(path, "fit_degree"), "must lie in [2, 5]");
    if (g.fit_elements < 1) r.fail(Reader::join(path, "fit_elements"), "must be positive");
  } else if (g.type == "spline") {
    only({"degree", "knots_u", "knots_v", "control_points"});
    r.req(j, path, "degree", g.degree, KLROM_READ(integer));
    read_knots(r, j, path, "knots_u", g.knots_u);
    read_knots(r, j, path, "knots_v", g.knots_v);
    int nu = -1, nv = -1;
    if (g.degree < 1 || g.degree > kMaxDegree) {
      r.fail(Reader::join(path, "degree"), "patch " + patch + ": degree must lie in [1, 5]");
    } else {
      const auto before = r.issues.size();
      check_knots(r, Reader::join(path, "knots_u"), g.degree, g.knots_u, &nu);
      check_knots(r, Reader::join(path, "knots_v"), g.degree, g.knots_v, &nv);
      for (auto i = before; i < r.issues.size(); ++i) r.issues[i] += " (patch " + patch + ", declared degree " +
                                                                    std::to_string(g.degree) + ")";
    }
    if (const json* cp = r.field(j, path, "control_points", true)) {
      const std::string cpath = Reader::join(path, "control_points");
      if (!cp->is_array()) {
        r.fail(cpath, "expected an array of [x, y, z]");
      } else {
        g.control_points.clear();
        for (std::size_t i = 0; i < cp->size(); ++i) {
          Vec3 x = Vec3::Zero();
          r.vec3((*cp)[i], Reader::at(cpath, i), x);
          g.control_points.push_back(x);
        }
        if (nu > 0 && nv > 0 && static_cast<int>(g.control_points.size()) != nu * nv)
          r.fail(cpath, "patch " + patch + ": expected " + std::to_string(nu * nv) + " control points, got " +
                            std::to_string(g.control_points.size()));
      }
    }
  }
}

void read_patch(Reader& r, const json& j, const std::string& path, PatchConfig& pc) {
  if (!r.object(j, path, {"id", "geometry", "shape_modes", "analysis", "trims", "dirichlet", "neumann"})) return;
  r.req(j, path, "id", pc.id, KLROM_READ(integer));
  const std::string pname = std::to_string(pc.id);
  if (const json* g = r.field(j, path, "geometry", true)) read_geometry(r, *g, Reader::join(path, "geometry"), pc.geometry, pname);

  if (const json* sm = r.field(j, path, "shape_modes", false)) {
    const std::string sp = Reader::join(path, "shape_modes");
    if (!sm->is_array()) r.fail(sp, "expected an array");
    else
      for (std::size_t i = 0; i < sm->size(); ++i) {
        const std::string p = Reader::at(sp, i);
        ShapeModeConfig m;
        if (r.object((*sm)[i], p, {"parameter", "direction", "amplitude", "profile_u", "profile_v"})) {
          r.req((*sm)[i], p, "parameter", m.parameter, KLROM_READ(string));
          r.opt((*sm)[i], p, "direction", m.direction, KLROM_READ(vec3));
          r.opt((*sm)[i], p, "amplitude", m.amplitude, KLROM_READ(number));
          auto prof = [&](const json& v, const std::string& pp, std::string& o) {
            r.string(v, pp, o, {"constant", "bubble"});
          };
          r.opt((*sm)[i], p, "profile_u", m.profile_u, prof);
          r.opt((*sm)[i], p, "profile_v", m.profile_v, prof);
        }
        pc.shape_modes.push_back(m);
      }
  }

  if (const json* a = r.field(j, path, "analysis", true)) {
    const std::string ap = Reader::join(path, "analysis");
    AnalysisConfig& an = pc.analysis;
    if (r.object(*a, ap, {"degree", "elements", "knots_u", "knots_v", "interior_knot_shift"})) {
      r.req(*a, ap, "degree", an.degree, KLROM_READ(integer));
      if (an.degree < 2 || an.degree > kMaxDegree)
        r.fail(Reader::join(ap, "degree"), "patch " + pname + ": analysis degree must lie in [2, 5] (C1 basis)");
      const bool has_knots = a->contains("knots_u") || a->contains("knots_v");
      if (has_knots && a->contains("elements")) r.fail(ap, "give either elements or knots_u/knots_v, not both");
      if (has_knots) {
        read_knots(r, *a, ap, "knots_u", an.knots_u);
        read_knots(r, *a, ap, "knots_v", an.knots_v);
        if (an.degree >= 2 && an.degree <= kMaxDegree) {
          const auto before = r.issues.size();
          check_knots(r, Reader::join(ap, "knots_u"), an.degree, an.knots_u, nullptr);
          check_knots(r, Reader::join(ap, "knots_v"), an.degree, an.knots_v, nullptr);
          for (auto i = before; i < r.issues.size(); ++i)
            r.issues[i] += " (patch " + pname + ", declared degree " + std::to_string(an.degree) + ")";
          for (const auto* k : {&an.knots_u, &an.knots_v})
            for (std::size_t i = 1; i + 1 < k->size(); ++i)
              if ((*k)[i] > 0.0 && (*k)[i] < 1.0 && ((*k)[i] == (*k)[i - 1] || (*k)[i] == (*k)[i + 1]))
                r.fail(ap, "patch " + pname + ": repeated interior analysis knots break C1 continuity");
        }
      } else if (const json* e = r.field(*a, ap, "elements", true)) {
        std::vector<double> v;
        const std::string ep = Reader::join(ap, "elements");
        if (r.numbers(*e, ep, v, 2)) {
          for (int d = 0; d < 2; ++d) {
            if (v[d] != std::floor(v[d]) || v[d] < 1) r.fail(ep, "element counts must be positive integers");
            an.elements[d] = static_cast<int>(v[d]);
          }
        }
      }
      r.opt(*a, ap, "interior_knot_shift", an.interior_knot_shift, KLROM_READ(number));
    }
  }

  if (const json* t = r.field(j, path, "trims", false)) {
    const std::string tp = Reader::join(path, "trims");
    if (!t->is_array()) r.fail(tp, "expected an array");
    else
      for (std::size_t i = 0; i < t->size(); ++i) {
        const std::string p = Reader::at(tp, i);
        const json& tj = (*t)[i];
        TrimConfig tc;
        if (!tj.is_object() || !tj.contains("type")) {
          r.fail(p, "expected an object with a 'type'");
          pc.trims.push_back(tc);
          continue;
        }
        r.string(tj["type"], Reader::join(p, "type"), tc.type, {"circle", "spline_curve"});
        if (tc.type == "circle") {
          r.object(tj, p, {"type", "center", "center_gradient", "radius", "remove"});
          r.req(tj, p, "center", tc.center, KLROM_READ(vec2));
          r.req(tj, p, "radius", tc.radius, KLROM_READ(number));
          if (!(tc.radius > 0.0)) r.fail(Reader::join(p, "radius"), "must be positive");
          if (const json* g = r.field(tj, p, "center_gradient", false))
            tc.center_gradient = read_gradient(r, *g, Reader::join(p, "center_gradient"));
          r.opt(tj, p, "remove", tc.remove, [&](const json& v, const std::string& pp, std::string& o) {
            r.string(v, pp, o, {"inside", "outside"});
          });
        } else if (tc.type == "spline_curve") {
          r.object(tj, p, {"type", "degree", "knots", "control_points", "control_point_gradients", "removed_side"});
          r.req(tj, p, "degree", tc.degree, KLROM_READ(integer));
          read_knots(r, tj, p, "knots", tc.knots);
          int n = -1;
          if (tc.degree >= 1 && tc.degree <= kMaxDegree) check_knots(r, Reader::join(p, "knots"), tc.degree, tc.knots, &n);
          else r.fail(Reader::join(p, "degree"), "must lie in [1, 5]");
          if (const json* cp = r.field(tj, p, "control_points", true)) {
            const std::string cpp = Reader::join(p, "control_points");
            if (!cp->is_array()) r.fail(cpp, "expected an array of [u, v]");
            else {
              for (std::size_t k = 0; k < cp->size(); ++k) {
                Vec2 x = Vec2::Zero();
                r.vec2((*cp)[k], Reader::at(cpp, k), x);
                tc.control_points.push_back(x);
              }
              if (n > 0 && static_cast<int>(tc.control_points.size()) != n)
                r.fail(cpp, "expected " + std::to_string(n) + " control points for the given knots");
            }
          }
          if (const json* g = r.field(tj, p, "control_point_gradients", false)) {
            const std::string gp = Reader::join(p, "control_point_gradients");
            if (!g->is_array() || g->size() != tc.control_points.size())
              r.fail(gp, "expected one entry per control point");
            else
              for (std::size_t k = 0; k < g->size(); ++k) tc.control_point_gradients.push_back(read_gradient(r, (*g)[k], Reader::at(gp, k)));
          }
          r.opt(tj, p, "removed_side", tc.removed_side, [&](const json& v, const std::string& pp, std::string& o) {
            r.string(v, pp, o, {"left", "right"});
          });
        }
        pc.trims.push_back(tc);
      }
  }

  auto read_edge = [&](const json& v, const std::string& p, std::string& o) {
    r.string(v, p, o, {"south", "east", "north", "west"});
  };
  if (const json* d = r.field(j, path, "dirichlet", false)) {
    const std::string dp = Reader::join(path, "dirichlet");
    if (!d->is_array()) r.fail(dp, "expected an array");
    else
      for (std::size_t i = 0; i < d->size(); ++i) {
        const std::string p = Reader::at(dp, i);
        const json& dj = (*d)[i];
        DirichletConfig dc;
        if (r.object(dj, p, {"edge", "function", "components", "clamp"})) {
          const bool has_edge = dj.contains("edge"), has_fn = dj.contains("function");
          if (has_edge == has_fn) r.fail(p, "give exactly one of 'edge' or 'function'");
          r.opt(dj, p, "edge", dc.edge, read_edge);
          if (has_fn) {
            std::vector<double> v;
            if (r.numbers(dj["function"], Reader::join(p, "function"), v, 2)) {
              if (v[0] < 0 || v[1] < 0 || v[0] != std::floor(v[0]) || v[1] != std::floor(v[1]))
                r.fail(Reader::join(p, "function"), "expected two non-negative integers");
              dc.function = std::array<int, 2>{static_cast<int>(v[0]), static_cast<int>(v[1])};
            }
          }
          if (const json* c = r.field(dj, p, "components", false)) {
            const std::string cp = Reader::join(p, "components");
            dc.components = {false, false, false};
            if (!c->is_array() || c->empty()) r.fail(cp, "expected a non-empty array of \"x\", \"y\", \"z\"");
            else
              for (std::size_t k = 0; k < c->size(); ++k) {
                std::string s;
                if (r.string((*c)[k], Reader::at(cp, k), s, {"x", "y", "z"})) dc.components[s[0] - 'x'] = true;
              }
          }
          r.opt(dj, p, "clamp", dc.clamp, KLROM_READ(boolean));
          if (has_fn && dc.clamp) r.fail(p, "clamp applies to edges only");
        }
        pc.dirichlet.push_back(dc);
      }
  }
  if (const json* n = r.field(j, path, "neumann", false)) {
    const std::string np = Reader::join(path, "neumann");
    if (!n->is_array()) r.fail(np, "expected an array");
    else
      for (std::size_t i = 0; i < n->size(); ++i) {
        const std::string p = Reader::at(np, i);
        NeumannConfig nc;
        if (r.object((*n)[i], p, {"edge", "traction", "moment"})) {
          r.req((*n)[i], p, "edge", nc.edge, read_edge);
          r.opt((*n)[i], p, "traction", nc.traction, KLROM_READ(vec3));
          r.opt((*n)[i], p, "moment", nc.moment, KLROM_READ(number));
        }
        pc.neumann.push_back(nc);
      }
  }
}

void read_side(Reader& r, const json& j, const std::string& path, InterfaceSideConfig& s) {
  if (!r.object(j, path, {"patch", "edge", "trim"})) return;
  r.req(j, path, "patch", s.patch, KLROM_READ(integer));
  if (j.contains("edge") == j.contains("trim")) r.fail(path, "give exactly one of 'edge' or 'trim'");
  if (j.contains("edge")) {
    std::string e;
    if (r.string(j["edge"], Reader::join(path, "edge"), e, {"south", "east", "north", "west"})) s.edge = e;
  }
  if (j.contains("trim")) {
    int t = 0;
    if (r.integer(j["trim"], Reader::join(path, "trim"), t)) s.trim = t;
  }
}

/// Cross-reference checks that need the whole document.
void check_references(Reader& r, const ModelConfig& c) {
  std::set<std::string> names;
  for (std::size_t i = 0; i < c.parameter_names.size(); ++i)
    if (!names.insert(c.parameter_names[i]).second) r.fail(Reader::at("$.parameters.names", i), "duplicate parameter name");
  for (std::size_t i = 0; i < c.lower.size() && i < c.upper.size(); ++i)
    if (!(c.lower[i] < c.upper[i])) r.fail(Reader::at("$.parameters.lower", i), "lower bound must be below upper bound");

  std::map<int, std::size_t> ids;
  for (std::size_t pi = 0; pi < c.patches.size(); ++pi) {
    const PatchConfig& p = c.patches[pi];
    const std::string pp = Reader::at("$.patches", pi);
    if (!ids.emplace(p.id, pi).second) r.fail(Reader::join(pp, "id"), "duplicate patch id " + std::to_string(p.id));
    for (std::size_t k = 0; k < p.shape_modes.size(); ++k) {
      const auto& m = p.shape_modes[k];
      if (!m.parameter.empty() && !names.count(m.parameter))
        r.fail(Reader::join(Reader::at(Reader::join(pp, "shape_modes"), k), "parameter"),
               "unknown parameter '" + m.parameter + "'");
      if ((m.profile_u == "bubble" || m.profile_v == "bubble") && p.geometry.type == "plane")
        r.fail(Reader::at(Reader::join(pp, "shape_modes"), k), "bubble profile needs a curved (degree >= 2) geometry");
    }
    for (std::size_t k = 0; k < p.trims.size(); ++k) {
      const std::string tp = Reader::at(Reader::join(pp, "trims"), k);
      auto check = [&](const PointGradient& g, const std::string& path) {
        for (const auto& [name, v] : g)
          if (!names.count(name)) r.fail(Reader::join(path, name), "unknown parameter '" + name + "'");
      };
      check(p.trims[k].center_gradient, Reader::join(tp, "center_gradient"));
      for (std::size_t q = 0; q < p.trims[k].control_point_gradients.size(); ++q)
        check(p.trims[k].control_point_gradients[q], Reader::at(Reader::join(tp, "control_point_gradients"), q));
    }
  }
  for (std::size_t i = 0; i < c.interfaces.size(); ++i) {
    const std::string ip = Reader::at("$.interfaces", i);
    for (int s = 0; s < 2; ++s) {
      const InterfaceSideConfig& side = s == 0 ? c.interfaces[i].a : c.interfaces[i].b;
      const std::string sp = Reader::join(ip, s == 0 ? "a" : "b");
      auto it = ids.find(side.patch);
      if (it == ids.end()) {
        r.fail(Reader::join(sp, "patch"), "patch id " + std::to_string(side.patch) + " does not exist");
        continue;
      }
      if (side.trim && (*side.trim < 0 || *side.trim >= static_cast<int>(c.patches[it->second].trims.size())))
        r.fail(Reader::join(sp, "trim"), "patch " + std::to_string(side.patch) + " has no trim " + std::to_string(*side.trim));
    }
    if (c.interfaces[i].a.patch == c.interfaces[i].b.patch) r.fail(ip, "an interface must join two different patches");
  }
  const auto& o = c.optimization;
  if (!o.initial.empty() && o.initial.size() != c.lower.size())
    r.fail("$.optimization.initial", "expected " + std::to_string(c.lower.size()) + " entries");
  for (std::size_t i = 0; i < o.initial.size() && i < c.lower.size() && i < c.upper.size(); ++i)
    if (o.initial[i] < c.lower[i] || o.initial[i] > c.upper[i])
      r.fail(Reader::at("$.optimization.initial", i), "outside the parameter box");
}

}  // namespace

ParameterBox ModelConfig::parameter_box() const {
  ParameterBox b;
  b.names = parameter_names;
  b.lower = Eigen::Map<const Eigen::VectorXd>(lower.data(), lower.size());
  b.upper = Eigen::Map<const Eigen::VectorXd>(upper.data(), upper.size());
  return b;
}

ModelConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("$: malformed JSON: ") + e.what());
  }
  Reader r;
  ModelConfig c;
  const std::string root = "$";
  if (!r.object(doc, root,
                {"name", "parameters", "material", "load", "quadrature", "patches", "interfaces", "rom",
                 "optimization"}))
    throw ConfigError(r.issues);

  r.opt(doc, root, "name", c.name, KLROM_READ(string));

  if (const json* p = r.field(doc, root, "parameters", true)) {
    const std::string pp = "$.parameters";
    if (r.object(*p, pp, {"names", "lower", "upper"})) {
      if (const json* n = r.field(*p, pp, "names", true)) {
        if (!n->is_array() || n->empty()) r.fail(pp + ".names", "expected a non-empty array of strings");
        else
          for (std::size_t i = 0; i < n->size(); ++i) {
            std::string s;
            r.string((*n)[i], Reader::at(pp + ".names", i), s);
            c.parameter_names.push_back(s);
          }
      }
      const int m = static_cast<int>(c.parameter_names.size());
      if (const json* v = r.field(*p, pp, "lower", true)) r.numbers(*v, pp + ".lower", c.lower, m);
      if (const json* v = r.field(*p, pp, "upper", true)) r.numbers(*v, pp + ".upper", c.upper, m);
    }
  }

  if (const json* m = r.field(doc, root, "material", true)) {
    const std::string mp = "$.material";
    if (r.object(*m, mp, {"E", "nu", "thickness"})) {
      r.req(*m, mp, "E", c.material.E, KLROM_READ(number));
      r.req(*m, mp, "nu", c.material.nu, KLROM_READ(number));
      r.req(*m, mp, "thickness", c.material.thickness, KLROM_READ(number));
      try {
        c.material.validate();
      } catch (const DomainError& e) {
        r.fail(mp, e.what());
      }
    }
  }

  if (const json* l = r.field(doc, root, "load", true)) {
    const std::string lp = "$.load";
    if (r.object(*l, lp, {"type", "value"})) {
      r.req(*l, lp, "type", c.load_type, [&](const json& v, const std::string& p, std::string& o) {
        r.string(v, p, o, {"constant", "manufactured_plate"});
      });
      if (c.load_type == "constant") r.req(*l, lp, "value", c.load_value, KLROM_READ(vec3));
      else if (l->contains("value")) r.fail(lp + ".value", "not valid for load type '" + c.load_type + "'");
    }
  }

  if (const json* q = r.field(doc, root, "quadrature", false)) {
    const std::string qp = "$.quadrature";
    if (r.object(*q, qp, {"order", "depth", "ersatz"})) {
      r.opt(*q, qp, "ersatz", c.quadrature.ersatz, KLROM_READ(number));
      if (!(c.quadrature.ersatz >= 0.0 && c.quadrature.ersatz < 1.0)) r.fail(qp + ".ersatz", "must lie in [0, 1)");
      r.opt(*q, qp, "order", c.quadrature.order, KLROM_READ(integer));
      r.opt(*q, qp, "depth", c.quadrature.depth, KLROM_READ(integer));
      if (c.quadrature.order < 0 || c.quadrature.order > 32) r.fail(qp + ".order", "must lie in [0, 32]");
      if (c.quadrature.depth < 1) r.fail(qp + ".depth", "must be >= 1");
    }
  }

  if (const json* ps = r.field(doc, root, "patches", true)) {
    if (!ps->is_array() || ps->empty()) r.fail("$.patches", "expected a non-empty array");
    else
      for (std::size_t i = 0; i < ps->size(); ++i) {
        PatchConfig pc;
        read_patch(r, (*ps)[i], Reader::at("$.patches", i), pc);
        c.patches.push_back(std::move(pc));
      }
  }

  if (const json* is = r.field(doc, root, "interfaces", false)) {
    if (!is->is_array()) r.fail("$.interfaces", "expected an array");
    else
      for (std::size_t i = 0; i < is->size(); ++i) {
        const std::string ip = Reader::at("$.interfaces", i);
        InterfaceConfig ic;
        if (r.object((*is)[i], ip, {"a", "b"})) {
          if (const json* a = r.field((*is)[i], ip, "a", true)) read_side(r, *a, ip + ".a", ic.a);
          if (const json* b = r.field((*is)[i], ip, "b", true)) read_side(r, *b, ip + ".b", ic.b);
        }
        c.interfaces.push_back(ic);
      }
  }

  if (const json* ro = r.field(doc, root, "rom", false)) {
    const std::string rp = "$.rom";
    if (r.object(*ro, rp, {"num_samples", "num_clusters", "eps_pod", "eps_deim", "seed", "max_basis", "max_terms"})) {
      r.opt(*ro, rp, "num_samples", c.rom.num_samples, KLROM_READ(integer));
      r.opt(*ro, rp, "num_clusters", c.rom.num_clusters, KLROM_READ(integer));
      r.opt(*ro, rp, "eps_pod", c.rom.eps_pod, KLROM_READ(number));
      r.opt(*ro, rp, "eps_deim", c.rom.eps_deim, KLROM_READ(number));
      if (const json* s = r.field(*ro, rp, "seed", false)) {
        if (!s->is_number_unsigned()) r.fail(rp + ".seed", "expected a non-negative integer");
        else c.rom.seed = s->get<std::uint64_t>();
      }
      r.opt(*ro, rp, "max_basis", c.rom.max_basis, KLROM_READ(integer));
      r.opt(*ro, rp, "max_terms", c.rom.max_terms, KLROM_READ(integer));
      if (c.rom.num_samples < 1) r.fail(rp + ".num_samples", "must be positive");
      if (c.rom.num_clusters < 1) r.fail(rp + ".num_clusters", "must be positive");
      if (c.rom.num_clusters > c.rom.num_samples) r.fail(rp + ".num_clusters", "must not exceed num_samples");
      if (!(c.rom.eps_pod > 0.0 && c.rom.eps_pod < 1.0)) r.fail(rp + ".eps_pod", "must lie in (0, 1)");
      if (!(c.rom.eps_deim >= 0.0 && c.rom.eps_deim < 1.0)) r.fail(rp + ".eps_deim", "must lie in [0, 1) (0 = eps_pod / 100)");
      if (c.rom.max_basis < 0 || c.rom.max_terms < 0) r.fail(rp, "max_basis and max_terms must be >= 0");
    }
  }

  if (const json* o = r.field(doc, root, "optimization", false)) {
    const std::string op = "$.optimization";
    auto& oc = c.optimization;
    if (r.object(*o, op, {"initial", "volume_cap", "volume_measure", "displacement_cap", "max_iterations"})) {
      if (const json* v = r.field(*o, op, "initial", false)) r.numbers(*v, op + ".initial", oc.initial);
      if (const json* v = r.field(*o, op, "volume_cap", false)) {
        double x = 0.0;
        if (r.number(*v, op + ".volume_cap", x)) oc.volume_cap = x;
        if (!(x > 0.0)) r.fail(op + ".volume_cap", "must be positive");
      }
      r.opt(*o, op, "volume_measure", oc.volume_measure, [&](const json& v, const std::string& p, std::string& s) {
        r.string(v, p, s, {"volume", "area"});
      });
      if (const json* v = r.field(*o, op, "displacement_cap", false)) {
        double x = 0.0;
        if (r.number(*v, op + ".displacement_cap", x)) oc.displacement_cap = x;
        if (!(x > 0.0)) r.fail(op + ".displacement_cap", "must be positive");
      }
      r.opt(*o, op, "max_iterations", oc.max_iterations, KLROM_READ(integer));
      if (oc.max_iterations < 1) r.fail(op + ".max_iterations", "must be positive");
    }
  }

  check_references(r, c);
  if (!r.issues.empty()) throw ConfigError(r.issues);
  return c;
}

#undef KLROM_READ

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open configuration file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

json to_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }
json to_json(const Vec2& v) { return json::array({v[0], v[1]}); }
json to_json(const PointGradient& g) {
  json o = json::object();
  for (const auto& [k, v] : g) o[k] = to_json(v);
  return o;
}

json to_json(const PatchConfig& p) {
  json j;
  j["id"] = p.id;
  const GeometryConfig& g = p.geometry;
  json gj;
  gj["type"] = g.type;
  if (g.type == "plane") {
    gj["origin"] = to_json(g.origin);
    gj["edge_u"] = to_json(g.edge_u);
    gj["edge_v"] = to_json(g.edge_v);
  } else if (g.type == "cylinder_arc") {
    gj["radius"] = g.radius;
    gj["half_angle_deg"] = g.half_angle_deg;
    gj["y0"] = g.y0;
    gj["length"] = g.length;
    gj["fit_degree"] = g.fit_degree;
    gj["fit_elements"] = g.fit_elements;
  } else {
    gj["degree"] = g.degree;
    gj["knots_u"] = g.knots_u;
    gj["knots_v"] = g.knots_v;
    json cps = json::array();
    for (const auto& c : g.control_points) cps.push_back(to_json(c));
    gj["control_points"] = cps;
  }
  j["geometry"] = gj;
  json modes = json::array();
  for (const auto& m : p.shape_modes)
    modes.push_back({{"parameter", m.parameter},
                     {"direction", to_json(m.direction)},
                     {"amplitude", m.amplitude},
                     {"profile_u", m.profile_u},
                     {"profile_v", m.profile_v}});
  j["shape_modes"] = modes;
  json an;
  an["degree"] = p.analysis.degree;
  if (p.analysis.knots_u.empty()) an["elements"] = {p.analysis.elements[0], p.analysis.elements[1]};
  else {
    an["knots_u"] = p.analysis.knots_u;
    an["knots_v"] = p.analysis.knots_v;
  }
  an["interior_knot_shift"] = p.analysis.interior_knot_shift;
  j["analysis"] = an;
  json trims = json::array();
  for (const auto& t : p.trims) {
    json tj;
    tj["type"] = t.type;
    if (t.type == "circle") {
      tj["center"] = to_json(t.center);
      tj["center_gradient"] = to_json(t.center_gradient);
      tj["radius"] = t.radius;
      tj["remove"] = t.remove;
    } else {
      tj["degree"] = t.degree;
      tj["knots"] = t.knots;
      json cps = json::array(), grads = json::array();
      for (const auto& c : t.control_points) cps.push_back(to_json(c));
      for (const auto& g2 : t.control_point_gradients) grads.push_back(to_json(g2));
      tj["control_points"] = cps;
      if (!t.control_point_gradients.empty()) tj["control_point_gradients"] = grads;
      tj["removed_side"] = t.removed_side;
    }
    trims.push_back(tj);
  }
  j["trims"] = trims;
  json dir = json::array();
  for (const auto& d : p.dirichlet) {
    json dj;
    if (d.function) dj["function"] = {(*d.function)[0], (*d.function)[1]};
    else dj["edge"] = d.edge;
    json comps = json::array();
    for (int c = 0; c < 3; ++c)
      if (d.components[c]) comps.push_back(std::string(1, static_cast<char>('x' + c)));
    dj["components"] = comps;
    dj["clamp"] = d.clamp;
    dir.push_back(dj);
  }
  j["dirichlet"] = dir;
  json neu = json::array();
  for (const auto& n : p.neumann)
    neu.push_back({{"edge", n.edge}, {"traction", to_json(n.traction)}, {"moment", n.moment}});
  j["neumann"] = neu;
  return j;
}

json to_json(const InterfaceSideConfig& s) {
  json j;
  j["patch"] = s.patch;
  if (s.edge) j["edge"] = *s.edge;
  if (s.trim) j["trim"] = *s.trim;
  return j;
}

}  // namespace

std::string serialize_config(const ModelConfig& c) {
  json j;
  j["name"] = c.name;
  j["parameters"] = {{"names", c.parameter_names}, {"lower", c.lower}, {"upper", c.upper}};
  j["material"] = {{"E", c.material.E}, {"nu", c.material.nu}, {"thickness", c.material.thickness}};
  j["load"] = {{"type", c.load_type}};
  if (c.load_type == "constant") j["load"]["value"] = to_json(c.load_value);
  j["quadrature"] = {{"order", c.quadrature.order}, {"depth", c.quadrature.depth},
                     {"ersatz", c.quadrature.ersatz}};
  json patches = json::array();
  for (const auto& p : c.patches) patches.push_back(to_json(p));
  j["patches"] = patches;
  json ifs = json::array();
  for (const auto& i : c.interfaces) ifs.push_back({{"a", to_json(i.a)}, {"b", to_json(i.b)}});
  j["interfaces"] = ifs;
  j["rom"] = {{"num_samples", c.rom.num_samples}, {"num_clusters", c.rom.num_clusters},
              {"eps_pod", c.rom.eps_pod},         {"eps_deim", c.rom.eps_deim},
              {"seed", c.rom.seed},               {"max_basis", c.rom.max_basis},
              {"max_terms", c.rom.max_terms}};
  json o;
  o["initial"] = c.optimization.initial;
  if (c.optimization.volume_cap) o["volume_cap"] = *c.optimization.volume_cap;
  o["volume_measure"] = c.optimization.volume_measure;
  if (c.optimization.displacement_cap) o["displacement_cap"] = *c.optimization.displacement_cap;
  o["max_iterations"] = c.optimization.max_iterations;
  j["optimization"] = o;
  return j.dump(2) + "\n";
}

namespace {

ParamGradient gradient_matrix(const PointGradient& g, const std::vector<std::string>& names) {
  if (g.empty()) return {};
  ParamGradient m = ParamGradient::Zero(2, static_cast<int>(names.size()));
  for (std::size_t i = 0; i < names.size(); ++i)
    if (auto it = g.find(names[i]); it != g.end()) m.col(i) = it->second;
  return m;
}

int parameter_index(const std::vector<std::string>& names, const std::string& name) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw ConfigError("unknown parameter '" + name + "'");
}

}  // namespace

Model build_model(const ModelConfig& c) {
  Model m;
  m.parameters = c.parameter_box();
  m.material = c.material;
  m.quadrature = c.quadrature;
  if (c.load_type == "manufactured_plate") m.load.kind = LoadSpec::Kind::ManufacturedPlate;
  else m.load.value = c.load_value;
  const int M = m.parameters.dim();

  for (const auto& pc : c.patches) {
    Patch p;
    p.id = pc.id;
    const GeometryConfig& g = pc.geometry;
    if (g.type == "plane") p.geometry = make_plane(g.origin, g.edge_u, g.edge_v);
    else if (g.type == "cylinder_arc")
      p.geometry = make_cylinder_arc(g.radius, g.half_angle_deg * std::numbers::pi / 180.0, g.y0, g.length,
                                     g.fit_degree, g.fit_elements);
    else {
      p.geometry.space = TensorSpace(KnotVector(g.degree, g.knots_u), KnotVector(g.degree, g.knots_v));
      p.geometry.base = g.control_points;
    }
    for (const auto& sm : pc.shape_modes)
      add_shape_mode(p.geometry, parameter_index(c.parameter_names, sm.parameter), M, sm.direction, sm.amplitude,
                     sm.profile_u == "bubble" ? Profile::Bubble : Profile::Constant,
                     sm.profile_v == "bubble" ? Profile::Bubble : Profile::Constant);

    const AnalysisConfig& an = pc.analysis;
    if (an.knots_u.empty()) {
      p.analysis = TensorSpace(analysis_knots(an.degree, an.elements[0], an.interior_knot_shift),
                               analysis_knots(an.degree, an.elements[1], an.interior_knot_shift));
    } else {
      auto shifted = [&](std::vector<double> k) {
        for (std::size_t i = an.degree + 1; i + an.degree + 1 < k.size(); ++i) k[i] += an.interior_knot_shift;
        return KnotVector(an.degree, std::move(k));
      };
      p.analysis = TensorSpace(shifted(an.knots_u), shifted(an.knots_v));
    }

    for (const auto& t : pc.trims) {
      if (t.type == "circle") {
        CircleTrim ct;
        ct.center = t.center;
        ct.center_gradient = gradient_matrix(t.center_gradient, c.parameter_names);
        ct.radius = t.radius;
        ct.remove_inside = t.remove == "inside";
        p.trims.emplace_back(ct);
      } else {
        CurveTrim ct;
        ct.knots = KnotVector(t.degree, t.knots);
        ct.control_points = t.control_points;
        for (const auto& g2 : t.control_point_gradients) {
          ParamGradient gm = gradient_matrix(g2, c.parameter_names);
          if (gm.cols() == 0) gm = ParamGradient::Zero(2, M);
          ct.control_point_gradients.push_back(gm);
        }
        ct.removed = t.removed_side == "left" ? Side::Left : Side::Right;
        p.trims.emplace_back(ct);
      }
    }
    for (const auto& d : pc.dirichlet) {
      DirichletSpec ds;
      ds.edge = *edge_from_name(d.edge);
      ds.components = d.components;
      ds.clamp = d.clamp;
      ds.function = d.function;
      if (ds.function) {
        const auto [i, j] = *ds.function;
        if (i >= p.analysis.num_basis(0) || j >= p.analysis.num_basis(1))
          throw ConfigError("patch " + std::to_string(p.id) + ": Dirichlet function index out of range");
      }
      p.dirichlet.push_back(ds);
    }
    for (const auto& n : pc.neumann) p.neumann.push_back({*edge_from_name(n.edge), n.traction, n.moment});
    m.patches.push_back(std::move(p));
  }

  auto index_of = [&](int id) {
    for (std::size_t i = 0; i < c.patches.size(); ++i)
      if (c.patches[i].id == id) return static_cast<int>(i);
    throw ConfigError("patch id " + std::to_string(id) + " does not exist");
  };
  for (const auto& ic : c.interfaces) {
    InterfaceSpec s;
    for (int k = 0; k < 2; ++k) {
      const InterfaceSideConfig& src = k == 0 ? ic.a : ic.b;
      InterfaceSide& dst = k == 0 ? s.a : s.b;
      dst.patch = index_of(src.patch);
      if (src.edge) dst.edge = edge_from_name(*src.edge);
      dst.trim = src.trim.value_or(-1);
    }
    m.interfaces.push_back(s);
  }
  return m;
}

ParamVector parse_parameter_list(const std::string& text, int expected_dim) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      throw DomainError("cannot parse parameter value '" + item + "'");
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used != item.size() || !std::isfinite(x)) throw DomainError("cannot parse parameter value '" + item + "'");
    v.push_back(x);
  }
  if (static_cast<int>(v.size()) != expected_dim)
    throw DomainError("expected " + std::to_string(expected_dim) + " parameter values, got " + std::to_string(v.size()));
  return Eigen::Map<Eigen::VectorXd>(v.data(), v.size());
}

}  // namespace klrom
