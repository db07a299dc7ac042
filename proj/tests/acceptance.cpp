// Acceptance run: one PASS/FAIL line per criterion, details indented underneath.
// Usage: acceptance [--properties <test_properties binary>] [--only 1,2,...]
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "klrom/config.hpp"
#include "klrom/optimize.hpp"
#include "klrom/rom.hpp"

using namespace klrom;

namespace {

const std::string kFixtures = KLROM_FIXTURE_DIR;
using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool ok, const std::string& summary) {
  std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", summary.c_str());
  std::fflush(stdout);
  failures += !ok;
}

void detail(const char* fmt, auto... args) {
  std::printf("    ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

/// Least-squares slope of log(err) against log(1/h).
double fitted_rate(const std::vector<int>& n, const std::vector<double>& err) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int m = static_cast<int>(n.size());
  for (int i = 0; i < m; ++i) {
    const double x = std::log(n[i]), y = std::log(err[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  return -(m * sxy - sx * sy) / (m * sxx - sx * sx);
}

struct Validation {
  double max_err = 0.0, mean_err = 0.0, t_fom = 0.0, t_rom = 0.0;
  int max_n = 0;
};

Validation validate(const Model& model, const RomArtifact& art, int num_test, std::uint64_t seed) {
  Validation v;
  const Eigen::MatrixXd tests = uniform_samples(art.parameters, num_test, seed);
  for (int i = 0; i < num_test; ++i) {
    const ParamVector mu = tests.col(i);
    auto t0 = Clock::now();
    const FomSolution f = solve_fom(assemble_fom(model, mu));
    v.t_fom += since(t0);
    const int reps = 20;
    RomSolution r;
    t0 = Clock::now();
    for (int k = 0; k < reps; ++k) r = rom_solve(art, mu, true);
    v.t_rom += since(t0) / reps;
    const double e = rom_error(r.full, f.u, art.gram);
    v.max_err = std::max(v.max_err, e);
    v.mean_err += e / num_test;
    v.max_n = std::max(v.max_n, static_cast<int>(r.coeffs.size()));
  }
  return v;
}

struct Trained {
  ModelConfig cfg;
  Model model;
  RomArtifact art;
};

Trained train_fixture(const std::string& name) {
  Trained t{load_config(kFixtures + "/" + name), {}, {}};
  t.model = build_model(t.cfg);
  t.art = train(t.model, t.cfg.rom);
  return t;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. manufactured plate convergence
void criterion1() {
  const auto t0 = Clock::now();
  const double pi = std::numbers::pi;
  bool ok = true;
  std::string summary;
  for (int p : {2, 3}) {
    std::vector<int> ns{4, 8, 16, 32};
    std::vector<double> l2s, h2s;
    for (int n : ns) {
      Model m;
      m.parameters.names = {"mu"};
      m.parameters.lower = Eigen::VectorXd::Zero(1);
      m.parameters.upper = Eigen::VectorXd::Ones(1);
      m.material = {1e6, 0.3, 0.022};
      Patch pa;
      pa.geometry = make_plane(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY());
      pa.analysis = TensorSpace(analysis_knots(p, n), analysis_knots(p, n));
      for (int e = 0; e < 4; ++e) pa.dirichlet.push_back({static_cast<Edge>(e), {true, true, true}, false, {}});
      m.patches.push_back(pa);
      m.load.kind = LoadSpec::Kind::ManufacturedPlate;
      const FomSolution sol = solve_fom(assemble_fom(m, Eigen::VectorXd::Zero(1)));
      double l2 = 0, h2 = 0;
      for (int ev = 0; ev < n; ++ev)
        for (int eu = 0; eu < n; ++eu) {
          const Box b{Vec2(double(eu) / n, double(ev) / n), Vec2(double(eu + 1) / n, double(ev + 1) / n)};
          const QuadratureRule r = tensor_gauss(b, p + 3);
          for (std::size_t g = 0; g < r.size(); ++g) {
            const Vec2 x = r.points[g];
            const FieldJet f = evaluate_field(m.patches[0].analysis, {sol.u.data(), std::size_t(sol.u.size())}, x);
            const double s1 = std::sin(pi * x[0]), s2 = std::sin(pi * x[1]);
            const double c1 = std::cos(pi * x[0]), c2 = std::cos(pi * x[1]);
            const double e0 = f.v[2] - s1 * s2;
            const double ex = f.d[0][2] - pi * c1 * s2, ey = f.d[1][2] - pi * s1 * c2;
            const double exx = f.dd[0][2] + pi * pi * s1 * s2, exy = f.dd[1][2] - pi * pi * c1 * c2;
            const double eyy = f.dd[2][2] + pi * pi * s1 * s2;
            l2 += r.weights[g] * e0 * e0;
            h2 += r.weights[g] * (e0 * e0 + ex * ex + ey * ey + exx * exx + 2 * exy * exy + eyy * eyy);
          }
        }
      l2s.push_back(std::sqrt(l2));
      h2s.push_back(std::sqrt(h2));
    }
    const double rl2 = fitted_rate(ns, l2s), rh2 = fitted_rate(ns, h2s);
    const bool okh = rh2 >= p - 1 - 0.2, okl = rl2 >= p + 1 - 0.3;
    detail("p=%d  H2 errors %.3e %.3e %.3e %.3e  rate %.2f (need >= %.1f) %s", p, h2s[0], h2s[1], h2s[2], h2s[3],
           rh2, p - 1 - 0.2, okh ? "ok" : "MISS");
    detail("p=%d  L2 errors %.3e %.3e %.3e %.3e  rate %.2f (need >= %.1f) %s", p, l2s[0], l2s[1], l2s[2], l2s[3],
           rl2, p + 1 - 0.3, okl ? "ok" : "MISS");
    ok = ok && okh && okl;
    summary += fmt("p=%d rates H2 %.2f L2 %.2f; ", p, rh2, rl2);
  }
  const double t = since(t0);
  ok = ok && t < 60.0;
  report(1, ok, summary + fmt("%.1f s", t));
}

// 2. trimmed two-patch planar fixture, conforming and non-conforming
void criterion2() {
  bool ok = true;
  double errs[2];
  std::string summary;
  int k = 0;
  for (const char* name : {"trimmed_planar_conforming.json", "trimmed_planar_nonconforming.json"}) {
    const auto t0 = Clock::now();
    const Trained t = train_fixture(name);
    const double offline = since(t0);
    int max_n = 0;
    for (const auto& c : t.art.locals) max_n = std::max(max_n, c.dim());
    const Validation v = validate(t.model, t.art, 10, 5);
    const bool this_ok = t.cfg.rom.num_clusters == 8 && t.cfg.rom.num_samples == 200 && v.max_err <= 1e-3 &&
                         max_n <= 15 && offline < 900.0;
    detail("%s: N_c=%d N_s=%d  max N %d  max err %.3e  mean err %.3e  offline %.0f s  %s", name,
           t.cfg.rom.num_clusters, t.cfg.rom.num_samples, max_n, v.max_err, v.mean_err, offline,
           this_ok ? "ok" : "MISS");
    ok = ok && this_ok;
    errs[k++] = v.max_err;
    summary += fmt("%s max err %.2e N<=%d; ", k == 1 ? "conforming" : "non-conforming", v.max_err, max_n);
  }
  const double ratio = std::max(errs[0], errs[1]) / std::min(errs[0], errs[1]);
  detail("error ratio between variants %.2f (need <= 10)", ratio);
  ok = ok && ratio <= 10.0;
  report(2, ok, summary + fmt("ratio %.1f", ratio));
}

struct OptimumCheck {
  double mu = 0.0, reduction = 0.0;
};

OptimumCheck run_optimization(const Trained& t) {
  const DesignProblem prob = compliance_problem(t.art, t.model, t.cfg.optimization);
  OptimizerSettings s;
  s.max_iterations = t.cfg.optimization.max_iterations;
  const OptimizationResult r = optimize(prob, initial_design(t.art, t.cfg.optimization), s);
  for (const auto& c : prob.constraints) detail("constraint %s = %.6e (cap %.6e)", c.name.c_str(), c.value(r.mu), c.cap);
  detail("optimizer: %zu iterations, %d evaluations, converged %s", r.history.size() - 1, r.evaluations,
         r.converged ? "yes" : "no");
  return {r.mu[0], 100.0 * (1.0 - r.objective / r.initial_objective)};
}

double speedup3 = 0.0, speedup4 = 0.0;

// 3. untrimmed two-patch roof
void criterion3() {
  const Trained t = train_fixture("scordelis_lo_multipatch.json");
  const ClusterRom& c = t.art.locals.front();
  const Validation v = validate(t.model, t.art, 10, 5);
  speedup3 = v.t_fom / v.t_rom;
  const bool counts = c.stiffness.size() >= 6 && c.stiffness.size() <= 12 && c.load.size() >= 4 &&
                      c.load.size() <= 8 && c.dim() >= 5 && c.dim() <= 9;
  detail("eps_POD %.0e  Q_a %d  Q_f %d  N %d  %s", t.cfg.rom.eps_pod, c.stiffness.size(), c.load.size(), c.dim(),
         counts ? "ok" : "MISS");
  detail("max rel H2 error %.3e on 10 test mu (need <= 1e-6) %s", v.max_err, v.max_err <= 1e-6 ? "ok" : "MISS");
  const OptimumCheck o = run_optimization(t);
  const bool opt = std::abs(o.mu - 5.3127) <= 0.1 && std::abs(o.reduction - 16.45) <= 2.0;
  detail("mu_opt %.4f (target 5.3127 +- 0.1), reduction %.2f %% (target 16.45 +- 2) %s", o.mu, o.reduction,
         opt ? "ok" : "MISS");
  report(3, counts && v.max_err <= 1e-6 && opt,
         fmt("Q_a %d Q_f %d N %d err %.1e mu_opt %.3f reduction %.2f%%", c.stiffness.size(), c.load.size(), c.dim(),
             v.max_err, o.mu, o.reduction));
}

// 4. trimmed roof with two moving holes
void criterion4() {
  const Trained t = train_fixture("scordelis_lo_holes.json");
  const Validation v = validate(t.model, t.art, 10, 5);
  speedup4 = v.t_fom / v.t_rom;
  detail("N_c %d  max rel H2 error %.3e (need <= 1e-4)", t.cfg.rom.num_clusters, v.max_err);
  const OptimumCheck o = run_optimization(t);
  const bool opt = std::abs(o.mu - 0.0319) <= 0.005 && std::abs(o.reduction - 8.0) <= 1.0;
  detail("mu_opt %.4f (target 0.0319 +- 0.005), reduction %.2f %% (target 8 +- 1) %s", o.mu, o.reduction,
         opt ? "ok" : "MISS");
  report(4, t.cfg.rom.num_clusters == 8 && v.max_err <= 1e-4 && opt,
         fmt("err %.1e mu_opt %.4f reduction %.2f%%", v.max_err, o.mu, o.reduction));
}

// 5. untrimmed roof deflection
void criterion5() {
  ModelConfig cfg = load_config(kFixtures + "/scordelis_lo_holes.json");
  cfg.patches[0].trims.clear();
  cfg.patches[0].analysis.degree = 3;
  cfg.patches[0].analysis.elements = {16, 16};
  const Model m = build_model(cfg);
  const FomSolution s = solve_fom(assemble_fom(m, Eigen::VectorXd::Zero(1)));
  const double w = -displacement_at(m, 0, Vec2(0.0, 0.5), s.u).z();
  const double rel = std::abs(w - 0.3024) / 0.3024;
  report(5, rel <= 0.01, fmt("free-edge midpoint deflection %.5f (reference 0.3024, deviation %.2f%%)", w, 100 * rel));
}

void criterion6() {
  const bool ok = speedup3 >= 10.0 && speedup4 >= 10.0;
  report(6, ok, fmt("speedup roof multipatch %.0fx, roof with holes %.0fx (need >= 10x)", speedup3, speedup4));
}

void criterion7(const std::string& binary) {
  if (binary.empty()) {
    report(7, false, "property suite binary not given (--properties)");
    return;
  }
  const std::string cmd = "\"" + binary + "\" --gtest_brief=1 > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  report(7, rc == 0, rc == 0 ? "all property suites pass" : "property suite failures (run test_properties)");
}

}  // namespace

int main(int argc, char** argv) {
  std::string props;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--properties" && i + 1 < argc) {
      props = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    } else {
      std::fprintf(stderr, "usage: %s [--properties <binary>] [--only 1,2,...]\n", argv[0]);
      return 2;
    }
  }
  auto want = [&](int k) { return only.empty() || only.count(k); };
  try {
    if (want(1)) criterion1();
    if (want(2)) criterion2();
    if (want(3) || want(6)) criterion3();
    if (want(4) || want(6)) criterion4();
    if (want(5)) criterion5();
    if (want(6)) criterion6();
    if (want(7)) criterion7(props);
  } catch (const std::exception& e) {
    std::printf("aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d criterion/criteria failed\n", failures);
  return failures ? 1 : 0;
}
