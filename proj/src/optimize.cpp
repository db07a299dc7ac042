#include "klrom/optimize.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "klrom/errors.hpp"
#include "klrom/rom.hpp"

namespace klrom {

Eigen::VectorXd central_difference(const ScalarFn& f, const ParamVector& mu, const ParameterBox& box,
                                   double rel_step) {
  Eigen::VectorXd g(mu.size());
  for (int m = 0; m < mu.size(); ++m) {
    const double h = rel_step * (box.upper[m] - box.lower[m]);
    ParamVector a = mu, b = mu;
    a[m] = std::min(mu[m] + h, box.upper[m]);
    b[m] = std::max(mu[m] - h, box.lower[m]);
    g[m] = (f(a) - f(b)) / (a[m] - b[m]);
  }
  return g;
}

namespace {

struct Evaluator {
  const DesignProblem& problem;
  const OptimizerSettings& settings;
  Eigen::VectorXd range;
  int evaluations = 0;
  double rho = 0.0;
  double scale = 1.0;

  ParamVector to_mu(const Eigen::VectorXd& z) const {
    return problem.bounds.lower + (z.array() * range.array()).matrix();
  }

  double objective(const ParamVector& mu, Eigen::VectorXd* grad_mu) {
    ++evaluations;
    if (problem.gradient == GradientMode::Exact) return problem.objective(mu, grad_mu);
    const double j = problem.objective(mu, nullptr);
    if (grad_mu) {
      grad_mu->resize(mu.size());
      for (int m = 0; m < mu.size(); ++m) {
        const double h = settings.fd_step * range[m];
        ParamVector p = mu;
        const bool back = mu[m] + h > problem.bounds.upper[m];
        p[m] += back ? -h : h;
        ++evaluations;
        const double jp = problem.objective(p, nullptr);
        (*grad_mu)[m] = back ? (j - jp) / h : (jp - j) / h;
      }
    }
    return j;
  }

  std::vector<double> violations(const ParamVector& mu) const {
    std::vector<double> v;
    for (const auto& c : problem.constraints) v.push_back((c.value(mu) - c.cap) / c.cap);
    return v;
  }

  /// Penalized objective in normalized coordinates z in [0,1]^M.
  double penalized(const Eigen::VectorXd& z, Eigen::VectorXd* grad_z, double* raw = nullptr) {
    const ParamVector mu = to_mu(z);
    Eigen::VectorXd gmu;
    const double j = objective(mu, grad_z ? &gmu : nullptr);
    if (raw) *raw = j;
    double phi = j;
    for (const auto& c : problem.constraints) {
      const double g = (c.value(mu) - c.cap) / c.cap;
      if (g <= 0.0) continue;
      phi += rho * scale * g * g;
      if (grad_z) {
        const Eigen::VectorXd dg = central_difference(c.value, mu, problem.bounds) / c.cap;
        gmu += 2.0 * rho * scale * g * dg;
      }
    }
    if (grad_z) *grad_z = (gmu.array() * range.array()).matrix();
    return phi;
  }
};

Eigen::VectorXd clamp01(const Eigen::VectorXd& z) { return z.cwiseMax(0.0).cwiseMin(1.0); }

}  // namespace

OptimizationResult optimize(const DesignProblem& problem, const ParamVector& initial,
                            const OptimizerSettings& settings) {
  const ParameterBox& box = problem.bounds;
  const int M = box.dim();
  if (initial.size() != M) throw DomainError("initial design has the wrong dimension");
  if (!((box.upper - box.lower).array() > 0.0).all()) throw DomainError("optimization bounds are empty");

  Evaluator ev{problem, settings, box.upper - box.lower};
  OptimizationResult res;
  Eigen::VectorXd z = clamp01(((initial - box.lower).array() / ev.range.array()).matrix());

  if (!problem.constraints.empty()) {
    Eigen::MatrixXd pts = latin_hypercube(box, 32, 12345);
    for (const auto& c : problem.constraints) {
      bool feasible = c.value(ev.to_mu(z)) <= c.cap;
      for (int i = 0; i < pts.cols() && !feasible; ++i) feasible = c.value(pts.col(i)) <= c.cap;
      if (!feasible) throw InfeasibleError("constraint '" + c.name + "' is violated at every sampled design");
    }
  }

  res.initial_objective = ev.objective(ev.to_mu(z), nullptr);
  ev.scale = std::max(std::abs(res.initial_objective), std::numeric_limits<double>::min());
  ev.rho = settings.initial_penalty;

  int iteration = 0;
  auto record = [&](const Eigen::VectorXd& zz, double j, double phi, const Eigen::VectorXd& g) {
    HistoryEntry h;
    h.iteration = iteration;
    h.mu = ev.to_mu(zz);
    h.objective = j;
    h.penalized = phi;
    for (const auto& c : problem.constraints) h.constraints.push_back(c.value(h.mu));
    const Eigen::VectorXd pg = clamp01(zz - g) - zz;
    h.gradient_norm = pg.norm();
    h.evaluations = ev.evaluations;
    res.history.push_back(std::move(h));
  };

  const int outer_loops = problem.constraints.empty() ? 1 : settings.max_outer;
  for (int outer = 0; outer < outer_loops; ++outer) {
    Eigen::VectorXd g;
    double j = 0.0;
    double f = ev.penalized(z, &g, &j);
    if (res.history.empty()) record(z, j, f, g);
    const double gmax = g.cwiseAbs().maxCoeff();
    const double gamma = gmax > 0.0 ? 0.1 / gmax : 1.0;
    Eigen::MatrixXd H = gamma * Eigen::MatrixXd::Identity(M, M);
    res.converged = false;

    for (int it = 0; it < settings.max_iterations; ++it) {
      const Eigen::VectorXd pg = clamp01(z - g) - z;
      if (pg.norm() <= 1e-8 * std::abs(f) + 1e-12) {
        res.converged = true;
        break;
      }
      std::vector<char> free(M, 1);
      for (int m = 0; m < M; ++m)
        if ((z[m] <= 0.0 && g[m] > 0.0) || (z[m] >= 1.0 && g[m] < 0.0)) free[m] = 0;
      Eigen::VectorXd d = -H * g;
      for (int m = 0; m < M; ++m)
        if (!free[m]) d[m] = 0.0;
      if (d.dot(g) >= 0.0) {
        H = gamma * Eigen::MatrixXd::Identity(M, M);
        d = -gamma * g;
        for (int m = 0; m < M; ++m)
          if (!free[m]) d[m] = 0.0;
      }
      double alpha = 1.0;
      bool accepted = false, tiny = false;
      Eigen::VectorXd zn;
      double fn = 0.0, jn = 0.0;
      for (int ls = 0; ls < 60; ++ls) {
        zn = clamp01(z + alpha * d);
        if ((zn - z).norm() <= 1e-10) {
          tiny = true;
          break;
        }
        fn = ev.penalized(zn, nullptr, &jn);
        if (fn <= f + 1e-4 * g.dot(zn - z)) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        res.converged = tiny;
        break;
      }
      Eigen::VectorXd gn;
      fn = ev.penalized(zn, &gn, &jn);
      const Eigen::VectorXd s = zn - z, y = gn - g;
      const double sy = s.dot(y);
      if (sy > 1e-12 * s.norm() * y.norm()) {
        const double r = 1.0 / sy;
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(M, M);
        H = (I - r * s * y.transpose()) * H * (I - r * y * s.transpose()) + r * s * s.transpose();
      }
      z = zn;
      f = fn;
      g = gn;
      j = jn;
      ++iteration;
      record(z, j, f, g);
      if (s.norm() <= 1e-10) {
        res.converged = true;
        break;
      }
    }
    double worst = 0.0;
    for (double v : ev.violations(ev.to_mu(z))) worst = std::max(worst, v);
    if (worst <= 1e-9) break;
    ev.rho *= 10.0;
  }

  res.mu = ev.to_mu(z);
  res.objective = ev.objective(res.mu, nullptr);
  res.evaluations = ev.evaluations;
  return res;
}

DesignProblem compliance_problem(const RomArtifact& art, const Model& model, const OptimizationConfig& oc,
                                 GradientMode mode) {
  DesignProblem prob;
  prob.bounds = art.parameters;
  prob.objective = [&art](const ParamVector& mu, Eigen::VectorXd* g) { return rom_compliance(art, mu, g); };
  prob.gradient = mode;
  if (oc.volume_cap) {
    const bool area = oc.volume_measure == "area";
    const double t = model.material.thickness;
    prob.constraints.push_back({area ? "area" : "volume",
                                [&model, area, t](const ParamVector& mu) {
                                  const double v = model_volume(model, mu);
                                  return area ? v / t : v;
                                },
                                *oc.volume_cap});
  }
  if (oc.displacement_cap) {
    prob.constraints.push_back(
        {"max_displacement",
         [&art](const ParamVector& mu) { return rom_solve(art, mu, true).full.cwiseAbs().maxCoeff(); },
         *oc.displacement_cap});
  }
  return prob;
}

ParamVector initial_design(const RomArtifact& art, const OptimizationConfig& oc) {
  if (oc.initial.empty()) return art.parameters.lower;
  if (static_cast<int>(oc.initial.size()) != art.parameters.dim())
    throw ConfigError("$.optimization.initial: expected " + std::to_string(art.parameters.dim()) + " values");
  return Eigen::Map<const Eigen::VectorXd>(oc.initial.data(), oc.initial.size());
}

void write_history_csv(std::ostream& os, const OptimizationResult& result, const ParameterBox& box,
                       const std::vector<Constraint>& constraints) {
  os << "iteration";
  for (int m = 0; m < box.dim(); ++m)
    os << "," << (m < static_cast<int>(box.names.size()) ? box.names[m] : "mu" + std::to_string(m));
  os << ",objective,penalized";
  for (const auto& c : constraints) os << "," << c.name;
  os << ",grad_norm,evaluations\n";
  os.precision(12);
  for (const auto& h : result.history) {
    os << h.iteration;
    for (int m = 0; m < h.mu.size(); ++m) os << "," << h.mu[m];
    os << "," << h.objective << "," << h.penalized;
    for (double c : h.constraints) os << "," << c;
    os << "," << h.gradient_norm << "," << h.evaluations << "\n";
  }
}

}  // namespace klrom
