// Command-line front end: full-order solves, offline training, online queries,
// validation, cluster variance scans and shape optimization.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "klrom/artifact_io.hpp"
#include "klrom/config.hpp"
#include "klrom/errors.hpp"
#include "klrom/kmeans.hpp"
#include "klrom/optimize.hpp"
#include "klrom/rom.hpp"
#include "klrom/vtk.hpp"

namespace fs = std::filesystem;
using namespace klrom;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt_mu(const ParamVector& mu) {
  std::string s;
  char buf[32];
  for (int i = 0; i < mu.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.6g", i ? "," : "", mu[i]);
    s += buf;
  }
  return s;
}

ModelConfig artifact_config(const fs::path& artifact) {
  const fs::path p = artifact / "config.json";
  if (!fs::exists(p)) throw ArtifactError("artifact has no config.json; pass --config");
  return load_config(p);
}

void check_match(const RomArtifact& art, const Model& model) {
  if (art.num_dofs != model.num_dofs() || art.parameters.dim() != model.parameters.dim())
    throw ArtifactError("artifact (" + std::to_string(art.num_dofs) + " DOFs) does not match the configuration (" +
                        std::to_string(model.num_dofs()) + " DOFs)");
}

int cmd_fom(const std::string& config, const std::string& mu_text, const std::string& vtk, int subdivisions) {
  const ModelConfig cfg = load_config(config);
  const Model model = build_model(cfg);
  const ParamVector mu = parse_parameter_list(mu_text, model.parameters.dim());
  if (!model.parameters.contains(mu)) std::cout << "warning: mu lies outside the parameter box\n";
  const auto t0 = Clock::now();
  const FomSystem sys = assemble_fom(model, mu);
  const FomSolution sol = solve_fom(sys);
  const double t = seconds_since(t0);
  int active = 0;
  for (int i = 0; i < sys.size(); ++i) active += !sys.eliminated(i);
  std::printf("mu = (%s)\ndofs = %d (free %d)\ncompliance J = %.12e\nmax |u| = %.12e\nwall time = %.4f s\n",
              fmt_mu(mu).c_str(), sys.size(), active, sol.compliance, sol.u.cwiseAbs().maxCoeff(), t);
  const double volume = model_volume(model, mu);
  std::printf("active area = %.10e\nvolume (t * area) = %.10e\n", volume / model.material.thickness, volume);
  if (!vtk.empty()) {
    const VtkStats st = export_vtk(vtk, model, mu, sol.u, subdivisions);
    std::printf("wrote %s (%d points, %d cells)\n", vtk.c_str(), st.points, st.cells);
  }
  return 0;
}

int cmd_train(const std::string& config, const std::string& out) {
  const ModelConfig cfg = load_config(config);
  Model model = build_model(cfg);
  std::printf("training '%s': %d DOFs, N_s = %d, N_c = %d, eps_POD = %g, eps_DEIM = %g, seed = %llu\n",
              cfg.name.c_str(), model.num_dofs(), cfg.rom.num_samples, cfg.rom.num_clusters, cfg.rom.eps_pod,
              cfg.rom.resolved_eps_deim(), static_cast<unsigned long long>(cfg.rom.seed));
  RomArtifact art = train(model, cfg.rom);
  art.model_name = cfg.name;
  save_artifact(art, out);
  {
    std::ofstream c(fs::path(out) / "config.json", std::ios::trunc);
    c << serialize_config(cfg);
    if (!c) throw ArtifactError("cannot write config.json into " + out);
  }
  std::printf("%-8s %8s %6s %6s %6s\n", "cluster", "samples", "N", "Q_a", "Q_f");
  for (std::size_t k = 0; k < art.locals.size(); ++k) {
    const auto& c = art.locals[k];
    std::printf("%-8zu %8zu %6d %6d %6d\n", k, c.samples.size(), c.dim(), c.stiffness.size(), c.load.size());
  }
  std::printf("offline time = %.2f s\nartifact written to %s\n", art.offline_seconds, out.c_str());
  return 0;
}

int cmd_rom(const std::string& artifact, const std::string& mu_text, const std::string& config,
            const std::string& vtk, int subdivisions) {
  const RomArtifact art = load_artifact(artifact);
  const ParamVector mu = parse_parameter_list(mu_text, art.parameters.dim());
  const auto t0 = Clock::now();
  const RomSolution s = rom_solve(art, mu, true);
  const double t = seconds_since(t0);
  std::printf("mu = (%s)%s\ncluster = %d\nN = %d\nreduced compliance J_N = %.12e\nonline time = %.6f s\n",
              fmt_mu(mu).c_str(), s.extrapolated ? " (outside the training box: extrapolation)" : "", s.cluster,
              static_cast<int>(s.coeffs.size()), s.compliance, t);
  if (!vtk.empty()) {
    const ModelConfig cfg = config.empty() ? artifact_config(artifact) : load_config(config);
    const Model model = build_model(cfg);
    check_match(art, model);
    const VtkStats st = export_vtk(vtk, model, mu, s.full, subdivisions);
    std::printf("wrote %s (%d points, %d cells)\n", vtk.c_str(), st.points, st.cells);
  }
  return 0;
}

int cmd_validate(const std::string& artifact, const std::string& config, int num_test, std::uint64_t seed) {
  const RomArtifact art = load_artifact(artifact);
  const Model model = build_model(load_config(config));
  check_match(art, model);
  if (num_test < 1) throw DomainError("--num-test must be positive");
  const Eigen::MatrixXd tests = uniform_samples(art.parameters, num_test, seed);
  std::printf("%4s  %-24s %7s %4s %12s %12s %12s\n", "#", "mu", "cluster", "N", "rel_H2_err", "t_fom[s]",
              "t_rom[s]");
  double max_err = 0.0, sum_err = 0.0, t_fom = 0.0, t_rom = 0.0;
  for (int i = 0; i < num_test; ++i) {
    const ParamVector mu = tests.col(i);
    auto t0 = Clock::now();
    const FomSolution fom = solve_fom(assemble_fom(model, mu));
    const double tf = seconds_since(t0);
    // online solves are short; repeat them for a stable timing
    const int reps = 20;
    RomSolution rom;
    t0 = Clock::now();
    for (int r = 0; r < reps; ++r) rom = rom_solve(art, mu, true);
    const double tr = seconds_since(t0) / reps;
    const double err = rom_error(rom.full, fom.u, art.gram);
    max_err = std::max(max_err, err);
    sum_err += err;
    t_fom += tf;
    t_rom += tr;
    std::printf("%4d  %-24s %7d %4d %12.4e %12.4e %12.4e\n", i, fmt_mu(mu).c_str(), rom.cluster,
                static_cast<int>(rom.coeffs.size()), err, tf, tr);
  }
  std::printf("max relative H2 error  = %.6e\n", max_err);
  std::printf("mean relative H2 error = %.6e\n", sum_err / num_test);
  std::printf("mean FOM time = %.6e s, mean ROM time = %.6e s\n", t_fom / num_test, t_rom / num_test);
  std::printf("speedup = %.2f\n", t_fom / t_rom);
  return 0;
}

int cmd_variance(const std::string& config, int max_clusters, std::uint64_t seed, bool seed_given) {
  const ModelConfig cfg = load_config(config);
  const ParameterBox box = cfg.parameter_box();
  const std::uint64_t s = seed_given ? seed : cfg.rom.seed;
  const Eigen::MatrixXd samples = latin_hypercube(box, cfg.rom.num_samples, s);
  const auto v = variance_scan(samples, max_clusters, s);
  std::printf("%6s %16s\n", "N_c", "variance");
  for (std::size_t k = 0; k < v.size(); ++k) std::printf("%6zu %16.8e\n", k + 1, v[k]);
  return 0;
}

int cmd_optimize(const std::string& artifact, const std::string& config, bool fd, const std::string& history) {
  const RomArtifact art = load_artifact(artifact);
  const ModelConfig cfg = load_config(config);
  const Model model = build_model(cfg);
  check_match(art, model);

  const auto& oc = cfg.optimization;
  const DesignProblem prob = compliance_problem(art, model, oc, fd ? GradientMode::ForwardDifference : GradientMode::Exact);
  const ParamVector x0 = initial_design(art, oc);
  OptimizerSettings settings;
  settings.max_iterations = oc.max_iterations;
  const auto t0 = Clock::now();
  const OptimizationResult res = optimize(prob, x0, settings);
  const double t = seconds_since(t0);
  std::printf("gradient mode = %s\n", fd ? "forward difference" : "exact (reduced affine)");
  std::printf("initial mu = (%s), J_N = %.10e\n", fmt_mu(x0).c_str(), res.initial_objective);
  std::printf("optimal mu = (%s), J_N = %.10e\n", fmt_mu(res.mu).c_str(), res.objective);
  std::printf("compliance reduction = %.4f %%\n", 100.0 * (1.0 - res.objective / res.initial_objective));
  for (const auto& c : prob.constraints) std::printf("constraint %s = %.8e (cap %.8e)\n", c.name.c_str(), c.value(res.mu), c.cap);
  std::printf("iterations = %zu, objective evaluations = %d, converged = %s, time = %.3f s\n",
              res.history.empty() ? 0 : res.history.size() - 1, res.evaluations, res.converged ? "yes" : "no", t);
  if (!history.empty()) {
    std::ofstream os(history, std::ios::trunc);
    if (!os) throw Error("cannot write " + history);
    write_history_csv(os, res, art.parameters, prob.constraints);
    std::printf("history written to %s\n", history.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parametric Kirchhoff-Love shell solver with localized reduced-order models"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string config, mu, out, artifact, vtk, history;
  int subdivisions = 4, num_test = 10, max_clusters = 10;
  std::uint64_t seed = 1;
  bool fd = false;

  auto* fom = app.add_subcommand("fom-solve", "assemble and solve the full-order model at one parameter");
  fom->add_option("--config", config, "model configuration (JSON)")->required();
  fom->add_option("--mu", mu, "parameter values \"v1,v2,...\"")->required();
  fom->add_option("--vtk", vtk, "write the displacement as legacy VTK");
  fom->add_option("--subdivisions", subdivisions, "VTK cells per element and direction")->check(CLI::PositiveNumber);

  auto* tr = app.add_subcommand("train", "offline stage: snapshots, clustering, POD, DEIM, RBF");
  tr->add_option("--config", config)->required();
  tr->add_option("--out", out, "artifact directory")->required();

  auto* rs = app.add_subcommand("rom-solve", "online reduced solve");
  rs->add_option("--artifact", artifact)->required();
  rs->add_option("--mu", mu)->required();
  rs->add_option("--config", config, "configuration (defaults to the copy stored in the artifact)");
  std::string rom_vtk = "rom_solution.vtk";
  bool no_vtk = false;
  rs->add_option("--vtk", rom_vtk, "VTK output path")->capture_default_str();
  rs->add_flag("--no-vtk", no_vtk, "skip the VTK export");
  rs->add_option("--subdivisions", subdivisions)->check(CLI::PositiveNumber);

  auto* va = app.add_subcommand("validate", "compare ROM and FOM on random test parameters");
  va->add_option("--artifact", artifact)->required();
  va->add_option("--config", config)->required();
  va->add_option("--num-test", num_test)->required()->check(CLI::PositiveNumber);
  va->add_option("--seed", seed)->required();

  auto* vs = app.add_subcommand("variance-scan", "k-means within-cluster variance for N_c = 1..K");
  vs->add_option("--config", config)->required();
  vs->add_option("--max-clusters", max_clusters)->required()->check(CLI::PositiveNumber);
  auto* seed_opt = vs->add_option("--seed", seed, "sampling and clustering seed (defaults to rom.seed)");

  auto* op = app.add_subcommand("optimize", "minimize the reduced compliance over the parameter box");
  op->add_option("--artifact", artifact)->required();
  op->add_option("--config", config)->required();
  op->add_flag("--fd", fd, "forward-difference gradients instead of the exact reduced gradient");
  op->add_option("--history", history, "CSV file for the iteration history");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*fom) return cmd_fom(config, mu, vtk, subdivisions);
    if (*tr) return cmd_train(config, out);
    if (*rs) return cmd_rom(artifact, mu, config, no_vtk ? std::string() : rom_vtk, subdivisions);
    if (*va) return cmd_validate(artifact, config, num_test, seed);
    if (*vs) return cmd_variance(config, max_clusters, seed, seed_opt->count() > 0);
    if (*op) return cmd_optimize(artifact, config, fd, history);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
