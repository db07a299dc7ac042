#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "klrom/config.hpp"
#include "klrom/model.hpp"
#include "klrom/rom.hpp"

namespace klrom {

/// Objective with optional gradient output (gradient pointer may be null).
using ObjectiveFn = std::function<double(const ParamVector&, Eigen::VectorXd*)>;
using ScalarFn = std::function<double(const ParamVector&)>;

/// Inequality constraint value(mu) <= cap, penalized in relative form.
struct Constraint {
  std::string name;
  ScalarFn value;
  double cap = 0.0;
};

enum class GradientMode { Exact, ForwardDifference };

struct DesignProblem {
  ParameterBox bounds;
  ObjectiveFn objective;
  std::vector<Constraint> constraints;
  GradientMode gradient = GradientMode::Exact;
};

struct OptimizerSettings {
  int max_iterations = 200;
  int max_outer = 5;
  double initial_penalty = 100.0;
  double fd_step = 1e-6;  // relative to the parameter range
};

struct HistoryEntry {
  int iteration = 0;
  ParamVector mu;
  double objective = 0.0;
  double penalized = 0.0;
  std::vector<double> constraints;
  double gradient_norm = 0.0;
  int evaluations = 0;
};

struct OptimizationResult {
  ParamVector mu;
  double objective = 0.0;
  double initial_objective = 0.0;
  std::vector<HistoryEntry> history;
  int evaluations = 0;
  bool converged = false;
};

/// Projected BFGS with Armijo backtracking; constraints by exterior quadratic penalty with
/// the multiplier raised tenfold per outer loop. Throws InfeasibleError if every sampled point
/// violates a constraint.
OptimizationResult optimize(const DesignProblem& problem, const ParamVector& initial,
                            const OptimizerSettings& settings = {});

/// Central finite-difference derivative of a scalar function (step relative to the range).
Eigen::VectorXd central_difference(const ScalarFn& f, const ParamVector& mu, const ParameterBox& box,
                                   double rel_step = 1e-4);

/// Reduced compliance over the artifact's parameter box with the constraints of the configuration
/// (active area or volume cap, maximum displacement cap). Both references must outlive the problem.
DesignProblem compliance_problem(const RomArtifact& art, const Model& model, const OptimizationConfig& oc,
                                 GradientMode mode = GradientMode::Exact);

/// Starting point from the configuration, or the lower bound if none is given.
ParamVector initial_design(const RomArtifact& art, const OptimizationConfig& oc);

void write_history_csv(std::ostream& os, const OptimizationResult& result, const ParameterBox& box,
                       const std::vector<Constraint>& constraints);

}  // namespace klrom
