#pragma once

#include "fhn/fom.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fhn {

enum class CgVariant { nonlinear_pr_plus, linear };

struct OptimizeConfig {
  double stop_tol = 1e-3;       // |J_old - J| / |J_old|
  double gradient_tol = 0.0;    // on the projected gradient norm; 0 disables
  int max_iterations = 200;
  double initial_step = 1.0;
  double backtrack = 0.5;
  double armijo = 1e-4;
  int max_line_search = 30;
  int restart_every = 50;       // steepest-descent restart period
  double lower = -0.01;
  double upper = 0.01;
  CgVariant variant = CgVariant::nonlinear_pr_plus;

  void validate() const;
};

/// Clamp every component into [lower, upper].
ControlGrid project_box(const ControlGrid& u);

/// Gradient with components removed that would push an active bound outward.
ControlGrid projected_gradient(const ControlGrid& u, const ControlGrid& grad);

struct Evaluation {
  double value = 0.0;
  ControlGrid gradient;       // empty unless requested
  int newton_iterations = 0;  // summed over the state solve
  int state_steps = 0;        // time steps of that solve (0 if it has no Newton)
};

/// Objective callback; the gradient is only needed when the flag is set.
using ObjectiveFn = std::function<Evaluation(const ControlGrid& u, bool need_gradient)>;
using InnerProductFn = std::function<double(const ControlGrid& a, const ControlGrid& b)>;

enum class OptimizeStatus { converged, gradient_small, max_iterations, line_search_failed };
std::string to_string(OptimizeStatus status);

struct IterationRecord {
  int iteration = 0;
  double value = 0.0;
  double step = 0.0;
  double projected_gradient_norm = 0.0;
  int trials = 0;
};

struct OptimizeReport {
  double final_value = 0.0;
  int iterations = 0;
  int line_search_trials = 0;    // objective evaluations inside line searches
  int line_searches = 0;         // accepted line searches
  std::optional<double> mean_newton_iterations;
  double seconds = 0.0;
  OptimizeStatus status = OptimizeStatus::max_iterations;
  std::vector<double> history;   // J after each accepted step, starting with J(u0)
  std::vector<IterationRecord> log;
};

struct OptimizeResult {
  ControlGrid control;
  OptimizeReport report;
};

OptimizeResult minimize(const ObjectiveFn& objective, const InnerProductFn& inner, const ControlGrid& u0,
                        const OptimizeConfig& cfg);

/// CSV with columns iteration,J,step,projected_gradient_norm,trials.
void write_iteration_log(const std::string& path, const OptimizeReport& report);

}  // namespace fhn
