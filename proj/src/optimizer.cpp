#include "fhn/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>

namespace fhn {

void OptimizeConfig::validate() const {
  if (!(stop_tol > 0.0)) throw InputError("optimizer: stop_tol must be positive");
  if (!(lower <= upper)) throw InputError("optimizer: lower bound exceeds upper bound");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw InputError("optimizer: backtrack factor must lie in (0, 1)");
  if (!(armijo > 0.0 && armijo < 1.0)) throw InputError("optimizer: armijo constant must lie in (0, 1)");
  if (!(initial_step > 0.0)) throw InputError("optimizer: initial_step must be positive");
  if (max_iterations < 0 || max_line_search < 1) throw InputError("optimizer: iteration limits must be positive");
  if (gradient_tol < 0.0) throw InputError("optimizer: gradient_tol must be non-negative");
}

std::string to_string(OptimizeStatus status) {
  switch (status) {
    case OptimizeStatus::converged: return "converged";
    case OptimizeStatus::gradient_small: return "gradient_small";
    case OptimizeStatus::max_iterations: return "max_iterations";
    case OptimizeStatus::line_search_failed: return "line_search_failed";
  }
  return "?";
}

ControlGrid project_box(const ControlGrid& u) {
  ControlGrid out = u;
  out.values = u.values.cwiseMax(u.lower).cwiseMin(u.upper);
  return out;
}

ControlGrid projected_gradient(const ControlGrid& u, const ControlGrid& grad) {
  ControlGrid out = grad;
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    const double g = grad.values(i);
    if ((u.values(i) <= u.lower && g > 0.0) || (u.values(i) >= u.upper && g < 0.0)) out.values(i) = 0.0;
  }
  return out;
}

namespace {

void mask_outward(const ControlGrid& u, ControlGrid& d) {
  for (Eigen::Index i = 0; i < d.values.size(); ++i) {
    if ((u.values(i) <= u.lower && d.values(i) < 0.0) || (u.values(i) >= u.upper && d.values(i) > 0.0)) {
      d.values(i) = 0.0;
    }
  }
}

class Driver {
 public:
  Driver(const ObjectiveFn& objective, const InnerProductFn& inner, const OptimizeConfig& cfg)
      : objective_(objective), inner_(inner), cfg_(cfg) {}

  OptimizeResult run(const ControlGrid& u0) {
    const auto start = std::chrono::steady_clock::now();
    OptimizeResult result;
    OptimizeReport& report = result.report;

    ControlGrid u = u0;
    u.lower = cfg_.lower;
    u.upper = cfg_.upper;
    u = project_box(u);
    Evaluation current = evaluate(u, true);
    ControlGrid pg = projected_gradient(u, current.gradient);
    ControlGrid d = pg;
    d.values = -pg.values;
    report.history.push_back(current.value);
    report.log.push_back({0, current.value, 0.0, norm(pg), 0});

    double alpha_prev = cfg_.initial_step;
    double slope_prev = 0.0;
    int since_restart = 0;
    report.status = OptimizeStatus::max_iterations;

    for (int it = 1; it <= cfg_.max_iterations; ++it) {
      if (cfg_.gradient_tol > 0.0 && norm(pg) <= cfg_.gradient_tol) {
        report.status = OptimizeStatus::gradient_small;
        break;
      }
      // Components leaving the box at an active bound are clipped by the
      // projection, so they must not contribute to the predicted slope.
      mask_outward(u, d);
      double slope = inner_(current.gradient, d);
      if (!(slope < 0.0)) {
        d.values = -pg.values;
        slope = inner_(current.gradient, d);
        since_restart = 0;
        if (!(slope < 0.0)) {
          report.status = OptimizeStatus::gradient_small;
          break;
        }
      }

      double alpha = (it == 1 || slope_prev == 0.0) ? cfg_.initial_step : alpha_prev * slope_prev / slope;
      int trials = 0;
      if (cfg_.variant == CgVariant::linear) {
        // Exact step of the quadratic model; its curvature comes from one probe.
        ControlGrid probe = u;
        probe.values += d.values;
        const Evaluation at_probe = evaluate(probe, true);
        ++trials;
        const double curvature = inner_(at_probe.gradient, d) - slope;
        if (curvature > 0.0) alpha = -slope / curvature;
      }

      ControlGrid trial;
      // Backtracking with Armijo decrease measured on the projected point.
      auto search = [&](double step_length) {
        for (int ls = 0; ls < cfg_.max_line_search; ++ls) {
          trial = u;
          trial.values += step_length * d.values;
          trial = project_box(trial);
          const double value = evaluate(trial, false).value;
          ++trials;
          ControlGrid step = trial;
          step.values -= u.values;
          if (value <= current.value + cfg_.armijo * inner_(current.gradient, step)) {
            alpha = step_length;
            return true;
          }
          step_length *= cfg_.backtrack;
        }
        return false;
      };
      bool accepted = search(alpha);
      if (!accepted && since_restart > 0) {
        // Conjugate direction failed; retry once along steepest descent.
        d.values = -pg.values;
        slope = inner_(current.gradient, d);
        since_restart = 0;
        accepted = slope < 0.0 && search(cfg_.initial_step);
      }
      report.line_search_trials += trials;
      if (!accepted) {
        report.status = OptimizeStatus::line_search_failed;
        break;
      }
      ++report.line_searches;
      report.iterations = it;

      Evaluation next = evaluate(trial, true);
      const ControlGrid pg_next = projected_gradient(trial, next.gradient);
      const double j_old = current.value;

      // Polak-Ribiere+ on projected gradients.
      double beta = 0.0;
      const double denom = inner_(pg, pg);
      ++since_restart;
      if (denom > 0.0 && since_restart < cfg_.restart_every) {
        ControlGrid diff = pg_next;
        diff.values -= pg.values;
        beta = std::max(0.0, inner_(pg_next, diff) / denom);
      }
      if (beta == 0.0) since_restart = 0;
      d.values = -pg_next.values + beta * d.values;

      alpha_prev = alpha;
      slope_prev = slope;
      u = trial;
      current = std::move(next);
      pg = pg_next;
      report.history.push_back(current.value);
      report.log.push_back({it, current.value, alpha, norm(pg), trials});

      if (current.value == 0.0 || std::abs(j_old - current.value) <= cfg_.stop_tol * std::abs(j_old)) {
        report.status = OptimizeStatus::converged;
        break;
      }
    }

    report.final_value = current.value;
    if (state_steps_ > 0) report.mean_newton_iterations = double(newton_) / double(state_steps_);
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.control = u;
    return result;
  }

 private:
  Evaluation evaluate(const ControlGrid& u, bool need_gradient) {
    Evaluation e = objective_(u, need_gradient);
    newton_ += e.newton_iterations;
    state_steps_ += e.state_steps;
    if (need_gradient && e.gradient.values.size() != u.values.size()) {
      throw InputError("optimizer: objective returned no gradient");
    }
    return e;
  }

  double norm(const ControlGrid& g) const { return std::sqrt(std::max(0.0, inner_(g, g))); }

  const ObjectiveFn& objective_;
  const InnerProductFn& inner_;
  const OptimizeConfig& cfg_;
  long newton_ = 0;
  long state_steps_ = 0;
};

}  // namespace

OptimizeResult minimize(const ObjectiveFn& objective, const InnerProductFn& inner, const ControlGrid& u0,
                        const OptimizeConfig& cfg) {
  cfg.validate();
  Driver driver(objective, inner, cfg);
  return driver.run(u0);
}

void write_iteration_log(const std::string& path, const OptimizeReport& report) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << "iteration,J,step,projected_gradient_norm,trials\n";
  char buf[160];
  for (const auto& rec : report.log) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%d\n", rec.iteration, rec.value, rec.step,
                  rec.projected_gradient_norm, rec.trials);
    out << buf;
  }
}

}  // namespace fhn
