#include <doctest.h>

#include "fhn/dg.hpp"
#include "fhn/fom.hpp"
#include "fhn/mesh.hpp"
#include "fhn/optimizer.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace fhn;

namespace {

double dot(const ControlGrid& a, const ControlGrid& b) { return a.values.dot(b.values); }

// J(u) = 1/2 sum w_i (u_i - c_i)^2 on a dofs x steps grid.
struct Bowl {
  Vector c, w;
  Evaluation operator()(const ControlGrid& u, bool need_gradient) const {
    const Vector r = u.values - c;
    Evaluation e;
    e.value = 0.5 * r.dot(w.cwiseProduct(r));
    if (need_gradient) {
      e.gradient = u;
      e.gradient.values = w.cwiseProduct(r);
    }
    return e;
  }
};

ControlGrid grid(int dofs, int steps) { return ControlGrid::zeros(dofs, steps, -0.01, 0.01); }

Vector uniform(Eigen::Index n, double lo, double hi, std::mt19937& rng) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

OptimizeConfig tight() {
  OptimizeConfig cfg;
  cfg.stop_tol = 1e-14;
  cfg.gradient_tol = 1e-13;
  return cfg;
}

// Small FOM tracking problem with the natural state at the midpoint as target.
struct SmallProblem {
  FhnParams params;
  std::shared_ptr<DgSpace> space;
  Operators ops_y, ops_z;
  Vector y0, z0, y_T, z_T;

  SmallProblem() {
    params.T = 0.2;
    params.vmax = 8.0;
    space = std::make_shared<DgSpace>(std::make_shared<Mesh>(build_uniform_mesh(2.0, 1.0, 0.5)));
    ops_y = assemble_operators(*space, params.D1, params.vmax, kDefaultPenalty);
    ops_z = assemble_operators(*space, params.D2, params.vmax, kDefaultPenalty);
    y0 = project_initial(*space, [](const Point& p) { return p.x <= 0.5 ? 1.0 : 0.0; }, Breaklines{{0.5}, {}});
    z0 = Vector::Zero(space->num_dofs());
    y_T = Vector::Constant(space->num_dofs(), 0.3);
    z_T = Vector::Constant(space->num_dofs(), 0.01);
  }

  ControlGrid zeros() const { return ControlGrid::zeros(space->num_dofs(), params.steps(), -0.01, 0.01); }

  Evaluation operator()(const ControlGrid& u, bool need_gradient) const {
    const Trajectory s = solve_state(ops_y, ops_z, params, u, y0, z0);
    Evaluation e;
    e.value = cost(params, s, u, y_T, z_T, ops_y);
    e.newton_iterations = s.newton_iterations;
    e.state_steps = s.steps();
    if (need_gradient) e.gradient = gradient(solve_adjoint(ops_y, ops_z, params, s, y_T, z_T), u, params);
    return e;
  }

  InnerProductFn inner() const {
    return [this](const ControlGrid& a, const ControlGrid& b) {
      return control_inner(ops_y.mass, params.dt, a, b);
    };
  }
};

}  // namespace

TEST_CASE("project_box") {
  ControlGrid u = grid(1, 3);
  u.values << 0.005, 0.5, -0.5;
  const ControlGrid p = project_box(u);
  CHECK(p.values(0) == 0.005);
  CHECK(p.values(1) == 0.01);
  CHECK(p.values(2) == -0.01);
  const ControlGrid pp = project_box(p);
  CHECK((pp.values.array() == p.values.array()).all());
}

TEST_CASE("config validation") {
  OptimizeConfig cfg;
  cfg.stop_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = OptimizeConfig{};
  cfg.lower = 1.0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  CHECK_NOTHROW(OptimizeConfig{}.validate());
}

TEST_CASE("isotropic bowl with interior minimizer") {
  std::mt19937 rng(1);
  const ControlGrid u0 = grid(4, 3);
  const Bowl bowl{uniform(12, -0.009, 0.009, rng), Vector::Ones(12)};
  for (CgVariant v : {CgVariant::nonlinear_pr_plus, CgVariant::linear}) {
    OptimizeConfig cfg = tight();
    cfg.variant = v;
    const OptimizeResult r = minimize(bowl, dot, u0, cfg);
    CHECK((r.control.values - bowl.c).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(r.report.iterations <= 12 + 5);
  }
}

TEST_CASE("weighted bowl") {
  std::mt19937 rng(2);
  const Bowl bowl{uniform(12, -0.009, 0.009, rng), uniform(12, 1.0, 10.0, rng)};
  OptimizeConfig cfg = tight();
  cfg.variant = CgVariant::linear;
  const OptimizeResult lin = minimize(bowl, dot, grid(4, 3), cfg);
  CHECK((lin.control.values - bowl.c).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(lin.report.iterations <= 12 + 5);

  cfg.variant = CgVariant::nonlinear_pr_plus;
  const OptimizeResult pr = minimize(bowl, dot, grid(4, 3), cfg);
  CHECK((pr.control.values - bowl.c).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("bowl with minimizer outside the box") {
  std::mt19937 rng(3);
  const Bowl bowl{uniform(12, -0.05, 0.05, rng), uniform(12, 1.0, 4.0, rng)};
  ControlGrid target = grid(4, 3);
  target.values = bowl.c;
  target = project_box(target);
  REQUIRE((target.values.array() != bowl.c.array()).any());
  for (CgVariant v : {CgVariant::nonlinear_pr_plus, CgVariant::linear}) {
    OptimizeConfig cfg = tight();
    cfg.variant = v;
    const OptimizeResult r = minimize(bowl, dot, grid(4, 3), cfg);
    CHECK((r.control.values - target.values).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("iterates stay admissible and J decreases") {
  std::mt19937 rng(4);
  const Bowl bowl{uniform(20, -0.1, 0.1, rng), uniform(20, 0.1, 50.0, rng)};
  OptimizeConfig cfg = tight();
  cfg.max_iterations = 30;
  std::vector<ControlGrid> seen;
  ObjectiveFn recording = [&](const ControlGrid& u, bool g) {
    seen.push_back(u);
    return bowl(u, g);
  };
  ControlGrid u0 = grid(5, 4);
  u0.values = uniform(20, -1.0, 1.0, rng);  // projected on entry
  const OptimizeResult r = minimize(recording, dot, u0, cfg);
  for (const ControlGrid& u : seen) {
    CHECK(u.values.minCoeff() >= -0.01);
    CHECK(u.values.maxCoeff() <= 0.01);
  }
  for (size_t i = 1; i < r.report.history.size(); ++i) CHECK(r.report.history[i] <= r.report.history[i - 1]);
  CHECK(r.report.history.back() == r.report.final_value);
}

TEST_CASE("failed line search keeps the last iterate") {
  const Bowl bowl{Vector::Constant(4, 0.005), Vector::Ones(4)};
  // Reports the negated gradient, so every "descent" direction goes uphill.
  ObjectiveFn wrong = [&](const ControlGrid& u, bool g) {
    Evaluation e = bowl(u, g);
    if (g) e.gradient.values = -e.gradient.values;
    return e;
  };
  OptimizeConfig cfg;
  cfg.max_line_search = 5;
  const OptimizeResult r = minimize(wrong, dot, grid(2, 2), cfg);
  CHECK(r.report.status == OptimizeStatus::line_search_failed);
  CHECK(r.report.iterations == 0);
  CHECK(r.control.values.norm() == 0.0);
  CHECK(r.report.line_search_trials == 5);
}

TEST_CASE("stopping rule on relative decrease") {
  std::mt19937 rng(5);
  const Bowl bowl{uniform(12, -0.02, 0.02, rng), uniform(12, 1.0, 100.0, rng)};
  OptimizeConfig cfg;
  cfg.stop_tol = 1e-3;
  const OptimizeResult r = minimize(bowl, dot, grid(4, 3), cfg);
  REQUIRE(r.report.status == OptimizeStatus::converged);
  const auto& h = r.report.history;
  const size_t n = h.size();
  CHECK((h[n - 1] == 0.0 || std::abs(h[n - 2] - h[n - 1]) <= 1e-3 * std::abs(h[n - 2])));
  for (size_t i = 1; i + 1 < n; ++i) CHECK(std::abs(h[i - 1] - h[i]) > 1e-3 * std::abs(h[i - 1]));
}

TEST_CASE("iteration log") {
  std::mt19937 rng(6);
  const Bowl bowl{uniform(6, -0.02, 0.02, rng), uniform(6, 1.0, 5.0, rng)};
  const OptimizeResult r = minimize(bowl, dot, grid(3, 2), tight());
  const auto path = std::filesystem::temp_directory_path() / "fhn_iters_test.csv";
  write_iteration_log(path.string(), r.report);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "iteration,J,step,projected_gradient_norm,trials");
  size_t rows = 0;
  while (std::getline(in, line)) {
    if (rows == 0) CHECK(line.rfind("0,", 0) == 0);
    ++rows;
  }
  CHECK(rows == r.report.log.size());
  std::filesystem::remove(path);
}

TEST_CASE("small tracking problem: determinism and optimality") {
  const SmallProblem prob;
  const InnerProductFn inner = prob.inner();
  OptimizeConfig cfg;
  cfg.stop_tol = 1e-12;
  cfg.max_iterations = 400;
  const ObjectiveFn f = std::cref(prob);

  const OptimizeResult a = minimize(f, inner, prob.zeros(), cfg);
  const OptimizeResult b = minimize(f, inner, prob.zeros(), cfg);
  REQUIRE(a.report.history.size() == b.report.history.size());
  for (size_t i = 0; i < a.report.history.size(); ++i) CHECK(a.report.history[i] == b.report.history[i]);
  CHECK((a.control.values.array() == b.control.values.array()).all());
  CHECK(a.report.final_value < a.report.history.front());
  CHECK(a.report.mean_newton_iterations.has_value());

  // Both bounds become active for this target.
  CHECK((a.control.values.array() == 0.01).any());

  const ControlGrid& u = a.control;
  const ControlGrid g = prob(u, true).gradient;
  std::mt19937 rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    ControlGrid v = u;
    v.values = uniform(u.values.size(), -0.01, 0.01, rng);
    v.values -= u.values;
    worst = std::min(worst, inner(g, v));
  }
  CHECK(worst >= -1e-6);
  // Relative to the size of the gradient the inequality holds far more tightly.
  const double scale = std::sqrt(inner(g, g)) * 0.02 * std::sqrt(prob.params.T * 2.0);
  CHECK(worst >= -1e-4 * scale);
}
