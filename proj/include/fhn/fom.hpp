#pragma once

#include "fhn/common.hpp"
#include "fhn/dg.hpp"

#include <string>
#include <vector>

namespace fhn {

/// Physical and discretisation parameters of the controlled FHN system.
struct FhnParams {
  double c1 = 9.0;
  double c2 = 0.02;
  double c3 = 5.0;
  double eps = 0.1;
  double D1 = 1.0;
  double D2 = 1.0;
  double vmax = 128.0;
  double lambda = 1e-3;
  double T = 1.0;
  double dt = 0.05;

  /// Number of backward Euler steps T / dt.
  int steps() const;
  /// Throws InputError on violated invariants; returns soft warnings.
  std::vector<std::string> validate() const;
  CubicReaction reaction() const { return {c1, c2}; }
};

/// Coefficient vectors at t_0 ... t_NT. For states `first`/`second` are
/// (y, z); for adjoints (p, q), where p[n-1] pairs with the control u_n
/// and p[NT] holds the terminal misfit.
struct Trajectory {
  enum class Kind { state, adjoint };
  Kind kind = Kind::state;
  std::vector<Vector> first;
  std::vector<Vector> second;
  std::vector<double> times;
  int newton_iterations = 0;  // total over all steps

  int steps() const { return static_cast<int>(first.size()) - 1; }
  double mean_newton_iterations() const { return steps() > 0 ? double(newton_iterations) / steps() : 0.0; }
};

/// Full-dimensional controls u_1 ... u_NT stored contiguously, plus box.
struct ControlGrid {
  Vector values;
  int dofs = 0;
  int steps = 0;
  double lower = -0.01;
  double upper = 0.01;

  static ControlGrid zeros(int dofs, int steps, double lower, double upper);

  /// u_n for n = 1..steps.
  auto step(int n) { return values.segment(static_cast<Eigen::Index>(n - 1) * dofs, dofs); }
  auto step(int n) const { return values.segment(static_cast<Eigen::Index>(n - 1) * dofs, dofs); }
};

/// Newton settings for the implicit state steps.
inline constexpr double kNewtonTolerance = 1e-10;
inline constexpr int kNewtonMaxIterations = 25;

Trajectory solve_state(const Operators& ops_y, const Operators& ops_z, const FhnParams& params,
                       const ControlGrid& control, const Vector& y0, const Vector& z0);

/// Inhibitor update alone: backward Euler for z with the activator values
/// y_1..y_NT (entries 1..NT of `y`) treated as given data.
std::vector<Vector> advance_inhibitor(const Operators& ops_z, const FhnParams& params, const std::vector<Vector>& y,
                                      const Vector& z0);

/// Backward sweep of the discrete adjoint of solve_state; y_T and z_T are
/// coefficient vectors of the desired states.
Trajectory solve_adjoint(const Operators& ops_y, const Operators& ops_z, const FhnParams& params,
                         const Trajectory& state, const Vector& y_T, const Vector& z_T);

double cost(const FhnParams& params, const Trajectory& state, const ControlGrid& control, const Vector& y_T,
            const Vector& z_T, const Operators& mass);

/// L2 Riesz representative lambda u_n + p_{n-1}, one block per step.
ControlGrid gradient(const Trajectory& adjoint, const ControlGrid& control, const FhnParams& params);

/// The time-discrete inner product sum_n dt a_n^T M b_n used by the optimizer.
double control_inner(const SparseMatrix& mass, double dt, const ControlGrid& a, const ControlGrid& b);
double control_inner(const SparseMatrix& mass, double dt, int dofs, const Vector& a, const Vector& b);

}  // namespace fhn
