#include "fhn/fom.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <sstream>

namespace fhn {

int FhnParams::steps() const { return static_cast<int>(std::lround(T / dt)); }

std::vector<std::string> FhnParams::validate() const {
  if (!(lambda > 0.0)) throw InputError("params: lambda must be positive");
  if (!(T > 0.0) || !(dt > 0.0)) throw InputError("params: T and dt must be positive");
  if (steps() < 1 || std::abs(dt * steps() - T) > 1e-12) {
    std::ostringstream msg;
    msg << "params: dt=" << dt << " does not divide T=" << T;
    throw InputError(msg.str());
  }
  if (D1 < 0.0 || D2 < 0.0) throw InputError("params: diffusion must be non-negative");
  std::vector<std::string> warnings;
  if (!(c1 > 0.0 && c1 < 20.0)) warnings.push_back("c1 outside (0, 20): reaction is not monostable");
  return warnings;
}

ControlGrid ControlGrid::zeros(int dofs, int steps, double lower, double upper) {
  ControlGrid u;
  u.values = Vector::Zero(static_cast<Eigen::Index>(dofs) * steps);
  u.dofs = dofs;
  u.steps = steps;
  u.lower = lower;
  u.upper = upper;
  return u;
}

namespace {

// [[a, b], [c, d]] from N x N blocks.
SparseMatrix block2x2(const SparseMatrix& a, const SparseMatrix& b, const SparseMatrix& c, const SparseMatrix& d) {
  const Eigen::Index n = a.rows();
  std::vector<Triplet> triplets;
  triplets.reserve(a.nonZeros() + b.nonZeros() + c.nonZeros() + d.nonZeros());
  auto append = [&triplets](const SparseMatrix& m, Eigen::Index r0, Eigen::Index c0) {
    for (int k = 0; k < m.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(m, k); it; ++it) triplets.emplace_back(it.row() + r0, it.col() + c0, it.value());
    }
  };
  append(a, 0, 0);
  append(b, 0, n);
  append(c, n, 0);
  append(d, n, n);
  SparseMatrix out(2 * n, 2 * n);
  out.setFromTriplets(triplets.begin(), triplets.end());
  out.makeCompressed();
  return out;
}

// Adds the block-diagonal reaction Jacobian into the leading block; its
// pattern is contained in the mass pattern already present there.
void add_leading_block(SparseMatrix& target, const SparseMatrix& blocks) {
  for (int k = 0; k < blocks.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(blocks, k); it; ++it) target.coeffRef(it.row(), it.col()) += it.value();
  }
}

const DgSpace& space_of(const Operators& ops) {
  if (!ops.space) throw InputError("fom: operators carry no discrete space");
  return *ops.space;
}

void check_operators(const Operators& ops_y, const Operators& ops_z) {
  if (ops_y.mass.rows() != ops_z.mass.rows()) throw InputError("fom: operator size mismatch");
}

}  // namespace

Trajectory solve_state(const Operators& ops_y, const Operators& ops_z, const FhnParams& params,
                       const ControlGrid& control, const Vector& y0, const Vector& z0) {
  check_operators(ops_y, ops_z);
  const DgSpace& space = space_of(ops_y);
  const int n = static_cast<int>(ops_y.mass.rows());
  const int nt = params.steps();
  if (control.steps != nt || control.dofs != n) throw InputError("solve_state: control shape mismatch");
  if (y0.size() != n || z0.size() != n) throw InputError("solve_state: initial data size mismatch");

  const double dt = params.dt;
  const SparseMatrix& M = ops_y.mass;
  const SparseMatrix a_y = M / dt + params.D1 * ops_y.stiffness + ops_y.convection;
  const SparseMatrix a_z = M / dt + params.D2 * ops_z.stiffness + ops_z.convection + params.eps * M;
  const SparseMatrix coupling = -params.eps * params.c3 * M;
  const SparseMatrix linear_part = block2x2(a_y, M, coupling, a_z);
  const CubicReaction g = params.reaction();

  Trajectory traj;
  traj.kind = Trajectory::Kind::state;
  traj.first.reserve(nt + 1);
  traj.second.reserve(nt + 1);
  traj.first.push_back(y0);
  traj.second.push_back(z0);
  traj.times.push_back(0.0);

  Eigen::SparseLU<SparseMatrix> lu;
  bool analyzed = false;
  Vector state(2 * n);
  Vector rhs(2 * n);

  for (int step = 1; step <= nt; ++step) {
    const Vector& y_prev = traj.first.back();
    const Vector& z_prev = traj.second.back();
    rhs.head(n) = M * (y_prev / dt + control.step(step)) + ops_y.load;
    rhs.tail(n) = M * (z_prev / dt) + ops_z.load;
    state << y_prev, z_prev;

    int iterations = 0;
    while (true) {
      Vector residual = linear_part * state - rhs;
      residual.head(n) += reaction_vector(space, state.head(n), g);
      const double norm = residual.norm();
      if (norm <= kNewtonTolerance) break;
      if (iterations == kNewtonMaxIterations) {
        std::ostringstream msg;
        msg << "Newton did not converge, residual " << norm;
        throw SolveError(msg.str(), step, norm);
      }
      SparseMatrix jac = linear_part;
      add_leading_block(jac, reaction_jacobian(space, state.head(n), g));
      if (!analyzed) {
        lu.analyzePattern(jac);
        analyzed = true;
      }
      lu.factorize(jac);
      if (lu.info() != Eigen::Success) throw SolveError("singular Newton matrix", step);
      state -= lu.solve(residual);
      ++iterations;
    }
    traj.newton_iterations += iterations;
    traj.first.push_back(state.head(n));
    traj.second.push_back(state.tail(n));
    traj.times.push_back(step * dt);
  }
  return traj;
}

std::vector<Vector> advance_inhibitor(const Operators& ops_z, const FhnParams& params, const std::vector<Vector>& y,
                                      const Vector& z0) {
  const int nt = params.steps();
  if (static_cast<int>(y.size()) != nt + 1) throw InputError("advance_inhibitor: activator data has the wrong length");
  const double dt = params.dt;
  const SparseMatrix& M = ops_z.mass;
  const SparseMatrix a_z = M / dt + params.D2 * ops_z.stiffness + ops_z.convection + params.eps * M;
  Eigen::SparseLU<SparseMatrix> lu(a_z);
  if (lu.info() != Eigen::Success) throw SolveError("singular inhibitor matrix", 1);
  std::vector<Vector> z{z0};
  for (int step = 1; step <= nt; ++step) {
    const Vector rhs = M * (z.back() / dt + params.eps * params.c3 * y[step]) + ops_z.load;
    z.push_back(lu.solve(rhs));
  }
  return z;
}

Trajectory solve_adjoint(const Operators& ops_y, const Operators& ops_z, const FhnParams& params,
                         const Trajectory& state, const Vector& y_T, const Vector& z_T) {
  check_operators(ops_y, ops_z);
  const DgSpace& space = space_of(ops_y);
  const int n = static_cast<int>(ops_y.mass.rows());
  const int nt = params.steps();
  if (state.steps() != nt) throw InputError("solve_adjoint: state trajectory has the wrong length");
  if (y_T.size() != n || z_T.size() != n) throw InputError("solve_adjoint: target size mismatch");

  const double dt = params.dt;
  const SparseMatrix& M = ops_y.mass;
  // Transpose of the forward linearisation; S and M are symmetric.
  const SparseMatrix a_y = M / dt + params.D1 * ops_y.stiffness + SparseMatrix(ops_y.convection.transpose());
  const SparseMatrix a_z =
      M / dt + params.D2 * ops_z.stiffness + SparseMatrix(ops_z.convection.transpose()) + params.eps * M;
  const SparseMatrix coupling = -params.eps * params.c3 * M;
  const SparseMatrix linear_part = block2x2(a_y, coupling, M, a_z);
  const CubicReaction g = params.reaction();

  Trajectory adj;
  adj.kind = Trajectory::Kind::adjoint;
  adj.first.assign(nt + 1, Vector());
  adj.second.assign(nt + 1, Vector());
  adj.times = state.times;
  adj.first[nt] = state.first[nt] - y_T;
  adj.second[nt] = state.second[nt] - z_T;

  Eigen::SparseLU<SparseMatrix> lu;
  bool analyzed = false;
  Vector rhs(2 * n);
  for (int step = nt; step >= 1; --step) {
    rhs.head(n) = M * adj.first[step] / dt;
    rhs.tail(n) = M * adj.second[step] / dt;
    SparseMatrix system = linear_part;
    add_leading_block(system, reaction_jacobian(space, state.first[step], g));
    if (!analyzed) {
      lu.analyzePattern(system);
      analyzed = true;
    }
    lu.factorize(system);
    if (lu.info() != Eigen::Success) throw SolveError("singular adjoint system", step);
    const Vector sol = lu.solve(rhs);
    adj.first[step - 1] = sol.head(n);
    adj.second[step - 1] = sol.tail(n);
  }
  return adj;
}

double control_inner(const SparseMatrix& mass, double dt, int dofs, const Vector& a, const Vector& b) {
  double total = 0.0;
  const Eigen::Index steps = a.size() / dofs;
  for (Eigen::Index s = 0; s < steps; ++s) {
    const auto as = a.segment(s * dofs, dofs);
    const auto bs = b.segment(s * dofs, dofs);
    total += as.dot(mass * bs);
  }
  return dt * total;
}

double control_inner(const SparseMatrix& mass, double dt, const ControlGrid& a, const ControlGrid& b) {
  if (a.dofs != b.dofs || a.steps != b.steps) throw InputError("control_inner: shape mismatch");
  return control_inner(mass, dt, a.dofs, a.values, b.values);
}

double cost(const FhnParams& params, const Trajectory& state, const ControlGrid& control, const Vector& y_T,
            const Vector& z_T, const Operators& mass) {
  const SparseMatrix& M = mass.mass;
  const Vector ey = state.first.back() - y_T;
  const Vector ez = state.second.back() - z_T;
  const double tracking = 0.5 * ey.dot(M * ey) + 0.5 * ez.dot(M * ez);
  return tracking + 0.5 * params.lambda * control_inner(M, params.dt, control, control);
}

ControlGrid gradient(const Trajectory& adjoint, const ControlGrid& control, const FhnParams& params) {
  if (adjoint.kind != Trajectory::Kind::adjoint) throw InputError("gradient: expected an adjoint trajectory");
  if (adjoint.steps() != control.steps) throw InputError("gradient: step count mismatch");
  ControlGrid grad = control;
  for (int step = 1; step <= control.steps; ++step) {
    grad.step(step) = params.lambda * control.step(step) + adjoint.first[step - 1];
  }
  return grad;
}

}  // namespace fhn
