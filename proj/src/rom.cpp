#include "fhn/rom.hpp"

#include <cmath>
#include <sstream>

namespace fhn {

std::string to_string(Backend backend) {
  switch (backend) {
    case Backend::fom: return "fom";
    case Backend::pod: return "pod";
    case Backend::pod_deim: return "pod-deim";
    case Backend::pod_dmd: return "pod-dmd";
  }
  return "?";
}

Backend parse_backend(const std::string& name) {
  if (name == "fom") return Backend::fom;
  if (name == "pod") return Backend::pod;
  if (name == "pod-deim") return Backend::pod_deim;
  if (name == "pod-dmd") return Backend::pod_dmd;
  throw InputError("unknown backend '" + name + "'");
}

namespace {

Matrix congruence(const Matrix& left, const SparseMatrix& a, const Matrix& right) {
  return left.transpose() * (a * right);
}

Matrix blocks(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& d) {
  Matrix out(a.rows() + c.rows(), a.cols() + b.cols());
  out << a, b, c, d;
  return out;
}

// Nonlinear term of the activator row and its k x k Jacobian; only value()
// is counted, since it is the quantity DEIM samples.
class ReactionEvaluator {
 public:
  ReactionEvaluator(const ReducedOperators& rops, const CubicReaction& g) : rops_(rops), g_(g) {}

  Vector value(const Vector& y_r, ReducedTrajectory& stats) const {
    ++stats.nonlinear_calls;
    if (rops_.backend == Backend::pod) {
      const DgSpace& space = *rops_.space;
      stats.nonlinear_integrals += static_cast<long>(space.num_dofs()) * DgSpace::kLocalDofs;
      return rops_.psi_y.transpose() * reaction_vector(space, rops_.psi_y * y_r, g_);
    }
    const int m = sample_count();
    stats.nonlinear_integrals += static_cast<long>(m) * DgSpace::kLocalDofs;
    Vector sampled(m);
    for (int i = 0; i < m; ++i) {
      sampled(i) = element_reaction_entry(g_, area(i), local(i, y_r), rops_.deim_row[static_cast<std::size_t>(i)]);
    }
    return rops_.deim->Q * sampled;
  }

  Matrix jacobian(const Vector& y_r) const {
    if (rops_.backend == Backend::pod) {
      return congruence(rops_.psi_y, reaction_jacobian(*rops_.space, rops_.psi_y * y_r, g_), rops_.psi_y);
    }
    const int m = sample_count();
    Matrix rows(m, rops_.ky());
    for (int i = 0; i < m; ++i) {
      const Eigen::Matrix3d jac = element_reaction_jacobian(g_, area(i), local(i, y_r));
      rows.row(i) = jac.row(rops_.deim_row[static_cast<std::size_t>(i)]) * rops_.deim_psi.middleRows(3 * i, 3);
    }
    return rops_.deim->Q * rows;
  }

 private:
  int sample_count() const { return static_cast<int>(rops_.deim_row.size()); }
  double area(int i) const { return rops_.deim_area[static_cast<std::size_t>(i)]; }
  std::array<double, 3> local(int i, const Vector& y_r) const {
    const Eigen::Vector3d v = rops_.deim_psi.middleRows(3 * i, 3) * y_r;
    return {v(0), v(1), v(2)};
  }

  const ReducedOperators& rops_;
  CubicReaction g_;
};

void check_state_inputs(const ReducedOperators& rops, const FhnParams& params, const ControlGrid& control,
                        const Vector& y0_r, const Vector& z0_r) {
  if (rops.backend == Backend::fom) throw InputError("reduced solve: backend must be a reduced one");
  if (control.steps != params.steps() || control.dofs != rops.control_map.cols()) {
    throw InputError("reduced solve: control shape mismatch");
  }
  if (y0_r.size() != rops.ky() || z0_r.size() != rops.kz()) throw InputError("reduced solve: initial data size mismatch");
  if (rops.backend == Backend::pod_dmd && rops.dmd_table.cols() != params.steps()) {
    throw InputError("reduced solve: DMD forcing table does not match the step count");
  }
}

}  // namespace

Vector project(const Matrix& psi, const SparseMatrix& mass, const Vector& v) { return psi.transpose() * (mass * v); }

void set_dmd_forcing(ReducedOperators& rops, const DmdModel& dmd, const FhnParams& params) {
  const int nt = params.steps();
  rops.dmd = dmd;
  rops.dmd_table.resize(rops.ky(), nt);
  for (int step = 1; step <= nt; ++step) {
    rops.dmd_table.col(step - 1) = rops.psi_y.transpose() * dmd.evaluate(step * params.dt);
  }
}

ReducedOperators reduce_operators(const Operators& ops_y, const Operators& ops_z, const PodBasis& pod_y,
                                  const PodBasis& pod_z, Backend backend, const FhnParams& params,
                                  const DeimModel* deim, const DmdModel* dmd) {
  if (backend == Backend::fom) throw InputError("reduce_operators: fom is not a reduced backend");
  if (!ops_y.space) throw InputError("reduce_operators: operators carry no discrete space");
  const Eigen::Index n = ops_y.mass.rows();
  if (pod_y.basis.rows() != n || pod_z.basis.rows() != n) throw InputError("reduce_operators: basis size mismatch");

  ReducedOperators r;
  r.backend = backend;
  r.space = ops_y.space;
  r.psi_y = pod_y.basis;
  r.psi_z = pod_z.basis;
  const Matrix& py = r.psi_y;
  const Matrix& pz = r.psi_z;
  r.S_y = congruence(py, ops_y.stiffness, py);
  r.B_y = congruence(py, ops_y.convection, py);
  r.S_z = congruence(pz, ops_z.stiffness, pz);
  r.B_z = congruence(pz, ops_z.convection, pz);
  r.M_y = congruence(py, ops_y.mass, py);
  r.M_z = congruence(pz, ops_z.mass, pz);
  r.M_yz = congruence(py, ops_y.mass, pz);
  r.M_zy = congruence(pz, ops_z.mass, py);
  r.boundary_y = congruence(py, ops_y.adjoint_boundary, py);
  r.boundary_z = congruence(pz, ops_z.adjoint_boundary, pz);
  r.load_y = py.transpose() * ops_y.load;
  r.load_z = pz.transpose() * ops_z.load;
  r.control_map = py.transpose() * ops_y.mass;
  r.mass = ops_y.mass;

  if (backend == Backend::pod_deim) {
    if (!deim) throw InputError("reduce_operators: pod-deim needs a DEIM model");
    if (deim->Q.rows() != r.ky()) throw InputError("reduce_operators: DEIM projector does not match the basis");
    r.deim = *deim;
    const int m = deim->rank();
    r.deim_psi.resize(3 * m, r.ky());
    for (int i = 0; i < m; ++i) {
      const int index = deim->indices[static_cast<std::size_t>(i)];
      const int element = index / DgSpace::kLocalDofs;
      r.deim_psi.middleRows(3 * i, 3) = py.middleRows(DgSpace::dof(element, 0), 3);
      r.deim_area.push_back(r.space->mesh().areas[static_cast<std::size_t>(element)]);
      r.deim_row.push_back(index % DgSpace::kLocalDofs);
    }
  }
  if (backend == Backend::pod_dmd) {
    if (!dmd) throw InputError("reduce_operators: pod-dmd needs a DMD model");
    set_dmd_forcing(r, *dmd, params);
  }
  return r;
}

ReducedTrajectory solve_reduced_state(const ReducedOperators& rops, const FhnParams& params,
                                      const ControlGrid& control, const Vector& y0_r, const Vector& z0_r) {
  check_state_inputs(rops, params, control, y0_r, z0_r);
  const int ky = rops.ky(), kz = rops.kz();
  const int nt = params.steps();
  const double dt = params.dt;
  const Matrix a_y = rops.M_y / dt + params.D1 * rops.S_y + rops.B_y;
  const Matrix a_z = rops.M_z / dt + params.D2 * rops.S_z + rops.B_z + params.eps * rops.M_z;
  const Matrix linear_part = blocks(a_y, rops.M_yz, -params.eps * params.c3 * rops.M_zy, a_z);
  const ReactionEvaluator reaction(rops, params.reaction());

  ReducedTrajectory traj;
  traj.backend = rops.backend;
  traj.first.push_back(y0_r);
  traj.second.push_back(z0_r);
  traj.times.push_back(0.0);

  Eigen::PartialPivLU<Matrix> linear_lu;
  if (rops.backend == Backend::pod_dmd) linear_lu.compute(linear_part);

  Vector state(ky + kz), rhs(ky + kz);
  for (int step = 1; step <= nt; ++step) {
    rhs.head(ky) = rops.M_y * traj.first.back() / dt + rops.load_y + rops.control_map * control.step(step);
    rhs.tail(kz) = rops.M_z * traj.second.back() / dt + rops.load_z;
    if (rops.backend == Backend::pod_dmd) {
      rhs.head(ky) -= rops.dmd_table.col(step - 1);
      state = linear_lu.solve(rhs);
    } else {
      state << traj.first.back(), traj.second.back();
      int iterations = 0;
      while (true) {
        Vector residual = linear_part * state - rhs;
        residual.head(ky) += reaction.value(state.head(ky), traj);
        const double norm = residual.norm();
        if (norm <= kReducedNewtonTolerance) break;
        if (iterations == kNewtonMaxIterations) {
          std::ostringstream msg;
          msg << "reduced Newton did not converge, residual " << norm;
          throw SolveError(msg.str(), step, norm);
        }
        Matrix jac = linear_part;
        jac.topLeftCorner(ky, ky) += reaction.jacobian(state.head(ky));
        state -= jac.partialPivLu().solve(residual);
        ++iterations;
      }
      traj.newton_iterations += iterations;
    }
    traj.first.push_back(state.head(ky));
    traj.second.push_back(state.tail(kz));
    traj.times.push_back(step * dt);
  }
  return traj;
}

ReducedTarget reduce_target(const ReducedOperators& rops, const Vector& y_T, const Vector& z_T) {
  ReducedTarget t;
  t.y = project(rops.psi_y, rops.mass, y_T);
  t.z = project(rops.psi_z, rops.mass, z_T);
  t.norm_y2 = y_T.dot(rops.mass * y_T);
  t.norm_z2 = z_T.dot(rops.mass * z_T);
  return t;
}

ReducedTrajectory solve_reduced_adjoint(const ReducedOperators& rops, const FhnParams& params,
                                        const ReducedTrajectory& state, const ReducedTarget& target) {
  const int ky = rops.ky(), kz = rops.kz();
  const int nt = params.steps();
  if (state.steps() != nt) throw InputError("reduced adjoint: state trajectory has the wrong length");
  const double dt = params.dt;
  const Matrix a_y = rops.M_y / dt + params.D1 * rops.S_y + rops.B_y;
  const Matrix a_z = rops.M_z / dt + params.D2 * rops.S_z + rops.B_z + params.eps * rops.M_z;
  const Matrix linear_part = blocks(a_y, rops.M_yz, -params.eps * params.c3 * rops.M_zy, a_z);
  const ReactionEvaluator reaction(rops, params.reaction());

  ReducedTrajectory adj;
  adj.backend = rops.backend;
  adj.kind = Trajectory::Kind::adjoint;
  adj.first.assign(nt + 1, Vector());
  adj.second.assign(nt + 1, Vector());
  adj.times = state.times;
  // Gradient of the tracking term, mapped back through the reduced mass.
  adj.first[nt] = rops.M_y.ldlt().solve(rops.M_y * state.first[nt] - target.y);
  adj.second[nt] = rops.M_z.ldlt().solve(rops.M_z * state.second[nt] - target.z);

  Eigen::PartialPivLU<Matrix> linear_lu;
  if (rops.backend == Backend::pod_dmd) linear_lu.compute(linear_part.transpose());

  Vector rhs(ky + kz);
  for (int step = nt; step >= 1; --step) {
    rhs.head(ky) = rops.M_y.transpose() * adj.first[step] / dt;
    rhs.tail(kz) = rops.M_z.transpose() * adj.second[step] / dt;
    Vector sol;
    if (rops.backend == Backend::pod_dmd) {
      sol = linear_lu.solve(rhs);
    } else {
      Matrix system = linear_part;
      system.topLeftCorner(ky, ky) += reaction.jacobian(state.first[step]);
      sol = system.transpose().partialPivLu().solve(rhs);
    }
    if (!sol.allFinite()) throw SolveError("singular reduced adjoint system", step);
    adj.first[step - 1] = sol.head(ky);
    adj.second[step - 1] = sol.tail(kz);
  }
  return adj;
}

double reduced_cost(const ReducedOperators& rops, const FhnParams& params, const ReducedTrajectory& state,
                    const ControlGrid& control, const ReducedTarget& target) {
  const Vector& y = state.first.back();
  const Vector& z = state.second.back();
  const double ty = y.dot(rops.M_y * y) - 2.0 * y.dot(target.y) + target.norm_y2;
  const double tz = z.dot(rops.M_z * z) - 2.0 * z.dot(target.z) + target.norm_z2;
  return 0.5 * ty + 0.5 * tz + 0.5 * params.lambda * control_inner(rops.mass, params.dt, control, control);
}

ControlGrid reduced_gradient(const ReducedOperators& rops, const ReducedTrajectory& adjoint,
                             const ControlGrid& control, const FhnParams& params) {
  if (adjoint.kind != Trajectory::Kind::adjoint) throw InputError("reduced gradient: expected an adjoint trajectory");
  if (adjoint.steps() != control.steps) throw InputError("reduced gradient: step count mismatch");
  ControlGrid grad = control;
  for (int step = 1; step <= control.steps; ++step) {
    grad.step(step) = params.lambda * control.step(step) + rops.psi_y * adjoint.first[step - 1];
  }
  return grad;
}

std::vector<Vector> lift(const Matrix& psi, const std::vector<Vector>& reduced) {
  std::vector<Vector> out;
  out.reserve(reduced.size());
  for (const Vector& r : reduced) out.push_back(psi * r);
  return out;
}

double frobenius_error(const std::vector<Vector>& full, const std::vector<Vector>& other) {
  if (full.size() != other.size()) throw InputError("frobenius_error: step counts differ");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < full.size(); ++i) {
    num += (full[i] - other[i]).squaredNorm();
    den += full[i].squaredNorm();
  }
  if (den == 0.0) throw InputError("frobenius_error: reference trajectory is zero");
  return std::sqrt(num / den);
}

double frobenius_error(const std::vector<Vector>& full, const std::vector<Vector>& reduced, const Matrix& psi) {
  if (psi.cols() == 0) throw InputError("frobenius_error: empty basis");
  return frobenius_error(full, lift(psi, reduced));
}

}  // namespace fhn
