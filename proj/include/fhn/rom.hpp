#pragma once

#include "fhn/common.hpp"
#include "fhn/dg.hpp"
#include "fhn/fom.hpp"
#include "fhn/reduction.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fhn {

enum class Backend { fom, pod, pod_deim, pod_dmd };

std::string to_string(Backend backend);
/// Accepts "fom", "pod", "pod-deim", "pod-dmd".
Backend parse_backend(const std::string& name);

/// Congruence-projected operators for one back-end. Only the states are
/// reduced; the control stays full-dimensional and enters through
/// control_map = Psi_y^T M.
struct ReducedOperators {
  Backend backend = Backend::pod;
  std::shared_ptr<const DgSpace> space;
  Matrix psi_y, psi_z;
  Matrix S_y, B_y, S_z, B_z;
  Matrix M_y, M_z, M_yz, M_zy;
  Matrix boundary_y, boundary_z;  // projected adjoint boundary terms
  Vector load_y, load_z;
  Matrix control_map;             // k_y x N
  SparseMatrix mass;              // full M, for the control penalty

  // pod-deim: Q and, per sampled index, the element rows of Psi_y.
  std::optional<DeimModel> deim;
  Matrix deim_psi;                // 3m x k_y
  std::vector<double> deim_area;
  std::vector<int> deim_row;

  // pod-dmd: Psi_y^T g_dmd(t_n) for n = 1..N_T, one column per step.
  std::optional<DmdModel> dmd;
  Matrix dmd_table;

  int ky() const { return static_cast<int>(psi_y.cols()); }
  int kz() const { return static_cast<int>(psi_z.cols()); }
};

/// Offline stage. `deim`/`dmd` are required for the matching back-end.
ReducedOperators reduce_operators(const Operators& ops_y, const Operators& ops_z, const PodBasis& pod_y,
                                  const PodBasis& pod_z, Backend backend, const FhnParams& params,
                                  const DeimModel* deim = nullptr, const DmdModel* dmd = nullptr);

/// Recomputes the DMD forcing table, e.g. after replacing the model.
void set_dmd_forcing(ReducedOperators& rops, const DmdModel& dmd, const FhnParams& params);

struct ReducedTrajectory {
  Backend backend = Backend::pod;
  Trajectory::Kind kind = Trajectory::Kind::state;
  std::vector<Vector> first;
  std::vector<Vector> second;
  std::vector<double> times;
  int newton_iterations = 0;
  long nonlinear_calls = 0;      // evaluations of the (sampled) nonlinear vector
  long nonlinear_integrals = 0;  // element quadratures performed by those calls

  int steps() const { return static_cast<int>(first.size()) - 1; }
  double mean_newton_iterations() const { return steps() > 0 ? double(newton_iterations) / steps() : 0.0; }
};

inline constexpr double kReducedNewtonTolerance = 1e-11;

/// Psi^T M v.
Vector project(const Matrix& psi, const SparseMatrix& mass, const Vector& v);

ReducedTrajectory solve_reduced_state(const ReducedOperators& rops, const FhnParams& params,
                                      const ControlGrid& control, const Vector& y0_r, const Vector& z0_r);

/// Desired states in reduced form plus their squared M-norms, so that the
/// reduced tracking term equals the full misfit of the lifted state.
struct ReducedTarget {
  Vector y, z;  // Psi^T M y_T, Psi^T M z_T
  double norm_y2 = 0.0, norm_z2 = 0.0;
};
ReducedTarget reduce_target(const ReducedOperators& rops, const Vector& y_T, const Vector& z_T);

ReducedTrajectory solve_reduced_adjoint(const ReducedOperators& rops, const FhnParams& params,
                                        const ReducedTrajectory& state, const ReducedTarget& target);

double reduced_cost(const ReducedOperators& rops, const FhnParams& params, const ReducedTrajectory& state,
                    const ControlGrid& control, const ReducedTarget& target);

/// lambda u_n + Psi_y p_r[n-1].
ControlGrid reduced_gradient(const ReducedOperators& rops, const ReducedTrajectory& adjoint,
                             const ControlGrid& control, const FhnParams& params);

/// Psi w for every stored step.
std::vector<Vector> lift(const Matrix& psi, const std::vector<Vector>& reduced);

/// ||W_full - Psi W_r||_F / ||W_full||_F over all stored steps.
double frobenius_error(const std::vector<Vector>& full, const std::vector<Vector>& reduced, const Matrix& psi);
double frobenius_error(const std::vector<Vector>& full, const std::vector<Vector>& other);

}  // namespace fhn
