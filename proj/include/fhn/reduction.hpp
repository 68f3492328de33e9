#pragma once

#include "fhn/common.hpp"

#include <complex>
#include <string>
#include <vector>

namespace fhn {

/// Snapshot matrix with one column per stored time.
struct SnapshotSet {
  Matrix data;
  std::vector<double> times;
  std::string provenance;

  Eigen::Index dofs() const { return data.rows(); }
  Eigen::Index count() const { return data.cols(); }
};

SnapshotSet make_snapshots(const std::vector<Vector>& columns, const std::vector<double>& times,
                           std::string provenance);

/// Relative information content sum_{i<=k} s_i^2 / sum_i s_i^2.
double relative_information_content(const Vector& singular_values, int k);

/// M-orthonormal POD basis.
struct PodBasis {
  Matrix basis;             // N x k
  Vector singular_values;   // all of them, non-increasing
  int rank = 0;
  double ric = 0.0;
  SparseMatrix cholesky;    // upper-triangular R with R^T R = M
};

/// Block-wise Cholesky factor of a block-diagonal SPD mass matrix.
SparseMatrix mass_cholesky(const SparseMatrix& mass);

/// Smallest rank reaching `ric_threshold`.
PodBasis build_pod(const SnapshotSet& snapshots, const SparseMatrix& mass, double ric_threshold);
/// Fixed rank k.
PodBasis build_pod_rank(const SnapshotSet& snapshots, const SparseMatrix& mass, int k);

/// Greedy interpolation indices; ties go to the lowest index.
std::vector<int> deim_indices(const Matrix& W);

struct DeimModel {
  Matrix W;                  // N x m
  std::vector<int> indices;  // m distinct rows
  Matrix Q;                  // k x m, Psi^T W (P^T W)^{-1}
  double condition = 0.0;    // of P^T W

  int rank() const { return static_cast<int>(indices.size()); }
  /// P^T W, the m x m interpolation matrix.
  Matrix sampled_basis() const;
  /// W (P^T W)^{-1} P^T v.
  Vector interpolate(const Vector& v) const;
};

/// Numerical rank of a snapshot matrix (singular values above 1e-12 s_1).
int numerical_rank(const Matrix& data);

DeimModel build_deim(const SnapshotSet& nonlinear, const PodBasis& pod_y, int m);

using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

struct DmdModel {
  ComplexMatrix modes;        // N x r
  ComplexVector eigenvalues;  // lambda_j
  ComplexVector frequencies;  // omega_j = log(lambda_j) / dt
  ComplexVector amplitudes;   // alpha
  double dt = 0.0;
  double t_fit = 0.0;         // time of the column alpha was fitted to
  int rank = 0;
  double residual = 0.0;      // relative Frobenius reconstruction error on the columns of Gp
  std::vector<std::string> warnings;

  /// Re(modes diag(exp(omega (t - t_fit))) alpha), with time 0 at the first
  /// column of G.
  Vector evaluate(double t) const;
};

/// Exact DMD of the pairs (G, Gp). Rank is capped at the numerical rank of G.
/// The amplitudes are fitted to the first column of Gp, at t = dt.
DmdModel build_dmd(const SnapshotSet& G, const SnapshotSet& Gp, double dt, int rank);

}  // namespace fhn
