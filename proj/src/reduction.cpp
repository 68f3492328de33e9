#include "fhn/reduction.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <sstream>

namespace fhn {

namespace {

constexpr double kRankTolerance = 1e-12;

Eigen::BDCSVD<Matrix> thin_svd(const Matrix& a) { return Eigen::BDCSVD<Matrix>(a, Eigen::ComputeThinU | Eigen::ComputeThinV); }

int rank_of(const Vector& sigma) {
  if (sigma.size() == 0 || sigma(0) <= 0.0) return 0;
  int r = 0;
  while (r < sigma.size() && sigma(r) > kRankTolerance * sigma(0)) ++r;
  return r;
}

// Index of the largest |v_i|; the strict comparison keeps the lowest index on ties.
Eigen::Index argmax_abs(const Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v(i)) > std::abs(v(best))) best = i;
  }
  return best;
}

Matrix rows_of(const Matrix& a, const std::vector<int>& rows, Eigen::Index cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = a.row(rows[i]).head(cols);
  return out;
}

PodBasis pod_from_svd(const SnapshotSet& snapshots, const SparseMatrix& mass, int k, double threshold, bool by_ric) {
  if (snapshots.data.size() == 0 || snapshots.data.norm() == 0.0) throw InputError("build_pod: snapshot matrix is zero");
  if (snapshots.dofs() != mass.rows()) throw InputError("build_pod: snapshot/mass size mismatch");
  PodBasis pod;
  pod.cholesky = mass_cholesky(mass);
  const Matrix weighted = pod.cholesky * snapshots.data;
  const auto svd = thin_svd(weighted);
  pod.singular_values = svd.singularValues();
  const int available = static_cast<int>(pod.singular_values.size());
  if (by_ric) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw InputError("build_pod: RIC threshold must lie in (0, 1]");
    k = 1;
    while (k < available && relative_information_content(pod.singular_values, k) < threshold) ++k;
  }
  if (k < 1 || k > available) {
    std::ostringstream msg;
    msg << "build_pod: rank " << k << " outside [1, " << available << "]";
    throw InputError(msg.str());
  }
  pod.rank = k;
  pod.ric = relative_information_content(pod.singular_values, k);
  pod.basis = pod.cholesky.triangularView<Eigen::Upper>().solve(Matrix(svd.matrixU().leftCols(k)));
  return pod;
}

}  // namespace

SnapshotSet make_snapshots(const std::vector<Vector>& columns, const std::vector<double>& times,
                           std::string provenance) {
  if (columns.empty()) throw InputError("make_snapshots: no columns");
  SnapshotSet s;
  s.data.resize(columns.front().size(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j].size() != s.data.rows()) throw InputError("make_snapshots: ragged columns");
    s.data.col(static_cast<Eigen::Index>(j)) = columns[j];
  }
  s.times = times;
  s.provenance = std::move(provenance);
  return s;
}

double relative_information_content(const Vector& singular_values, int k) {
  const double total = singular_values.squaredNorm();
  if (total == 0.0) return 0.0;
  return singular_values.head(std::min<Eigen::Index>(k, singular_values.size())).squaredNorm() / total;
}

SparseMatrix mass_cholesky(const SparseMatrix& mass) {
  const Eigen::Index n = mass.rows();
  if (n % 3 != 0 || mass.cols() != n) throw InputError("mass_cholesky: expected 3x3 diagonal blocks");
  std::vector<Eigen::Matrix3d> blocks(static_cast<std::size_t>(n / 3), Eigen::Matrix3d::Zero());
  for (int k = 0; k < mass.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(mass, k); it; ++it) {
      if (it.row() / 3 != it.col() / 3) throw InputError("mass_cholesky: mass matrix is not block diagonal");
      blocks[static_cast<std::size_t>(it.row() / 3)](it.row() % 3, it.col() % 3) = it.value();
    }
  }
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(2 * n));
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    Eigen::LLT<Eigen::Matrix3d> llt(blocks[b]);
    if (llt.info() != Eigen::Success) throw InputError("mass_cholesky: mass block is not positive definite");
    const Eigen::Matrix3d r = llt.matrixU();
    const Eigen::Index base = static_cast<Eigen::Index>(3 * b);
    for (int i = 0; i < 3; ++i) {
      for (int j = i; j < 3; ++j) triplets.emplace_back(base + i, base + j, r(i, j));
    }
  }
  SparseMatrix out(n, n);
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

PodBasis build_pod(const SnapshotSet& snapshots, const SparseMatrix& mass, double ric_threshold) {
  return pod_from_svd(snapshots, mass, 0, ric_threshold, true);
}

PodBasis build_pod_rank(const SnapshotSet& snapshots, const SparseMatrix& mass, int k) {
  return pod_from_svd(snapshots, mass, k, 0.0, false);
}

int numerical_rank(const Matrix& data) { return rank_of(thin_svd(data).singularValues()); }

std::vector<int> deim_indices(const Matrix& W) {
  const Eigen::Index m = W.cols();
  std::vector<int> p;
  p.reserve(static_cast<std::size_t>(m));
  p.push_back(static_cast<int>(argmax_abs(W.col(0))));
  if (W(p[0], 0) == 0.0) throw SolveError("DEIM greedy: zero basis vector", 1);
  for (Eigen::Index l = 1; l < m; ++l) {
    const Matrix pw = rows_of(W, p, l);
    Vector rhs(l);
    for (Eigen::Index i = 0; i < l; ++i) rhs(i) = W(p[static_cast<std::size_t>(i)], l);
    const Vector c = pw.partialPivLu().solve(rhs);
    const Vector r = W.col(l) - W.leftCols(l) * c;
    const Eigen::Index next = argmax_abs(r);
    if (!(std::abs(r(next)) > kRankTolerance * W.col(l).cwiseAbs().maxCoeff())) {
      throw SolveError("DEIM greedy: P^T W is singular", static_cast<int>(l + 1));
    }
    p.push_back(static_cast<int>(next));
  }
  return p;
}

Matrix DeimModel::sampled_basis() const { return rows_of(W, indices, W.cols()); }

Vector DeimModel::interpolate(const Vector& v) const {
  Vector sampled(rank());
  for (int i = 0; i < rank(); ++i) sampled(i) = v(indices[static_cast<std::size_t>(i)]);
  return W * sampled_basis().partialPivLu().solve(sampled);
}

DeimModel build_deim(const SnapshotSet& nonlinear, const PodBasis& pod_y, int m) {
  if (nonlinear.dofs() != pod_y.basis.rows()) throw InputError("build_deim: snapshot/basis size mismatch");
  const auto svd = thin_svd(nonlinear.data);
  const int available = rank_of(svd.singularValues());
  if (m < 1 || m > available) {
    std::ostringstream msg;
    msg << "build_deim: m=" << m << " exceeds the nonlinear snapshot rank " << available;
    throw InputError(msg.str());
  }
  DeimModel model;
  model.W = svd.matrixU().leftCols(m);
  model.indices = deim_indices(model.W);
  const Matrix ptw = rows_of(model.W, model.indices, m);
  const Vector s = thin_svd(ptw).singularValues();
  model.condition = s(0) / s(m - 1);
  model.Q = (pod_y.basis.transpose() * model.W) * ptw.partialPivLu().inverse();
  return model;
}

Vector DmdModel::evaluate(double t) const {
  ComplexVector weights(rank);
  for (int j = 0; j < rank; ++j) {
    if (eigenvalues(j) == std::complex<double>(0.0, 0.0)) {
      weights(j) = (t == t_fit) ? amplitudes(j) : 0.0;
    } else {
      weights(j) = std::exp(frequencies(j) * (t - t_fit)) * amplitudes(j);
    }
  }
  return (modes * weights).real();
}

DmdModel build_dmd(const SnapshotSet& G, const SnapshotSet& Gp, double dt, int rank) {
  if (G.data.rows() != Gp.data.rows() || G.data.cols() != Gp.data.cols()) throw InputError("build_dmd: G and G' differ in shape");
  if (!(dt > 0.0)) throw InputError("build_dmd: dt must be positive");
  if (rank < 1) throw InputError("build_dmd: rank must be positive");
  DmdModel model;
  model.dt = dt;
  const auto svd = thin_svd(G.data);
  const int available = rank_of(svd.singularValues());
  if (available == 0) throw InputError("build_dmd: G is zero");
  if (rank > available) {
    std::ostringstream msg;
    msg << "requested DMD rank " << rank << " reduced to numerical rank " << available;
    model.warnings.push_back(msg.str());
    rank = available;
  }
  model.rank = rank;
  const Matrix U = svd.matrixU().leftCols(rank);
  const Matrix V = svd.matrixV().leftCols(rank);
  const Vector sigma_inv = svd.singularValues().head(rank).cwiseInverse();
  const Matrix gp_v_sinv = Gp.data * V * sigma_inv.asDiagonal();
  const Matrix reduced = U.transpose() * gp_v_sinv;

  Eigen::EigenSolver<Matrix> eig(reduced);
  if (eig.info() != Eigen::Success) throw SolveError("build_dmd: eigen decomposition failed", 0);
  model.eigenvalues = eig.eigenvalues();
  model.modes = gp_v_sinv.cast<std::complex<double>>() * eig.eigenvectors();
  model.frequencies.resize(rank);
  for (int j = 0; j < rank; ++j) model.frequencies(j) = std::log(model.eigenvalues(j)) / dt;
  model.t_fit = dt;
  const ComplexVector first = Gp.data.col(0).cast<std::complex<double>>();
  model.amplitudes = model.modes.completeOrthogonalDecomposition().solve(first);

  double err = 0.0, total = 0.0;
  for (Eigen::Index j = 0; j < Gp.data.cols(); ++j) {
    err += (Gp.data.col(j) - model.evaluate(static_cast<double>(j + 1) * dt)).squaredNorm();
    total += Gp.data.col(j).squaredNorm();
  }
  model.residual = total > 0.0 ? std::sqrt(err / total) : 0.0;
  return model;
}

}  // namespace fhn
