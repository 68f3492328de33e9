#include <doctest.h>

#include "fhn/dg.hpp"
#include "fhn/fom.hpp"
#include "fhn/mesh.hpp"
#include "fhn/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace fhn;

namespace {

SparseMatrix mesh_mass(double L, double H, double dx) {
  const DgSpace space(std::make_shared<Mesh>(build_uniform_mesh(L, H, dx)));
  return assemble_operators(space, 1.0, 0.0, kDefaultPenalty).mass;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

SnapshotSet snapshots_of(const Matrix& data) {
  SnapshotSet s;
  s.data = data;
  for (Eigen::Index j = 0; j < data.cols(); ++j) s.times.push_back(double(j));
  s.provenance = "test";
  return s;
}

double m_error(const Matrix& Y, const Matrix& psi, const SparseMatrix& M) {
  const Matrix e = Y - psi * (psi.transpose() * (M * Y));
  return (e.transpose() * (M * e)).trace();
}

}  // namespace

TEST_CASE("rank-one snapshots") {
  const SparseMatrix M = mesh_mass(2.0, 1.0, 0.5);
  std::mt19937 rng(3);
  const Vector v = random_matrix(M.rows(), 1, rng);
  const Matrix Y = v.replicate(1, 5);
  const PodBasis pod = build_pod(snapshots_of(Y), M, 0.9999);
  CHECK(pod.rank == 1);
  CHECK(pod.ric == doctest::Approx(1.0).epsilon(1e-12));
  const Vector expected = v / std::sqrt(v.dot(M * v));
  const double sign = pod.basis.col(0).dot(expected) > 0 ? 1.0 : -1.0;
  CHECK((sign * pod.basis.col(0) - expected).norm() <= 1e-10 * expected.norm());
}

TEST_CASE("cholesky factor of the mass matrix") {
  const SparseMatrix M = mesh_mass(3.0, 2.0, 0.5);
  const SparseMatrix R = mass_cholesky(M);
  const Matrix diff = Matrix(SparseMatrix(R.transpose()) * R) - Matrix(M);
  CHECK(diff.cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("POD basis properties on random data") {
  const SparseMatrix M = mesh_mass(4.0, 2.0, 0.5);
  std::mt19937 rng(5);
  // Decaying spectrum so the RIC rule has something to choose.
  Matrix Y = random_matrix(M.rows(), 12, rng);
  for (int j = 0; j < 12; ++j) Y.col(j) *= std::pow(0.3, j);
  Y = Y * random_matrix(12, 12, rng);
  const PodBasis pod = build_pod(snapshots_of(Y), M, 0.9999);

  const Matrix gram = pod.basis.transpose() * (M * pod.basis);
  CHECK((gram - Matrix::Identity(pod.rank, pod.rank)).cwiseAbs().maxCoeff() <= 1e-10);
  for (Eigen::Index i = 1; i < pod.singular_values.size(); ++i) {
    CHECK(pod.singular_values(i) <= pod.singular_values(i - 1));
  }
  CHECK(pod.ric >= 0.9999);
  CHECK(relative_information_content(pod.singular_values, pod.rank - 1) < 0.9999);

  for (int k : {1, 3, pod.rank}) {
    const PodBasis fixed = build_pod_rank(snapshots_of(Y), M, k);
    const double lhs = m_error(Y, fixed.basis, M);
    const double rhs = fixed.singular_values.tail(fixed.singular_values.size() - k).squaredNorm();
    CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max(rhs, 1e-300));
  }
}

TEST_CASE("POD beats random M-orthonormal bases") {
  const SparseMatrix M = mesh_mass(2.0, 1.0, 1.0);
  REQUIRE(M.rows() == 12);
  const SparseMatrix R = mass_cholesky(M);
  std::mt19937 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix Y = random_matrix(12, 6, rng);
    for (int k = 1; k <= 4; ++k) {
      const double best = m_error(Y, build_pod_rank(snapshots_of(Y), M, k).basis, M);
      for (int r = 0; r < 50; ++r) {
        // R^{-1} Q with Q orthonormal gives an M-orthonormal basis.
        const Matrix q = random_matrix(12, k, rng).householderQr().householderQ() * Matrix::Identity(12, k);
        const Matrix psi = R.triangularView<Eigen::Upper>().solve(q);
        CHECK(best <= m_error(Y, psi, M) + 1e-12);
      }
    }
  }
}

TEST_CASE("POD input errors") {
  const SparseMatrix M = mesh_mass(2.0, 1.0, 1.0);
  CHECK_THROWS_AS(build_pod(snapshots_of(Matrix::Zero(12, 3)), M, 0.9), InputError);
  std::mt19937 rng(1);
  CHECK_THROWS_AS(build_pod_rank(snapshots_of(random_matrix(12, 3, rng)), M, 4), InputError);
  CHECK_THROWS_AS(build_pod(snapshots_of(random_matrix(10, 3, rng)), M, 0.9), InputError);
}

TEST_CASE("DEIM greedy on canonical vectors and ties") {
  Matrix W = Matrix::Zero(5, 2);
  W(0, 0) = 1.0;
  W(1, 1) = 1.0;
  CHECK(deim_indices(W) == std::vector<int>{0, 1});

  DeimModel model;
  model.W = W;
  model.indices = deim_indices(W);
  Vector v = Vector::Zero(5);
  v(0) = 3.5;
  v(1) = -2.0;
  CHECK((model.interpolate(v) - v).norm() == 0.0);

  Matrix tie(4, 1);
  tie << 0.5, -0.5, 0.5, 0.1;
  CHECK(deim_indices(tie) == std::vector<int>{0});
  Matrix later(4, 1);
  later << 0.1, -0.7, 0.7, 0.2;
  CHECK(deim_indices(later) == std::vector<int>{1});

  Matrix dependent(4, 2);
  dependent << 1, 2, 0, 0, 0, 0, 0, 0;
  CHECK_THROWS_AS(deim_indices(dependent), SolveError);
}

TEST_CASE("DEIM is exact at full rank of the nonlinear snapshots") {
  FhnParams params;
  params.T = 0.5;
  auto space = std::make_shared<DgSpace>(std::make_shared<Mesh>(build_uniform_mesh(6.0, 2.0, 0.5)));
  const Operators ops = assemble_operators(*space, 1.0, 8.0, kDefaultPenalty);
  const int n = space->num_dofs();
  const Vector y0 = project_initial(*space, [](const Point& p) { return p.x >= 2.0 && p.x <= 2.2 ? 1.0 : 0.0; },
                                    Breaklines{{2.0, 2.2}, {}});
  const Trajectory traj =
      solve_state(ops, ops, params, ControlGrid::zeros(n, params.steps(), -0.01, 0.01), y0, Vector::Zero(n));
  std::vector<Vector> g;
  for (const Vector& y : traj.first) g.push_back(reaction_vector(*space, y, params.reaction()));
  const SnapshotSet G = make_snapshots(g, traj.times, "uncontrolled");
  const PodBasis pod = build_pod(make_snapshots(traj.first, traj.times, "uncontrolled"), ops.mass, 0.9999);

  const int m = numerical_rank(G.data);
  const DeimModel deim = build_deim(G, pod, m);
  CHECK(deim.rank() == m);
  CHECK(std::set<int>(deim.indices.begin(), deim.indices.end()).size() == static_cast<std::size_t>(m));
  CHECK(deim.condition >= 1.0);
  CHECK(deim.Q.rows() == pod.rank);
  CHECK(deim.Q.cols() == m);
  for (Eigen::Index j = 0; j < G.count(); ++j) {
    const Vector col = G.data.col(j);
    const Vector approx = deim.interpolate(col);
    CHECK((approx - col).norm() <= 1e-10 * col.norm());
    for (int i : deim.indices) CHECK(std::abs(approx(i) - col(i)) <= 1e-12 * col.cwiseAbs().maxCoeff());
  }

  // Interpolation holds at the sampled rows for any input, not only span(W).
  const DeimModel small = build_deim(G, pod, 3);
  std::mt19937 rng(9);
  const Vector any = random_matrix(n, 1, rng);
  const Vector approx = small.interpolate(any);
  for (int i : small.indices) CHECK(std::abs(approx(i) - any(i)) <= 1e-12 * any.cwiseAbs().maxCoeff());

  CHECK_THROWS_AS(build_deim(G, pod, m + 1), InputError);
}

TEST_CASE("DMD of a scalar geometric sequence") {
  Matrix g(1, 6), gp(1, 6);
  for (int j = 0; j < 6; ++j) {
    g(0, j) = std::pow(2.0, j);
    gp(0, j) = std::pow(2.0, j + 1);
  }
  const DmdModel dmd = build_dmd(snapshots_of(g), snapshots_of(gp), 1.0, 1);
  REQUIRE(dmd.rank == 1);
  CHECK(dmd.eigenvalues(0).real() == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(dmd.eigenvalues(0).imag() == doctest::Approx(0.0));
  CHECK(dmd.frequencies(0).real() == doctest::Approx(std::log(2.0)).epsilon(1e-13));
  for (int j = 0; j <= 6; ++j) CHECK(dmd.evaluate(j)(0) == doctest::Approx(std::pow(2.0, j)).epsilon(1e-12));
  CHECK(dmd.residual <= 1e-13);
}

TEST_CASE("DMD recovers a diagonalizable linear map") {
  std::mt19937 rng(23);
  const int n = 20, steps = 30;
  // Damped rotations: eigenvalues r e^{+-i theta} spread around the circle keep
  // the Krylov data well conditioned.
  Matrix blocks = Matrix::Zero(n, n);
  std::vector<std::complex<double>> spectrum;
  for (int b = 0; b < n / 2; ++b) {
    const double r = 0.95 + 0.005 * b;
    const double theta = (b + 0.5) * M_PI / (n / 2);
    blocks.block(2 * b, 2 * b, 2, 2) << r * std::cos(theta), -r * std::sin(theta), r * std::sin(theta), r * std::cos(theta);
    spectrum.push_back(std::polar(r, theta));
    spectrum.push_back(std::polar(r, -theta));
  }
  const Matrix V = random_matrix(n, n, rng);
  const Matrix A = V * blocks * V.inverse();
  Matrix X(n, steps + 1);
  X.col(0) = random_matrix(n, 1, rng);
  for (int j = 0; j < steps; ++j) X.col(j + 1) = A * X.col(j);

  const double dt = 0.1;
  const DmdModel dmd = build_dmd(snapshots_of(X.leftCols(steps)), snapshots_of(X.rightCols(steps)), dt, n);
  REQUIRE(dmd.rank == n);
  CHECK(dmd.warnings.empty());
  for (const auto& expected : spectrum) {
    double nearest = INFINITY;
    for (int i = 0; i < n; ++i) nearest = std::min(nearest, std::abs(dmd.eigenvalues(i) - expected));
    CHECK(nearest <= 1e-8);
  }
  for (int j = 0; j <= steps; ++j) {
    CHECK((dmd.evaluate(j * dt) - X.col(j)).norm() <= 1e-8 * X.col(j).norm());
  }
  CHECK(dmd.residual <= 1e-8);
}

TEST_CASE("steady DMD mode and rank reduction") {
  Matrix g(3, 4);
  g.setZero();
  g.row(0).setConstant(2.0);
  const DmdModel dmd = build_dmd(snapshots_of(g), snapshots_of(g), 0.5, 3);
  CHECK(dmd.rank == 1);
  CHECK(dmd.warnings.size() == 1);
  CHECK(std::abs(dmd.eigenvalues(0) - std::complex<double>(1.0, 0.0)) <= 1e-14);
  CHECK(std::abs(dmd.frequencies(0)) <= 1e-13);
  for (double t : {0.0, 0.5, 3.0, 10.0}) CHECK(dmd.evaluate(t)(0) == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("DMD residual on nonlinear snapshots decreases with rank") {
  FhnParams params;
  params.T = 0.5;
  auto space = std::make_shared<DgSpace>(std::make_shared<Mesh>(build_uniform_mesh(6.0, 2.0, 0.5)));
  const Operators ops = assemble_operators(*space, 1.0, 8.0, kDefaultPenalty);
  const int n = space->num_dofs();
  const Vector y0 = project_initial(*space, [](const Point& p) { return p.x >= 2.0 && p.x <= 2.2 ? 1.0 : 0.0; },
                                    Breaklines{{2.0, 2.2}, {}});
  const Trajectory traj =
      solve_state(ops, ops, params, ControlGrid::zeros(n, params.steps(), -0.01, 0.01), y0, Vector::Zero(n));
  std::vector<Vector> g;
  for (const Vector& y : traj.first) g.push_back(reaction_vector(*space, y, params.reaction()));
  const std::vector<Vector> head(g.begin(), g.end() - 1), tail(g.begin() + 1, g.end());
  const SnapshotSet G = make_snapshots(head, {}, "uncontrolled");
  const SnapshotSet Gp = make_snapshots(tail, {}, "uncontrolled");
  double previous = INFINITY;
  for (int r = 1; r <= numerical_rank(G.data); ++r) {
    const DmdModel dmd = build_dmd(G, Gp, params.dt, r);
    CHECK(dmd.residual <= previous + 1e-12);
    previous = dmd.residual;
  }
}
