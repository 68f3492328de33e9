#include <doctest.h>

#include "fhn/dg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <cmath>
#include <memory>
#include <random>

using namespace fhn;

namespace {

std::shared_ptr<const Mesh> make_mesh(double L, double H, double dx) {
  return std::make_shared<const Mesh>(build_uniform_mesh(L, H, dx));
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// Exact integral of l0^a l1^b l2^c over a triangle of given area.
double barycentric_monomial(double area, int a, int b, int c) {
  return 2.0 * area * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2);
}

double max_abs(const SparseMatrix& m) {
  double out = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) out = std::max(out, std::abs(it.value()));
  return out;
}

}  // namespace

TEST_CASE("quadrature rules integrate their advertised degree exactly") {
  const auto& tri = triangle_rule_degree4();
  double wsum = 0.0;
  for (double w : tri.weights) wsum += w;
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-15));
  for (int a = 0; a <= 4; ++a) {
    for (int b = 0; a + b <= 4; ++b) {
      for (int c = 0; a + b + c <= 4; ++c) {
        double q = 0.0;
        for (std::size_t i = 0; i < tri.weights.size(); ++i) {
          const auto& p = tri.points[i];
          q += tri.weights[i] * std::pow(p[0], a) * std::pow(p[1], b) * std::pow(p[2], c);
        }
        CHECK(q == doctest::Approx(barycentric_monomial(1.0, a, b, c)).epsilon(1e-13));
      }
    }
  }
  const auto& line = gauss3();
  for (int d = 0; d <= 5; ++d) {
    double q = 0.0;
    for (std::size_t i = 0; i < line.weights.size(); ++i) q += line.weights[i] * std::pow(line.points[i], d);
    CHECK(q == doctest::Approx(1.0 / (d + 1)).epsilon(1e-14));
  }
}

TEST_CASE("local mass block matches symbolic integration") {
  const DgSpace space(make_mesh(1.0, 1.0, 1.0));
  const Operators ops = assemble_operators(space, 1.0, 0.0, kDefaultPenalty);
  for (int t = 0; t < space.num_elements(); ++t) {
    const double area = space.mesh().areas[t];
    CHECK(area == doctest::Approx(0.5));
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        int e[3] = {0, 0, 0};
        ++e[i];
        ++e[j];
        const double exact = barycentric_monomial(area, e[0], e[1], e[2]);
        CHECK(ops.mass.coeff(3 * t + i, 3 * t + j) == doctest::Approx(exact).epsilon(1e-14));
        CHECK(exact == doctest::Approx(area / 12.0 * (i == j ? 2.0 : 1.0)));
      }
    }
  }
}

TEST_CASE("mass is block diagonal SPD, S is symmetric and stable") {
  const DgSpace space(make_mesh(3.0, 2.0, 0.5));
  const Operators ops = assemble_operators(space, 1.0, 128.0, kDefaultPenalty);
  CHECK(ops.warnings.empty());
  for (int k = 0; k < ops.mass.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(ops.mass, k); it; ++it) CHECK(it.row() / 3 == it.col() / 3);
  }
  Eigen::SimplicialLLT<SparseMatrix> llt(ops.mass);
  CHECK(llt.info() == Eigen::Success);

  const SparseMatrix asym = ops.stiffness - SparseMatrix(ops.stiffness.transpose());
  CHECK(max_abs(asym) <= 1e-12 * max_abs(ops.stiffness));

  const Matrix dense = Matrix(ops.stiffness);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (dense + dense.transpose()));
  CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * max_abs(ops.stiffness));
}

TEST_CASE("penalty below the threshold is reported, not rejected") {
  const DgSpace space(make_mesh(2.0, 1.0, 0.5));
  const Operators weak = assemble_operators(space, 1.0, 0.0, 0.5 * kPenaltyStabilityThreshold);
  CHECK(weak.warnings.size() == 1);
  CHECK_THROWS_AS(assemble_operators(space, 1.0, 0.0, 0.0), InputError);
  CHECK_THROWS_AS(assemble_operators(space, -1.0, 0.0, 1.0), InputError);

  // Document where the threshold sits: at the threshold S is PSD, well below it is not.
  auto min_eig = [&](double gamma) {
    const Matrix s = Matrix(assemble_operators(space, 1.0, 0.0, gamma).stiffness);
    return Eigen::SelfAdjointEigenSolver<Matrix>(s).eigenvalues().minCoeff();
  };
  CHECK(min_eig(kPenaltyStabilityThreshold) >= -1e-10);
  CHECK(min_eig(0.25) < 0.0);
  CHECK(min_eig(2.5) < 0.0);
}

TEST_CASE("isolated element carries no face terms") {
  auto mesh = std::make_shared<Mesh>();
  mesh->length = 1.0;
  mesh->height = 1.0;
  mesh->vertices = {{0, 0}, {1, 0}, {0, 1}};
  mesh->triangles = {{0, 1, 2}};
  mesh->areas = {0.5};
  mesh->diameters = {std::sqrt(2.0)};
  mesh->triangle_edges = {{0, 1, 2}};
  const std::array<std::array<int, 2>, 3> ev = {{{1, 2}, {2, 0}, {0, 1}}};
  for (const auto& v : ev) {
    Edge e;
    e.vertices = v;
    e.kind = EdgeKind::neumann;
    const Point a = mesh->vertices[v[0]], b = mesh->vertices[v[1]];
    e.length = std::hypot(b.x - a.x, b.y - a.y);
    e.normal = {(b.y - a.y) / e.length, -(b.x - a.x) / e.length};
    e.triangles = {0, -1};
    mesh->edges.push_back(e);
  }
  const DgSpace space(mesh);
  const Operators ops = assemble_operators(space, 0.0, 0.0, 10.0);
  // D = 0: the diffusion operator D*S and the load vanish.
  CHECK(max_abs(SparseMatrix(0.0 * ops.stiffness)) == 0.0);
  CHECK(ops.load.norm() == 0.0);
  // Only the volume gradient block remains in S for every penalty.
  const Operators other = assemble_operators(space, 0.0, 0.0, 1000.0);
  CHECK(max_abs(SparseMatrix(ops.stiffness - other.stiffness)) == 0.0);
  CHECK(Matrix(ops.stiffness).rowwise().sum().norm() < 1e-14);
}

TEST_CASE("convection: zero without flow, constant has no volume part") {
  const DgSpace space(make_mesh(4.0, 2.0, 0.5));
  CHECK(max_abs(assemble_operators(space, 1.0, 0.0, kDefaultPenalty).convection) == 0.0);

  const double vmax = 128.0;
  const Operators ops = assemble_operators(space, 1.0, vmax, kDefaultPenalty);
  const Vector ones = Vector::Ones(space.num_dofs());
  const Vector volume = assemble_volume_convection(space, vmax) * ones;
  CHECK(volume.cwiseAbs().maxCoeff() < 1e-12);

  // Independent oracle for B*1: only the inflow boundary term survives,
  // -int_{x=0} V.n phi_i ds, with V.n = -a y (H - y) on the left end.
  const Mesh& mesh = space.mesh();
  const ChannelVelocity v{vmax, mesh.height};
  Vector expected = Vector::Zero(space.num_dofs());
  const auto& line = gauss3();
  for (const Edge& e : mesh.edges) {
    const Point a = mesh.vertices[e.vertices[0]], b = mesh.vertices[e.vertices[1]];
    if (!(a.x == 0.0 && b.x == 0.0)) continue;
    for (std::size_t q = 0; q < 3; ++q) {
      const Point x{0.0, a.y + line.points[q] * (b.y - a.y)};
      const double vn = -v(x).x;
      const auto phi = space.barycentric(e.triangles[0], x);
      for (int i = 0; i < 3; ++i) expected[3 * e.triangles[0] + i] -= line.weights[q] * e.length * vn * phi[i];
    }
  }
  const Vector b1 = ops.convection * ones;
  CHECK((b1 - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("adjoint boundary term vanishes on the channel walls") {
  const DgSpace space(make_mesh(4.0, 2.0, 0.5));
  const Operators ops = assemble_operators(space, 1.0, 128.0, kDefaultPenalty);
  CHECK(max_abs(ops.adjoint_boundary) == 0.0);
}

TEST_CASE("patch test reproduces a linear Dirichlet profile") {
  const DgSpace space(make_mesh(2.0, 1.0, 0.5));
  auto exact = [](const Point& p) { return 1.0 + 2.0 * p.x; };
  for (double D : {0.5, 1.0, 3.0}) {
    const Operators ops = assemble_operators(space, D, 0.0, kDefaultPenalty, exact);
    Eigen::SparseLU<SparseMatrix> lu(SparseMatrix(D * ops.stiffness));
    REQUIRE(lu.info() == Eigen::Success);
    const Vector y = lu.solve(ops.load);
    double err = 0.0;
    const Mesh& mesh = space.mesh();
    for (int t = 0; t < space.num_elements(); ++t) {
      for (int i = 0; i < 3; ++i) err = std::max(err, std::abs(y[3 * t + i] - exact(mesh.vertices[mesh.triangles[t][i]])));
    }
    CHECK(err < 1e-10);
  }
}

TEST_CASE("reaction vector values") {
  const DgSpace space(make_mesh(2.0, 1.0, 0.5));
  const Operators ops = assemble_operators(space, 1.0, 0.0, kDefaultPenalty);
  const int n = space.num_dofs();
  const double c1 = 9.0, c2 = 0.02;
  for (double c : {0.0, 1.0, c2}) {
    const NonlinearEval eval = eval_nonlinearity(space, Vector::Constant(n, c), c1, c2);
    CHECK(eval.value.cwiseAbs().maxCoeff() < 1e-15);
  }
  // Constant 0.5: g = 9 * 0.5 * 0.48 * (-0.5) = -1.08 times the mass row sums.
  const NonlinearEval half = eval_nonlinearity(space, Vector::Constant(n, 0.5), c1, c2);
  const Vector row_sums = ops.mass * Vector::Ones(n);
  CHECK((half.value - (-1.08) * row_sums).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("reaction Jacobian matches central differences") {
  const DgSpace space(make_mesh(2.0, 1.0, 0.5));
  const int n = space.num_dofs();
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  for (int trial = 0; trial < 10; ++trial) {
    Vector y(n), d(n);
    for (int i = 0; i < n; ++i) {
      y[i] = u(rng);
      d[i] = u(rng);
    }
    const double eps = 1e-5;
    const CubicReaction g{9.0, 0.02};
    const Vector fd = (reaction_vector(space, y + eps * d, g) - reaction_vector(space, y - eps * d, g)) / (2 * eps);
    const Vector jd = reaction_jacobian(space, y, g) * d;
    CHECK((fd - jd).norm() / jd.norm() <= 1e-6);
    // Block locality.
    const SparseMatrix jac = reaction_jacobian(space, y, g);
    for (int k = 0; k < jac.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(jac, k); it; ++it) CHECK(it.row() / 3 == it.col() / 3);
  }
}

TEST_CASE("single entry kernel agrees with the element vector") {
  const CubicReaction g{9.0, 0.02};
  const std::array<double, 3> local = {0.1, 0.7, -0.2};
  const auto full = element_reaction(g, 0.125, local);
  for (int i = 0; i < 3; ++i) CHECK(element_reaction_entry(g, 0.125, local, i) == full[i]);
}

TEST_CASE("L2 projection of initial data") {
  const double H = 4.0;
  const DgSpace space(make_mesh(10.0, H, 0.5));
  const Vector ones = project_initial(space, [](const Point&) { return 1.0; });
  CHECK((ones - Vector::Ones(space.num_dofs())).cwiseAbs().maxCoeff() < 1e-12);

  auto strip = [](const Point& p) { return (p.x >= 2.0 && p.x <= 2.2) ? 1.0 : 0.0; };
  const Vector y0 = project_initial(space, strip, Breaklines{{2.0, 2.2}, {}});
  const Mesh& mesh = space.mesh();
  for (int t = 0; t < space.num_elements(); ++t) {
    double xmin = 1e300, xmax = -1e300;
    for (int v : mesh.triangles[t]) {
      xmin = std::min(xmin, mesh.vertices[v].x);
      xmax = std::max(xmax, mesh.vertices[v].x);
    }
    const bool touches = xmax > 2.0 && xmin < 2.2;
    if (!touches) CHECK(y0.segment<3>(3 * t).norm() == 0.0);
  }
  CHECK(integrate(space, y0) == doctest::Approx(0.2 * H).epsilon(1e-6));
}
