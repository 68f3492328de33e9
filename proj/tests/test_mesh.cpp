#include <doctest.h>

#include "fhn/common.hpp"
#include "fhn/mesh.hpp"

#include <cmath>
#include <map>
#include <random>

using namespace fhn;

TEST_CASE("unit square with dx = 0.5") {
  const Mesh mesh = build_uniform_mesh(1.0, 1.0, 0.5);
  CHECK(mesh.num_triangles() == 8);
  CHECK(mesh.num_edges() == 16);
  CHECK(mesh.num_vertices() == 9);

  double area = 0.0;
  for (double a : mesh.areas) {
    CHECK(a > 0.0);
    area += a;
  }
  CHECK(area == doctest::Approx(1.0).epsilon(1e-12));
  for (double h : mesh.diameters) CHECK(h == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("non-divisible extent is rejected") {
  CHECK_THROWS_AS(build_uniform_mesh(1.0, 1.0, 0.3), InputError);
  try {
    build_uniform_mesh(1.0, 2.0, 0.3);
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("L=1") != std::string::npos);
  }
  CHECK_THROWS_AS(build_uniform_mesh(1.0, 1.0, -0.5), InputError);
}

TEST_CASE("edge topology and classification") {
  const double L = 3.0, H = 2.0;
  const Mesh mesh = build_uniform_mesh(L, H, 0.5);
  std::map<int, int> uses;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    for (int e : mesh.triangle_edges[t]) ++uses[e];
  }
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge& edge = mesh.edges[e];
    const Point a = mesh.vertices[edge.vertices[0]];
    const Point b = mesh.vertices[edge.vertices[1]];
    const bool ends = (a.x == 0 && b.x == 0) || (a.x == L && b.x == L);
    const bool walls = (a.y == 0 && b.y == 0) || (a.y == H && b.y == H);
    if (edge.kind == EdgeKind::interior) {
      CHECK(uses[e] == 2);
      CHECK(edge.triangles[1] >= 0);
      // Normal points from the first triangle towards the second.
      const Point c0 = mesh.centroid(edge.triangles[0]);
      const Point c1 = mesh.centroid(edge.triangles[1]);
      CHECK((c1.x - c0.x) * edge.normal.x + (c1.y - c0.y) * edge.normal.y > 0.0);
    } else {
      CHECK(uses[e] == 1);
      CHECK(edge.triangles[1] == -1);
      // Outward normal: points away from the centroid.
      const Point c0 = mesh.centroid(edge.triangles[0]);
      const Point m = mesh.edge_midpoint(e);
      CHECK((m.x - c0.x) * edge.normal.x + (m.y - c0.y) * edge.normal.y > 0.0);
    }
    CHECK((edge.kind == EdgeKind::dirichlet) == ends);
    CHECK((edge.kind == EdgeKind::neumann) == walls);
    CHECK(std::hypot(edge.normal.x, edge.normal.y) == doctest::Approx(1.0));
  }
}

TEST_CASE("refinement quadruples the triangle count") {
  for (double dx : {1.0, 0.5, 0.25}) {
    const Mesh coarse = build_uniform_mesh(4.0, 2.0, dx);
    const Mesh fine = build_uniform_mesh(4.0, 2.0, dx / 2);
    CHECK(fine.num_triangles() == 4 * coarse.num_triangles());
  }
}

TEST_CASE("channel velocity") {
  const ChannelVelocity v{128.0, 4.0};
  CHECK(v.coefficient() == doctest::Approx(32.0));
  CHECK(v({10.0, 2.0}).x == doctest::Approx(128.0));
  CHECK(v({10.0, 0.0}).x == 0.0);
  CHECK(v({10.0, 4.0}).x == 0.0);

  // div V = d/dx (a y (H - y)) = 0; checked by central differences too.
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> ux(0.0, 65.0), uy(0.0, 4.0);
  for (int i = 0; i < 50; ++i) {
    const Point p{ux(rng), uy(rng)};
    const double h = 1e-5;
    const double fd = (v({p.x + h, p.y}).x - v({p.x - h, p.y}).x) / (2 * h) +
                      (v({p.x, p.y + h}).y - v({p.x, p.y - h}).y) / (2 * h);
    CHECK(v.divergence(p) == 0.0);
    CHECK(std::abs(fd) < 1e-9);
  }
}

TEST_CASE("flow tags") {
  const double H = 4.0;
  const Mesh mesh = build_uniform_mesh(8.0, H, 1.0);
  const auto tags = classify_flow(mesh, 128.0, H);
  REQUIRE(tags.size() == mesh.edges.size());
  for (const auto& tag : tags) {
    const Edge& edge = mesh.edges[tag.edge];
    const Point m = mesh.edge_midpoint(tag.edge);
    CHECK((tag.tag == FlowTag::inflow) == (tag.v_dot_n < 0.0 && std::abs(tag.v_dot_n) >= kZeroFluxTolerance));
    if (edge.kind == EdgeKind::neumann) {
      CHECK(tag.v_dot_n == 0.0);
      CHECK(tag.tag == FlowTag::outflow);
    }
    if (edge.kind == EdgeKind::dirichlet && m.x == 0.0) CHECK(tag.tag == FlowTag::inflow);
    if (edge.kind == EdgeKind::dirichlet && m.x == 8.0) CHECK(tag.tag == FlowTag::outflow);
  }
  CHECK_THROWS_AS(classify_flow(mesh, -1.0, H), InputError);
  for (const auto& tag : classify_flow(mesh, 0.0, H)) CHECK(tag.tag == FlowTag::outflow);
}
