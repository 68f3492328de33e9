#pragma once

#include <array>
#include <vector>

namespace fhn {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

enum class EdgeKind { interior, dirichlet, neumann };

struct Edge {
  std::array<int, 2> vertices{};
  EdgeKind kind = EdgeKind::interior;
  // triangles[1] is -1 on boundary edges.
  std::array<int, 2> triangles{-1, -1};
  // Unit normal pointing out of triangles[0] (towards triangles[1] when interior).
  Point normal;
  double length = 0.0;

  bool is_boundary() const { return triangles[1] < 0; }
};

/// Conforming triangulation of the channel (0,L)x(0,H).
///
/// Dirichlet edges lie on x = 0 or x = L (the channel ends), Neumann edges
/// on the walls y = 0 and y = H. Triangles are stored counter-clockwise.
struct Mesh {
  double length = 0.0;  // L
  double height = 0.0;  // H
  int cells_x = 0;
  int cells_y = 0;

  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Edge> edges;
  // triangle_edges[t][i] is the edge opposite to local vertex i.
  std::vector<std::array<int, 3>> triangle_edges;
  std::vector<double> areas;
  std::vector<double> diameters;

  int num_triangles() const { return static_cast<int>(triangles.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int num_vertices() const { return static_cast<int>(vertices.size()); }
  Point edge_midpoint(int e) const;
  Point centroid(int t) const;
};

/// Structured mesh of (L/dx) x (H/dx) squares, each cut along the
/// lower-left to upper-right diagonal. Throws InputError when L or H is
/// not an integer multiple of dx.
Mesh build_uniform_mesh(double L, double H, double dx);

/// Parabolic channel profile V = (a y (H - y), 0) with a = 4 vmax / H^2.
struct ChannelVelocity {
  double vmax = 0.0;
  double height = 1.0;

  double coefficient() const { return 4.0 * vmax / (height * height); }
  Point operator()(const Point& p) const {
    return {coefficient() * p.y * (height - p.y), 0.0};
  }
  /// Analytic divergence; the profile depends on y only and has no y-component.
  double divergence(const Point&) const { return 0.0; }
};

enum class FlowTag { inflow, outflow };

struct EdgeFlowTag {
  int edge = -1;
  FlowTag tag = FlowTag::outflow;
  double v_dot_n = 0.0;  // at the edge midpoint, w.r.t. Edge::normal
};

/// |V.n| below this is treated as zero flux (tagged outflow).
inline constexpr double kZeroFluxTolerance = 1e-14;

/// Tags every edge by the sign of V.n at its midpoint, using the stored
/// normal (i.e. from the point of view of the edge's first triangle).
std::vector<EdgeFlowTag> classify_flow(const Mesh& mesh, double vmax, double H);

}  // namespace fhn
