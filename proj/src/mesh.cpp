#include "fhn/mesh.hpp"

#include "fhn/common.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <utility>

namespace fhn {

namespace {

int checked_division(double extent, double dx, const char* name) {
  const double ratio = extent / dx;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9) {
    std::ostringstream msg;
    msg << "mesh: " << name << "=" << extent << " is not an integer multiple of dx=" << dx;
    throw InputError(msg.str());
  }
  return static_cast<int>(rounded);
}

double distance(const Point& a, const Point& b) { return std::hypot(b.x - a.x, b.y - a.y); }

}  // namespace

Point Mesh::edge_midpoint(int e) const {
  const auto& v = edges[e].vertices;
  return {0.5 * (vertices[v[0]].x + vertices[v[1]].x), 0.5 * (vertices[v[0]].y + vertices[v[1]].y)};
}

Point Mesh::centroid(int t) const {
  const auto& tri = triangles[t];
  Point c;
  for (int v : tri) {
    c.x += vertices[v].x / 3.0;
    c.y += vertices[v].y / 3.0;
  }
  return c;
}

Mesh build_uniform_mesh(double L, double H, double dx) {
  if (!(L > 0.0) || !(H > 0.0) || !(dx > 0.0)) {
    throw InputError("mesh: L, H and dx must be positive");
  }
  Mesh mesh;
  mesh.length = L;
  mesh.height = H;
  mesh.cells_x = checked_division(L, dx, "L");
  mesh.cells_y = checked_division(H, dx, "H");
  const int nx = mesh.cells_x;
  const int ny = mesh.cells_y;

  mesh.vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      // Exact on the boundary so that edge classification is exact.
      const double x = (i == nx) ? L : i * (L / nx);
      const double y = (j == ny) ? H : j * (H / ny);
      mesh.vertices.push_back({x, y});
    }
  }
  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };

  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j), v11 = vid(i + 1, j + 1), v01 = vid(i, j + 1);
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }
  }

  const int nt = mesh.num_triangles();
  mesh.areas.resize(nt);
  mesh.diameters.resize(nt);
  mesh.triangle_edges.resize(nt);

  std::map<std::pair<int, int>, int> edge_index;
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[t];
    const Point& a = mesh.vertices[tri[0]];
    const Point& b = mesh.vertices[tri[1]];
    const Point& c = mesh.vertices[tri[2]];
    mesh.areas[t] = 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
    mesh.diameters[t] = std::max({distance(a, b), distance(b, c), distance(c, a)});

    for (int local = 0; local < 3; ++local) {
      const int va = tri[(local + 1) % 3];
      const int vb = tri[(local + 2) % 3];
      const auto key = std::minmax(va, vb);
      auto it = edge_index.find(key);
      if (it != edge_index.end()) {
        mesh.edges[it->second].triangles[1] = t;
        mesh.edges[it->second].kind = EdgeKind::interior;
        mesh.triangle_edges[t][local] = it->second;
        continue;
      }
      Edge edge;
      edge.vertices = {va, vb};
      edge.triangles = {t, -1};
      const Point& pa = mesh.vertices[va];
      const Point& pb = mesh.vertices[vb];
      edge.length = distance(pa, pb);
      edge.normal = {(pb.y - pa.y) / edge.length, -(pb.x - pa.x) / edge.length};

      const bool left = pa.x == 0.0 && pb.x == 0.0;
      const bool right = pa.x == L && pb.x == L;
      const bool bottom = pa.y == 0.0 && pb.y == 0.0;
      const bool top = pa.y == H && pb.y == H;
      if (left || right) {
        edge.kind = EdgeKind::dirichlet;
      } else if (bottom || top) {
        edge.kind = EdgeKind::neumann;
      } else {
        edge.kind = EdgeKind::interior;  // second triangle attached later
      }
      const int id = mesh.num_edges();
      edge_index.emplace(key, id);
      mesh.edges.push_back(edge);
      mesh.triangle_edges[t][local] = id;
    }
  }
  return mesh;
}

std::vector<EdgeFlowTag> classify_flow(const Mesh& mesh, double vmax, double H) {
  if (vmax < 0.0) throw InputError("classify_flow: vmax must be non-negative");
  const ChannelVelocity velocity{vmax, H};
  std::vector<EdgeFlowTag> tags;
  tags.reserve(mesh.edges.size());
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Point v = velocity(mesh.edge_midpoint(e));
    const Point& n = mesh.edges[e].normal;
    const double vn = v.x * n.x + v.y * n.y;
    const FlowTag tag = (vn < 0.0 && std::abs(vn) >= kZeroFluxTolerance) ? FlowTag::inflow : FlowTag::outflow;
    tags.push_back({e, tag, vn});
  }
  return tags;
}

}  // namespace fhn
