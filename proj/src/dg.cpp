#include "fhn/dg.hpp"

#include <cmath>
#include <sstream>

namespace fhn {

const TriangleRule& triangle_rule_degree4() {
  static const TriangleRule rule = [] {
    constexpr double a = 0.44594849091596488632;
    constexpr double wa = 0.22338158967801146570;
    constexpr double b = 0.09157621350977074346;
    constexpr double wb = 0.10995174365532186764;
    TriangleRule r;
    r.points = {{a, a, 1.0 - 2.0 * a}, {a, 1.0 - 2.0 * a, a}, {1.0 - 2.0 * a, a, a},
                {b, b, 1.0 - 2.0 * b}, {b, 1.0 - 2.0 * b, b}, {1.0 - 2.0 * b, b, b}};
    r.weights = {wa, wa, wa, wb, wb, wb};
    return r;
  }();
  return rule;
}

const LineRule& gauss3() {
  static const LineRule rule = [] {
    const double offset = std::sqrt(15.0) / 10.0;
    LineRule r;
    r.points = {0.5 - offset, 0.5, 0.5 + offset};
    r.weights = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    return r;
  }();
  return rule;
}

DgSpace::DgSpace(std::shared_ptr<const Mesh> mesh) : mesh_(std::move(mesh)) {
  if (!mesh_) throw InputError("DgSpace: null mesh");
  gradients_.resize(mesh_->num_triangles());
  for (int t = 0; t < mesh_->num_triangles(); ++t) {
    const auto& tri = mesh_->triangles[t];
    const Point& a = mesh_->vertices[tri[0]];
    const Point& b = mesh_->vertices[tri[1]];
    const Point& c = mesh_->vertices[tri[2]];
    const double twice_area = 2.0 * mesh_->areas[t];
    gradients_[t] = {Point{(b.y - c.y) / twice_area, (c.x - b.x) / twice_area},
                     Point{(c.y - a.y) / twice_area, (a.x - c.x) / twice_area},
                     Point{(a.y - b.y) / twice_area, (b.x - a.x) / twice_area}};
  }
}

std::array<double, 3> DgSpace::barycentric(int element, const Point& p) const {
  const auto& tri = mesh_->triangles[element];
  const Point& a = mesh_->vertices[tri[0]];
  const auto& g = gradients_[element];
  const double l1 = g[1].x * (p.x - a.x) + g[1].y * (p.y - a.y);
  const double l2 = g[2].x * (p.x - a.x) + g[2].y * (p.y - a.y);
  return {1.0 - l1 - l2, l1, l2};
}

Point DgSpace::to_physical(int element, const std::array<double, 3>& bary) const {
  const auto& tri = mesh_->triangles[element];
  Point p;
  for (int i = 0; i < 3; ++i) {
    p.x += bary[i] * mesh_->vertices[tri[i]].x;
    p.y += bary[i] * mesh_->vertices[tri[i]].y;
  }
  return p;
}

double DgSpace::evaluate(const Vector& coeffs, int element, const Point& p) const {
  const auto bary = barycentric(element, p);
  double value = 0.0;
  for (int i = 0; i < 3; ++i) value += coeffs[dof(element, i)] * bary[i];
  return value;
}

namespace {

double dot(const Point& a, const Point& b) { return a.x * b.x + a.y * b.y; }

Point edge_point(const Mesh& mesh, const Edge& edge, double s) {
  const Point& a = mesh.vertices[edge.vertices[0]];
  const Point& b = mesh.vertices[edge.vertices[1]];
  return {a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)};
}

// Accumulates a local 3x3 block into the global triplet list.
void add_block(std::vector<Triplet>& triplets, int test_element, int trial_element, const Eigen::Matrix3d& block) {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (block(i, j) != 0.0) {
        triplets.emplace_back(DgSpace::dof(test_element, i), DgSpace::dof(trial_element, j), block(i, j));
      }
    }
  }
}

SparseMatrix from_triplets(int n, const std::vector<Triplet>& triplets) {
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

}  // namespace

SparseMatrix assemble_volume_convection(const DgSpace& space, double vmax) {
  const Mesh& mesh = space.mesh();
  const ChannelVelocity velocity{vmax, mesh.height};
  const auto& rule = triangle_rule_degree4();
  std::vector<Triplet> triplets;
  if (vmax != 0.0) {
    for (int t = 0; t < space.num_elements(); ++t) {
      const auto& grads = space.gradients(t);
      Eigen::Matrix3d block = Eigen::Matrix3d::Zero();
      for (std::size_t q = 0; q < rule.weights.size(); ++q) {
        const Point x = space.to_physical(t, rule.points[q]);
        const Point v = velocity(x);
        const double w = rule.weights[q] * mesh.areas[t];
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j) block(i, j) += w * dot(v, grads[j]) * rule.points[q][i];
        }
      }
      add_block(triplets, t, t, block);
    }
  }
  return from_triplets(space.num_dofs(), triplets);
}

Operators assemble_operators(const DgSpace& space, double diffusion, double vmax, double penalty,
                             const SpatialFunction& dirichlet_data) {
  if (!(penalty > 0.0)) throw InputError("assemble_operators: penalty must be positive");
  if (diffusion < 0.0) throw InputError("assemble_operators: diffusion must be non-negative");

  const Mesh& mesh = space.mesh();
  const int n = space.num_dofs();
  const ChannelVelocity velocity{vmax, mesh.height};
  const auto flow = classify_flow(mesh, vmax, mesh.height);
  const auto& line = gauss3();

  Operators ops;
  ops.space = std::make_shared<const DgSpace>(space);
  ops.diffusion = diffusion;
  ops.penalty = penalty;
  ops.vmax = vmax;
  if (penalty < kPenaltyStabilityThreshold) {
    std::ostringstream msg;
    msg << "penalty " << penalty << " is below the stability threshold " << kPenaltyStabilityThreshold;
    ops.warnings.push_back(msg.str());
  }

  std::vector<Triplet> mass, stiffness, convection, adjoint_boundary;
  ops.load = Vector::Zero(n);

  for (int t = 0; t < space.num_elements(); ++t) {
    const double area = mesh.areas[t];
    const auto& grads = space.gradients(t);
    Eigen::Matrix3d m_block;
    m_block << 2, 1, 1, 1, 2, 1, 1, 1, 2;
    add_block(mass, t, t, (area / 12.0) * m_block);
    Eigen::Matrix3d s_block;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) s_block(i, j) = area * dot(grads[i], grads[j]);
    }
    add_block(stiffness, t, t, s_block);
  }
  {
    const SparseMatrix volume = assemble_volume_convection(space, vmax);
    for (int k = 0; k < volume.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(volume, k); it; ++it) convection.emplace_back(it.row(), it.col(), it.value());
    }
  }

  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge& edge = mesh.edges[e];
    const Point& n_e = edge.normal;
    const double h = edge.length;
    const double vn_mid = flow[e].v_dot_n;

    if (edge.kind == EdgeKind::interior) {
      const std::array<int, 2> elems = edge.triangles;
      const std::array<double, 2> sign = {1.0, -1.0};  // n_K = sign * n_e
      Eigen::Matrix3d s_blocks[2][2];
      Eigen::Matrix3d b_blocks[2][2];
      for (auto& row : s_blocks)
        for (auto& b : row) b.setZero();
      for (auto& row : b_blocks)
        for (auto& b : row) b.setZero();

      // Upwind side: the element for which this edge is on its inflow boundary.
      int inflow_side = -1;
      if (vn_mid > kZeroFluxTolerance) inflow_side = 1;
      if (vn_mid < -kZeroFluxTolerance) inflow_side = 0;

      for (std::size_t q = 0; q < line.weights.size(); ++q) {
        const Point x = edge_point(mesh, edge, line.points[q]);
        const double w = line.weights[q] * h;
        std::array<std::array<double, 3>, 2> phi;
        std::array<std::array<double, 3>, 2> dphi_n;
        for (int s = 0; s < 2; ++s) {
          phi[s] = space.barycentric(elems[s], x);
          const auto& grads = space.gradients(elems[s]);
          for (int i = 0; i < 3; ++i) dphi_n[s][i] = dot(grads[i], n_e);
        }
        const Point v = velocity(x);
        const double vn = dot(v, n_e);
        for (int sb = 0; sb < 2; ++sb) {      // test side
          for (int sa = 0; sa < 2; ++sa) {    // trial side
            for (int i = 0; i < 3; ++i) {
              for (int j = 0; j < 3; ++j) {
                // {grad v}.[w] + {grad w}.[v] with [v] = sign v n_e, {grad v} = grad v / 2
                const double consistency =
                    0.5 * dphi_n[sa][j] * sign[sb] * phi[sb][i] + 0.5 * dphi_n[sb][i] * sign[sa] * phi[sa][j];
                const double jump = sign[sa] * sign[sb] * phi[sa][j] * phi[sb][i];
                s_blocks[sb][sa](i, j) += w * (-consistency + (penalty / h) * jump);
              }
            }
          }
        }
        if (inflow_side >= 0) {
          // int_{dK-} V.n_K (v_ext - v) w on the inflow element K.
          const int in = inflow_side;
          const int out = 1 - inflow_side;
          const double vn_k = sign[in] * vn;
          for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
              b_blocks[in][out](i, j) += w * vn_k * phi[out][j] * phi[in][i];
              b_blocks[in][in](i, j) -= w * vn_k * phi[in][j] * phi[in][i];
            }
          }
        }
      }
      for (int sb = 0; sb < 2; ++sb) {
        for (int sa = 0; sa < 2; ++sa) {
          add_block(stiffness, elems[sb], elems[sa], s_blocks[sb][sa]);
          add_block(convection, elems[sb], elems[sa], b_blocks[sb][sa]);
        }
      }
      continue;
    }

    // Boundary edge: one element, outward normal n_e.
    const int t = edge.triangles[0];
    const auto& grads = space.gradients(t);
    const bool inflow = flow[e].tag == FlowTag::inflow;
    Eigen::Matrix3d s_block = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d b_block = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d a_block = Eigen::Matrix3d::Zero();
    for (std::size_t q = 0; q < line.weights.size(); ++q) {
      const Point x = edge_point(mesh, edge, line.points[q]);
      const double w = line.weights[q] * h;
      const auto phi = space.barycentric(t, x);
      const double vn = dot(velocity(x), n_e);
      const double data = dirichlet_data ? dirichlet_data(x) : 0.0;
      for (int i = 0; i < 3; ++i) {
        const double dphi_i = dot(grads[i], n_e);
        if (edge.kind == EdgeKind::dirichlet) {
          for (int j = 0; j < 3; ++j) {
            const double dphi_j = dot(grads[j], n_e);
            s_block(i, j) += w * (-(dphi_j * phi[i] + dphi_i * phi[j]) + (penalty / h) * phi[j] * phi[i]);
          }
          ops.load[DgSpace::dof(t, i)] += w * diffusion * data * ((penalty / h) * phi[i] - dphi_i);
        }
        if (edge.kind == EdgeKind::neumann) {
          for (int j = 0; j < 3; ++j) a_block(i, j) += w * vn * phi[j] * phi[i];
        }
        if (inflow) {
          for (int j = 0; j < 3; ++j) b_block(i, j) -= w * vn * phi[j] * phi[i];
          ops.load[DgSpace::dof(t, i)] -= w * vn * data * phi[i];
        }
      }
    }
    add_block(stiffness, t, t, s_block);
    add_block(convection, t, t, b_block);
    add_block(adjoint_boundary, t, t, a_block);
  }

  ops.mass = from_triplets(n, mass);
  ops.stiffness = from_triplets(n, stiffness);
  ops.convection = from_triplets(n, convection);
  ops.adjoint_boundary = from_triplets(n, adjoint_boundary);
  return ops;
}

std::array<double, 3> element_reaction(const CubicReaction& g, double area, const std::array<double, 3>& local) {
  const auto& rule = triangle_rule_degree4();
  std::array<double, 3> out{0.0, 0.0, 0.0};
  for (std::size_t q = 0; q < rule.weights.size(); ++q) {
    const auto& phi = rule.points[q];
    const double y = local[0] * phi[0] + local[1] * phi[1] + local[2] * phi[2];
    const double gw = area * rule.weights[q] * g(y);
    for (int i = 0; i < 3; ++i) out[i] += gw * phi[i];
  }
  return out;
}

double element_reaction_entry(const CubicReaction& g, double area, const std::array<double, 3>& local, int row) {
  const auto& rule = triangle_rule_degree4();
  double out = 0.0;
  for (std::size_t q = 0; q < rule.weights.size(); ++q) {
    const auto& phi = rule.points[q];
    const double y = local[0] * phi[0] + local[1] * phi[1] + local[2] * phi[2];
    out += area * rule.weights[q] * g(y) * phi[row];
  }
  return out;
}

Eigen::Matrix3d element_reaction_jacobian(const CubicReaction& g, double area, const std::array<double, 3>& local) {
  const auto& rule = triangle_rule_degree4();
  Eigen::Matrix3d out = Eigen::Matrix3d::Zero();
  for (std::size_t q = 0; q < rule.weights.size(); ++q) {
    const auto& phi = rule.points[q];
    const double y = local[0] * phi[0] + local[1] * phi[1] + local[2] * phi[2];
    const double dw = area * rule.weights[q] * g.derivative(y);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) out(i, j) += dw * phi[i] * phi[j];
    }
  }
  return out;
}

namespace {
std::array<double, 3> local_values(const Vector& y, int t) {
  return {y[DgSpace::dof(t, 0)], y[DgSpace::dof(t, 1)], y[DgSpace::dof(t, 2)]};
}
}  // namespace

Vector reaction_vector(const DgSpace& space, const Vector& y, const CubicReaction& g) {
  if (y.size() != space.num_dofs()) throw InputError("reaction_vector: size mismatch");
  Vector out(space.num_dofs());
  const auto& areas = space.mesh().areas;
  for (int t = 0; t < space.num_elements(); ++t) {
    const auto local = element_reaction(g, areas[t], local_values(y, t));
    for (int i = 0; i < 3; ++i) out[DgSpace::dof(t, i)] = local[i];
  }
  return out;
}

SparseMatrix reaction_jacobian(const DgSpace& space, const Vector& y, const CubicReaction& g) {
  if (y.size() != space.num_dofs()) throw InputError("reaction_jacobian: size mismatch");
  std::vector<Triplet> triplets;
  triplets.reserve(9 * static_cast<std::size_t>(space.num_elements()));
  const auto& areas = space.mesh().areas;
  for (int t = 0; t < space.num_elements(); ++t) {
    const Eigen::Matrix3d block = element_reaction_jacobian(g, areas[t], local_values(y, t));
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) triplets.emplace_back(DgSpace::dof(t, i), DgSpace::dof(t, j), block(i, j));
    }
  }
  return from_triplets(space.num_dofs(), triplets);
}

NonlinearEval eval_nonlinearity(const DgSpace& space, const Vector& y, double c1, double c2) {
  const CubicReaction g{c1, c2};
  return {reaction_vector(space, y, g), reaction_jacobian(space, y, g)};
}

namespace {

using Polygon = std::vector<Point>;

// Splits a convex polygon by the line coord(p) = c (axis 0: x, axis 1: y).
std::array<Polygon, 2> split_polygon(const Polygon& poly, int axis, double c) {
  std::array<Polygon, 2> parts;
  auto coord = [axis](const Point& p) { return axis == 0 ? p.x : p.y; };
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = poly[i];
    const Point& q = poly[(i + 1) % n];
    const double sp = coord(p) - c;
    const double sq = coord(q) - c;
    if (sp <= 0.0) parts[0].push_back(p);
    if (sp >= 0.0) parts[1].push_back(p);
    if ((sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0)) {
      const double s = sp / (sp - sq);
      const Point x{p.x + s * (q.x - p.x), p.y + s * (q.y - p.y)};
      parts[0].push_back(x);
      parts[1].push_back(x);
    }
  }
  return parts;
}

double polygon_area(const Polygon& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& p = poly[i];
    const Point& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

}  // namespace

Vector load_moments(const DgSpace& space, const SpatialFunction& field, const Breaklines& breaks) {
  constexpr int kSubdivisions = 4;
  const Mesh& mesh = space.mesh();
  const auto& rule = triangle_rule_degree4();
  Vector b = Vector::Zero(space.num_dofs());

  for (int t = 0; t < space.num_elements(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Point& a = mesh.vertices[tri[0]];
    const Point& pb = mesh.vertices[tri[1]];
    const Point& pc = mesh.vertices[tri[2]];
    auto node = [&](int i, int j) {
      const double s = static_cast<double>(i) / kSubdivisions;
      const double r = static_cast<double>(j) / kSubdivisions;
      return Point{a.x + s * (pb.x - a.x) + r * (pc.x - a.x), a.y + s * (pb.y - a.y) + r * (pc.y - a.y)};
    };
    std::vector<Polygon> pieces;
    for (int i = 0; i < kSubdivisions; ++i) {
      for (int j = 0; i + j < kSubdivisions; ++j) {
        pieces.push_back({node(i, j), node(i + 1, j), node(i, j + 1)});
        if (i + j < kSubdivisions - 1) pieces.push_back({node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)});
      }
    }
    auto cut = [&pieces](int axis, double c) {
      std::vector<Polygon> next;
      for (const auto& poly : pieces) {
        for (auto& part : split_polygon(poly, axis, c)) {
          if (part.size() >= 3 && std::abs(polygon_area(part)) > 1e-300) next.push_back(std::move(part));
        }
      }
      pieces = std::move(next);
    };
    for (double c : breaks.x) cut(0, c);
    for (double c : breaks.y) cut(1, c);

    for (const auto& poly : pieces) {
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        const Point& p0 = poly[0];
        const Point& p1 = poly[k];
        const Point& p2 = poly[k + 1];
        const double area = std::abs(0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y)));
        if (area == 0.0) continue;
        for (std::size_t q = 0; q < rule.weights.size(); ++q) {
          const auto& l = rule.points[q];
          const Point x{l[0] * p0.x + l[1] * p1.x + l[2] * p2.x, l[0] * p0.y + l[1] * p1.y + l[2] * p2.y};
          const double fw = area * rule.weights[q] * field(x);
          if (fw == 0.0) continue;
          const auto phi = space.barycentric(t, x);
          for (int i = 0; i < 3; ++i) b[DgSpace::dof(t, i)] += fw * phi[i];
        }
      }
    }
  }
  return b;
}

Vector apply_mass_inverse(const DgSpace& space, const SparseMatrix& mass, const Vector& b) {
  Vector x(b.size());
  for (int t = 0; t < space.num_elements(); ++t) {
    Eigen::Matrix3d block;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) block(i, j) = mass.coeff(DgSpace::dof(t, i), DgSpace::dof(t, j));
    }
    x.segment<3>(DgSpace::dof(t, 0)) = block.ldlt().solve(b.segment<3>(DgSpace::dof(t, 0)));
  }
  return x;
}

Vector project_initial(const DgSpace& space, const SpatialFunction& field, const Breaklines& breaks) {
  const Vector b = load_moments(space, field, breaks);
  std::vector<Triplet> triplets;
  const auto& areas = space.mesh().areas;
  for (int t = 0; t < space.num_elements(); ++t) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        triplets.emplace_back(DgSpace::dof(t, i), DgSpace::dof(t, j), areas[t] / 12.0 * (i == j ? 2.0 : 1.0));
      }
    }
  }
  return apply_mass_inverse(space, from_triplets(space.num_dofs(), triplets), b);
}

double integrate(const DgSpace& space, const Vector& coeffs) {
  double total = 0.0;
  const auto& areas = space.mesh().areas;
  for (int t = 0; t < space.num_elements(); ++t) {
    total += areas[t] / 3.0 * (coeffs[DgSpace::dof(t, 0)] + coeffs[DgSpace::dof(t, 1)] + coeffs[DgSpace::dof(t, 2)]);
  }
  return total;
}

}  // namespace fhn
