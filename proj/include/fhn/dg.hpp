#pragma once

#include "fhn/common.hpp"
#include "fhn/mesh.hpp"

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace fhn {

/// Quadrature rules on the reference triangle (barycentric points, weights
/// summing to one) and on [0, 1].
struct TriangleRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
};
struct LineRule {
  std::vector<double> points;
  std::vector<double> weights;
};

/// Six-point rule, exact for polynomials of degree 4.
const TriangleRule& triangle_rule_degree4();
/// Three-point Gauss-Legendre, exact for polynomials of degree 5.
const LineRule& gauss3();

/// Discontinuous piecewise-linear space: the three nodal (barycentric)
/// functions of each triangle, numbered 3*t + local_vertex.
class DgSpace {
 public:
  static constexpr int kLocalDofs = 3;

  explicit DgSpace(std::shared_ptr<const Mesh> mesh);

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  int num_elements() const { return mesh_->num_triangles(); }
  int num_dofs() const { return kLocalDofs * num_elements(); }
  int degree() const { return 1; }
  static int dof(int element, int local) { return kLocalDofs * element + local; }

  /// Constant gradients of the three local basis functions.
  const std::array<Point, 3>& gradients(int element) const { return gradients_[element]; }
  /// Barycentric coordinates of a physical point w.r.t. an element.
  std::array<double, 3> barycentric(int element, const Point& p) const;
  Point to_physical(int element, const std::array<double, 3>& bary) const;
  /// Evaluates a coefficient vector at a physical point inside an element.
  double evaluate(const Vector& coeffs, int element, const Point& p) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  std::vector<std::array<Point, 3>> gradients_;
};

using SpatialFunction = std::function<double(const Point&)>;

/// Assembled SIPG data for one diffusion coefficient.
///
/// The bilinear system for a field with diffusion D reads
/// M dy/dt + D S y + B y = load; adjoint_boundary holds the Neumann-edge
/// (V.n) surface mass kept separately for the adjoint problem.
struct Operators {
  std::shared_ptr<const DgSpace> space;
  SparseMatrix mass;
  SparseMatrix stiffness;
  SparseMatrix convection;
  SparseMatrix adjoint_boundary;
  Vector load;
  double diffusion = 0.0;
  double penalty = 0.0;
  double vmax = 0.0;
  std::vector<std::string> warnings;
};

/// Smallest penalty for which S stays positive semi-definite on the
/// channel meshes built by build_uniform_mesh (p = 1).
inline constexpr double kPenaltyStabilityThreshold = 3.0;
inline constexpr double kDefaultPenalty = 6.0;

Operators assemble_operators(const DgSpace& space, double diffusion, double vmax, double penalty,
                             const SpatialFunction& dirichlet_data = {});

/// Volume-only part of the convection form, sum_K (V.grad v, w)_K.
SparseMatrix assemble_volume_convection(const DgSpace& space, double vmax);

struct NonlinearEval {
  Vector value;           // g(y) tested against every basis function
  SparseMatrix jacobian;  // block-diagonal R_g(y)
};

/// Cubic reaction g(y) = c1 y (y - c2)(y - 1).
struct CubicReaction {
  double c1 = 9.0;
  double c2 = 0.02;

  double operator()(double y) const { return c1 * y * (y - c2) * (y - 1.0); }
  double derivative(double y) const { return c1 * (3.0 * y * y - 2.0 * (1.0 + c2) * y + c2); }
};

/// Element kernels; `local` holds the three nodal values of y on the element.
std::array<double, 3> element_reaction(const CubicReaction& g, double area, const std::array<double, 3>& local);
/// One entry of the element vector (integral of g(y_h) times local basis `row`).
double element_reaction_entry(const CubicReaction& g, double area, const std::array<double, 3>& local, int row);
Eigen::Matrix3d element_reaction_jacobian(const CubicReaction& g, double area, const std::array<double, 3>& local);

Vector reaction_vector(const DgSpace& space, const Vector& y, const CubicReaction& g);
SparseMatrix reaction_jacobian(const DgSpace& space, const Vector& y, const CubicReaction& g);
NonlinearEval eval_nonlinearity(const DgSpace& space, const Vector& y, double c1, double c2);

/// Axis-aligned lines across which a field may jump; used to split
/// quadrature cells so that piecewise-smooth data integrates accurately.
struct Breaklines {
  std::vector<double> x;
  std::vector<double> y;
};

/// Moment vector b_i = (field, phi_i) computed with 4x4 uniform subdivision
/// of every triangle, each piece further cut along the breaklines.
Vector load_moments(const DgSpace& space, const SpatialFunction& field, const Breaklines& breaks = {});
/// L2 projection M^{-1} b of `field`.
Vector project_initial(const DgSpace& space, const SpatialFunction& field, const Breaklines& breaks = {});

/// Applies M^{-1} using the 3x3 element blocks.
Vector apply_mass_inverse(const DgSpace& space, const SparseMatrix& mass, const Vector& b);

/// Integral over the domain of the field represented by `coeffs`.
double integrate(const DgSpace& space, const Vector& coeffs);

}  // namespace fhn
