#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace fhn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Thrown when caller-supplied data violates a documented precondition.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical solve fails; carries the time step that failed.
class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& what, int step, double residual = 0.0)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"),
        step_(step),
        residual_(residual) {}

  int step() const { return step_; }
  double residual() const { return residual_; }

 private:
  int step_;
  double residual_;
};

}  // namespace fhn
