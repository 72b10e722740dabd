#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "mcg/gaussian.hpp"

namespace mcg {

/// Weighted residual over a subset of the state. Contributes
/// 1/2 r^T W r to the cost, where r = error(x[indices]).
struct ResidualBlock {
  std::vector<Index> indices;
  std::function<VectorXd(const VectorXd&)> error;
  std::function<MatrixXd(const VectorXd&)> jacobian;  // rows(r) x indices.size()
  MatrixXd weight;
};

/// Equality constraint value(x[indices]) = 0 made of `rows` scalar equations.
struct ConstraintBlock {
  std::vector<Index> indices;
  Index rows = 1;
  std::function<VectorXd(const VectorXd&)> value;
  std::function<MatrixXd(const VectorXd&)> jacobian;
};

/// Equality-constrained nonlinear least squares: minimize the sum of
/// residual-block costs subject to every constraint block vanishing.
class NllsProblem {
 public:
  explicit NllsProblem(Index state_dim);

  /// Throws Error(InvalidArgument) for out-of-range indices or a weight that
  /// is not symmetric positive definite.
  void add_residual(ResidualBlock block);
  void add_constraint(ConstraintBlock block);

  [[nodiscard]] Index state_dim() const noexcept { return state_dim_; }
  [[nodiscard]] const std::vector<ResidualBlock>& residuals() const noexcept { return residuals_; }
  [[nodiscard]] const std::vector<ConstraintBlock>& constraints() const noexcept { return constraints_; }
  [[nodiscard]] Index constraint_rows() const noexcept { return constraint_rows_; }

  [[nodiscard]] double cost(const VectorXd& x) const;
  /// Stacked constraint values and Jacobian.
  [[nodiscard]] VectorXd constraint_values(const VectorXd& x) const;
  [[nodiscard]] MatrixXd constraint_jacobian(const VectorXd& x) const;

  /// Gauss-Newton normal equations at x: (J^T W J, J^T W r).
  struct Normal {
    MatrixXd information;
    VectorXd gradient;
  };
  [[nodiscard]] Normal normal_equations(const VectorXd& x) const;

  /// sum_i multipliers_i * Hessian(f_i)(x), by central differences of the
  /// constraint Jacobians.
  [[nodiscard]] MatrixXd constraint_curvature(const VectorXd& x, const VectorXd& multipliers) const;

 private:
  Index state_dim_;
  Index constraint_rows_ = 0;
  std::vector<ResidualBlock> residuals_;
  std::vector<ConstraintBlock> constraints_;
};

/// Defaults give plain Gauss-Newton KKT iterations: full steps, stop when
/// |dx|_inf < step_tolerance. safeguarded() adds backtracking on the merit
/// cost + penalty * |f|_1, the constraint curvature term in the step's
/// Hessian (kept only while the reduced Hessian is positive definite) and a
/// relative cost-change stop, for strongly nonlinear problems.
struct SolveOptions {
  int max_iters = 50;
  double step_tolerance = 1e-10;
  double constraint_tolerance = 1e-8;
  double cost_tolerance = 0.0;  // > 0: stop when feasible and |d cost| <= tol * (1 + cost)
  int max_backtracks = 0;       // step halvings allowed per iteration
  bool constraint_curvature = false;

  static SolveOptions safeguarded() {
    SolveOptions o;
    o.max_iters = 100;
    o.cost_tolerance = 1e-12;
    o.max_backtracks = 12;
    o.constraint_curvature = true;
    return o;
  }
};

struct SolveReport {
  VectorXd solution;
  MatrixXd unconstrained_info;   // J^T W J at the solution
  MatrixXd constraint_jacobian;  // stacked A at the solution
  MatrixXd conditioned_cov;      // N (N^T J^T W J N)^-1 N^T, N = null(A)
  int iterations = 0;
  bool converged = false;
};

/// Gauss-Newton on the KKT system
///   [[J^T W J, A^T], [A, 0]] [dx; lambda] = [-J^T W r; -f(x)]
/// until |dx|_inf < step_tolerance or max_iters (see SolveOptions for the
/// optional safeguards). Converged means a stopping test was met and
/// |f|_inf < constraint_tolerance.
/// Throws Error(Singular) if the KKT matrix is singular and Error(NonFinite)
/// on non-finite residuals.
SolveReport solve_constrained_gn(const NllsProblem& problem, const VectorXd& init,
                                 const SolveOptions& opts = {});

/// Conditions the unconstrained Laplace covariance (given by its information
/// matrix) onto the linearized constraints A dx = 0: N (N^T info N)^-1 N^T.
/// With no constraint rows this is info^-1. The information matrix itself is
/// never inverted.
MatrixXd extract_conditioned_cov(const MatrixXd& info, const MatrixXd& constraint_jacobian);
MatrixXd extract_conditioned_cov(const SolveReport& report);

/// Normalized Mahalanobis distance sqrt(e_t^T Sigma_t^-1 e_t / dof) of an
/// ambient tangent-plane error. tangent_basis B must span null(A) at the
/// solution; e_t are the coordinates of the error in B and
/// Sigma_t^-1 = B^T info B.
double mahalanobis_consistency(const VectorXd& error_ambient, const SolveReport& report,
                               const MatrixXd& tangent_basis, Index dof);

}  // namespace mcg
