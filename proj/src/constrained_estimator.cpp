#include "mcg/constrained_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "mcg/error.hpp"
#include "mcg/linear_manifold.hpp"

namespace mcg {
namespace {

void check_indices(const std::vector<Index>& indices, Index state_dim, const char* what) {
  if (indices.empty()) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + ": block touches no state");
  }
  for (const Index i : indices) {
    if (i < 0 || i >= state_dim) {
      throw Error(ErrorCode::InvalidArgument,
                  std::string(what) + ": state index " + std::to_string(i) + " out of range");
    }
  }
}

VectorXd gather(const VectorXd& x, const std::vector<Index>& indices) { return x(indices); }

}  // namespace

NllsProblem::NllsProblem(Index state_dim) : state_dim_(state_dim) {
  if (state_dim < 1) {
    throw Error(ErrorCode::InvalidArgument, "nlls problem: state dimension must be positive");
  }
}

void NllsProblem::add_residual(ResidualBlock block) {
  check_indices(block.indices, state_dim_, "residual block");
  if (!block.error || !block.jacobian) {
    throw Error(ErrorCode::InvalidArgument, "residual block: missing error or jacobian function");
  }
  const MatrixXd& W = block.weight;
  if (W.rows() != W.cols() || W.rows() == 0) {
    throw Error(ErrorCode::InvalidArgument, "residual block: weight must be square");
  }
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, W.cwiseAbs().maxCoeff())) {
    throw Error(ErrorCode::InvalidArgument, "residual block: weight is not symmetric");
  }
  if (Eigen::LLT<MatrixXd>(W).info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidArgument, "residual block: weight is not positive definite");
  }
  residuals_.push_back(std::move(block));
}

void NllsProblem::add_constraint(ConstraintBlock block) {
  check_indices(block.indices, state_dim_, "constraint block");
  if (!block.value || !block.jacobian) {
    throw Error(ErrorCode::InvalidArgument, "constraint block: missing value or jacobian function");
  }
  if (block.rows < 1) {
    throw Error(ErrorCode::InvalidArgument, "constraint block: needs at least one row");
  }
  constraint_rows_ += block.rows;
  constraints_.push_back(std::move(block));
}

double NllsProblem::cost(const VectorXd& x) const {
  double total = 0.0;
  for (const auto& b : residuals_) {
    const VectorXd r = b.error(gather(x, b.indices));
    total += 0.5 * r.dot(b.weight * r);
  }
  return total;
}

VectorXd NllsProblem::constraint_values(const VectorXd& x) const {
  VectorXd f(constraint_rows_);
  Index row = 0;
  for (const auto& b : constraints_) {
    const VectorXd v = b.value(gather(x, b.indices));
    if (v.size() != b.rows) {
      throw Error(ErrorCode::DimensionMismatch, "constraint block: value has wrong length");
    }
    f.segment(row, v.size()) = v;
    row += v.size();
  }
  return f;
}

MatrixXd NllsProblem::constraint_jacobian(const VectorXd& x) const {
  MatrixXd A = MatrixXd::Zero(constraint_rows_, state_dim_);
  Index row = 0;
  for (const auto& b : constraints_) {
    const MatrixXd J = b.jacobian(gather(x, b.indices));
    if (J.rows() != b.rows || J.cols() != static_cast<Index>(b.indices.size())) {
      throw Error(ErrorCode::DimensionMismatch, "constraint block: jacobian has wrong shape");
    }
    for (std::size_t k = 0; k < b.indices.size(); ++k) {
      A.block(row, b.indices[k], J.rows(), 1) += J.col(static_cast<Index>(k));
    }
    row += J.rows();
  }
  return A;
}

NllsProblem::Normal NllsProblem::normal_equations(const VectorXd& x) const {
  Normal out{MatrixXd::Zero(state_dim_, state_dim_), VectorXd::Zero(state_dim_)};
  for (const auto& b : residuals_) {
    const VectorXd local = gather(x, b.indices);
    const VectorXd r = b.error(local);
    if (!r.allFinite()) {
      throw Error(ErrorCode::NonFinite, "nlls problem: residual is not finite");
    }
    const MatrixXd J = b.jacobian(local);
    const MatrixXd JtW = J.transpose() * b.weight;
    const MatrixXd block_info = JtW * J;
    const VectorXd block_grad = JtW * r;
    const auto m = b.indices.size();
    for (std::size_t i = 0; i < m; ++i) {
      out.gradient(b.indices[i]) += block_grad(static_cast<Index>(i));
      for (std::size_t j = 0; j < m; ++j) {
        out.information(b.indices[i], b.indices[j]) +=
            block_info(static_cast<Index>(i), static_cast<Index>(j));
      }
    }
  }
  return out;
}

MatrixXd NllsProblem::constraint_curvature(const VectorXd& x, const VectorXd& multipliers) const {
  if (multipliers.size() != constraint_rows_) {
    throw Error(ErrorCode::DimensionMismatch, "constraint curvature: wrong number of multipliers");
  }
  MatrixXd H = MatrixXd::Zero(state_dim_, state_dim_);
  Index row = 0;
  for (const auto& b : constraints_) {
    const VectorXd lambda = multipliers.segment(row, b.rows);
    row += b.rows;
    if (lambda.isZero(0.0)) continue;
    VectorXd local = gather(x, b.indices);
    const auto m = static_cast<Index>(b.indices.size());
    for (Index k = 0; k < m; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(local(k)));
      const double saved = local(k);
      local(k) = saved + h;
      const VectorXd plus = b.jacobian(local).transpose() * lambda;
      local(k) = saved - h;
      const VectorXd minus = b.jacobian(local).transpose() * lambda;
      local(k) = saved;
      const VectorXd column = (plus - minus) / (2.0 * h);
      for (Index i = 0; i < m; ++i) H(b.indices[i], b.indices[k]) += column(i);
    }
  }
  return 0.5 * (H + H.transpose());
}

namespace {

bool reduced_positive_definite(const MatrixXd& H, const MatrixXd& A) {
  if (A.rows() == 0) return Eigen::LLT<MatrixXd>(H).info() == Eigen::Success;
  const MatrixXd N = LinearManifold::make(A.transpose(), VectorXd::Zero(A.rows())).nullspace();
  const MatrixXd reduced = N.transpose() * H * N;
  return Eigen::LLT<MatrixXd>(0.5 * (reduced + reduced.transpose())).info() == Eigen::Success;
}

}  // namespace

SolveReport solve_constrained_gn(const NllsProblem& problem, const VectorXd& init,
                                 const SolveOptions& opts) {
  const Index n = problem.state_dim();
  const Index m = problem.constraint_rows();
  if (init.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "solve_constrained_gn: initial state has wrong length");
  }
  if (!init.allFinite()) {
    throw Error(ErrorCode::NonFinite, "solve_constrained_gn: initial state is not finite");
  }

  SolveReport report;
  VectorXd x = init;
  bool step_converged = false;
  MatrixXd kkt(n + m, n + m);
  VectorXd rhs(n + m);
  double cost = problem.cost(x);
  VectorXd multipliers;
  for (int it = 1; it <= opts.max_iters; ++it) {
    const auto normal = problem.normal_equations(x);
    const VectorXd f = problem.constraint_values(x);
    if (!f.allFinite()) {
      throw Error(ErrorCode::NonFinite, "solve_constrained_gn: constraint value is not finite");
    }
    const MatrixXd A = problem.constraint_jacobian(x);
    kkt.setZero();
    kkt.topLeftCorner(n, n) = normal.information;
    if (opts.constraint_curvature && m > 0 && multipliers.size() == m) {
      const MatrixXd lagrangian = normal.information + problem.constraint_curvature(x, multipliers);
      if (reduced_positive_definite(lagrangian, A)) kkt.topLeftCorner(n, n) = lagrangian;
    }
    kkt.topRightCorner(n, m) = A.transpose();
    kkt.bottomLeftCorner(m, n) = A;
    rhs.head(n) = -normal.gradient;
    rhs.tail(m) = -f;
    const Eigen::FullPivLU<MatrixXd> lu(kkt);
    if (!lu.isInvertible()) {
      throw Error(ErrorCode::Singular, "solve_constrained_gn: KKT system is singular at iteration " +
                                           std::to_string(it));
    }
    const VectorXd sol = lu.solve(rhs);
    multipliers = sol.tail(m);
    VectorXd delta = sol.head(n);
    const double full_step = delta.lpNorm<Eigen::Infinity>();
    if (opts.max_backtracks > 0) {
      const double penalty = m > 0 ? 2.0 * sol.tail(m).lpNorm<Eigen::Infinity>() + 1.0 : 0.0;
      auto merit = [&](const VectorXd& y) {
        const double c = problem.cost(y);
        return m > 0 ? c + penalty * problem.constraint_values(y).lpNorm<1>() : c;
      };
      const double current = merit(x);
      for (int k = 0; k < opts.max_backtracks; ++k) {
        const double trial = merit(x + delta);
        if (std::isfinite(trial) && trial <= current) break;
        delta *= 0.5;
      }
    }
    x += delta;
    report.iterations = it;
    const double next_cost = problem.cost(x);
    const bool feasible =
        m == 0 || problem.constraint_values(x).lpNorm<Eigen::Infinity>() < opts.constraint_tolerance;
    const bool small_step = full_step < opts.step_tolerance;
    const bool flat = opts.cost_tolerance > 0.0 && feasible &&
                      std::abs(cost - next_cost) <= opts.cost_tolerance * (1.0 + next_cost);
    cost = next_cost;
    if (small_step || flat) {
      step_converged = true;
      break;
    }
  }

  report.solution = x;
  report.unconstrained_info = problem.normal_equations(x).information;
  report.constraint_jacobian = problem.constraint_jacobian(x);
  const VectorXd f = problem.constraint_values(x);
  report.converged = step_converged && (m == 0 || f.lpNorm<Eigen::Infinity>() < opts.constraint_tolerance);
  report.conditioned_cov = extract_conditioned_cov(report.unconstrained_info, report.constraint_jacobian);
  return report;
}

MatrixXd extract_conditioned_cov(const MatrixXd& info, const MatrixXd& constraint_jacobian) {
  const Index n = info.rows();
  if (info.cols() != n || constraint_jacobian.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "extract_conditioned_cov: inconsistent dimensions");
  }
  MatrixXd N;
  if (constraint_jacobian.rows() == 0) {
    N = MatrixXd::Identity(n, n);
  } else {
    const LinearManifold tangent = LinearManifold::make(
        constraint_jacobian.transpose(), VectorXd::Zero(constraint_jacobian.rows()));
    N = tangent.nullspace();
  }
  const MatrixXd reduced = N.transpose() * info * N;
  const Eigen::LLT<MatrixXd> chol(0.5 * (reduced + reduced.transpose()));
  if (chol.info() != Eigen::Success) {
    throw Error(ErrorCode::Singular, "extract_conditioned_cov: N^T info N is singular");
  }
  const MatrixXd cov = N * chol.solve(N.transpose());
  return 0.5 * (cov + cov.transpose());
}

MatrixXd extract_conditioned_cov(const SolveReport& report) {
  return extract_conditioned_cov(report.unconstrained_info, report.constraint_jacobian);
}

double mahalanobis_consistency(const VectorXd& error_ambient, const SolveReport& report,
                               const MatrixXd& tangent_basis, Index dof) {
  const MatrixXd& info = report.unconstrained_info;
  const MatrixXd& B = tangent_basis;
  if (dof <= 0) {
    throw Error(ErrorCode::InvalidArgument, "mahalanobis_consistency: dof must be positive");
  }
  if (error_ambient.size() != info.rows() || B.rows() != info.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "mahalanobis_consistency: inconsistent dimensions");
  }
  const MatrixXd& A = report.constraint_jacobian;
  if (A.rows() > 0) {
    const double leak = (A * B).cwiseAbs().maxCoeff();
    if (leak > 1e-8 * std::max(1.0, A.norm() * B.norm())) {
      throw Error(ErrorCode::InvalidArgument,
                  "mahalanobis_consistency: tangent basis does not lie in null(A)");
    }
  }
  const Eigen::LDLT<MatrixXd> gram(B.transpose() * B);
  const VectorXd coords = gram.solve(B.transpose() * error_ambient);
  const MatrixXd tangent_info = B.transpose() * info * B;
  const Eigen::LLT<MatrixXd> chol(0.5 * (tangent_info + tangent_info.transpose()));
  if (chol.info() != Eigen::Success) {
    throw Error(ErrorCode::Singular, "mahalanobis_consistency: tangent covariance is singular");
  }
  const double quad = coords.dot(tangent_info * coords);
  return std::sqrt(std::max(quad, 0.0) / static_cast<double>(dof));
}

}  // namespace mcg
