#include "mcg/linear_manifold.hpp"

#include <algorithm>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "mcg/error.hpp"

namespace mcg {
namespace {

// Singular values below this fraction of the largest one count as zero.
constexpr double kColumnRankTolerance = 1e-10;

MatrixXd symmetrized(const MatrixXd& A) { return 0.5 * (A + A.transpose()); }

Index column_rank(const MatrixXd& A) {
  if (A.cols() == 0) return 0;
  const Eigen::JacobiSVD<MatrixXd> svd(A);
  const VectorXd& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  return static_cast<Index>((sv.array() > kColumnRankTolerance * sv(0)).count());
}

void check_dims(const Gaussian& g, const LinearManifold& M, const char* op) {
  if (g.dim() != M.ambient_dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(op) + ": gaussian has dimension " + std::to_string(g.dim()) +
                    " but manifold lives in dimension " + std::to_string(M.ambient_dim()));
  }
}

void check_split(const Gaussian& g, Index n_alpha, const VectorXd& beta, const char* op) {
  if (n_alpha <= 0 || n_alpha >= g.dim()) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(op) + ": split " + std::to_string(n_alpha) + " outside (0, " +
                    std::to_string(g.dim()) + ")");
  }
  if (beta.size() != g.dim() - n_alpha) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(op) + ": beta must have length " + std::to_string(g.dim() - n_alpha));
  }
}

}  // namespace

LinearManifold::LinearManifold(MatrixXd S, VectorXd c, MatrixXd N)
    : S_(std::move(S)), c_(std::move(c)), N_(std::move(N)) {
  // General forms on purpose: N need not be orthonormal.
  const MatrixXd gram_N = N_.transpose() * N_;
  Pi_ = symmetrized(N_ * gram_N.ldlt().solve(N_.transpose()));
  const MatrixXd gram_S = S_.transpose() * S_;
  x0_ = S_ * gram_S.ldlt().solve(c_);
}

LinearManifold LinearManifold::make(const MatrixXd& S, const VectorXd& c) {
  const Index n = S.rows();
  const Index m = S.cols();
  if (c.size() != m) {
    throw Error(ErrorCode::DimensionMismatch,
                "linear manifold: S has " + std::to_string(m) + " columns but c has length " +
                    std::to_string(c.size()));
  }
  if (m < 1 || m >= n) {
    throw Error(ErrorCode::InvalidArgument,
                "linear manifold: need 1 <= m < n, got n=" + std::to_string(n) +
                    ", m=" + std::to_string(m));
  }
  if (!S.allFinite() || !c.allFinite()) {
    throw Error(ErrorCode::NonFinite, "linear manifold: S or c contains non-finite entries");
  }
  // Full SVD of S^T (m x n): the trailing n - m right singular vectors span null(S^T).
  const Eigen::JacobiSVD<MatrixXd> svd(S.transpose(), Eigen::ComputeFullV);
  const VectorXd& sv = svd.singularValues();
  const Index rank =
      sv(0) == 0.0 ? 0 : static_cast<Index>((sv.array() > kColumnRankTolerance * sv(0)).count());
  if (rank < m) {
    throw Error(ErrorCode::RankDeficient,
                "linear manifold: S has numerical rank " + std::to_string(rank) + " < " +
                    std::to_string(m));
  }
  return LinearManifold(S, c, svd.matrixV().rightCols(n - m));
}

LinearManifold LinearManifold::with_nullspace_basis(const MatrixXd& N) const {
  if (N.rows() != ambient_dim() || N.cols() != manifold_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "linear manifold: nullspace basis has wrong shape");
  }
  if (column_rank(N) < N.cols()) {
    throw Error(ErrorCode::InvalidArgument, "linear manifold: nullspace basis is rank deficient");
  }
  const double leak = (S_.transpose() * N).cwiseAbs().maxCoeff();
  if (leak > 1e-10 * std::max(1.0, S_.norm() * N.norm())) {
    throw Error(ErrorCode::InvalidArgument, "linear manifold: basis is not orthogonal to S");
  }
  return LinearManifold(S_, c_, N);
}

VectorXd LinearManifold::residual(const VectorXd& x) const {
  if (x.size() != ambient_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "linear manifold: point has wrong dimension");
  }
  return S_.transpose() * x - c_;
}

VectorXd project_point(const LinearManifold& M, const VectorXd& x) {
  if (x.size() != M.ambient_dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "project_point: point has length " + std::to_string(x.size()) + ", expected " +
                    std::to_string(M.ambient_dim()));
  }
  return M.projector() * x + M.foot_point();
}

Gaussian marginalize(const Gaussian& g, const LinearManifold& M) {
  check_dims(g, M, "marginalize");
  const MatrixXd& Pi = M.projector();
  return make_gaussian(Pi * g.mean() + M.foot_point(), Pi * g.cov() * Pi.transpose());
}

Gaussian condition(const Gaussian& g, const LinearManifold& M) {
  check_dims(g, M, "condition");
  if (!g.full_rank()) {
    throw Error(ErrorCode::RankDeficient,
                "condition: covariance has rank " + std::to_string(g.rank()) + " < " +
                    std::to_string(g.dim()) + "; conditioning needs Sigma^-1");
  }
  const Eigen::LLT<MatrixXd> chol(g.cov());
  if (chol.info() != Eigen::Success) {
    throw Error(ErrorCode::Singular, "condition: covariance is not positive definite");
  }
  const MatrixXd& N = M.nullspace();
  const MatrixXd info_N = chol.solve(N);  // Sigma^-1 N
  const MatrixXd reduced = N.transpose() * info_N;
  const Eigen::LDLT<MatrixXd> reduced_ldlt(reduced);
  if (reduced_ldlt.info() != Eigen::Success) {
    throw Error(ErrorCode::Singular, "condition: N^T Sigma^-1 N is singular");
  }
  const MatrixXd cov_cond = symmetrized(N * reduced_ldlt.solve(N.transpose()));
  const VectorXd offset = g.mean() - M.foot_point();
  const VectorXd mean_cond = M.foot_point() + cov_cond * chol.solve(offset);
  return make_gaussian(mean_cond, cov_cond);
}

Gaussian condition_via_kkt(const MatrixXd& info, const MatrixXd& S, const VectorXd& mean,
                           const VectorXd& c) {
  const Index n = info.rows();
  const Index m = S.cols();
  if (info.cols() != n || S.rows() != n || mean.size() != n || c.size() != m) {
    throw Error(ErrorCode::DimensionMismatch, "condition_via_kkt: inconsistent dimensions");
  }
  MatrixXd kkt = MatrixXd::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = info;
  kkt.topRightCorner(n, m) = S;
  kkt.bottomLeftCorner(m, n) = S.transpose();
  const Eigen::FullPivLU<MatrixXd> lu(kkt);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::Singular,
                "condition_via_kkt: KKT matrix is singular (S rank deficient or info not PD)");
  }
  const MatrixXd kkt_inv = lu.inverse();
  VectorXd rhs(n + m);
  rhs.head(n) = info * mean;
  rhs.tail(m) = c;
  const VectorXd solution = lu.solve(rhs);
  return make_gaussian(solution.head(n), symmetrized(kkt_inv.topLeftCorner(n, n)));
}

Gaussian axis_marginalize(const Gaussian& g, Index n_alpha, const VectorXd& beta) {
  check_split(g, n_alpha, beta, "axis_marginalize");
  const Index n = g.dim();
  VectorXd mean(n);
  mean << g.mean().head(n_alpha), beta;
  MatrixXd cov = MatrixXd::Zero(n, n);
  cov.topLeftCorner(n_alpha, n_alpha) = g.cov().topLeftCorner(n_alpha, n_alpha);
  return make_gaussian(mean, cov);
}

Gaussian axis_condition(const Gaussian& g, Index n_alpha, const VectorXd& beta) {
  check_split(g, n_alpha, beta, "axis_condition");
  const Index n = g.dim();
  const Index n_beta = n - n_alpha;
  const MatrixXd& cov = g.cov();
  const auto cov_aa = cov.topLeftCorner(n_alpha, n_alpha);
  const auto cov_ab = cov.topRightCorner(n_alpha, n_beta);
  const MatrixXd cov_bb = cov.bottomRightCorner(n_beta, n_beta);

  const Eigen::FullPivLU<MatrixXd> lu(cov_bb);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::Singular, "axis_condition: Sigma_bb is singular");
  }
  const MatrixXd gain = lu.solve(cov_ab.transpose()).transpose();  // Sigma_ab Sigma_bb^-1

  VectorXd mean(n);
  mean << g.mean().head(n_alpha) + gain * (beta - g.mean().tail(n_beta)), beta;
  MatrixXd out = MatrixXd::Zero(n, n);
  out.topLeftCorner(n_alpha, n_alpha) = cov_aa - gain * cov_ab.transpose();
  return make_gaussian(mean, symmetrized(out));
}

FrameTransform axis_aligning_frame(const LinearManifold& M) {
  MatrixXd H(M.ambient_dim(), M.ambient_dim());
  H << M.nullspace(), M.constraints();
  return FrameTransform::make(H);
}

VectorXd axis_aligned_offsets(const LinearManifold& M) {
  const MatrixXd& S = M.constraints();
  return (S.transpose() * S).ldlt().solve(M.offsets());
}

}  // namespace mcg
