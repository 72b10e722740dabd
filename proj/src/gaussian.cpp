#include "mcg/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "mcg/error.hpp"

namespace mcg {
namespace {

void require_finite(const VectorXd& mean, const MatrixXd& cov) {
  if (!mean.allFinite() || !cov.allFinite()) {
    throw Error(ErrorCode::NonFinite, "gaussian: mean or covariance contains non-finite entries");
  }
}

}  // namespace

Index numerical_rank(const MatrixXd& symmetric) {
  if (symmetric.size() == 0) return 0;
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetric, Eigen::EigenvaluesOnly);
  const VectorXd& lambda = eig.eigenvalues();
  const double threshold = kRankTolerance * std::max(lambda.maxCoeff(), 1.0);
  return static_cast<Index>((lambda.array() > threshold).count());
}

Gaussian make_gaussian(const VectorXd& mean, const MatrixXd& cov) {
  if (cov.rows() != cov.cols() || cov.rows() != mean.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "gaussian: covariance is " + std::to_string(cov.rows()) + "x" +
                    std::to_string(cov.cols()) + " but mean has length " +
                    std::to_string(mean.size()));
  }
  require_finite(mean, cov);
  MatrixXd sym = 0.5 * (cov + cov.transpose());
  Index rank = 0;
  if (sym.size() > 0) {
    const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
    const VectorXd& lambda = eig.eigenvalues();
    const double lambda_max = lambda.maxCoeff();
    if (lambda.minCoeff() < -kPsdTolerance * std::max(lambda_max, 0.0)) {
      throw Error(ErrorCode::NotPositiveSemidefinite,
                  "gaussian: covariance has eigenvalue " + std::to_string(lambda.minCoeff()) +
                      " (largest " + std::to_string(lambda_max) + ")");
    }
    const double threshold = kRankTolerance * std::max(lambda_max, 1.0);
    rank = static_cast<Index>((lambda.array() > threshold).count());
  }
  return Gaussian(mean, std::move(sym), rank);
}

MatrixXd sample(const Gaussian& g, Index count, std::uint64_t seed) {
  if (count < 1) {
    throw Error(ErrorCode::InvalidArgument, "sample: count must be at least 1");
  }
  const Index n = g.dim();
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(g.cov());
  const VectorXd& lambda = eig.eigenvalues();

  // Eigenvalues come sorted ascending, so the retained ones are the tail.
  const Index r = g.rank();
  const MatrixXd factor =
      eig.eigenvectors().rightCols(r) * lambda.tail(r).cwiseMax(0.0).cwiseSqrt().asDiagonal();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd draws(n, count);
  VectorXd z(r);
  for (Index k = 0; k < count; ++k) {
    for (Index i = 0; i < r; ++i) z(i) = normal(rng);
    draws.col(k) = g.mean() + factor * z;
  }
  return draws;
}

InfoForm info_form(const Gaussian& g) {
  if (!g.full_rank()) {
    throw Error(ErrorCode::RankDeficient,
                "info_form: covariance has rank " + std::to_string(g.rank()) + " < " +
                    std::to_string(g.dim()) + "; information form does not exist");
  }
  const Eigen::LDLT<MatrixXd> ldlt(g.cov());
  if (ldlt.info() != Eigen::Success) {
    throw Error(ErrorCode::Singular, "info_form: covariance factorization failed");
  }
  MatrixXd info = ldlt.solve(MatrixXd::Identity(g.dim(), g.dim()));
  info = 0.5 * (info + info.transpose());
  VectorXd eta = info * g.mean();
  return {std::move(eta), std::move(info)};
}

FrameTransform FrameTransform::make(const MatrixXd& H) {
  if (H.rows() != H.cols() || H.rows() == 0) {
    throw Error(ErrorCode::DimensionMismatch, "frame transform: H must be square and non-empty");
  }
  const Eigen::FullPivLU<MatrixXd> lu(H);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::Singular, "frame transform: H is not invertible");
  }
  MatrixXd H_inv = lu.inverse();
  const double residual =
      (H * H_inv - MatrixXd::Identity(H.rows(), H.cols())).cwiseAbs().maxCoeff();
  if (residual > 1e-10 * std::max(1.0, H.norm() * H_inv.norm())) {
    throw Error(ErrorCode::Singular, "frame transform: H is too ill-conditioned to invert");
  }
  return FrameTransform(H, std::move(H_inv));
}

Gaussian transform_gaussian(const Gaussian& g, const FrameTransform& t, FrameDirection direction) {
  if (g.dim() != t.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "transform_gaussian: dimension mismatch");
  }
  const MatrixXd& A = direction == FrameDirection::ToZ ? t.inverse() : t.matrix();
  return make_gaussian(A * g.mean(), A * g.cov() * A.transpose());
}

}  // namespace mcg
