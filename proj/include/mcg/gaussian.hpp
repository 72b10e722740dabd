#pragma once

#include <cstdint>
#include <utility>

#include <Eigen/Core>

namespace mcg {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Relative threshold used for numerical rank: an eigenvalue counts iff it
/// exceeds kRankTolerance * max(lambda_max, 1).
inline constexpr double kRankTolerance = 1e-10;

/// Relative threshold below which a negative eigenvalue marks a covariance as
/// not positive semidefinite: lambda_min < -kPsdTolerance * lambda_max.
inline constexpr double kPsdTolerance = 1e-10;

/// Numerical rank of a symmetric positive semidefinite matrix under kRankTolerance.
Index numerical_rank(const MatrixXd& symmetric);

/// Multivariate Gaussian in covariance form. The covariance may be rank
/// deficient; the distribution always keeps its ambient dimension.
///
/// Instances are built with make_gaussian, which symmetrizes the covariance,
/// rejects non-PSD input and caches the numerical rank.
class Gaussian {
 public:
  [[nodiscard]] const VectorXd& mean() const noexcept { return mean_; }
  [[nodiscard]] const MatrixXd& cov() const noexcept { return cov_; }
  [[nodiscard]] Index dim() const noexcept { return mean_.size(); }
  [[nodiscard]] Index rank() const noexcept { return rank_; }
  [[nodiscard]] bool full_rank() const noexcept { return rank_ == dim(); }

 private:
  friend Gaussian make_gaussian(const VectorXd& mean, const MatrixXd& cov);
  Gaussian(VectorXd mean, MatrixXd cov, Index rank)
      : mean_(std::move(mean)), cov_(std::move(cov)), rank_(rank) {}

  VectorXd mean_;
  MatrixXd cov_;
  Index rank_ = 0;
};

/// Throws Error(DimensionMismatch) or Error(NotPositiveSemidefinite).
Gaussian make_gaussian(const VectorXd& mean, const MatrixXd& cov);

/// Draws `count` i.i.d. samples, returned as the columns of an n x count
/// matrix. Uses the rank-truncated eigenfactor L (n x rank, L L^T = cov), so
/// degenerate directions are reproduced exactly. Deterministic in `seed`
/// (std::mt19937_64 feeding std::normal_distribution).
MatrixXd sample(const Gaussian& g, Index count, std::uint64_t seed);

/// Information form (Sigma^-1 mu, Sigma^-1). Requires a full-rank covariance.
struct InfoForm {
  VectorXd vector;
  MatrixXd matrix;
};
InfoForm info_form(const Gaussian& g);

/// Invertible change of coordinates x = H z.
class FrameTransform {
 public:
  /// Throws Error(Singular) if H is not invertible.
  static FrameTransform make(const MatrixXd& H);

  [[nodiscard]] const MatrixXd& matrix() const noexcept { return H_; }
  [[nodiscard]] const MatrixXd& inverse() const noexcept { return H_inv_; }
  [[nodiscard]] Index dim() const noexcept { return H_.rows(); }

 private:
  FrameTransform(MatrixXd H, MatrixXd H_inv) : H_(std::move(H)), H_inv_(std::move(H_inv)) {}

  MatrixXd H_;
  MatrixXd H_inv_;
};

enum class FrameDirection { ToZ, ToX };

/// ToZ: (H^-1 mu, H^-1 Sigma H^-T). ToX: (H mu, H Sigma H^T).
Gaussian transform_gaussian(const Gaussian& g, const FrameTransform& t, FrameDirection direction);

}  // namespace mcg
