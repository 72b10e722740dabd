#pragma once

#include <utility>

#include <Eigen/Core>

#include "mcg/gaussian.hpp"

namespace mcg {

/// Affine subspace { x : S^T x = c } with S an n x m matrix of full column
/// rank and m < n.
///
/// The nullspace basis N of S^T, the orthogonal projector
/// Pi = N (N^T N)^-1 N^T and the minimum-norm foot point
/// x0 = S (S^T S)^-1 c are computed once at construction. The default N is
/// orthonormal (from an SVD of S^T), but nothing downstream assumes so: any
/// basis installed with with_nullspace_basis gives identical results.
class LinearManifold {
 public:
  /// Throws Error(DimensionMismatch) if c does not match S, Error(InvalidArgument)
  /// if m >= n, Error(RankDeficient) if S does not have full column rank.
  static LinearManifold make(const MatrixXd& S, const VectorXd& c);

  /// Same manifold with a caller-chosen nullspace basis. Throws
  /// Error(InvalidArgument) unless the columns of N are independent and
  /// orthogonal to the columns of S.
  [[nodiscard]] LinearManifold with_nullspace_basis(const MatrixXd& N) const;

  [[nodiscard]] const MatrixXd& constraints() const noexcept { return S_; }
  [[nodiscard]] const VectorXd& offsets() const noexcept { return c_; }
  [[nodiscard]] const MatrixXd& nullspace() const noexcept { return N_; }
  [[nodiscard]] const MatrixXd& projector() const noexcept { return Pi_; }
  [[nodiscard]] const VectorXd& foot_point() const noexcept { return x0_; }

  [[nodiscard]] Index ambient_dim() const noexcept { return S_.rows(); }
  [[nodiscard]] Index constraint_count() const noexcept { return S_.cols(); }
  [[nodiscard]] Index manifold_dim() const noexcept { return S_.rows() - S_.cols(); }

  /// S^T x - c.
  [[nodiscard]] VectorXd residual(const VectorXd& x) const;

 private:
  LinearManifold(MatrixXd S, VectorXd c, MatrixXd N);

  MatrixXd S_;
  VectorXd c_;
  MatrixXd N_;
  MatrixXd Pi_;
  VectorXd x0_;
};

inline LinearManifold make_linear_manifold(const MatrixXd& S, const VectorXd& c) {
  return LinearManifold::make(S, c);
}

/// Euclidean-closest point on the manifold: Pi x + x0.
VectorXd project_point(const LinearManifold& M, const VectorXd& x);

/// Marginal onto the manifold: N(Pi mu + x0, Pi Sigma Pi^T). Accepts
/// rank-deficient input.
Gaussian marginalize(const Gaussian& g, const LinearManifold& M);

/// Conditional on the manifold:
///   Sigma_cond = N (N^T Sigma^-1 N)^-1 N^T
///   mu_cond    = x0 + Sigma_cond Sigma^-1 (mu - x0)
/// Requires a full-rank covariance; throws Error(RankDeficient) otherwise.
Gaussian condition(const Gaussian& g, const LinearManifold& M);

/// Conditioning through the saddle-point system K = [[info, S], [S^T, 0]].
/// The covariance is the top-left n x n block of K^-1 and the mean minimizes
/// (x - mean)^T info (x - mean) subject to S^T x = c. Independent of the
/// nullspace route used by condition().
Gaussian condition_via_kkt(const MatrixXd& info, const MatrixXd& S, const VectorXd& mean,
                           const VectorXd& c);

/// Textbook marginalization onto x_beta = beta, where x = [x_alpha; x_beta]
/// and x_alpha holds the first n_alpha coordinates. Output is padded back to
/// n dimensions: mean [mu_alpha; beta], covariance blkdiag(Sigma_aa, 0).
Gaussian axis_marginalize(const Gaussian& g, Index n_alpha, const VectorXd& beta);

/// Textbook conditioning on x_beta = beta via the Schur complement
/// Sigma_aa - Sigma_ab Sigma_bb^-1 Sigma_ab^T, padded to n dimensions.
Gaussian axis_condition(const Gaussian& g, Index n_alpha, const VectorXd& beta);

/// Frame H = [N S] in which the manifold is axis aligned: z = H^-1 x splits
/// into n - m free coordinates followed by m coordinates fixed at
/// (S^T S)^-1 c.
FrameTransform axis_aligning_frame(const LinearManifold& M);

/// Fixed value of the last m z-frame coordinates, (S^T S)^-1 c.
VectorXd axis_aligned_offsets(const LinearManifold& M);

}  // namespace mcg
