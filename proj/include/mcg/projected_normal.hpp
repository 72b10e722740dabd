#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "mcg/gaussian.hpp"

namespace mcg {

/// Density over the angle theta, sampled on K uniformly spaced points
/// theta_i = -pi + 2 pi i / K covering [-pi, pi).
struct CircularDensity {
  std::vector<double> theta;
  std::vector<double> values;

  [[nodiscard]] Index size() const noexcept { return static_cast<Index>(theta.size()); }
  [[nodiscard]] double spacing() const;
  /// Periodic trapezoidal rule (reduces to sum * spacing on a closed grid).
  [[nodiscard]] double integral() const;
  void normalize();
};

/// Zero-valued density on the standard K-point grid.
CircularDensity make_circular_grid(Index grid_size);

/// Closed-form density of theta = atan2(x2, x1) for x ~ N(mu, Sigma) (the
/// general projected normal). With u = (cos t, sin t), A = u^T S^-1 u,
/// B = u^T S^-1 mu, C = mu^T S^-1 mu and D = B / sqrt(A):
///   p(t) = exp(-C/2) / (2 pi A |S|^1/2) * (1 + D Phi(D) / phi(D)).
double projected_normal_pdf(const Gaussian& g, double theta);

enum class ReferenceMethod { Analytical, MonteCarlo };

/// Marginal density of the angle of a 2-d Gaussian. Analytical evaluates
/// projected_normal_pdf on the grid. MonteCarlo draws mc_samples points and
/// forms a wrapped Gaussian kernel density estimate of their angles
/// (linear binning on the grid, bandwidth by least-squares cross-validation).
/// Both are normalized on the grid.
CircularDensity reference_density(const Gaussian& g, Index grid_size, ReferenceMethod method,
                                  Index mc_samples = 0, std::uint64_t seed = 0);

/// Tangent-plane approximation: marginalize onto the tangent line of the
/// unit circle at mu/|mu|, retract along arc length, renormalize on the grid.
CircularDensity approx_density(const Gaussian& g, Index grid_size);

/// Floor applied to densities before taking logs.
inline constexpr double kDensityFloor = 1e-300;

/// Quadrature of p log(p / q) on the shared grid.
double kl_divergence(const CircularDensity& p, const CircularDensity& q);

/// Half the integrated absolute difference.
double total_variation(const CircularDensity& p, const CircularDensity& q);

struct ProjectedNormalConfig {
  Eigen::Vector2d mean{1.0, 0.0};
  std::vector<double> scales{0.01, 0.05, 0.2};  // Sigma = scale * I
  Index grid_size = 2048;
  ReferenceMethod reference = ReferenceMethod::Analytical;
  Index mc_samples = 1'000'000;
  std::uint64_t seed = 20240917;
  double ratio_floor = 2.0;
};

struct ProjectedNormalRow {
  double scale = 0.0;
  double det_sigma = 0.0;
  double kl = 0.0;
  double base_angle = 0.0;        // angle of the projected mean
  double tangent_variance = 0.0;  // variance of the tangent marginal (chart units)
  CircularDensity reference;
  CircularDensity approx;
};

struct ProjectedNormalResult {
  std::vector<ProjectedNormalRow> rows;
  bool kl_strictly_increasing = false;
  /// kl(smallest) * ratio_floor <= kl(second smallest); true with fewer than two rows.
  bool ratio_floor_met = false;
};

/// One row per covariance scale: reference vs tangent-plane approximation and
/// D_KL(reference || approx).
ProjectedNormalResult run_projected_normal_experiment(const ProjectedNormalConfig& config);

}  // namespace mcg
