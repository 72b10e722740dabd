#pragma once

#include <utility>

#include <Eigen/Core>

#include "mcg/gaussian.hpp"
#include "mcg/linear_manifold.hpp"

namespace mcg {

/// A smooth embedded manifold { x in R^n : f(x) = 0 } together with a
/// projection onto it and a local chart.
///
/// Chart coordinates are the manifold_dim() numbers that retract() consumes
/// and inverse_retract() produces. chart_basis(p) holds the derivative of the
/// retraction at zero, so its columns span the tangent plane at p.
class ManifoldModel {
 public:
  virtual ~ManifoldModel() = default;

  [[nodiscard]] virtual Index ambient_dim() const = 0;
  /// Number of scalar constraint equations (length of f).
  [[nodiscard]] virtual Index constraint_dim() const = 0;
  [[nodiscard]] Index manifold_dim() const { return ambient_dim() - constraint_dim(); }

  [[nodiscard]] virtual VectorXd residual(const VectorXd& x) const = 0;
  /// constraint_dim() x ambient_dim() matrix df/dx^T.
  [[nodiscard]] virtual MatrixXd jacobian(const VectorXd& x) const = 0;
  /// On-manifold point associated with x. Must leave on-manifold points fixed.
  [[nodiscard]] virtual VectorXd project(const VectorXd& x) const = 0;

  [[nodiscard]] virtual MatrixXd chart_basis(const VectorXd& base) const = 0;
  [[nodiscard]] virtual VectorXd retract(const VectorXd& base, const VectorXd& coords) const = 0;
  [[nodiscard]] virtual VectorXd inverse_retract(const VectorXd& base,
                                                 const VectorXd& point) const = 0;
  /// Largest chart-coordinate norm for which the chart is valid.
  [[nodiscard]] virtual double chart_radius() const = 0;

  /// Density correction |det dt/ds| between chart coordinates t and the
  /// manifold's reference measure s at chart point `coords`.
  [[nodiscard]] virtual double chart_volume_factor(const VectorXd& /*base*/,
                                                   const VectorXd& /*coords*/) const {
    return 1.0;
  }
};

/// Unit circle in R^2 with the arc-length (exponential map) chart.
class UnitCircleModel final : public ManifoldModel {
 public:
  [[nodiscard]] Index ambient_dim() const override { return 2; }
  [[nodiscard]] Index constraint_dim() const override { return 1; }
  [[nodiscard]] VectorXd residual(const VectorXd& x) const override;
  [[nodiscard]] MatrixXd jacobian(const VectorXd& x) const override;
  /// x / |x|; throws Error(InvalidArgument) at the origin.
  [[nodiscard]] VectorXd project(const VectorXd& x) const override;
  [[nodiscard]] MatrixXd chart_basis(const VectorXd& base) const override;
  /// Rotates base by the angle coords(0).
  [[nodiscard]] VectorXd retract(const VectorXd& base, const VectorXd& coords) const override;
  /// Signed angle from base to point, in (-pi, pi].
  [[nodiscard]] VectorXd inverse_retract(const VectorXd& base,
                                         const VectorXd& point) const override;
  [[nodiscard]] double chart_radius() const override;
};

/// Planar box pose x = (t_x, t_y, phi) in permanent contact with a circular
/// probe of known center p. The probe center expressed in the box frame,
/// q = R(phi)^T (p - t), must sit on the line q_y = half_height + probe_radius.
///
/// Chart: a revolute joint about the probe (alpha = phi) followed by a
/// prismatic joint along the contact edge (d = q_x):
///   h(alpha, d) = (p - R(alpha) [d; half_height + probe_radius], alpha).
/// The edge is assumed long enough that the contact never reaches a corner.
class ContactChainModel final : public ManifoldModel {
 public:
  ContactChainModel(Eigen::Vector2d probe_center, double half_height, double probe_radius);

  [[nodiscard]] Index ambient_dim() const override { return 3; }
  [[nodiscard]] Index constraint_dim() const override { return 1; }
  [[nodiscard]] VectorXd residual(const VectorXd& x) const override;
  [[nodiscard]] MatrixXd jacobian(const VectorXd& x) const override;
  /// Shifts t along the box-frame y axis until the constraint holds; phi and
  /// q_x are untouched.
  [[nodiscard]] VectorXd project(const VectorXd& x) const override;
  [[nodiscard]] MatrixXd chart_basis(const VectorXd& base) const override;
  [[nodiscard]] VectorXd retract(const VectorXd& base, const VectorXd& coords) const override;
  [[nodiscard]] VectorXd inverse_retract(const VectorXd& base,
                                         const VectorXd& point) const override;
  [[nodiscard]] double chart_radius() const override;

  /// Probe center in the box frame.
  [[nodiscard]] Eigen::Vector2d probe_in_box(const VectorXd& x) const;
  /// Pose for chart coordinates (alpha, d).
  [[nodiscard]] Eigen::Vector3d pose_from_chart(double alpha, double d) const;

  [[nodiscard]] const Eigen::Vector2d& probe_center() const noexcept { return probe_; }
  [[nodiscard]] double contact_offset() const noexcept { return offset_; }

 private:
  Eigen::Vector2d probe_;
  double offset_;  // half_height + probe_radius
};

/// Tangent plane T M at base_point, as S^T x = c with S = (df/dx^T)^T.
struct TangentPlane {
  LinearManifold plane;
  VectorXd base_point;
};

/// Projects the mean onto the manifold and builds the tangent plane there.
/// Throws Error(RankDeficient) if the Jacobian loses rank at the projected mean.
TangentPlane linearize_at_mean(const ManifoldModel& model, const Gaussian& g);

/// Gaussian supported on a tangent plane, plus what is needed to map it back
/// onto the manifold.
struct TangentGaussian {
  VectorXd base_point;
  LinearManifold plane;
  Gaussian gauss;           // ambient coordinates, supported on `plane`
  MatrixXd tangent_basis;   // plane.nullspace()
};

TangentGaussian marginalize_onto(const ManifoldModel& model, const Gaussian& g);
TangentGaussian condition_onto(const ManifoldModel& model, const Gaussian& g);

/// The tangent Gaussian expressed in the model's chart coordinates at its
/// base point (dimension manifold_dim()).
Gaussian chart_gaussian(const TangentGaussian& tg, const ManifoldModel& model);

/// Density of the retracted distribution at on-manifold points (columns of
/// `points`): the chart-coordinate Gaussian density at inverse_retract(base, p)
/// times the chart volume factor. Throws Error(OffManifold) or
/// Error(OutsideChart) for invalid query points.
VectorXd retract_distribution(const TangentGaussian& tg, const ManifoldModel& model,
                              const MatrixXd& points);

/// Tolerance on |f(p)| for query points passed to retract_distribution.
inline constexpr double kOnManifoldTolerance = 1e-8;

}  // namespace mcg
