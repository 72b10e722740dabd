#include "mcg/smooth_manifold.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>

#include "mcg/error.hpp"

namespace mcg {
namespace {

Eigen::Matrix2d rotation(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix2d R;
  R << c, -s, s, c;
  return R;
}

void require_dim(const VectorXd& x, Index n, const char* what) {
  if (x.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": expected a vector of length " +
                                                  std::to_string(n) + ", got " +
                                                  std::to_string(x.size()));
  }
}

TangentGaussian package(const TangentPlane& tp, Gaussian gauss) {
  MatrixXd basis = tp.plane.nullspace();
  return TangentGaussian{tp.base_point, tp.plane, std::move(gauss), std::move(basis)};
}

}  // namespace

// ---------------------------------------------------------------------------
// UnitCircleModel

VectorXd UnitCircleModel::residual(const VectorXd& x) const {
  require_dim(x, 2, "unit circle");
  return VectorXd::Constant(1, x.squaredNorm() - 1.0);
}

MatrixXd UnitCircleModel::jacobian(const VectorXd& x) const {
  require_dim(x, 2, "unit circle");
  return 2.0 * x.transpose();
}

VectorXd UnitCircleModel::project(const VectorXd& x) const {
  require_dim(x, 2, "unit circle");
  const double r = x.norm();
  if (!(r > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "unit circle: cannot project the origin");
  }
  return x / r;
}

MatrixXd UnitCircleModel::chart_basis(const VectorXd& base) const {
  require_dim(base, 2, "unit circle");
  return Eigen::Vector2d(-base(1), base(0));
}

VectorXd UnitCircleModel::retract(const VectorXd& base, const VectorXd& coords) const {
  require_dim(base, 2, "unit circle");
  require_dim(coords, 1, "unit circle chart");
  return rotation(coords(0)) * Eigen::Vector2d(base);
}

VectorXd UnitCircleModel::inverse_retract(const VectorXd& base, const VectorXd& point) const {
  require_dim(base, 2, "unit circle");
  require_dim(point, 2, "unit circle");
  const double cross = base(0) * point(1) - base(1) * point(0);
  const double dot = base.dot(point);
  return VectorXd::Constant(1, std::atan2(cross, dot));
}

double UnitCircleModel::chart_radius() const { return std::numbers::pi; }

// ---------------------------------------------------------------------------
// ContactChainModel

ContactChainModel::ContactChainModel(Eigen::Vector2d probe_center, double half_height,
                                     double probe_radius)
    : probe_(std::move(probe_center)), offset_(half_height + probe_radius) {
  if (!(half_height > 0.0) || !(probe_radius >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "contact chain: box height must be positive");
  }
}

Eigen::Vector2d ContactChainModel::probe_in_box(const VectorXd& x) const {
  require_dim(x, 3, "contact chain");
  return rotation(x(2)).transpose() * (probe_ - x.head<2>());
}

Eigen::Vector3d ContactChainModel::pose_from_chart(double alpha, double d) const {
  Eigen::Vector3d x;
  x.head<2>() = probe_ - rotation(alpha) * Eigen::Vector2d(d, offset_);
  x(2) = alpha;
  return x;
}

VectorXd ContactChainModel::residual(const VectorXd& x) const {
  return VectorXd::Constant(1, probe_in_box(x)(1) - offset_);
}

MatrixXd ContactChainModel::jacobian(const VectorXd& x) const {
  const Eigen::Vector2d q = probe_in_box(x);
  const double c = std::cos(x(2));
  const double s = std::sin(x(2));
  // q_y = -s (p_x - t_x) + c (p_y - t_y);  d q_y / d phi = -q_x.
  MatrixXd J(1, 3);
  J << s, -c, -q(0);
  return J;
}

VectorXd ContactChainModel::project(const VectorXd& x) const {
  const Eigen::Vector2d q = probe_in_box(x);
  VectorXd out = x;
  out.head<2>() += rotation(x(2)) * Eigen::Vector2d(0.0, q(1) - offset_);
  return out;
}

MatrixXd ContactChainModel::chart_basis(const VectorXd& base) const {
  const double alpha = base(2);
  const double d = probe_in_box(base)(0);
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  MatrixXd B(3, 2);
  // dh/dalpha = (-R'(alpha) [d; k], 1),  dh/dd = (-R(alpha) e_x, 0)
  B.col(0) << s * d + c * offset_, -c * d + s * offset_, 1.0;
  B.col(1) << -c, -s, 0.0;
  return B;
}

VectorXd ContactChainModel::retract(const VectorXd& base, const VectorXd& coords) const {
  require_dim(coords, 2, "contact chain chart");
  const double d = probe_in_box(base)(0);
  return pose_from_chart(base(2) + coords(0), d + coords(1));
}

VectorXd ContactChainModel::inverse_retract(const VectorXd& base, const VectorXd& point) const {
  const double d_base = probe_in_box(base)(0);
  const double d_point = probe_in_box(point)(0);
  return Eigen::Vector2d(std::remainder(point(2) - base(2), 2.0 * std::numbers::pi), d_point - d_base);
}

double ContactChainModel::chart_radius() const { return std::numbers::pi / 2.0; }

// ---------------------------------------------------------------------------
// Tangent-plane pipeline

TangentPlane linearize_at_mean(const ManifoldModel& model, const Gaussian& g) {
  require_dim(g.mean(), model.ambient_dim(), "linearize_at_mean");
  VectorXd base = model.project(g.mean());
  const MatrixXd S = model.jacobian(base).transpose();
  const VectorXd c = S.transpose() * base;
  try {
    return TangentPlane{LinearManifold::make(S, c), std::move(base)};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::RankDeficient) {
      throw Error(ErrorCode::RankDeficient,
                  "linearize_at_mean: constraint Jacobian is rank deficient at the projected mean");
    }
    throw;
  }
}

TangentGaussian marginalize_onto(const ManifoldModel& model, const Gaussian& g) {
  const TangentPlane tp = linearize_at_mean(model, g);
  return package(tp, marginalize(g, tp.plane));
}

TangentGaussian condition_onto(const ManifoldModel& model, const Gaussian& g) {
  const TangentPlane tp = linearize_at_mean(model, g);
  return package(tp, condition(g, tp.plane));
}

Gaussian chart_gaussian(const TangentGaussian& tg, const ManifoldModel& model) {
  const MatrixXd B = model.chart_basis(tg.base_point);
  const MatrixXd coord_map = (B.transpose() * B).ldlt().solve(B.transpose());
  return make_gaussian(coord_map * (tg.gauss.mean() - tg.base_point),
                       coord_map * tg.gauss.cov() * coord_map.transpose());
}

VectorXd retract_distribution(const TangentGaussian& tg, const ManifoldModel& model,
                              const MatrixXd& points) {
  if (points.rows() != model.ambient_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "retract_distribution: query points have wrong dimension");
  }
  const Gaussian local = chart_gaussian(tg, model);
  if (!local.full_rank()) {
    throw Error(ErrorCode::RankDeficient,
                "retract_distribution: tangent Gaussian is degenerate in chart coordinates");
  }
  const Index k = local.dim();
  const Eigen::LLT<MatrixXd> chol(local.cov());
  const double log_norm = -0.5 * static_cast<double>(k) * std::log(2.0 * std::numbers::pi) -
                          chol.matrixLLT().diagonal().array().log().sum();

  VectorXd density(points.cols());
  for (Index j = 0; j < points.cols(); ++j) {
    const VectorXd p = points.col(j);
    if (model.residual(p).cwiseAbs().maxCoeff() > kOnManifoldTolerance) {
      throw Error(ErrorCode::OffManifold,
                  "retract_distribution: query point " + std::to_string(j) + " is off the manifold");
    }
    const VectorXd coords = model.inverse_retract(tg.base_point, p);
    if (coords.norm() > model.chart_radius() + 1e-12) {
      throw Error(ErrorCode::OutsideChart,
                  "retract_distribution: query point " + std::to_string(j) + " is outside the chart");
    }
    const VectorXd white = chol.matrixL().solve(coords - local.mean());
    density(j) = std::exp(log_norm - 0.5 * white.squaredNorm()) *
                 model.chart_volume_factor(tg.base_point, coords);
  }
  return density;
}

}  // namespace mcg
