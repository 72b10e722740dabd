#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mcg/error.hpp"
#include "mcg/smooth_manifold.hpp"
#include "oracles.hpp"

using namespace mcg;

namespace {

constexpr double kPi = std::numbers::pi;

VectorXd vec2(double a, double b) { return Eigen::Vector2d(a, b); }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected mcg::Error");
  return ErrorCode::InvalidArgument;
}

ContactChainModel random_contact(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return ContactChainModel(Eigen::Vector2d(u(rng), u(rng)), 0.05, 0.02);
}

VectorXd random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return Eigen::Vector3d(u(rng), u(rng), 3.0 * u(rng));
}

}  // namespace

TEST_CASE("unit circle: tangent planes") {
  const UnitCircleModel circle;
  const auto a = linearize_at_mean(circle, make_gaussian(vec2(2, 0), MatrixXd::Identity(2, 2)));
  CHECK((a.base_point - vec2(1, 0)).norm() < 1e-15);
  const VectorXd n = a.plane.constraints().col(0).normalized();
  CHECK(std::abs(std::abs(n(0)) - 1.0) < 1e-12);
  CHECK(a.plane.residual(vec2(1, 5)).norm() < 1e-12);

  const auto on = linearize_at_mean(circle, make_gaussian(vec2(0.6, -0.8), MatrixXd::Identity(2, 2)));
  CHECK((on.base_point - vec2(0.6, -0.8)).norm() < 1e-15);

  const auto d = linearize_at_mean(circle, make_gaussian(vec2(1, 1), MatrixXd::Identity(2, 2)));
  CHECK((d.base_point - vec2(1, 1) / std::sqrt(2.0)).norm() < 1e-15);
  const VectorXd nd = d.plane.constraints().col(0).normalized();
  CHECK(std::abs(std::abs(nd.dot(vec2(1, 1) / std::sqrt(2.0))) - 1.0) < 1e-12);
  CHECK(d.plane.residual(d.base_point).norm() < 1e-12);

  CHECK(code_of([&] { linearize_at_mean(circle, make_gaussian(vec2(0, 0), MatrixXd::Identity(2, 2))); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("unit circle: marginalize_onto and condition_onto") {
  const UnitCircleModel circle;
  const double s2 = 0.04;
  const TangentGaussian tg = marginalize_onto(circle, make_gaussian(vec2(1.5, 0), s2 * MatrixXd::Identity(2, 2)));
  CHECK((tg.gauss.mean() - vec2(1, 0)).norm() < 1e-12);
  CHECK(std::abs(tg.gauss.cov()(1, 1) - s2) < 1e-12);
  CHECK(std::abs(tg.gauss.cov()(0, 0)) < 1e-12);
  CHECK(tg.gauss.rank() == 1);
  CHECK(std::abs(chart_gaussian(tg, circle).cov()(0, 0) - s2) < 1e-12);

  const Gaussian on = make_gaussian(vec2(0, 1), Eigen::Vector2d(0.1, 0.3).asDiagonal().toDenseMatrix());
  CHECK((marginalize_onto(circle, on).gauss.mean() - on.mean()).norm() < 1e-12);
  CHECK((condition_onto(circle, on).gauss.mean() - on.mean()).norm() < 1e-12);
  CHECK(condition_onto(circle, on).gauss.rank() == 1);

  const Gaussian degenerate = make_gaussian(vec2(2, 0), Eigen::Vector2d(1, 0).asDiagonal().toDenseMatrix());
  CHECK(code_of([&] { condition_onto(circle, degenerate); }) == ErrorCode::RankDeficient);
}

TEST_CASE("unit circle: retracted density") {
  const UnitCircleModel circle;
  const double s2 = 0.09;
  const TangentGaussian tg = marginalize_onto(circle, make_gaussian(vec2(1, 0), s2 * MatrixXd::Identity(2, 2)));
  const int k = 4000;
  MatrixXd pts(2, k);
  VectorXd theta(k);
  for (int i = 0; i < k; ++i) {
    theta(i) = -kPi + 2.0 * kPi * (i + 0.5) / k;
    pts.col(i) = vec2(std::cos(theta(i)), std::sin(theta(i)));
  }
  const VectorXd q = retract_distribution(tg, circle, pts);
  const double norm_c = 1.0 / std::sqrt(2.0 * kPi * s2);
  double worst = 0.0;
  for (int i = 0; i < k; ++i) {
    worst = std::max(worst, std::abs(q(i) - norm_c * std::exp(-0.5 * theta(i) * theta(i) / s2)));
  }
  CHECK(worst < 1e-12);
  const VectorXd peak = retract_distribution(tg, circle, MatrixXd(vec2(1, 0)));
  CHECK(peak(0) == doctest::Approx(norm_c).epsilon(1e-12));
  // mass beyond the chart radius pi is about 2 * Phi(-pi / 0.3), negligible here
  CHECK(q.sum() * 2.0 * kPi / k == doctest::Approx(1.0).epsilon(1e-6));

  CHECK(code_of([&] { retract_distribution(tg, circle, MatrixXd(vec2(2, 0))); }) == ErrorCode::OffManifold);
  CHECK(code_of([&] { retract_distribution(tg, circle, MatrixXd::Ones(1, 1)); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("unit circle: model invariants") {
  const UnitCircleModel circle;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 20; ++i) {
    const VectorXd x = vec2(u(rng), u(rng));
    const MatrixXd fd = oracle::fd_jacobian([&](const VectorXd& y) { return circle.residual(y); }, x);
    CHECK((circle.jacobian(x) - fd).norm() / circle.jacobian(x).norm() < 1e-5);
    const VectorXd p = circle.project(x);
    CHECK(std::abs(circle.residual(p)(0)) < 1e-12);
    CHECK((circle.project(p) - p).norm() < 1e-15);
    const double t = 0.49 * circle.chart_radius() * u(rng) / 3.0;
    const VectorXd r = circle.retract(p, VectorXd::Constant(1, t));
    CHECK(std::abs(circle.residual(r)(0)) < 1e-8);
    CHECK(std::abs(circle.inverse_retract(p, r)(0) - t) < 1e-8);
    const MatrixXd basis = circle.chart_basis(p);
    const MatrixXd fdr = oracle::fd_jacobian([&](const VectorXd& c) { return circle.retract(p, c); }, VectorXd::Zero(1));
    CHECK((basis - fdr).norm() < 1e-6);
  }
  CHECK(circle.chart_radius() == doctest::Approx(kPi));
}

TEST_CASE("contact chain: model invariants") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const ContactChainModel model = random_contact(rng);
    const VectorXd x = random_pose(rng);
    const MatrixXd fd = oracle::fd_jacobian([&](const VectorXd& y) { return model.residual(y); }, x);
    CHECK((model.jacobian(x) - fd).norm() / model.jacobian(x).norm() < 1e-5);

    const VectorXd p = model.project(x);
    CHECK(std::abs(model.residual(p)(0)) < 1e-12);
    CHECK(p(2) == x(2));
    CHECK(model.probe_in_box(p)(0) == doctest::Approx(model.probe_in_box(x)(0)));
    CHECK((model.project(p) - p).norm() < 1e-12);

    const Eigen::Vector2d v(0.45 * model.chart_radius() * u(rng), 0.1 * u(rng));
    const VectorXd r = model.retract(p, v);
    CHECK(std::abs(model.residual(r)(0)) < 1e-8);
    CHECK((model.inverse_retract(p, r) - v).norm() < 1e-8);

    const MatrixXd basis = model.chart_basis(p);
    const MatrixXd fdr = oracle::fd_jacobian([&](const VectorXd& c) { return model.retract(p, c); }, VectorXd::Zero(2));
    CHECK((basis - fdr).norm() < 1e-6);
    CHECK((model.jacobian(p) * basis).norm() < 1e-10);
  }
}

TEST_CASE("contact chain: chart coordinates and heading wrap") {
  const ContactChainModel model(Eigen::Vector2d(0.3, -0.2), 0.05, 0.02);
  const Eigen::Vector3d pose = model.pose_from_chart(0.4, 0.03);
  CHECK(std::abs(model.residual(pose)(0)) < 1e-14);
  CHECK(model.probe_in_box(pose)(0) == doctest::Approx(0.03));
  CHECK(model.probe_in_box(pose)(1) == doctest::Approx(0.07));
  Eigen::Vector3d turned = pose;
  turned(2) += 2.0 * kPi;
  CHECK(model.inverse_retract(pose, turned).norm() < 1e-12);
}

TEST_CASE("tangent pipeline on the contact manifold") {
  const ContactChainModel model(Eigen::Vector2d(0.0, 0.0), 0.05, 0.02);
  const Eigen::Vector3d truth = model.pose_from_chart(0.2, -0.01);
  const Gaussian g = make_gaussian(truth + Eigen::Vector3d(0.01, -0.02, 0.0), 1e-4 * MatrixXd::Identity(3, 3));
  const TangentGaussian tg = condition_onto(model, g);
  CHECK(tg.gauss.rank() == 2);
  CHECK(std::abs(model.residual(tg.base_point)(0)) < 1e-12);
  CHECK(tg.plane.residual(tg.gauss.mean()).norm() < 1e-12);
  CHECK((tg.gauss.cov() * tg.plane.constraints()).norm() < 1e-12);
  const Gaussian chart = chart_gaussian(tg, model);
  CHECK(chart.dim() == 2);
  CHECK(chart.full_rank());
}
