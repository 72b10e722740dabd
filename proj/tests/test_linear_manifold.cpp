#include <doctest.h>

#include <cmath>
#include <random>

#include "mcg/error.hpp"
#include "mcg/linear_manifold.hpp"
#include "oracles.hpp"

using namespace mcg;

namespace {

MatrixXd mat(Index rows, Index cols, std::initializer_list<double> values) {
  MatrixXd m(rows, cols);
  auto it = values.begin();
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = *it++;
  return m;
}

VectorXd vec(std::initializer_list<double> values) {
  VectorXd v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected mcg::Error");
  return ErrorCode::InvalidArgument;
}

struct Instance {
  Gaussian g;
  LinearManifold M;
};

Instance random_instance(std::mt19937_64& rng, Index n, Index m) {
  const MatrixXd S = oracle::random_matrix(n, m, rng);
  const VectorXd c = oracle::random_vector(m, rng);
  return {make_gaussian(oracle::random_vector(n, rng), oracle::random_spd(n, rng)), LinearManifold::make(S, c)};
}

}  // namespace

TEST_CASE("construction examples") {
  const double beta = 0.7;
  const LinearManifold a = LinearManifold::make(vec({0, 1}), vec({beta}));
  CHECK(std::abs(std::abs(a.nullspace()(0, 0)) - 1.0) < 1e-12);
  CHECK(std::abs(a.nullspace()(1, 0)) < 1e-12);
  CHECK((a.projector() - mat(2, 2, {1, 0, 0, 0})).norm() < 1e-12);
  CHECK((a.foot_point() - vec({0, beta})).norm() < 1e-12);

  const LinearManifold b = LinearManifold::make(vec({1, 1}) / std::sqrt(2.0), vec({0}));
  CHECK((b.projector() - mat(2, 2, {0.5, -0.5, -0.5, 0.5})).norm() < 1e-12);
  CHECK(b.foot_point().norm() < 1e-12);

  const LinearManifold line = LinearManifold::make(mat(3, 2, {1, 0, 0, 1, 0, 0}), vec({0, 0}));
  CHECK(line.manifold_dim() == 1);
  CHECK(std::abs(std::abs(line.nullspace()(2, 0)) - 1.0) < 1e-12);
}

TEST_CASE("construction errors") {
  CHECK(code_of([] { LinearManifold::make(mat(3, 2, {1, 2, 1, 2, 1, 2}), vec({0, 0})); }) ==
        ErrorCode::RankDeficient);
  CHECK(code_of([] { LinearManifold::make(MatrixXd::Identity(2, 2), vec({0, 0})); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { LinearManifold::make(vec({1, 0}), vec({0, 0})); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([] { LinearManifold::make(vec({0, 0}), vec({1})); }) == ErrorCode::RankDeficient);
}

TEST_CASE("cached quantities satisfy their invariants") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 2 + trial % 8;
    const Index m = 1 + trial % (n - 1);
    const MatrixXd S = oracle::random_matrix(n, m, rng);
    const VectorXd c = oracle::random_vector(m, rng);
    const LinearManifold M = LinearManifold::make(S, c);
    CHECK((S.transpose() * M.nullspace()).norm() <= 1e-10 * S.norm() * M.nullspace().norm());
    CHECK((M.projector() * M.projector() - M.projector()).norm() < 1e-10);
    CHECK((M.projector() - M.projector().transpose()).norm() < 1e-12);
    CHECK((S.transpose() * M.foot_point() - c).norm() <= 1e-10 * std::max(1.0, c.norm()));
    CHECK((M.projector() - oracle::orthogonal_projector(S)).norm() < 1e-10);
  }
}

TEST_CASE("project_point examples") {
  const LinearManifold axis = LinearManifold::make(vec({0, 1}), vec({0}));
  CHECK((project_point(axis, vec({3, 5})) - vec({3, 0})).norm() < 1e-12);
  CHECK((project_point(axis, vec({3, 0})) - vec({3, 0})).norm() < 1e-12);
  const LinearManifold diag = LinearManifold::make(vec({1, 1}), vec({0}));
  CHECK((project_point(diag, vec({1, 0})) - vec({0.5, -0.5})).norm() < 1e-12);
  CHECK(code_of([&] { project_point(diag, vec({1, 0, 0})); }) == ErrorCode::DimensionMismatch);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Instance inst = random_instance(rng, 5, 2);
    const VectorXd x = oracle::random_vector(5, rng);
    const VectorXd p = project_point(inst.M, x);
    CHECK(inst.M.residual(p).norm() < 1e-10);
    // closest point: the displacement is orthogonal to the manifold
    CHECK((inst.M.nullspace().transpose() * (x - p)).norm() < 1e-10);
    CHECK((project_point(inst.M, p) - p).norm() < 1e-12);
  }
}

TEST_CASE("marginalize examples") {
  const Gaussian g = make_gaussian(vec({1, 2}), MatrixXd::Identity(2, 2));
  const Gaussian a = marginalize(g, LinearManifold::make(vec({0, 1}), vec({0})));
  CHECK((a.mean() - vec({1, 0})).norm() < 1e-12);
  CHECK((a.cov() - mat(2, 2, {1, 0, 0, 0})).norm() < 1e-12);
  CHECK(a.rank() == 1);

  const Gaussian on = make_gaussian(vec({1, 0}), mat(2, 2, {2, 0.3, 0.3, 1}));
  CHECK((marginalize(on, LinearManifold::make(vec({0, 1}), vec({0}))).mean() - on.mean()).norm() < 1e-12);

  const LinearManifold diag = LinearManifold::make(vec({1, 1}), vec({0}));
  const Gaussian b = marginalize(make_gaussian(vec({1, 1}), MatrixXd::Identity(2, 2)), diag);
  CHECK(b.mean().norm() < 1e-12);
  CHECK((b.cov() - diag.projector()).norm() < 1e-12);

  // degenerate input covariance is allowed
  const Gaussian d = make_gaussian(vec({1, 2, 3}), Eigen::Vector3d(1, 0, 2).asDiagonal().toDenseMatrix());
  CHECK(marginalize(d, LinearManifold::make(vec({1, 1, 1}), vec({1}))).rank() <= 2);
}

TEST_CASE("marginalize agrees with Monte Carlo projection of samples") {
  const LinearManifold diag = LinearManifold::make(vec({1, 1}), vec({0}));
  const Gaussian b = marginalize(make_gaussian(vec({1, 1}), MatrixXd::Identity(2, 2)), diag);
  const auto mc = oracle::projected_sample_moments(vec({1, 1}), MatrixXd::Identity(2, 2), vec({1, 1}), vec({0}),
                                                   1000000, 17);
  CHECK((mc.mean - b.mean()).cwiseAbs().maxCoeff() < 0.01);
  CHECK((mc.cov - b.cov()).norm() / b.cov().norm() < 0.01);
}

TEST_CASE("condition examples") {
  const Gaussian g = make_gaussian(vec({1, 2}), mat(2, 2, {1, 0.5, 0.5, 1}));
  const LinearManifold axis = LinearManifold::make(vec({0, 1}), vec({0}));
  const Gaussian a = condition(g, axis);
  CHECK(a.mean().norm() < 1e-12);
  CHECK((a.cov() - mat(2, 2, {0.75, 0, 0, 0})).norm() < 1e-12);
  CHECK(a.rank() == 1);

  const Gaussian on = make_gaussian(vec({2, 0}), mat(2, 2, {3, -0.4, -0.4, 0.5}));
  CHECK((condition(on, LinearManifold::make(vec({1, 1}), vec({2}))).mean() - on.mean()).norm() < 1e-12);

  const Gaussian iso = make_gaussian(vec({2, 0}), MatrixXd::Identity(2, 2));
  const Gaussian b = condition(iso, LinearManifold::make(vec({1, 1}), vec({2})));
  CHECK((b.mean() - vec({2, 0})).norm() < 1e-12);
  CHECK((b.cov() - 0.5 * mat(2, 2, {1, -1, -1, 1})).norm() < 1e-12);

  const Gaussian degenerate = make_gaussian(vec({0, 0}), mat(2, 2, {1, 0, 0, 0}));
  CHECK(code_of([&] { condition(degenerate, axis); }) == ErrorCode::RankDeficient);
  CHECK(code_of([&] { condition(make_gaussian(vec({0, 0, 0}), MatrixXd::Identity(3, 3)), axis); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("condition agrees with 1-d quadrature along the manifold line") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + trial % 2;  // lines in 2-d (m=1) and 3-d (m=2)
    const Instance inst = random_instance(rng, n, n - 1);
    const Gaussian got = condition(inst.g, inst.M);
    const auto ref = oracle::line_quadrature(inst.g.cov(), inst.g.mean(), inst.M.foot_point(), inst.M.nullspace().col(0));
    CHECK((got.mean() - ref.mean).norm() < 1e-7 * std::max(1.0, ref.mean.norm()));
    CHECK(oracle::rel_err(got.cov(), ref.cov) < 1e-7);
  }
}

TEST_CASE("condition_via_kkt matches condition and the oracles") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + trial % 9;
    const Index m = 1 + (trial / 9) % (n - 1);
    const Instance inst = random_instance(rng, n, m);
    const InfoForm info = info_form(inst.g);
    const Gaussian a = condition(inst.g, inst.M);
    const Gaussian b = condition_via_kkt(info.matrix, inst.M.constraints(), inst.g.mean(), inst.M.offsets());
    CHECK(oracle::rel_err(a.cov(), b.cov()) < 1e-8);
    CHECK((a.mean() - b.mean()).norm() < 1e-8 * std::max(1.0, a.mean().norm()));
    const auto k = oracle::kkt_condition(info.matrix, inst.M.constraints(), inst.g.mean(), inst.M.offsets());
    CHECK(oracle::rel_err(a.cov(), k.cov) < 1e-8);
    const auto o = oracle::observation_condition(inst.g.cov(), inst.M.constraints(), inst.g.mean(), inst.M.offsets());
    CHECK(oracle::rel_err(a.cov(), o.cov) < 1e-8);
    CHECK((a.mean() - o.mean).norm() < 1e-8 * std::max(1.0, o.mean.norm()));
  }

  const Gaussian b = condition_via_kkt(MatrixXd::Identity(2, 2) * (1.0 / 0.75), vec({0, 1}), vec({0, 0}), vec({0}));
  CHECK(b.rank() == 1);
  CHECK(code_of([] { condition_via_kkt(MatrixXd::Identity(2, 2), mat(2, 1, {0, 0}), vec({0, 0}), vec({0})); }) ==
        ErrorCode::Singular);
}

TEST_CASE("kkt example: axis instance gives diag(0.75, 0)") {
  const MatrixXd sigma = mat(2, 2, {1, 0.5, 0.5, 1});
  const Gaussian b = condition_via_kkt(oracle::inverse(sigma), vec({0, 1}), vec({1, 2}), vec({0}));
  CHECK((b.cov() - mat(2, 2, {0.75, 0, 0, 0})).norm() < 1e-12);
  CHECK(b.mean().norm() < 1e-12);
}

TEST_CASE("axis-aligned forms") {
  const Gaussian iso = make_gaussian(vec({1, 2}), MatrixXd::Identity(2, 2));
  const Gaussian m = axis_marginalize(iso, 1, vec({0}));
  CHECK((m.mean() - vec({1, 0})).norm() == 0.0);
  CHECK((m.cov() - mat(2, 2, {1, 0, 0, 0})).norm() == 0.0);

  const Gaussian g = make_gaussian(vec({1, 2}), mat(2, 2, {1, 0.5, 0.5, 1}));
  const Gaussian c = axis_condition(g, 1, vec({0}));
  CHECK(c.mean().norm() < 1e-12);
  CHECK((c.cov() - mat(2, 2, {0.75, 0, 0, 0})).norm() < 1e-12);

  CHECK(code_of([&] { axis_condition(g, 0, vec({0, 0})); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { axis_condition(g, 2, VectorXd(0)); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { axis_condition(g, 1, vec({0, 0})); }) == ErrorCode::DimensionMismatch);
  const Gaussian singular_beta = make_gaussian(vec({1, 2}), mat(2, 2, {1, 0, 0, 0}));
  CHECK(code_of([&] { axis_condition(singular_beta, 1, vec({0})); }) == ErrorCode::Singular);
}

TEST_CASE("axis_condition and axis_marginalize specialize the general forms") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + trial % 7;
    const Index na = 1 + trial % (n - 1);
    const Gaussian g = make_gaussian(oracle::random_vector(n, rng), oracle::random_spd(n, rng));
    const VectorXd beta = oracle::random_vector(n - na, rng);
    MatrixXd S = MatrixXd::Zero(n, n - na);
    S.bottomRows(n - na).setIdentity();
    const LinearManifold M = LinearManifold::make(S, beta);
    const Gaussian c1 = condition(g, M), c2 = axis_condition(g, na, beta);
    const Gaussian m1 = marginalize(g, M), m2 = axis_marginalize(g, na, beta);
    CHECK(oracle::rel_err(c1.cov(), c2.cov()) < 1e-9);
    CHECK((c1.mean() - c2.mean()).norm() < 1e-9 * std::max(1.0, c2.mean().norm()));
    CHECK(oracle::rel_err(m1.cov(), m2.cov()) < 1e-9);
    CHECK((m1.mean() - m2.mean()).norm() < 1e-9 * std::max(1.0, m2.mean().norm()));
  }
}

TEST_CASE("rank law and on-manifold support") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + trial % 9;
    const Index m = 1 + (trial / 3) % (n - 1);
    const Instance inst = random_instance(rng, n, m);
    const Gaussian a = marginalize(inst.g, inst.M);
    const Gaussian b = condition(inst.g, inst.M);
    CHECK(a.rank() == n - m);
    CHECK(b.rank() == n - m);
    const MatrixXd& S = inst.M.constraints();
    const double scale = std::max(1.0, inst.g.cov().norm()) * S.norm();
    CHECK((S.transpose() * a.mean() - inst.M.offsets()).norm() < 1e-9 * std::max(1.0, S.norm() * a.mean().norm()));
    CHECK((S.transpose() * b.mean() - inst.M.offsets()).norm() < 1e-9 * std::max(1.0, S.norm() * b.mean().norm()));
    CHECK((a.cov() * S).norm() < 1e-9 * scale);
    CHECK((b.cov() * S).norm() < 1e-9 * scale);
  }
}

TEST_CASE("results do not depend on the nullspace basis") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = 3 + trial % 6;
    const Index m = 1 + trial % (n - 1);
    const Instance inst = random_instance(rng, n, m);
    const Index k = n - m;
    const MatrixXd R = oracle::random_matrix(k, k, rng) + 2.0 * MatrixXd::Identity(k, k);
    const LinearManifold other = inst.M.with_nullspace_basis(inst.M.nullspace() * R);
    CHECK((other.projector() - inst.M.projector()).norm() < 1e-9);
    CHECK(oracle::rel_err(condition(inst.g, other).cov(), condition(inst.g, inst.M).cov()) < 1e-9);
    CHECK((condition(inst.g, other).mean() - condition(inst.g, inst.M).mean()).norm() < 1e-9);
    CHECK(oracle::rel_err(marginalize(inst.g, other).cov(), marginalize(inst.g, inst.M).cov()) < 1e-9);
  }
  const LinearManifold axis = LinearManifold::make(vec({0, 1}), vec({0}));
  CHECK(code_of([&] { (void)axis.with_nullspace_basis(vec({1, 1})); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("operations commute with the H = [N S] frame") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 2 + trial % 8;
    const Index m = 1 + trial % (n - 1);
    const Instance inst = random_instance(rng, n, m);
    const FrameTransform H = axis_aligning_frame(inst.M);
    const VectorXd beta = axis_aligned_offsets(inst.M);
    const Gaussian z = transform_gaussian(inst.g, H, FrameDirection::ToZ);
    const Gaussian cz = transform_gaussian(axis_condition(z, n - m, beta), H, FrameDirection::ToX);
    const Gaussian mz = transform_gaussian(axis_marginalize(z, n - m, beta), H, FrameDirection::ToX);
    const Gaussian c = condition(inst.g, inst.M);
    CHECK(oracle::rel_err(cz.cov(), c.cov()) < 1e-8);
    CHECK((cz.mean() - c.mean()).norm() < 1e-8 * std::max(1.0, c.mean().norm()));
    // In the z-frame the marginal keeps the z_alpha block of the frame, which
    // coincides with the Euclidean marginal because N is orthogonal to S.
    const Gaussian mg = marginalize(inst.g, inst.M);
    CHECK(oracle::rel_err(mz.cov(), mg.cov()) < 1e-8);
    CHECK((mz.mean() - mg.mean()).norm() < 1e-8 * std::max(1.0, mg.mean().norm()));
  }
}
