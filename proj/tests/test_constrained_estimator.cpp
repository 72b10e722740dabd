#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/SVD>

#include "mcg/constrained_estimator.hpp"
#include "mcg/error.hpp"
#include "oracles.hpp"

using namespace mcg;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected mcg::Error");
  return ErrorCode::InvalidArgument;
}

std::vector<Index> all_indices(Index n) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  return idx;
}

struct LinearInstance {
  MatrixXd H, W, A;
  VectorXd z, b;
  NllsProblem problem;
};

// minimize 1/2 (Hx - z)^T W (Hx - z) subject to A x = b
LinearInstance linear_instance(Index n, Index rows, Index m, std::mt19937_64& rng) {
  LinearInstance li{oracle::random_matrix(rows, n, rng), oracle::random_spd(rows, rng, 0.5),
                    oracle::random_matrix(m, n, rng), oracle::random_vector(rows, rng),
                    oracle::random_vector(m, rng), NllsProblem(n)};
  ResidualBlock r;
  r.indices = all_indices(n);
  r.error = [H = li.H, z = li.z](const VectorXd& x) -> VectorXd { return H * x - z; };
  r.jacobian = [H = li.H](const VectorXd&) -> MatrixXd { return H; };
  r.weight = li.W;
  li.problem.add_residual(r);
  if (m > 0) {
    ConstraintBlock c;
    c.indices = all_indices(n);
    c.rows = m;
    c.value = [A = li.A, b = li.b](const VectorXd& x) -> VectorXd { return A * x - b; };
    c.jacobian = [A = li.A](const VectorXd&) -> MatrixXd { return A; };
    li.problem.add_constraint(c);
  }
  return li;
}

MatrixXd null_basis(const MatrixXd& A, Index n) {
  if (A.rows() == 0) return MatrixXd::Identity(n, n);
  Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeFullV);
  return svd.matrixV().rightCols(n - A.rows());
}

SolveReport report_from(const MatrixXd& info, const MatrixXd& A) {
  SolveReport r;
  r.unconstrained_info = info;
  r.constraint_jacobian = A;
  r.solution = VectorXd::Zero(info.rows());
  return r;
}

}  // namespace

TEST_CASE("linear-Gaussian problems are solved exactly") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = 3 + trial % 5;
    const Index m = trial % 3;
    const LinearInstance li = linear_instance(n, n + 2, m, rng);
    const SolveReport rep = solve_constrained_gn(li.problem, VectorXd::Zero(n));
    CHECK(rep.converged);
    CHECK(rep.iterations <= 2);

    const MatrixXd info = li.H.transpose() * li.W * li.H;
    const VectorXd mu = oracle::solve_dense(info, li.H.transpose() * li.W * li.z);
    if (m == 0) {
      CHECK(oracle::rel_err(rep.solution, mu) < 1e-8);
      CHECK(oracle::rel_err(rep.conditioned_cov, oracle::inverse(info)) < 1e-8);
      continue;
    }
    const oracle::Moments kkt = oracle::kkt_condition(info, li.A.transpose(), mu, li.b);
    CHECK(oracle::rel_err(rep.solution, kkt.mean) < 1e-8);
    CHECK(oracle::rel_err(rep.conditioned_cov, kkt.cov) < 1e-8);
    const oracle::Moments obs = oracle::observation_condition(oracle::inverse(info), li.A.transpose(), mu, li.b);
    CHECK(oracle::rel_err(rep.conditioned_cov, obs.cov) < 1e-8);
    CHECK((li.A * rep.solution - li.b).norm() < 1e-10);
  }
}

TEST_CASE("safeguarded options agree on linear problems") {
  std::mt19937_64 rng(43);
  const LinearInstance li = linear_instance(5, 7, 2, rng);
  const SolveReport plain = solve_constrained_gn(li.problem, VectorXd::Zero(5));
  const SolveReport safe = solve_constrained_gn(li.problem, VectorXd::Zero(5), SolveOptions::safeguarded());
  CHECK(safe.converged);
  CHECK(oracle::rel_err(safe.solution, plain.solution) < 1e-10);
  CHECK(oracle::rel_err(safe.conditioned_cov, plain.conditioned_cov) < 1e-10);
}

TEST_CASE("starting at the optimum converges in one iteration") {
  std::mt19937_64 rng(44);
  const LinearInstance li = linear_instance(4, 6, 1, rng);
  const SolveReport first = solve_constrained_gn(li.problem, VectorXd::Zero(4));
  const SolveReport again = solve_constrained_gn(li.problem, first.solution);
  CHECK(again.converged);
  CHECK(again.iterations == 1);
}

TEST_CASE("nonlinear constraint: point nearest to a circle") {
  // minimize |x - p|^2 subject to |x|^2 = 1, optimum p / |p|
  auto nearest = [](const Eigen::Vector2d& p) {
    NllsProblem problem(2);
    ResidualBlock r;
    r.indices = {0, 1};
    r.error = [p](const VectorXd& x) -> VectorXd { return x - p; };
    r.jacobian = [](const VectorXd&) -> MatrixXd { return MatrixXd::Identity(2, 2); };
    r.weight = MatrixXd::Identity(2, 2);
    problem.add_residual(r);
    ConstraintBlock c;
    c.indices = {0, 1};
    c.value = [](const VectorXd& x) { return VectorXd::Constant(1, x.squaredNorm() - 1.0); };
    c.jacobian = [](const VectorXd& x) -> MatrixXd { return 2.0 * x.transpose(); };
    problem.add_constraint(c);
    return problem;
  };
  // Near the circle the dropped multiplier curvature is small and plain
  // iterations contract.
  const Eigen::Vector2d close(1.1, 0.3);
  for (const SolveOptions& opts : {SolveOptions{}, SolveOptions::safeguarded()}) {
    const SolveReport rep = solve_constrained_gn(nearest(close), Eigen::Vector2d(1.0, 0.0), opts);
    CHECK(rep.converged);
    CHECK((rep.solution - close.normalized()).norm() < 1e-8);
  }
  const Eigen::Vector2d far(2.0, 1.0);
  const SolveReport plain = solve_constrained_gn(nearest(far), Eigen::Vector2d(1.0, 0.0));
  CHECK_FALSE(plain.converged);
  const SolveReport safe = solve_constrained_gn(nearest(far), Eigen::Vector2d(1.0, 0.0), SolveOptions::safeguarded());
  CHECK(safe.converged);
  CHECK((safe.solution - far.normalized()).norm() < 1e-8);

  const NllsProblem problem = nearest(far);
  const MatrixXd curv = problem.constraint_curvature(Eigen::Vector2d(0.3, 0.4), VectorXd::Constant(1, 1.5));
  CHECK((curv - 3.0 * MatrixXd::Identity(2, 2)).norm() < 1e-6);
  CHECK(code_of([&] { (void)problem.constraint_curvature(Eigen::Vector2d(0.3, 0.4), VectorXd::Zero(2)); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("extract_conditioned_cov examples") {
  MatrixXd info(2, 2);
  info << 2.0, 0.5, 0.5, 1.0;
  CHECK(oracle::rel_err(extract_conditioned_cov(info, MatrixXd(0, 2)), oracle::inverse(info)) < 1e-14);

  const MatrixXd a = (MatrixXd(1, 2) << 0.0, 1.0).finished();
  const MatrixXd cov = extract_conditioned_cov(MatrixXd::Identity(2, 2), a);
  CHECK((cov - Eigen::Vector2d(1.0, 0.0).asDiagonal().toDenseMatrix()).norm() < 1e-14);

  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 3 + trial % 4, m = 1 + trial % 2;
    const MatrixXd L = oracle::random_spd(n, rng);
    const MatrixXd A = oracle::random_matrix(m, n, rng);
    const oracle::Moments kkt = oracle::kkt_condition(L, A.transpose(), VectorXd::Zero(n), VectorXd::Zero(m));
    CHECK(oracle::rel_err(extract_conditioned_cov(L, A), kkt.cov) < 1e-10);
  }
  CHECK(code_of([] { extract_conditioned_cov(MatrixXd::Identity(2, 2), MatrixXd::Ones(1, 3)); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("mahalanobis consistency") {
  std::mt19937_64 rng(46);
  const Index n = 5, m = 2;
  const MatrixXd info = oracle::random_spd(n, rng, 0.3);
  const MatrixXd A = oracle::random_matrix(m, n, rng);
  const MatrixXd B = null_basis(A, n);
  const SolveReport rep = report_from(info, A);

  CHECK(mahalanobis_consistency(VectorXd::Zero(n), rep, B, n - m) == 0.0);

  const VectorXd e = B * oracle::random_vector(n - m, rng);
  const double d = mahalanobis_consistency(e, rep, B, n - m);
  const double d_scaled = mahalanobis_consistency(e, report_from(info / 4.0, A), B, n - m);
  CHECK(d_scaled == doctest::Approx(0.5 * d).epsilon(1e-12));
  // invariant to the choice of tangent basis
  const MatrixXd B2 = B * (oracle::random_matrix(n - m, n - m, rng) + 3.0 * MatrixXd::Identity(n - m, n - m));
  CHECK(mahalanobis_consistency(e, rep, B2, n - m) == doctest::Approx(d).epsilon(1e-10));

  // errors drawn from the conditioned covariance give E[d^2] = 1
  const MatrixXd tangent_cov = oracle::inverse(B.transpose() * info * B);
  const MatrixXd Lc = tangent_cov.llt().matrixL();
  const int draws = 10000;
  double sum = 0.0;
  for (int k = 0; k < draws; ++k) {
    const double dk = mahalanobis_consistency(B * (Lc * oracle::random_vector(n - m, rng)), rep, B, n - m);
    sum += dk * dk;
  }
  const double se = std::sqrt(2.0 / static_cast<double>(n - m) / draws);
  CHECK(std::abs(sum / draws - 1.0) < 3.0 * se);

  CHECK(code_of([&] { mahalanobis_consistency(e, rep, B, 0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { mahalanobis_consistency(e, rep, MatrixXd::Identity(n, n), n); }) ==
        ErrorCode::InvalidArgument);
  CHECK(code_of([&] { mahalanobis_consistency(VectorXd::Zero(n + 1), rep, B, n - m); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("problem validation") {
  NllsProblem p(3);
  ResidualBlock r;
  r.indices = {0, 3};
  r.error = [](const VectorXd& x) { return x; };
  r.jacobian = [](const VectorXd&) -> MatrixXd { return MatrixXd::Identity(2, 2); };
  r.weight = MatrixXd::Identity(2, 2);
  CHECK(code_of([&] { p.add_residual(r); }) == ErrorCode::InvalidArgument);
  r.indices = {0, 1};
  r.weight = (MatrixXd(2, 2) << 1.0, 0.5, 0.0, 1.0).finished();
  CHECK(code_of([&] { p.add_residual(r); }) == ErrorCode::InvalidArgument);
  r.weight = (MatrixXd(2, 2) << 1.0, 0.0, 0.0, -1.0).finished();
  CHECK(code_of([&] { p.add_residual(r); }) == ErrorCode::InvalidArgument);
  r.weight = MatrixXd::Identity(2, 2);
  p.add_residual(r);
  CHECK(code_of([&] { solve_constrained_gn(p, VectorXd::Zero(2)); }) == ErrorCode::DimensionMismatch);
  VectorXd bad = VectorXd::Zero(3);
  bad(1) = std::nan("");
  CHECK(code_of([&] { solve_constrained_gn(p, bad); }) == ErrorCode::NonFinite);
  CHECK(code_of([] { NllsProblem(0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("cost and normal equations") {
  std::mt19937_64 rng(47);
  const LinearInstance li = linear_instance(4, 6, 1, rng);
  const VectorXd x = oracle::random_vector(4, rng);
  const VectorXd r = li.H * x - li.z;
  CHECK(li.problem.cost(x) == doctest::Approx(0.5 * r.dot(li.W * r)).epsilon(1e-12));
  const NllsProblem::Normal ne = li.problem.normal_equations(x);
  CHECK(oracle::rel_err(ne.information, li.H.transpose() * li.W * li.H) < 1e-12);
  CHECK(oracle::rel_err(ne.gradient, li.H.transpose() * li.W * r) < 1e-12);
  const MatrixXd fd = oracle::fd_jacobian([&](const VectorXd& y) { return VectorXd::Constant(1, li.problem.cost(y)); }, x);
  CHECK(oracle::rel_err(fd.transpose(), ne.gradient) < 1e-6);
}
