#include "mcg/projected_normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "mcg/error.hpp"
#include "mcg/linear_manifold.hpp"
#include "mcg/smooth_manifold.hpp"

namespace mcg {
namespace {

constexpr double kPi = std::numbers::pi;

void require_planar_full_rank(const Gaussian& g, const char* op) {
  if (g.dim() != 2) {
    throw Error(ErrorCode::DimensionMismatch, std::string(op) + ": need a 2-d Gaussian");
  }
  if (!g.full_rank()) {
    throw Error(ErrorCode::RankDeficient, std::string(op) + ": covariance must be full rank");
  }
}

void require_same_grid(const CircularDensity& p, const CircularDensity& q, const char* op) {
  bool same = p.size() == q.size() && p.values.size() == p.theta.size() &&
              q.values.size() == q.theta.size();
  for (Index i = 0; same && i < p.size(); ++i) {
    same = std::abs(p.theta[i] - q.theta[i]) <= 1e-12;
  }
  if (!same) {
    throw Error(ErrorCode::DimensionMismatch, std::string(op) + ": densities use different grids");
  }
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Circular convolution of grid counts with a sampled Gaussian of the given
// bandwidth, normalized to unit kernel mass. Returns the kernel weight at lag 0.
double smooth_counts(const std::vector<double>& counts, double spacing, double bandwidth,
                     std::vector<double>& smoothed) {
  const auto K = static_cast<Index>(counts.size());
  const Index half_width = std::min<Index>(static_cast<Index>(std::ceil(6.0 * bandwidth / spacing)), K / 2);
  std::vector<double> kernel(static_cast<std::size_t>(2 * half_width + 1));
  for (Index j = -half_width; j <= half_width; ++j) {
    const double t = static_cast<double>(j) * spacing / bandwidth;
    kernel[static_cast<std::size_t>(j + half_width)] = std::exp(-0.5 * t * t);
  }
  const double mass = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (double& w : kernel) w /= mass;

  smoothed.assign(static_cast<std::size_t>(K), 0.0);
  for (Index i = 0; i < K; ++i) {
    double acc = 0.0;
    for (Index j = -half_width; j <= half_width; ++j) {
      const Index src = ((i - j) % K + K) % K;
      acc += counts[static_cast<std::size_t>(src)] * kernel[static_cast<std::size_t>(j + half_width)];
    }
    smoothed[static_cast<std::size_t>(i)] = acc;
  }
  return kernel[static_cast<std::size_t>(half_width)];
}

// Wrapped Gaussian kernel density estimate on the grid. The bandwidth
// minimizes the binned least-squares cross-validation score
//   sum_j f_j^2 dx - 2/N sum_j c_j f_{-j}
// over a geometric ladder from one grid spacing to 0.5 rad.
void kernel_density(const std::vector<double>& angles, CircularDensity& out) {
  const Index K = out.size();
  const double spacing = out.spacing();
  const auto count = static_cast<double>(angles.size());

  std::vector<double> binned(static_cast<std::size_t>(K), 0.0);
  for (const double a : angles) {
    const double u = (a + kPi) / spacing;
    const double lower = std::floor(u);
    const double frac = u - lower;
    const Index i = ((static_cast<Index>(lower) % K) + K) % K;
    binned[static_cast<std::size_t>(i)] += 1.0 - frac;
    binned[static_cast<std::size_t>((i + 1) % K)] += frac;
  }

  std::vector<double> smoothed;
  std::vector<double> best;
  double best_score = std::numeric_limits<double>::infinity();
  for (double h = spacing; h <= 0.5 * 1.0001; h *= 1.2) {
    const double self = smooth_counts(binned, spacing, h, smoothed);
    double square = 0.0;
    double leave_one_out = 0.0;
    for (Index i = 0; i < K; ++i) {
      const double f = smoothed[static_cast<std::size_t>(i)] / (count * spacing);
      square += f * f * spacing;
      leave_one_out += binned[static_cast<std::size_t>(i)] *
                       (smoothed[static_cast<std::size_t>(i)] - self) / ((count - 1.0) * spacing);
    }
    const double score = square - 2.0 * leave_one_out / count;
    if (score < best_score) {
      best_score = score;
      best = smoothed;
    }
  }
  for (Index i = 0; i < K; ++i) {
    out.values[static_cast<std::size_t>(i)] = best[static_cast<std::size_t>(i)] / (count * spacing);
  }
}

}  // namespace

double CircularDensity::spacing() const {
  if (theta.empty()) throw Error(ErrorCode::InvalidArgument, "circular density: empty grid");
  return 2.0 * kPi / static_cast<double>(theta.size());
}

double CircularDensity::integral() const {
  return std::accumulate(values.begin(), values.end(), 0.0) * spacing();
}

void CircularDensity::normalize() {
  const double mass = integral();
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw Error(ErrorCode::InvalidArgument, "circular density: cannot normalize zero or non-finite mass");
  }
  for (double& v : values) v /= mass;
}

CircularDensity make_circular_grid(Index grid_size) {
  if (grid_size < 2) {
    throw Error(ErrorCode::InvalidArgument, "circular density: grid needs at least 2 points");
  }
  CircularDensity d;
  d.theta.resize(static_cast<std::size_t>(grid_size));
  d.values.assign(static_cast<std::size_t>(grid_size), 0.0);
  for (Index i = 0; i < grid_size; ++i) {
    d.theta[static_cast<std::size_t>(i)] =
        -kPi + 2.0 * kPi * static_cast<double>(i) / static_cast<double>(grid_size);
  }
  return d;
}

double projected_normal_pdf(const Gaussian& g, double theta) {
  require_planar_full_rank(g, "projected_normal_pdf");
  const Eigen::LLT<MatrixXd> chol(g.cov());
  const Eigen::Vector2d u(std::cos(theta), std::sin(theta));
  const VectorXd info_u = chol.solve(u);
  const double A = u.dot(info_u);
  const double B = g.mean().dot(info_u);
  const double C = g.mean().dot(chol.solve(g.mean()));
  const double D = B / std::sqrt(A);
  const double sqrt_det = chol.matrixLLT().diagonal().prod();
  // exp(-C/2) (1 + D Phi(D)/phi(D)) with the exponentials combined; D^2 <= C.
  const double bracket = std::exp(-0.5 * C) +
                         D * standard_normal_cdf(D) * std::sqrt(2.0 * kPi) * std::exp(0.5 * (D * D - C));
  return bracket / (2.0 * kPi * A * sqrt_det);
}

CircularDensity reference_density(const Gaussian& g, Index grid_size, ReferenceMethod method,
                                  Index mc_samples, std::uint64_t seed) {
  require_planar_full_rank(g, "reference_density");
  CircularDensity out = make_circular_grid(grid_size);
  if (method == ReferenceMethod::Analytical) {
    for (Index i = 0; i < grid_size; ++i) {
      out.values[static_cast<std::size_t>(i)] = projected_normal_pdf(g, out.theta[static_cast<std::size_t>(i)]);
    }
  } else {
    if (mc_samples < 10'000) {
      throw Error(ErrorCode::InvalidArgument, "reference_density: need at least 10^4 Monte-Carlo samples");
    }
    const MatrixXd draws = sample(g, mc_samples, seed);
    std::vector<double> angles(static_cast<std::size_t>(mc_samples));
    for (Index k = 0; k < mc_samples; ++k) {
      angles[static_cast<std::size_t>(k)] = std::atan2(draws(1, k), draws(0, k));
    }
    kernel_density(angles, out);
  }
  out.normalize();
  return out;
}

CircularDensity approx_density(const Gaussian& g, Index grid_size) {
  require_planar_full_rank(g, "approx_density");
  if (g.mean().norm() == 0.0) {
    throw Error(ErrorCode::InvalidArgument, "approx_density: mean at the origin has no projection");
  }
  const UnitCircleModel circle;
  const TangentGaussian tg = marginalize_onto(circle, g);
  CircularDensity out = make_circular_grid(grid_size);
  MatrixXd points(2, grid_size);
  for (Index i = 0; i < grid_size; ++i) {
    const double t = out.theta[static_cast<std::size_t>(i)];
    points.col(i) << std::cos(t), std::sin(t);
  }
  const VectorXd values = retract_distribution(tg, circle, points);
  out.values.assign(values.data(), values.data() + values.size());
  out.normalize();
  return out;
}

double kl_divergence(const CircularDensity& p, const CircularDensity& q) {
  require_same_grid(p, q, "kl_divergence");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double a = std::max(p.values[i], kDensityFloor);
    const double b = std::max(q.values[i], kDensityFloor);
    acc += a * std::log(a / b);
  }
  return std::max(acc * p.spacing(), 0.0);
}

double total_variation(const CircularDensity& p, const CircularDensity& q) {
  require_same_grid(p, q, "total_variation");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) acc += std::abs(p.values[i] - q.values[i]);
  return 0.5 * acc * p.spacing();
}

ProjectedNormalResult run_projected_normal_experiment(const ProjectedNormalConfig& config) {
  if (config.scales.empty()) {
    throw Error(ErrorCode::InvalidArgument, "projected normal experiment: no covariance scales");
  }
  const UnitCircleModel circle;
  ProjectedNormalResult result;
  for (std::size_t i = 0; i < config.scales.size(); ++i) {
    const double s = config.scales[i];
    if (!(s > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "projected normal experiment: scales must be positive");
    }
    const Gaussian g = make_gaussian(config.mean, s * MatrixXd::Identity(2, 2));
    ProjectedNormalRow row;
    row.scale = s;
    row.det_sigma = g.cov().determinant();
    row.reference = reference_density(g, config.grid_size, config.reference, config.mc_samples,
                                      config.seed + i);
    row.approx = approx_density(g, config.grid_size);
    row.kl = kl_divergence(row.reference, row.approx);

    const TangentGaussian tg = marginalize_onto(circle, g);
    row.base_angle = std::atan2(tg.base_point(1), tg.base_point(0));
    row.tangent_variance = chart_gaussian(tg, circle).cov()(0, 0);
    result.rows.push_back(std::move(row));
  }

  std::vector<const ProjectedNormalRow*> by_scale;
  for (const auto& r : result.rows) by_scale.push_back(&r);
  std::sort(by_scale.begin(), by_scale.end(),
            [](const auto* a, const auto* b) { return a->scale < b->scale; });
  result.kl_strictly_increasing = true;
  for (std::size_t i = 1; i < by_scale.size(); ++i) {
    if (!(by_scale[i]->kl > by_scale[i - 1]->kl)) result.kl_strictly_increasing = false;
  }
  result.ratio_floor_met =
      by_scale.size() < 2 || by_scale[0]->kl * config.ratio_floor <= by_scale[1]->kl;
  return result;
}

}  // namespace mcg
