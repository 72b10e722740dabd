#include "mcg/pushing_sim.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <json.hpp>

#include "mcg/error.hpp"

namespace mcg {
namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Matrix2d rotation(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix2d R;
  R << c, -s, s, c;
  return R;
}

double wrap_angle(double a) { return std::remainder(a, 2.0 * kPi); }

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void validate(const PushConfig& c) {
  if (c.timesteps < 2) throw Error(ErrorCode::InvalidArgument, "push scenario: need at least 2 timesteps");
  if (!(c.dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "push scenario: dt must be positive");
  if (!(c.box_width > 0.0) || !(c.box_height > 0.0) || !(c.probe_radius >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "push scenario: invalid box or probe size");
  }
  if (!(c.odometry_sigma.minCoeff() > 0.0) || !(c.contact_sigma > 0.0) || !(c.prior_sigma > 0.0) ||
      !(c.noise_multiplier > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "push scenario: noise levels must be positive");
  }
}

}  // namespace

ContactChainModel PushScenario::contact_model(Index k) const {
  return ContactChainModel(probe_centers.at(static_cast<std::size_t>(k)), 0.5 * config.box_height,
                           config.probe_radius);
}

Eigen::Vector3d relative_pose(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  Eigen::Vector3d rel;
  rel.head<2>() = rotation(a(2)).transpose() * (b.head<2>() - a.head<2>());
  rel(2) = b(2) - a(2);
  return rel;
}

PushScenario generate_scenario(const PushConfig& config, std::uint64_t seed) {
  validate(config);
  PushScenario s;
  s.config = config;
  s.seed = seed;
  const Index T = config.timesteps;
  const double duration = static_cast<double>(T - 1) * config.dt;
  const double edge_limit = 0.5 * config.box_width - config.edge_margin;

  for (Index k = 0; k < T; ++k) {
    const double t = static_cast<double>(k) * config.dt;
    const Eigen::Vector2d probe = config.probe_start + t * config.probe_velocity;
    const double heading = config.heading_amplitude * std::sin(2.0 * kPi * t / duration);
    const double offset = config.offset_amplitude * std::sin(kPi * t / duration);
    if (std::abs(offset) > edge_limit) {
      throw Error(ErrorCode::InvalidArgument,
                  "push scenario: contact offset " + std::to_string(offset) +
                      " passes the box corner at step " + std::to_string(k));
    }
    s.probe_centers.push_back(probe);
    s.true_states.push_back(s.contact_model(k).pose_from_chart(heading, offset));
  }

  const Eigen::Vector3d odo_sigma = config.noise_multiplier * config.odometry_sigma;
  s.odometry_cov = odo_sigma.cwiseAbs2().asDiagonal();
  s.contact_var = config.contact_sigma * config.contact_sigma;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index k = 0; k + 1 < T; ++k) {
    Eigen::Vector3d z = relative_pose(s.true_states[static_cast<std::size_t>(k)],
                                      s.true_states[static_cast<std::size_t>(k + 1)]);
    if (config.draw_noise) {
      for (int i = 0; i < 3; ++i) z(i) += odo_sigma(i) * normal(rng);
    }
    s.odometry.push_back(z);
  }
  for (Index k = 0; k < T; ++k) {
    double z = s.contact_model(k).probe_in_box(s.true_states[static_cast<std::size_t>(k)])(0);
    if (config.draw_noise) z += config.contact_sigma * normal(rng);
    s.contact_meas.push_back(z);
  }
  return s;
}

NllsProblem build_problem(const PushScenario& s) {
  const Index T = s.timesteps();
  NllsProblem problem(3 * T);

  {
    const Eigen::Vector3d anchor = s.true_states.front();
    ResidualBlock prior;
    prior.indices = {0, 1, 2};
    prior.error = [anchor](const VectorXd& x) {
      VectorXd r = x - anchor;
      r(2) = wrap_angle(r(2));
      return r;
    };
    prior.jacobian = [](const VectorXd&) { return MatrixXd::Identity(3, 3); };
    prior.weight = MatrixXd::Identity(3, 3) / (s.config.prior_sigma * s.config.prior_sigma);
    problem.add_residual(std::move(prior));
  }

  const MatrixXd odo_weight = s.odometry_cov.inverse();
  for (Index k = 0; k + 1 < T; ++k) {
    const Eigen::Vector3d z = s.odometry[static_cast<std::size_t>(k)];
    ResidualBlock odo;
    odo.indices = {3 * k, 3 * k + 1, 3 * k + 2, 3 * k + 3, 3 * k + 4, 3 * k + 5};
    odo.error = [z](const VectorXd& x) {
      VectorXd r = relative_pose(x.head<3>(), x.tail<3>()) - z;
      r(2) = wrap_angle(r(2));
      return r;
    };
    odo.jacobian = [](const VectorXd& x) {
      const double c = std::cos(x(2));
      const double s = std::sin(x(2));
      const Eigen::Vector2d dt = x.segment<2>(3) - x.head<2>();
      Eigen::Matrix2d Rt;
      Rt << c, s, -s, c;
      Eigen::Matrix2d dRt;  // d R^T / d phi
      dRt << -s, c, -c, -s;
      MatrixXd J = MatrixXd::Zero(3, 6);
      J.block<2, 2>(0, 0) = -Rt;
      J.block<2, 1>(0, 2) = dRt * dt;
      J.block<2, 2>(0, 3) = Rt;
      J(2, 2) = -1.0;
      J(2, 5) = 1.0;
      return J;
    };
    odo.weight = odo_weight;
    problem.add_residual(std::move(odo));
  }

  for (Index k = 0; k < T; ++k) {
    const ContactChainModel model = s.contact_model(k);
    const double z = s.contact_meas[static_cast<std::size_t>(k)];
    const std::vector<Index> pose_indices{3 * k, 3 * k + 1, 3 * k + 2};
    ResidualBlock contact;
    contact.indices = pose_indices;
    contact.error = [model, z](const VectorXd& x) {
      return VectorXd::Constant(1, model.probe_in_box(x)(0) - z);
    };
    contact.jacobian = [model](const VectorXd& x) {
      const Eigen::Vector2d q = model.probe_in_box(x);
      MatrixXd J(1, 3);
      J << -std::cos(x(2)), -std::sin(x(2)), q(1);
      return J;
    };
    contact.weight = MatrixXd::Constant(1, 1, 1.0 / s.contact_var);
    problem.add_residual(std::move(contact));

    ConstraintBlock constraint;
    constraint.indices = pose_indices;
    constraint.rows = 1;
    constraint.value = [model](const VectorXd& x) { return model.residual(x); };
    constraint.jacobian = [model](const VectorXd& x) { return model.jacobian(x); };
    problem.add_constraint(std::move(constraint));
  }
  return problem;
}

VectorXd initial_guess(const PushScenario& s) {
  const Index T = s.timesteps();
  VectorXd x(3 * T);
  Eigen::Vector3d pose = s.true_states.front();
  x.head<3>() = pose;
  for (Index k = 0; k + 1 < T; ++k) {
    const Eigen::Vector3d& z = s.odometry[static_cast<std::size_t>(k)];
    pose.head<2>() += rotation(pose(2)) * z.head<2>();
    pose(2) += z(2);
    x.segment<3>(3 * (k + 1)) = pose;
  }
  for (Index k = 0; k < T; ++k) {
    x.segment<3>(3 * k) = s.contact_model(k).project(x.segment<3>(3 * k));
  }
  return x;
}

MatrixXd trajectory_tangent_basis(const PushScenario& s, const VectorXd& x) {
  const Index T = s.timesteps();
  MatrixXd B = MatrixXd::Zero(3 * T, 2 * T);
  for (Index k = 0; k < T; ++k) {
    B.block(3 * k, 2 * k, 3, 2) = s.contact_model(k).chart_basis(x.segment<3>(3 * k));
  }
  return B;
}

TrialReport run_trial(const PushScenario& s, const SolveOptions& opts) {
  const Index T = s.timesteps();
  const NllsProblem problem = build_problem(s);
  TrialReport out;
  out.noise_level = s.config.noise_multiplier;
  out.estimate = solve_constrained_gn(problem, initial_guess(s), opts);

  const VectorXd& mean = out.estimate.solution;
  out.error_tangent.resize(2 * T);
  for (Index k = 0; k < T; ++k) {
    const VectorXd truth = s.true_states[static_cast<std::size_t>(k)];
    out.error_tangent.segment<2>(2 * k) =
        s.contact_model(k).inverse_retract(mean.segment<3>(3 * k), truth);
  }
  const MatrixXd B = trajectory_tangent_basis(s, mean);
  out.d_maha = mahalanobis_consistency(B * out.error_tangent, out.estimate, B, 2 * T);
  return out;
}

std::uint64_t trial_seed(std::uint64_t master_seed, Index level, Index trial) {
  const auto tag = (static_cast<std::uint64_t>(level) << 32) ^ static_cast<std::uint64_t>(trial);
  return splitmix64(master_seed ^ splitmix64(tag));
}

std::vector<SweepLevel> noise_sweep(const PushConfig& base, const std::vector<double>& multipliers,
                                    Index trials_per_level, std::uint64_t seed, unsigned threads) {
  if (trials_per_level < 1) {
    throw Error(ErrorCode::InvalidArgument, "noise_sweep: need at least one trial per level");
  }
  for (const double m : multipliers) {
    if (!(m > 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_sweep: multipliers must be positive");
  }
  const auto levels = static_cast<Index>(multipliers.size());
  const Index tasks = levels * trials_per_level;
  std::vector<std::optional<TrialOutcome>> results(static_cast<std::size_t>(tasks));

  std::atomic<Index> next{0};
  auto worker = [&] {
    for (Index task = next++; task < tasks; task = next++) {
      const Index level = task / trials_per_level;
      const Index trial = task % trials_per_level;
      PushConfig cfg = base;
      cfg.noise_multiplier = multipliers[static_cast<std::size_t>(level)];
      try {
        const PushScenario scenario = generate_scenario(cfg, trial_seed(seed, level, trial));
        const TrialReport report = run_trial(scenario);
        results[static_cast<std::size_t>(task)] =
            TrialOutcome{trial, report.d_maha, report.estimate.converged};
      } catch (const Error&) {
        results[static_cast<std::size_t>(task)].reset();
      }
    }
  };

  unsigned count = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  count = static_cast<unsigned>(std::min<Index>(count, tasks));
  if (count <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < count; ++i) pool.emplace_back(worker);
  }

  std::vector<SweepLevel> out(static_cast<std::size_t>(levels));
  for (Index level = 0; level < levels; ++level) {
    SweepLevel& l = out[static_cast<std::size_t>(level)];
    l.multiplier = multipliers[static_cast<std::size_t>(level)];
    for (Index trial = 0; trial < trials_per_level; ++trial) {
      const auto& r = results[static_cast<std::size_t>(level * trials_per_level + trial)];
      if (r) {
        l.trials.push_back(*r);
      } else {
        ++l.failed;
      }
    }
  }
  return out;
}

std::string scenario_to_json(const PushScenario& s) {
  using nlohmann::json;
  const PushConfig& c = s.config;
  json j;
  j["seed"] = s.seed;
  j["timesteps"] = s.timesteps();
  j["dt"] = c.dt;
  j["probe_radius"] = c.probe_radius;
  j["box_half_extents"] = {0.5 * c.box_width, 0.5 * c.box_height};
  j["noise"] = {
      {"odometry_sigma", {c.noise_multiplier * c.odometry_sigma(0), c.noise_multiplier * c.odometry_sigma(1),
                          c.noise_multiplier * c.odometry_sigma(2)}},
      {"contact_sigma", c.contact_sigma},
      {"prior_sigma", c.prior_sigma},
      {"noise_multiplier", c.noise_multiplier},
      {"noise_drawn", c.draw_noise},
  };
  json probes = json::array();
  for (const auto& p : s.probe_centers) probes.push_back({p(0), p(1)});
  j["probe_centers"] = std::move(probes);
  json states = json::array();
  for (const auto& x : s.true_states) states.push_back({x(0), x(1), x(2)});
  j["true_states"] = std::move(states);
  json odo = json::array();
  for (const auto& z : s.odometry) odo.push_back({z(0), z(1), z(2)});
  j["odometry"] = std::move(odo);
  j["contact_meas"] = s.contact_meas;
  return j.dump(2);
}

}  // namespace mcg
