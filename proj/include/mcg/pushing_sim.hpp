#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mcg/constrained_estimator.hpp"
#include "mcg/smooth_manifold.hpp"

namespace mcg {

/// Planar pushing setup. All lengths in metres, angles in radians, time in
/// seconds. The probe moves on a straight line at constant velocity; the box
/// heading and the contact offset along the edge follow smooth sinusoids.
struct PushConfig {
  Index timesteps = 50;
  double dt = 0.1;
  double box_width = 0.2;
  double box_height = 0.1;
  double probe_radius = 0.02;
  Eigen::Vector2d probe_start{0.0, 0.0};
  Eigen::Vector2d probe_velocity{0.0, -0.3};
  double heading_amplitude = 0.4;  // phi(t) = A sin(2 pi t / duration)
  double offset_amplitude = 0.05;  // q_x(t) = A sin(pi t / duration)
  double edge_margin = 0.01;       // |q_x| must stay within w/2 - margin
  Eigen::Vector3d odometry_sigma{0.002, 0.002, 0.08};  // per step, before multiplier
  double contact_sigma = 0.002;
  double prior_sigma = 1e-3;
  double noise_multiplier = 1.0;   // scales odometry_sigma
  bool draw_noise = true;          // false: exact measurements, same noise model
};

struct PushScenario {
  PushConfig config;
  std::uint64_t seed = 0;
  std::vector<Eigen::Vector2d> probe_centers;
  std::vector<Eigen::Vector3d> true_states;  // (t_x, t_y, phi), phi unwrapped
  std::vector<Eigen::Vector3d> odometry;     // relative pose k -> k+1 in frame k
  std::vector<double> contact_meas;          // q_x
  Eigen::Matrix3d odometry_cov;
  double contact_var = 0.0;

  [[nodiscard]] Index timesteps() const noexcept { return static_cast<Index>(true_states.size()); }
  [[nodiscard]] ContactChainModel contact_model(Index k) const;
};

/// Throws Error(InvalidArgument) for fewer than two steps, non-positive
/// noise, or a configuration whose contact would slide past a box corner.
PushScenario generate_scenario(const PushConfig& config, std::uint64_t seed);

/// State = stacked (t_x, t_y, phi) for every timestep. Residuals: one prior
/// on the first pose (anchored at the truth), T-1 odometry blocks, T contact
/// measurement blocks. Constraints: one contact constraint per timestep.
NllsProblem build_problem(const PushScenario& s);

/// Dead-reckons the odometry from the true first pose, then projects every
/// pose onto its contact manifold.
VectorXd initial_guess(const PushScenario& s);

/// Relative pose (R(phi_a)^T (t_b - t_a), phi_b - phi_a).
Eigen::Vector3d relative_pose(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

/// Block-diagonal stack of per-timestep chart bases at the states in x.
MatrixXd trajectory_tangent_basis(const PushScenario& s, const VectorXd& x);

struct TrialReport {
  SolveReport estimate;
  VectorXd error_tangent;  // stacked (d alpha, d d) per timestep, truth minus estimate
  double d_maha = 0.0;
  double noise_level = 1.0;
};

/// Solve (safeguarded Gauss-Newton by default), extract the conditioned covariance and score it with d_maha using
/// 2 degrees of freedom per timestep. A non-converged solve is reported
/// through estimate.converged rather than thrown.
TrialReport run_trial(const PushScenario& s,
                      const SolveOptions& opts = SolveOptions::safeguarded());

struct TrialOutcome {
  Index trial = 0;
  double d_maha = 0.0;
  bool converged = false;
};

struct SweepLevel {
  double multiplier = 1.0;
  std::vector<TrialOutcome> trials;  // ordered by trial index; failed trials omitted
  Index failed = 0;                  // trials that threw
};

/// Seed used for trial `trial` at level index `level`.
std::uint64_t trial_seed(std::uint64_t master_seed, Index level, Index trial);

/// Independent trials at each odometry-noise multiplier. Trials run on up to
/// `threads` workers (0 = hardware concurrency); output is independent of
/// the thread count.
std::vector<SweepLevel> noise_sweep(const PushConfig& base, const std::vector<double>& multipliers,
                                    Index trials_per_level, std::uint64_t seed,
                                    unsigned threads = 0);

/// JSON dump of a scenario (schema in README).
std::string scenario_to_json(const PushScenario& s);

}  // namespace mcg
