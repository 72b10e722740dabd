#include "mcg/mcg.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "mcg/error.hpp"
#include "mcg/gaussian.hpp"
#include "mcg/linear_manifold.hpp"
#include "mcg/projected_normal.hpp"
#include "mcg/pushing_sim.hpp"

struct mcg_gaussian {
  mcg::Gaussian value;
};

struct mcg_linear_manifold {
  mcg::LinearManifold value;
};

struct mcg_projnorm_result {
  mcg::ProjectedNormalResult value;
};

struct mcg_push_sweep {
  std::vector<mcg::SweepLevel> levels;
};

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

thread_local std::string g_last_error;

mcg_status to_status(mcg::ErrorCode code) {
  switch (code) {
    case mcg::ErrorCode::DimensionMismatch: return MCG_ERR_DIMENSION_MISMATCH;
    case mcg::ErrorCode::NotPositiveSemidefinite: return MCG_ERR_NOT_PSD;
    case mcg::ErrorCode::RankDeficient: return MCG_ERR_RANK_DEFICIENT;
    case mcg::ErrorCode::Singular: return MCG_ERR_SINGULAR;
    case mcg::ErrorCode::InvalidArgument: return MCG_ERR_INVALID_ARGUMENT;
    case mcg::ErrorCode::OffManifold: return MCG_ERR_OFF_MANIFOLD;
    case mcg::ErrorCode::OutsideChart: return MCG_ERR_OUTSIDE_CHART;
    case mcg::ErrorCode::NonFinite: return MCG_ERR_NON_FINITE;
  }
  return MCG_ERR_INTERNAL;
}

mcg_status fail(mcg_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <class F>
mcg_status guarded(F&& body) {
  try {
    body();
    return MCG_OK;
  } catch (const mcg::Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(MCG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MCG_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MCG_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* message) {
  if (!ok) throw mcg::Error(mcg::ErrorCode::InvalidArgument, message);
}

Eigen::VectorXd read_vector(const double* data, size_t n) {
  if (n == 0) return Eigen::VectorXd(0);
  return Eigen::Map<const Eigen::VectorXd>(data, static_cast<Eigen::Index>(n));
}

Eigen::MatrixXd read_matrix(const double* data, size_t rows, size_t cols) {
  if (rows == 0 || cols == 0) {
    return Eigen::MatrixXd(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  }
  return Eigen::Map<const RowMajor>(data, static_cast<Eigen::Index>(rows),
                                    static_cast<Eigen::Index>(cols));
}

void write_matrix(const Eigen::MatrixXd& m, double* out) {
  Eigen::Map<RowMajor>(out, m.rows(), m.cols()) = m;
}

mcg_status emit_gaussian(mcg::Gaussian g, mcg_gaussian** out) {
  *out = new mcg_gaussian{std::move(g)};
  return MCG_OK;
}

mcg::PushConfig to_core(const mcg_push_config& c) {
  mcg::PushConfig p;
  p.timesteps = static_cast<mcg::Index>(c.timesteps);
  p.dt = c.dt;
  p.box_width = c.box_width;
  p.box_height = c.box_height;
  p.probe_radius = c.probe_radius;
  p.probe_start = {c.probe_start[0], c.probe_start[1]};
  p.probe_velocity = {c.probe_velocity[0], c.probe_velocity[1]};
  p.heading_amplitude = c.heading_amplitude;
  p.offset_amplitude = c.offset_amplitude;
  p.edge_margin = c.edge_margin;
  p.odometry_sigma = {c.odometry_sigma[0], c.odometry_sigma[1], c.odometry_sigma[2]};
  p.contact_sigma = c.contact_sigma;
  p.prior_sigma = c.prior_sigma;
  p.noise_multiplier = c.noise_multiplier;
  p.draw_noise = c.draw_noise != 0;
  return p;
}

const std::vector<double>& default_scales() {
  static const std::vector<double> scales = mcg::ProjectedNormalConfig{}.scales;
  return scales;
}

}  // namespace

extern "C" {

const char* mcg_status_string(mcg_status status) {
  switch (status) {
    case MCG_OK: return "ok";
    case MCG_ERR_DIMENSION_MISMATCH: return "dimension_mismatch";
    case MCG_ERR_NOT_PSD: return "not_positive_semidefinite";
    case MCG_ERR_RANK_DEFICIENT: return "rank_deficient";
    case MCG_ERR_SINGULAR: return "singular";
    case MCG_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case MCG_ERR_OFF_MANIFOLD: return "off_manifold";
    case MCG_ERR_OUTSIDE_CHART: return "outside_chart";
    case MCG_ERR_NON_FINITE: return "non_finite";
    case MCG_ERR_IO: return "io";
    case MCG_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* mcg_last_error(void) { return g_last_error.c_str(); }

const char* mcg_version(void) { return "0.1.0"; }

mcg_status mcg_gaussian_create(size_t n, const double* mean, const double* cov,
                               mcg_gaussian** out) {
  return guarded([&] {
    require(out != nullptr, "mcg_gaussian_create: out is NULL");
    *out = nullptr;
    require(n > 0 && mean != nullptr && cov != nullptr, "mcg_gaussian_create: empty input");
    emit_gaussian(mcg::make_gaussian(read_vector(mean, n), read_matrix(cov, n, n)), out);
  });
}

void mcg_gaussian_destroy(mcg_gaussian* g) { delete g; }

size_t mcg_gaussian_dim(const mcg_gaussian* g) {
  return g ? static_cast<size_t>(g->value.dim()) : 0;
}

size_t mcg_gaussian_rank(const mcg_gaussian* g) {
  return g ? static_cast<size_t>(g->value.rank()) : 0;
}

mcg_status mcg_gaussian_mean(const mcg_gaussian* g, double* out) {
  return guarded([&] {
    require(g != nullptr && out != nullptr, "mcg_gaussian_mean: NULL argument");
    Eigen::Map<Eigen::VectorXd>(out, g->value.dim()) = g->value.mean();
  });
}

mcg_status mcg_gaussian_cov(const mcg_gaussian* g, double* out) {
  return guarded([&] {
    require(g != nullptr && out != nullptr, "mcg_gaussian_cov: NULL argument");
    write_matrix(g->value.cov(), out);
  });
}

mcg_status mcg_gaussian_sample(const mcg_gaussian* g, size_t count, uint64_t seed, double* out) {
  return guarded([&] {
    require(g != nullptr && (out != nullptr || count == 0), "mcg_gaussian_sample: NULL argument");
    if (count == 0) return;
    const Eigen::MatrixXd s = mcg::sample(g->value, static_cast<mcg::Index>(count), seed);
    write_matrix(s.transpose(), out);
  });
}

mcg_status mcg_linear_manifold_create(size_t n, size_t m, const double* S, const double* c,
                                      mcg_linear_manifold** out) {
  return guarded([&] {
    require(out != nullptr, "mcg_linear_manifold_create: out is NULL");
    *out = nullptr;
    require(n > 0 && m > 0 && S != nullptr && c != nullptr,
            "mcg_linear_manifold_create: empty input");
    *out = new mcg_linear_manifold{mcg::LinearManifold::make(read_matrix(S, n, m), read_vector(c, m))};
  });
}

void mcg_linear_manifold_destroy(mcg_linear_manifold* manifold) { delete manifold; }

size_t mcg_linear_manifold_ambient_dim(const mcg_linear_manifold* manifold) {
  return manifold ? static_cast<size_t>(manifold->value.ambient_dim()) : 0;
}

size_t mcg_linear_manifold_constraint_count(const mcg_linear_manifold* manifold) {
  return manifold ? static_cast<size_t>(manifold->value.constraint_count()) : 0;
}

mcg_status mcg_linear_manifold_project(const mcg_linear_manifold* manifold, const double* x,
                                       double* out) {
  return guarded([&] {
    require(manifold != nullptr && x != nullptr && out != nullptr,
            "mcg_linear_manifold_project: NULL argument");
    const auto n = static_cast<size_t>(manifold->value.ambient_dim());
    Eigen::Map<Eigen::VectorXd>(out, static_cast<Eigen::Index>(n)) =
        mcg::project_point(manifold->value, read_vector(x, n));
  });
}

mcg_status mcg_linear_manifold_projector(const mcg_linear_manifold* manifold, double* out) {
  return guarded([&] {
    require(manifold != nullptr && out != nullptr, "mcg_linear_manifold_projector: NULL argument");
    write_matrix(manifold->value.projector(), out);
  });
}

mcg_status mcg_marginalize(const mcg_gaussian* g, const mcg_linear_manifold* manifold,
                           mcg_gaussian** out) {
  return guarded([&] {
    require(g != nullptr && manifold != nullptr && out != nullptr, "mcg_marginalize: NULL argument");
    *out = nullptr;
    emit_gaussian(mcg::marginalize(g->value, manifold->value), out);
  });
}

mcg_status mcg_condition(const mcg_gaussian* g, const mcg_linear_manifold* manifold,
                         mcg_gaussian** out) {
  return guarded([&] {
    require(g != nullptr && manifold != nullptr && out != nullptr, "mcg_condition: NULL argument");
    *out = nullptr;
    emit_gaussian(mcg::condition(g->value, manifold->value), out);
  });
}

mcg_status mcg_condition_via_kkt(size_t n, size_t m, const double* info, const double* S,
                                 const double* mean, const double* c, mcg_gaussian** out) {
  return guarded([&] {
    require(out != nullptr, "mcg_condition_via_kkt: out is NULL");
    *out = nullptr;
    require(n > 0 && info != nullptr && mean != nullptr && (m == 0 || (S != nullptr && c != nullptr)),
            "mcg_condition_via_kkt: NULL argument");
    emit_gaussian(mcg::condition_via_kkt(read_matrix(info, n, n), read_matrix(S, n, m),
                                         read_vector(mean, n), read_vector(c, m)),
                  out);
  });
}

mcg_status mcg_axis_marginalize(const mcg_gaussian* g, size_t n_alpha, const double* beta,
                                mcg_gaussian** out) {
  return guarded([&] {
    require(g != nullptr && out != nullptr, "mcg_axis_marginalize: NULL argument");
    *out = nullptr;
    const auto n = static_cast<size_t>(g->value.dim());
    require(n_alpha <= n && (beta != nullptr || n_alpha == n), "mcg_axis_marginalize: bad beta");
    emit_gaussian(mcg::axis_marginalize(g->value, static_cast<mcg::Index>(n_alpha),
                                        read_vector(beta, n - n_alpha)),
                  out);
  });
}

mcg_status mcg_axis_condition(const mcg_gaussian* g, size_t n_alpha, const double* beta,
                              mcg_gaussian** out) {
  return guarded([&] {
    require(g != nullptr && out != nullptr, "mcg_axis_condition: NULL argument");
    *out = nullptr;
    const auto n = static_cast<size_t>(g->value.dim());
    require(n_alpha <= n && (beta != nullptr || n_alpha == n), "mcg_axis_condition: bad beta");
    emit_gaussian(mcg::axis_condition(g->value, static_cast<mcg::Index>(n_alpha),
                                      read_vector(beta, n - n_alpha)),
                  out);
  });
}

void mcg_projnorm_config_default(mcg_projnorm_config* config) {
  if (config == nullptr) return;
  const mcg::ProjectedNormalConfig d;
  config->mean[0] = d.mean(0);
  config->mean[1] = d.mean(1);
  config->scales = default_scales().data();
  config->scale_count = default_scales().size();
  config->grid_size = static_cast<size_t>(d.grid_size);
  config->reference = d.reference == mcg::ReferenceMethod::Analytical ? MCG_REFERENCE_ANALYTICAL
                                                                      : MCG_REFERENCE_MONTE_CARLO;
  config->mc_samples = static_cast<size_t>(d.mc_samples);
  config->seed = d.seed;
  config->ratio_floor = d.ratio_floor;
}

mcg_status mcg_projnorm_run(const mcg_projnorm_config* config, mcg_projnorm_result** out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "mcg_projnorm_run: NULL argument");
    *out = nullptr;
    require(config->scale_count == 0 || config->scales != nullptr, "mcg_projnorm_run: scales is NULL");
    mcg::ProjectedNormalConfig c;
    c.mean = {config->mean[0], config->mean[1]};
    c.scales.assign(config->scales, config->scales + config->scale_count);
    c.grid_size = static_cast<mcg::Index>(config->grid_size);
    c.reference = config->reference == MCG_REFERENCE_MONTE_CARLO ? mcg::ReferenceMethod::MonteCarlo
                                                                 : mcg::ReferenceMethod::Analytical;
    c.mc_samples = static_cast<mcg::Index>(config->mc_samples);
    c.seed = config->seed;
    c.ratio_floor = config->ratio_floor;
    *out = new mcg_projnorm_result{mcg::run_projected_normal_experiment(c)};
  });
}

void mcg_projnorm_result_destroy(mcg_projnorm_result* result) { delete result; }

size_t mcg_projnorm_row_count(const mcg_projnorm_result* result) {
  return result ? result->value.rows.size() : 0;
}

size_t mcg_projnorm_grid_size(const mcg_projnorm_result* result) {
  if (result == nullptr || result->value.rows.empty()) return 0;
  return result->value.rows.front().reference.theta.size();
}

mcg_status mcg_projnorm_row(const mcg_projnorm_result* result, size_t row, double* scale,
                            double* det_sigma, double* kl) {
  return guarded([&] {
    require(result != nullptr && row < result->value.rows.size(), "mcg_projnorm_row: bad row");
    const auto& r = result->value.rows[row];
    if (scale) *scale = r.scale;
    if (det_sigma) *det_sigma = r.det_sigma;
    if (kl) *kl = r.kl;
  });
}

mcg_status mcg_projnorm_curves(const mcg_projnorm_result* result, size_t row, double* theta,
                               double* reference, double* approx) {
  return guarded([&] {
    require(result != nullptr && row < result->value.rows.size(), "mcg_projnorm_curves: bad row");
    const auto& r = result->value.rows[row];
    const size_t k = r.reference.theta.size();
    if (theta) std::memcpy(theta, r.reference.theta.data(), k * sizeof(double));
    if (reference) std::memcpy(reference, r.reference.values.data(), k * sizeof(double));
    if (approx) std::memcpy(approx, r.approx.values.data(), k * sizeof(double));
  });
}

int mcg_projnorm_kl_increasing(const mcg_projnorm_result* result) {
  return result && result->value.kl_strictly_increasing ? 1 : 0;
}

int mcg_projnorm_ratio_floor_met(const mcg_projnorm_result* result) {
  return result && result->value.ratio_floor_met ? 1 : 0;
}

void mcg_push_config_default(mcg_push_config* config) {
  if (config == nullptr) return;
  const mcg::PushConfig d;
  config->timesteps = static_cast<size_t>(d.timesteps);
  config->dt = d.dt;
  config->box_width = d.box_width;
  config->box_height = d.box_height;
  config->probe_radius = d.probe_radius;
  config->probe_start[0] = d.probe_start(0);
  config->probe_start[1] = d.probe_start(1);
  config->probe_velocity[0] = d.probe_velocity(0);
  config->probe_velocity[1] = d.probe_velocity(1);
  config->heading_amplitude = d.heading_amplitude;
  config->offset_amplitude = d.offset_amplitude;
  config->edge_margin = d.edge_margin;
  for (int i = 0; i < 3; ++i) config->odometry_sigma[i] = d.odometry_sigma(i);
  config->contact_sigma = d.contact_sigma;
  config->prior_sigma = d.prior_sigma;
  config->noise_multiplier = d.noise_multiplier;
  config->draw_noise = d.draw_noise ? 1 : 0;
}

mcg_status mcg_push_sweep_run(const mcg_push_config* config, const double* multipliers,
                              size_t level_count, size_t trials_per_level, uint64_t seed,
                              unsigned threads, mcg_push_sweep** out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "mcg_push_sweep_run: NULL argument");
    *out = nullptr;
    require(level_count > 0 && multipliers != nullptr, "mcg_push_sweep_run: no noise levels");
    const std::vector<double> levels(multipliers, multipliers + level_count);
    *out = new mcg_push_sweep{mcg::noise_sweep(to_core(*config), levels,
                                               static_cast<mcg::Index>(trials_per_level), seed,
                                               threads)};
  });
}

void mcg_push_sweep_destroy(mcg_push_sweep* sweep) { delete sweep; }

size_t mcg_push_sweep_level_count(const mcg_push_sweep* sweep) {
  return sweep ? sweep->levels.size() : 0;
}

double mcg_push_sweep_multiplier(const mcg_push_sweep* sweep, size_t level) {
  if (sweep == nullptr || level >= sweep->levels.size()) return 0.0;
  return sweep->levels[level].multiplier;
}

size_t mcg_push_sweep_trial_count(const mcg_push_sweep* sweep, size_t level) {
  if (sweep == nullptr || level >= sweep->levels.size()) return 0;
  return sweep->levels[level].trials.size();
}

size_t mcg_push_sweep_failed_count(const mcg_push_sweep* sweep, size_t level) {
  if (sweep == nullptr || level >= sweep->levels.size()) return 0;
  return static_cast<size_t>(sweep->levels[level].failed);
}

mcg_status mcg_push_sweep_trial(const mcg_push_sweep* sweep, size_t level, size_t index,
                                size_t* trial, double* d_maha, int* converged) {
  return guarded([&] {
    require(sweep != nullptr && level < sweep->levels.size() &&
                index < sweep->levels[level].trials.size(),
            "mcg_push_sweep_trial: index out of range");
    const auto& t = sweep->levels[level].trials[index];
    if (trial) *trial = static_cast<size_t>(t.trial);
    if (d_maha) *d_maha = t.d_maha;
    if (converged) *converged = t.converged ? 1 : 0;
  });
}

mcg_status mcg_push_run_trial(const mcg_push_config* config, uint64_t seed, double* d_maha,
                              int* converged, size_t* iterations) {
  return guarded([&] {
    require(config != nullptr, "mcg_push_run_trial: config is NULL");
    const auto report = mcg::run_trial(mcg::generate_scenario(to_core(*config), seed));
    if (d_maha) *d_maha = report.d_maha;
    if (converged) *converged = report.estimate.converged ? 1 : 0;
    if (iterations) *iterations = static_cast<size_t>(report.estimate.iterations);
  });
}

mcg_status mcg_push_scenario_json(const mcg_push_config* config, uint64_t seed, char** out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "mcg_push_scenario_json: NULL argument");
    *out = nullptr;
    const std::string json = mcg::scenario_to_json(mcg::generate_scenario(to_core(*config), seed));
    char* buffer = new char[json.size() + 1];
    std::memcpy(buffer, json.c_str(), json.size() + 1);
    *out = buffer;
  });
}

void mcg_string_free(char* s) { delete[] s; }

}  // extern "C"
