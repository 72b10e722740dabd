// Command-line front end. Talks to the library exclusively through mcg/mcg.h.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcg/mcg.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240917;

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitInput = 3,
  kExitIo = 4,
  kExitCompute = 5,
};

struct CliError {
  int exit_code;
  std::string kind;
  std::string message;
};

[[noreturn]] void raise(int exit_code, std::string kind, std::string message) {
  throw CliError{exit_code, std::move(kind), std::move(message)};
}

void check(mcg_status status, const std::string& context) {
  if (status == MCG_OK) return;
  const int code = status == MCG_ERR_IO ? kExitIo : (status == MCG_ERR_INTERNAL ? kExitCompute : kExitInput);
  raise(code, mcg_status_string(status), context + ": " + mcg_last_error());
}

struct GaussianDeleter {
  void operator()(mcg_gaussian* g) const { mcg_gaussian_destroy(g); }
};
struct ManifoldDeleter {
  void operator()(mcg_linear_manifold* m) const { mcg_linear_manifold_destroy(m); }
};
struct ProjnormDeleter {
  void operator()(mcg_projnorm_result* r) const { mcg_projnorm_result_destroy(r); }
};
struct SweepDeleter {
  void operator()(mcg_push_sweep* s) const { mcg_push_sweep_destroy(s); }
};
using GaussianPtr = std::unique_ptr<mcg_gaussian, GaussianDeleter>;
using ManifoldPtr = std::unique_ptr<mcg_linear_manifold, ManifoldDeleter>;

// Shortest round-trip formatting: reruns are byte-identical and values survive I/O.
std::string num(double v) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, v);
  return std::string(buffer, result.ptr);
}

// ---------------------------------------------------------------------------
// Files

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : path_(path), out_(path) {
    if (!out_) raise(kExitIo, "io", "cannot open " + path.string() + " for writing");
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void close() {
    out_.close();
    if (!out_) raise(kExitIo, "io", "failed writing " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) raise(kExitIo, "io", "cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) raise(kExitIo, "io", "failed writing " + path.string());
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    raise(kExitIo, "io", "cannot create output directory " + dir + (ec ? ": " + ec.message() : ""));
  }
  const fs::path probe = fs::path(dir) / ".mcg_write_test";
  {
    std::ofstream test(probe);
    if (!test) raise(kExitIo, "io", "output directory " + dir + " is not writable");
  }
  fs::remove(probe, ec);
  return fs::path(dir);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(kExitIo, "io", "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, column = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string what = e.what();
    std::replace(what.begin(), what.end(), '\n', ' ');
    raise(kExitInput, "parse_error",
          path + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what);
  }
}

// ---------------------------------------------------------------------------
// JSON field helpers (row-major nested arrays)

double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) raise(kExitInput, "validation", where + " must be a number");
  return j.get<double>();
}

std::vector<double> as_vector(const json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) raise(kExitInput, "validation", where + " must be an array of numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(as_number(j[i], where + "[" + std::to_string(i) + "]"));
  return v;
}

// Returns rows x cols in row-major order.
std::vector<double> as_matrix(const json& j, const std::string& where, std::size_t& rows,
                              std::size_t& cols) {
  if (!j.is_array() || j.empty()) raise(kExitInput, "validation", "matrix " + where + " must be a non-empty array of rows");
  rows = j.size();
  cols = 0;
  std::vector<double> data;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string row_where = where + "[" + std::to_string(r) + "]";
    std::vector<double> row = as_vector(j[r], row_where);
    if (r == 0) cols = row.size();
    if (row.size() != cols || cols == 0) {
      raise(kExitInput, "validation", "matrix " + where + " is ragged at row " + std::to_string(r));
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return data;
}

struct OperationInput {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<double> mean, cov, S, c;
};

OperationInput read_operation_input(const json& j) {
  if (!j.is_object()) raise(kExitInput, "validation", "input must be a JSON object");
  for (const char* key : {"mean", "cov", "S", "c"}) {
    if (!j.contains(key)) raise(kExitInput, "validation", std::string("missing field \"") + key + "\"");
  }
  for (const auto& item : j.items()) {
    if (item.key() != "mean" && item.key() != "cov" && item.key() != "S" && item.key() != "c") {
      raise(kExitInput, "validation", "unknown field \"" + item.key() + "\"");
    }
  }
  OperationInput in;
  in.mean = as_vector(j["mean"], "mean");
  in.n = in.mean.size();
  if (in.n == 0) raise(kExitInput, "validation", "mean must not be empty");
  std::size_t rows = 0, cols = 0;
  in.cov = as_matrix(j["cov"], "cov", rows, cols);
  if (rows != in.n || cols != in.n) {
    raise(kExitInput, "validation", "matrix cov must be " + std::to_string(in.n) + "x" + std::to_string(in.n));
  }
  // S is n x m (one column per constraint); a flat array of length n is a single constraint.
  if (j["S"].is_array() && !j["S"].empty() && j["S"][0].is_number()) {
    in.S = as_vector(j["S"], "S");
    rows = in.S.size();
    cols = 1;
  } else {
    in.S = as_matrix(j["S"], "S", rows, cols);
  }
  if (rows != in.n) {
    raise(kExitInput, "validation", "matrix S must have " + std::to_string(in.n) + " rows (one per state dimension)");
  }
  in.m = cols;
  in.c = as_vector(j["c"], "c");
  if (in.c.size() != in.m) {
    raise(kExitInput, "validation", "c must have " + std::to_string(in.m) + " entries (one per column of S)");
  }
  return in;
}

json gaussian_to_json(const mcg_gaussian* g) {
  const std::size_t n = mcg_gaussian_dim(g);
  std::vector<double> mean(n), cov(n * n);
  check(mcg_gaussian_mean(g, mean.data()), "mean");
  check(mcg_gaussian_cov(g, cov.data()), "cov");
  json rows = json::array();
  for (std::size_t r = 0; r < n; ++r) rows.push_back(std::vector<double>(cov.begin() + r * n, cov.begin() + (r + 1) * n));
  return json{{"mean", mean}, {"cov", rows}, {"rank", mcg_gaussian_rank(g)}};
}

// Loads --config: keys either at top level or under the subcommand's name.
json load_config_section(const std::string& path, const std::string& section) {
  if (path.empty()) return json::object();
  json j = parse_json_file(path);
  if (!j.is_object()) raise(kExitInput, "validation", "config must be a JSON object");
  if (j.contains(section)) j = j[section];
  if (!j.is_object()) raise(kExitInput, "validation", "config section \"" + section + "\" must be an object");
  return j;
}

void reject_unknown(const json& j, const std::vector<std::string>& known, const std::string& section) {
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      raise(kExitInput, "validation", "unknown " + section + " config key \"" + item.key() + "\"");
    }
  }
}

// ---------------------------------------------------------------------------
// Subcommands

struct CommonOptions {
  std::string out = "out";
  std::uint64_t seed = kDefaultSeed;
  std::string config;
};

struct LinearDemoOptions {
  std::size_t samples = 500;
};

void cmd_linear_demo(const CommonOptions& common, const LinearDemoOptions& opts) {
  const fs::path dir = prepare_out_dir(common.out);
  const std::vector<double> mean = {0.6, 0.4, 0.9};
  const std::vector<double> cov = {0.30, 0.08, 0.05,
                                   0.08, 0.20, -0.04,
                                   0.05, -0.04, 0.25};
  struct Case {
    std::string name;
    std::size_t m;
    std::vector<double> S;  // 3 x m row-major
    std::vector<double> c;
  };
  const std::vector<Case> cases = {
      {"one_plane", 1, {1.0, 1.0, 1.0}, {1.0}},
      {"two_planes", 2, {1.0, 1.0, 1.0, 1.0, 1.0, -1.0}, {1.0, 0.2}},
  };

  CsvWriter gaussians(dir / "linear_gaussians.csv",
                      {"case", "kind", "rank", "mean_x", "mean_y", "mean_z", "cov_xx", "cov_xy", "cov_xz",
                       "cov_yy", "cov_yz", "cov_zz"});
  CsvWriter planes(dir / "linear_planes.csv", {"case", "constraint", "s_x", "s_y", "s_z", "c"});
  CsvWriter samples(dir / "linear_samples.csv", {"case", "kind", "sample", "x", "y", "z"});

  mcg_gaussian* raw = nullptr;
  check(mcg_gaussian_create(3, mean.data(), cov.data(), &raw), "prior");
  const GaussianPtr prior(raw);

  auto emit = [&](const std::string& name, const std::string& kind, const mcg_gaussian* g, std::uint64_t seed) {
    std::vector<double> mu(3), sigma(9);
    check(mcg_gaussian_mean(g, mu.data()), kind);
    check(mcg_gaussian_cov(g, sigma.data()), kind);
    gaussians.row({name, kind, std::to_string(mcg_gaussian_rank(g)), num(mu[0]), num(mu[1]), num(mu[2]),
                   num(sigma[0]), num(sigma[1]), num(sigma[2]), num(sigma[4]), num(sigma[5]), num(sigma[8])});
    std::vector<double> pts(opts.samples * 3);
    check(mcg_gaussian_sample(g, opts.samples, seed, pts.data()), kind);
    for (std::size_t i = 0; i < opts.samples; ++i) {
      samples.row({name, kind, std::to_string(i), num(pts[3 * i]), num(pts[3 * i + 1]), num(pts[3 * i + 2])});
    }
  };

  std::uint64_t stream = 0;
  for (const auto& cs : cases) {
    for (std::size_t k = 0; k < cs.m; ++k) {
      planes.row({cs.name, std::to_string(k), num(cs.S[0 * cs.m + k]), num(cs.S[1 * cs.m + k]),
                  num(cs.S[2 * cs.m + k]), num(cs.c[k])});
    }
    mcg_linear_manifold* mraw = nullptr;
    check(mcg_linear_manifold_create(3, cs.m, cs.S.data(), cs.c.data(), &mraw), "S");
    const ManifoldPtr manifold(mraw);
    check(mcg_marginalize(prior.get(), manifold.get(), &raw), "marginalize");
    const GaussianPtr marg(raw);
    check(mcg_condition(prior.get(), manifold.get(), &raw), "condition");
    const GaussianPtr cond(raw);
    emit(cs.name, "prior", prior.get(), common.seed + stream++);
    emit(cs.name, "marginal", marg.get(), common.seed + stream++);
    emit(cs.name, "conditional", cond.get(), common.seed + stream++);
    std::cout << cs.name << ": marginal rank " << mcg_gaussian_rank(marg.get()) << ", conditional rank "
              << mcg_gaussian_rank(cond.get()) << '\n';
  }
  gaussians.close();
  planes.close();
  samples.close();
}

struct ProjnormOptions {
  std::optional<std::size_t> grid_size;
  std::vector<double> scales;
  std::optional<std::string> reference;
  std::optional<std::size_t> mc_samples;
};

mcg_reference_method parse_reference(const std::string& s) {
  if (s == "analytical") return MCG_REFERENCE_ANALYTICAL;
  if (s == "monte-carlo") return MCG_REFERENCE_MONTE_CARLO;
  raise(kExitUsage, "usage", "reference must be analytical or monte-carlo, got " + s);
}

void cmd_projnorm(const CommonOptions& common, const ProjnormOptions& opts, bool seed_given) {
  mcg_projnorm_config cfg;
  mcg_projnorm_config_default(&cfg);
  std::vector<double> scales(cfg.scales, cfg.scales + cfg.scale_count);

  const json file = load_config_section(common.config, "projnorm");
  reject_unknown(file, {"mean", "scales", "grid_size", "reference", "mc_samples", "seed", "ratio_floor"}, "projnorm");
  if (file.contains("mean")) {
    const auto m = as_vector(file["mean"], "mean");
    if (m.size() != 2) raise(kExitInput, "validation", "projnorm mean must have 2 entries");
    cfg.mean[0] = m[0];
    cfg.mean[1] = m[1];
  }
  if (file.contains("scales")) scales = as_vector(file["scales"], "scales");
  if (file.contains("grid_size")) cfg.grid_size = static_cast<std::size_t>(as_number(file["grid_size"], "grid_size"));
  if (file.contains("reference")) cfg.reference = parse_reference(file["reference"].get<std::string>());
  if (file.contains("mc_samples")) cfg.mc_samples = static_cast<std::size_t>(as_number(file["mc_samples"], "mc_samples"));
  if (file.contains("seed")) cfg.seed = file["seed"].get<std::uint64_t>();
  if (file.contains("ratio_floor")) cfg.ratio_floor = as_number(file["ratio_floor"], "ratio_floor");

  if (!opts.scales.empty()) scales = opts.scales;
  if (opts.grid_size) cfg.grid_size = *opts.grid_size;
  if (opts.reference) cfg.reference = parse_reference(*opts.reference);
  if (opts.mc_samples) cfg.mc_samples = *opts.mc_samples;
  if (seed_given) cfg.seed = common.seed;
  cfg.scales = scales.data();
  cfg.scale_count = scales.size();

  const fs::path dir = prepare_out_dir(common.out);
  mcg_projnorm_result* raw = nullptr;
  check(mcg_projnorm_run(&cfg, &raw), "projnorm");
  const std::unique_ptr<mcg_projnorm_result, ProjnormDeleter> result(raw);

  const std::size_t rows = mcg_projnorm_row_count(result.get());
  const std::size_t k = mcg_projnorm_grid_size(result.get());
  CsvWriter densities(dir / "projnorm_densities.csv", {"scale", "det_sigma", "theta", "ref_density", "approx_density"});
  CsvWriter summary(dir / "projnorm_summary.csv", {"scale", "kl"});
  std::vector<double> theta(k), ref(k), approx(k);
  for (std::size_t r = 0; r < rows; ++r) {
    double scale = 0, det = 0, kl = 0;
    check(mcg_projnorm_row(result.get(), r, &scale, &det, &kl), "projnorm");
    check(mcg_projnorm_curves(result.get(), r, theta.data(), ref.data(), approx.data()), "projnorm");
    for (std::size_t i = 0; i < k; ++i) densities.row({num(scale), num(det), num(theta[i]), num(ref[i]), num(approx[i])});
    summary.row({num(scale), num(kl)});
    std::cout << "scale " << num(scale) << "  det_sigma " << num(det) << "  kl " << num(kl) << '\n';
  }
  std::cout << "kl strictly increasing: " << (mcg_projnorm_kl_increasing(result.get()) ? "yes" : "no") << '\n';
  densities.close();
  summary.close();
}

struct PushingOptions {
  std::vector<double> levels;
  std::optional<std::size_t> trials;
  unsigned threads = 0;
};

void apply_push_config(const json& j, mcg_push_config& c) {
  reject_unknown(j,
                 {"timesteps", "dt", "box_width", "box_height", "probe_radius", "probe_start", "probe_velocity",
                  "heading_amplitude", "offset_amplitude", "edge_margin", "odometry_sigma", "contact_sigma",
                  "prior_sigma", "noise_multiplier", "draw_noise", "levels", "trials"},
                 "pushing");
  auto fixed = [&](const char* key, double* dst, std::size_t n) {
    if (!j.contains(key)) return;
    const auto v = as_vector(j[key], key);
    if (v.size() != n) raise(kExitInput, "validation", std::string(key) + " must have " + std::to_string(n) + " entries");
    std::copy(v.begin(), v.end(), dst);
  };
  auto scalar = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = as_number(j[key], key);
  };
  if (j.contains("timesteps")) c.timesteps = static_cast<std::size_t>(as_number(j["timesteps"], "timesteps"));
  scalar("dt", c.dt);
  scalar("box_width", c.box_width);
  scalar("box_height", c.box_height);
  scalar("probe_radius", c.probe_radius);
  fixed("probe_start", c.probe_start, 2);
  fixed("probe_velocity", c.probe_velocity, 2);
  scalar("heading_amplitude", c.heading_amplitude);
  scalar("offset_amplitude", c.offset_amplitude);
  scalar("edge_margin", c.edge_margin);
  fixed("odometry_sigma", c.odometry_sigma, 3);
  scalar("contact_sigma", c.contact_sigma);
  scalar("prior_sigma", c.prior_sigma);
  scalar("noise_multiplier", c.noise_multiplier);
  if (j.contains("draw_noise")) {
    if (!j["draw_noise"].is_boolean()) raise(kExitInput, "validation", "draw_noise must be a boolean");
    c.draw_noise = j["draw_noise"].get<bool>() ? 1 : 0;
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

void cmd_pushing(const CommonOptions& common, const PushingOptions& opts) {
  mcg_push_config cfg;
  mcg_push_config_default(&cfg);
  std::vector<double> levels = {1.0, 2.0, 4.0, 8.0};
  std::size_t trials = 100;

  const json file = load_config_section(common.config, "pushing");
  apply_push_config(file, cfg);
  if (file.contains("levels")) levels = as_vector(file["levels"], "levels");
  if (file.contains("trials")) trials = static_cast<std::size_t>(as_number(file["trials"], "trials"));
  if (!opts.levels.empty()) levels = opts.levels;
  if (opts.trials) trials = *opts.trials;
  if (levels.empty()) raise(kExitUsage, "usage", "at least one noise level is required");

  const fs::path dir = prepare_out_dir(common.out);
  mcg_push_sweep* raw = nullptr;
  check(mcg_push_sweep_run(&cfg, levels.data(), levels.size(), trials, common.seed, opts.threads, &raw), "pushing");
  const std::unique_ptr<mcg_push_sweep, SweepDeleter> sweep(raw);

  CsvWriter csv(dir / "pushing_sweep.csv", {"level_multiplier", "trial", "d_maha", "converged"});
  for (std::size_t l = 0; l < mcg_push_sweep_level_count(sweep.get()); ++l) {
    const double multiplier = mcg_push_sweep_multiplier(sweep.get(), l);
    std::vector<double> values;
    std::size_t converged_count = 0;
    for (std::size_t i = 0; i < mcg_push_sweep_trial_count(sweep.get(), l); ++i) {
      std::size_t trial = 0;
      double d = 0;
      int converged = 0;
      check(mcg_push_sweep_trial(sweep.get(), l, i, &trial, &d, &converged), "pushing");
      csv.row({num(multiplier), std::to_string(trial), num(d), converged ? "1" : "0"});
      values.push_back(d);
      converged_count += converged ? 1 : 0;
    }
    const double mean = values.empty() ? 0.0 : std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    std::cout << "level " << num(multiplier) << ": trials " << values.size() << ", failed "
              << mcg_push_sweep_failed_count(sweep.get(), l) << ", converged " << converged_count << ", mean d_maha "
              << num(mean) << ", median d_maha " << num(median(values)) << '\n';
  }
  csv.close();

  mcg_push_config scenario_cfg = cfg;
  scenario_cfg.noise_multiplier = cfg.noise_multiplier * levels.front();
  char* text = nullptr;
  check(mcg_push_scenario_json(&scenario_cfg, common.seed, &text), "pushing scenario");
  const std::string scenario(text);
  mcg_string_free(text);
  write_text(dir / "pushing_scenario.json", scenario + "\n");
}

struct OperationOptions {
  std::string input;
  std::string output;
};

void cmd_operation(bool condition, const OperationOptions& opts) {
  const OperationInput in = read_operation_input(parse_json_file(opts.input));
  mcg_gaussian* raw = nullptr;
  const mcg_status gs = mcg_gaussian_create(in.n, in.mean.data(), in.cov.data(), &raw);
  if (gs != MCG_OK) raise(kExitInput, mcg_status_string(gs), std::string("matrix cov: ") + mcg_last_error());
  const GaussianPtr prior(raw);
  mcg_linear_manifold* mraw = nullptr;
  const mcg_status ms = mcg_linear_manifold_create(in.n, in.m, in.S.data(), in.c.data(), &mraw);
  if (ms != MCG_OK) raise(kExitInput, mcg_status_string(ms), std::string("matrix S: ") + mcg_last_error());
  const ManifoldPtr manifold(mraw);

  const mcg_status st = condition ? mcg_condition(prior.get(), manifold.get(), &raw)
                                  : mcg_marginalize(prior.get(), manifold.get(), &raw);
  if (st != MCG_OK) {
    const std::string prefix = st == MCG_ERR_RANK_DEFICIENT ? "matrix cov: " : "";
    raise(kExitInput, mcg_status_string(st), prefix + mcg_last_error());
  }
  const GaussianPtr result(raw);
  const std::string text = gaussian_to_json(result.get()).dump(2) + "\n";
  if (opts.output.empty()) {
    std::cout << text;
  } else {
    write_text(opts.output, text);
  }
}

void add_common(CLI::App* sub, CommonOptions& common, bool with_config) {
  sub->add_option("--out", common.out, "Output directory")->capture_default_str();
  sub->add_option("--seed", common.seed, "Random seed")->capture_default_str();
  if (with_config) sub->add_option("--config", common.config, "JSON config file")->check(CLI::ExistingFile);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussians on linear and smooth manifolds: demos and core operations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mcg_version());

  CommonOptions common;
  LinearDemoOptions linear_opts;
  ProjnormOptions projnorm_opts;
  PushingOptions pushing_opts;
  OperationOptions operation_opts;

  auto* linear = app.add_subcommand("linear-demo", "Marginalize and condition a 3-d Gaussian onto one and two planes");
  add_common(linear, common, false);
  linear->add_option("--samples", linear_opts.samples, "Samples per distribution")->capture_default_str();

  auto* projnorm = app.add_subcommand("projnorm", "Tangent-plane approximation of the projected normal");
  add_common(projnorm, common, true);
  projnorm->add_option("--grid-size", projnorm_opts.grid_size, "Angle grid points");
  projnorm->add_option("--scales", projnorm_opts.scales, "Covariance scales (Sigma = scale * I)")->delimiter(',');
  projnorm->add_option("--reference", projnorm_opts.reference, "analytical or monte-carlo");
  projnorm->add_option("--mc-samples", projnorm_opts.mc_samples, "Monte Carlo samples for the reference");

  auto* pushing = app.add_subcommand("pushing", "Planar-pushing consistency sweep over odometry noise levels");
  add_common(pushing, common, true);
  pushing->add_option("--levels", pushing_opts.levels, "Noise multipliers (default 1,2,4,8)")->delimiter(',');
  pushing->add_option("--trials", pushing_opts.trials, "Trials per level (default 100)");
  pushing->add_option("--threads", pushing_opts.threads, "Worker threads (0 = all cores)")->capture_default_str();

  auto* cond = app.add_subcommand("condition", "Condition a Gaussian onto S^T x = c (JSON in, JSON out)");
  auto* marg = app.add_subcommand("marginalize", "Marginalize a Gaussian onto S^T x = c (JSON in, JSON out)");
  for (auto* sub : {cond, marg}) {
    sub->add_option("--input", operation_opts.input, "Input JSON {mean, cov, S, c}")->required();
    sub->add_option("--output", operation_opts.output, "Output JSON file (default stdout)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string what = e.what();
    std::replace(what.begin(), what.end(), '\n', ' ');
    std::cerr << "mcg: error: usage: " << what << '\n';
    return kExitUsage;
  }

  try {
    if (linear->parsed()) {
      cmd_linear_demo(common, linear_opts);
    } else if (projnorm->parsed()) {
      cmd_projnorm(common, projnorm_opts, projnorm->count("--seed") > 0);
    } else if (pushing->parsed()) {
      cmd_pushing(common, pushing_opts);
    } else if (cond->parsed()) {
      cmd_operation(true, operation_opts);
    } else if (marg->parsed()) {
      cmd_operation(false, operation_opts);
    }
  } catch (const CliError& e) {
    std::string message = e.message;
    std::replace(message.begin(), message.end(), '\n', ' ');
    std::cerr << "mcg: error: " << e.kind << ": " << message << '\n';
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "mcg: error: internal: " << e.what() << '\n';
    return kExitCompute;
  }
  return kExitOk;
}
