#include "odeinv/experiment.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace odeinv {

std::string_view to_string(SigmaMode mode) { return mode == SigmaMode::fixed ? "fixed" : "calibrate"; }

void ExperimentConfig::validate() const {
  (void)benchmark_by_name(benchmark);
  solver.validate();
  if (output.empty()) {
    throw ContractError("output path must not be empty");
  }
  if (sigma_mode == SigmaMode::fixed) {
    KernelConfig{sigma_dif}.validate();
  }
  if (!(R >= 0.0) || !std::isfinite(R)) {
    throw ContractError("R must be nonnegative and finite");
  }
  if (h && (!(*h > 0.0) || !std::isfinite(*h))) {
    throw ContractError("h must be positive");
  }
}

bool ExperimentConfig::operator==(const ExperimentConfig &o) const {
  const SolverConfig &a = solver;
  const SolverConfig &b = o.solver;
  return benchmark == o.benchmark && output == o.output && sigma_mode == o.sigma_mode &&
         sigma_dif == o.sigma_dif && R == o.R && h == o.h && variant == o.variant && a.method == b.method &&
         a.rho == b.rho && a.budget == b.budget && a.seed == b.seed &&
         a.burn_in_force_accept == b.burn_in_force_accept && a.leapfrog_steps == b.leapfrog_steps &&
         a.newton_damping == b.newton_damping && a.hastings_correction == b.hastings_correction &&
         a.timing == b.timing;
}

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>> &known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"experiment", {"benchmark", "output", "seed", "R", "h", "jacobian"}},
      {"sigma_dif", {"mode", "value"}},
      {"solver",
       {"method", "rho", "budget", "burn_in_force_accept", "leapfrog_steps", "newton_damping",
        "hastings_correction", "timing"}},
  };
  return keys;
}

std::string where(const std::string &key) { return "config key '" + key + "'"; }

double to_double(const std::string &key, const std::string &text) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw ContractError(where(key) + ": not a number: '" + text + "'");
  }
  return value;
}

long long to_integer(const std::string &key, const std::string &text) {
  std::size_t used = 0;
  long long value = 0;
  try {
    value = std::stoll(text, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw ContractError(where(key) + ": not an integer: '" + text + "'");
  }
  return value;
}

std::uint64_t to_seed(const std::string &key, const std::string &text) {
  std::size_t used = 0;
  std::uint64_t value = 0;
  try {
    value = text.empty() || text.front() == '-' ? 0 : std::stoull(text, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw ContractError(where(key) + ": not an unsigned 64-bit integer: '" + text + "'");
  }
  return value;
}

bool to_bool(const std::string &key, const std::string &text) {
  if (text == "true") {
    return true;
  }
  if (text == "false") {
    return false;
  }
  throw ContractError(where(key) + ": expected true or false, got '" + text + "'");
}

} // namespace

ExperimentConfig parse_config(std::string_view ini_text) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(ini_text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error &e) {
    throw ContractError(std::string("config: ") + e.what());
  }
  for (const auto &[section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end() || !body.data().empty()) {
      throw ContractError("config: unknown section or top-level key '" + section + "'");
    }
    for (const auto &entry : body) {
      if (!it->second.count(entry.first)) {
        throw ContractError("config: unknown key '" + section + "." + entry.first + "'");
      }
    }
  }
  auto get = [&](const std::string &path) { return tree.get_optional<std::string>(pt::ptree::path_type(path, '.')); };

  ExperimentConfig c;
  if (auto v = get("experiment.benchmark")) {
    c.benchmark = *v;
  }
  const Benchmark bench = benchmark_by_name(c.benchmark);
  c.solver.burn_in_force_accept = bench.burn_in;
  if (auto v = get("experiment.output")) {
    c.output = *v;
  }
  if (auto v = get("experiment.seed")) {
    c.solver.seed = to_seed("experiment.seed", *v);
  }
  if (auto v = get("experiment.R")) {
    c.R = to_double("experiment.R", *v);
  }
  if (auto v = get("experiment.h"); v && !v->empty()) {
    c.h = to_double("experiment.h", *v);
  }
  if (auto v = get("experiment.jacobian")) {
    c.variant = parse_jacobian_variant(*v);
  }
  if (auto v = get("sigma_dif.mode")) {
    if (*v == "fixed") {
      c.sigma_mode = SigmaMode::fixed;
    } else if (*v == "calibrate") {
      c.sigma_mode = SigmaMode::calibrate;
    } else {
      throw ContractError("config key 'sigma_dif.mode': expected fixed or calibrate, got '" + *v + "'");
    }
  }
  if (auto v = get("sigma_dif.value")) {
    c.sigma_dif = to_double("sigma_dif.value", *v);
  }
  if (auto v = get("solver.method")) {
    c.solver.method = parse_method(*v);
  }
  if (auto v = get("solver.rho")) {
    c.solver.rho = to_double("solver.rho", *v);
  }
  if (auto v = get("solver.budget")) {
    c.solver.budget = static_cast<int>(to_integer("solver.budget", *v));
  }
  if (auto v = get("solver.burn_in_force_accept")) {
    c.solver.burn_in_force_accept = static_cast<int>(to_integer("solver.burn_in_force_accept", *v));
  }
  if (auto v = get("solver.leapfrog_steps")) {
    c.solver.leapfrog_steps = static_cast<int>(to_integer("solver.leapfrog_steps", *v));
  }
  if (auto v = get("solver.newton_damping")) {
    c.solver.newton_damping = to_double("solver.newton_damping", *v);
  }
  if (auto v = get("solver.hastings_correction")) {
    c.solver.hastings_correction = to_bool("solver.hastings_correction", *v);
  }
  if (auto v = get("solver.timing")) {
    c.solver.timing = to_bool("solver.timing", *v);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw ContractError("cannot read config file " + path.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string serialize_config(const ExperimentConfig &c) {
  std::ostringstream os;
  os << "[experiment]\n"
     << "benchmark = " << c.benchmark << "\n"
     << "output = " << c.output << "\n"
     << "seed = " << c.solver.seed << "\n"
     << "R = " << format_double(c.R) << "\n";
  if (c.h) {
    os << "h = " << format_double(*c.h) << "\n";
  }
  os << "jacobian = " << to_string(c.variant) << "\n\n"
     << "[sigma_dif]\n"
     << "mode = " << to_string(c.sigma_mode) << "\n"
     << "value = " << format_double(c.sigma_dif) << "\n\n"
     << "[solver]\n"
     << "method = " << to_string(c.solver.method) << "\n"
     << "rho = " << format_double(c.solver.rho) << "\n"
     << "budget = " << c.solver.budget << "\n"
     << "burn_in_force_accept = " << c.solver.burn_in_force_accept << "\n"
     << "leapfrog_steps = " << c.solver.leapfrog_steps << "\n"
     << "newton_damping = " << format_double(c.solver.newton_damping) << "\n"
     << "hastings_correction = " << (c.solver.hastings_correction ? "true" : "false") << "\n"
     << "timing = " << (c.solver.timing ? "true" : "false") << "\n";
  return os.str();
}

namespace {

Benchmark configured_benchmark(const ExperimentConfig &config) {
  config.validate();
  Benchmark b = benchmark_by_name(config.benchmark);
  if (config.h) {
    b.h = *config.h;
  }
  return b;
}

Dataset synthetic_data(const Benchmark &b, std::uint64_t seed) {
  Rng rng(seed);
  return generate_data(b, rng);
}

std::optional<SigmaCalibration> calibrate(const ExperimentConfig &config, const Benchmark &b) {
  if (config.sigma_mode != SigmaMode::calibrate) {
    return std::nullopt;
  }
  // at the initial guess: theta* is not available to a real user
  return calibrate_sigma_dif(filter_solve(b.spec, b.theta0, b.grid(), config.R, KernelConfig{1.0}));
}

} // namespace

Experiment::Experiment(const ExperimentConfig &config)
    : config_(config), benchmark_(configured_benchmark(config)), calibration_(calibrate(config_, benchmark_)),
      model_(synthetic_data(benchmark_, config_.solver.seed), benchmark_.grid(), config_.R,
             KernelConfig{calibration_ ? calibration_->sigma_dif_or(1.0) : config_.sigma_dif}, config_.variant) {}

Trace Experiment::run_chain(int chain) const {
  return run(objective(), config_.solver, benchmark_.theta0, benchmark_.theta_star, chain);
}

std::string format_double(double value) {
  if (std::isnan(value)) {
    return "nan";
  }
  if (std::isinf(value)) {
    return value > 0 ? "inf" : "-inf";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string trace_csv_header(int n_params) {
  std::string header = "iter";
  for (int j = 0; j < n_params; ++j) {
    header += ",theta_" + std::to_string(j);
  }
  return header + ",E,rel_err,accepted,wall_ms";
}

void write_trace_csv(std::ostream &os, const Trace &trace) {
  const int n = trace.records.empty() ? 0 : static_cast<int>(trace.records.front().theta.size());
  os << trace_csv_header(n) << "\n";
  for (const TraceRecord &rec : trace.records) {
    os << rec.index;
    for (Eigen::Index j = 0; j < rec.theta.size(); ++j) {
      os << "," << format_double(rec.theta(j));
    }
    os << "," << format_double(rec.E) << "," << (rec.rel_err ? format_double(*rec.rel_err) : "") << ","
       << (rec.accepted ? 1 : 0) << "," << (rec.wall_ms ? format_double(*rec.wall_ms) : "") << "\n";
  }
}

void write_trace_csv(const std::filesystem::path &path, const Trace &trace) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  write_trace_csv(out, trace);
}

std::filesystem::path chain_output_path(const std::filesystem::path &path, int chain, int chains) {
  if (chains <= 1) {
    return path;
  }
  std::filesystem::path out = path;
  out.replace_filename(path.stem().string() + "_chain" + std::to_string(chain) + path.extension().string());
  return out;
}

std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 1) {
    throw ContractError("linspace: count must be positive");
  }
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    v[static_cast<std::size_t>(i)] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
  }
  return v;
}

std::vector<SurfacePoint> likelihood_surface(const ProblemSpec &spec, const LikelihoodModel &model, const Vector &base,
                                             int param_a, const std::vector<double> &values_a, int param_b,
                                             const std::vector<double> &values_b) {
  if (base.size() != spec.n_params || param_a < 0 || param_b < 0 || param_a >= spec.n_params ||
      param_b >= spec.n_params || param_a == param_b) {
    throw ContractError("likelihood_surface: bad parameter indices");
  }
  std::vector<SurfacePoint> surface;
  surface.reserve(values_a.size() * values_b.size());
  for (double a : values_a) {
    for (double b : values_b) {
      Vector theta = base;
      theta(param_a) = a;
      theta(param_b) = b;
      SurfacePoint p{a, b, kDivergedEnergy, kDivergedEnergy};
      try {
        const FilterOutput out = filter_solve(spec, theta, model.grid(), model.R(), model.kernel_config());
        p.E_aware = neg_log_likelihood(model, out);
        p.E_unaware = unaware_neg_log_likelihood(model.data(), out);
      } catch (const DivergenceError &) {
      }
      surface.push_back(p);
    }
  }
  return surface;
}

void write_surface_csv(std::ostream &os, const std::vector<SurfacePoint> &surface) {
  os << "theta_a,theta_b,E_aware,E_unaware\n";
  for (const SurfacePoint &p : surface) {
    os << format_double(p.theta_a) << "," << format_double(p.theta_b) << "," << format_double(p.E_aware) << ","
       << format_double(p.E_unaware) << "\n";
  }
}

JacobianCheckReport jacobian_check(const Benchmark &benchmark, const Vector &theta, double h, double R,
                                   const KernelConfig &cfg, int halvings, JacobianVariant selected) {
  JacobianCheckReport report;
  report.benchmark = benchmark.label;
  report.theta = theta;
  report.h = h;
  report.R = R;
  report.sigma_dif = cfg.sigma_dif;
  report.selected = selected;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const TimeGrid grid = benchmark.grid(h);
  const KernelPrefactor prefactor = kernel_prefactor(grid, R, cfg);

  report.literal_error = report.drift_error = nan;
  try {
    const FilterOutput out = filter_solve(benchmark.spec, theta, grid, R, cfg);
    const Matrix dm = true_jacobian_fd(benchmark.spec, theta, grid, R, cfg);
    const Matrix ks = apply_prefactor(prefactor, sensitivity_fd(benchmark.spec, theta, grid, R, cfg).S);
    auto identity_error = [&](JacobianVariant v) {
      return (dm - (jacobian_estimate(prefactor, out, v).J + ks)).norm() / dm.norm();
    };
    report.literal_error = identity_error(JacobianVariant::literal);
    report.drift_error = identity_error(JacobianVariant::drift_corrected);
  } catch (const std::runtime_error &e) {
    report.failures.push_back(std::string("identity at h=") + format_double(h) + ": " + e.what());
  }

  for (int k = 0; k <= halvings; ++k) {
    const TimeGrid g = grid.refined(1 << k);
    JacobianCheckReport::TrendRow row{g.h(), nan};
    try {
      const FilterOutput out = filter_solve(benchmark.spec, theta, g, R, cfg);
      const Matrix dm = true_jacobian_fd(benchmark.spec, theta, g, R, cfg);
      row.gap = (jacobian_estimate(kernel_prefactor(g, R, cfg), out, selected).J - dm).norm();
    } catch (const std::runtime_error &e) {
      report.failures.push_back("trend at h=" + format_double(g.h()) + ": " + e.what());
    }
    report.trend.push_back(row);
  }
  return report;
}

void write_jacobian_report(std::ostream &os, const JacobianCheckReport &r) {
  os << "benchmark " << r.benchmark << "\n";
  os << "theta";
  for (Eigen::Index j = 0; j < r.theta.size(); ++j) {
    os << " " << format_double(r.theta(j));
  }
  os << "\n";
  os << "h " << format_double(r.h) << "\n";
  os << "R " << format_double(r.R) << "\n";
  os << "sigma_dif " << format_double(r.sigma_dif) << "\n";
  os << "selected_variant " << to_string(r.selected) << "\n";
  os << "identity_rel_error literal " << format_double(r.literal_error) << "\n";
  os << "identity_rel_error drift_corrected " << format_double(r.drift_error) << "\n";
  os << "trend h jacobian_gap\n";
  for (const auto &row : r.trend) {
    os << "trend " << format_double(row.h) << " " << format_double(row.gap) << "\n";
  }
  for (const auto &f : r.failures) {
    os << "failure " << f << "\n";
  }
}

} // namespace odeinv
