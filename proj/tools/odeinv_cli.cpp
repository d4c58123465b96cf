// odeinv: forward solves, parameter inference and estimator checks for ODE inverse problems.

#include "odeinv/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

using namespace odeinv;

enum ExitCode { kOk = 0, kUsage = 1, kNumerical = 2, kAborted = 3 };

std::filesystem::path resolve_output(const std::string &path) {
  std::filesystem::path p(path);
  if (p.is_relative()) {
    if (const char *dir = std::getenv("ODEINV_OUTPUT_DIR"); dir && *dir) {
      return std::filesystem::path(dir) / p;
    }
  }
  return p;
}

Vector parse_vector(const std::string &text, const std::string &what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    try {
      values.push_back(std::stod(item, &used));
    } catch (const std::exception &) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw ContractError(what + ": cannot parse '" + item + "'");
    }
  }
  return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Vector theta_or(const std::string &text, const Vector &fallback, int n) {
  if (text.empty()) {
    return fallback;
  }
  Vector theta = parse_vector(text, "--theta");
  if (theta.size() != n) {
    throw ContractError("--theta needs " + std::to_string(n) + " values");
  }
  return theta;
}

// lo:hi:count
std::vector<double> parse_range(const std::string &text, const std::string &what) {
  std::stringstream ss(text);
  std::string lo, hi, count;
  if (!std::getline(ss, lo, ':') || !std::getline(ss, hi, ':') || !std::getline(ss, count)) {
    throw ContractError(what + ": expected lo:hi:count");
  }
  const Vector bounds = parse_vector(lo + "," + hi, what);
  int n = 0;
  try {
    n = std::stoi(count);
  } catch (const std::exception &) {
    throw ContractError(what + ": bad count '" + count + "'");
  }
  return linspace(bounds(0), bounds(1), n);
}

std::ostream *open_output(const std::string &path, std::ofstream &file) {
  if (path.empty() || path == "-") {
    return &std::cout;
  }
  const auto resolved = resolve_output(path);
  if (resolved.has_parent_path()) {
    std::filesystem::create_directories(resolved.parent_path());
  }
  file.open(resolved, std::ios::binary);
  if (!file) {
    throw std::runtime_error("cannot write " + resolved.string());
  }
  return &file;
}

struct ForwardOptions {
  std::string benchmark;
  std::string theta;
  double h = 0.0;
  double R = 0.0;
  double sigma_dif = 1.0;
  std::string output;
};

void add_forward_options(CLI::App *cmd, ForwardOptions &opt) {
  cmd->add_option("-b,--benchmark", opt.benchmark, "logistic, lv, pst, guiy, constant or zero")->required();
  cmd->add_option("--theta", opt.theta, "comma-separated parameters (default: theta*)");
  cmd->add_option("--step", opt.h, "step size (default: the benchmark's)");
  cmd->add_option("--R", opt.R, "measurement variance of the derivative observations")->check(CLI::NonNegativeNumber);
  cmd->add_option("--sigma-dif", opt.sigma_dif, "diffusion scale")->check(CLI::PositiveNumber);
  cmd->add_option("-o,--output", opt.output, "output file (default: stdout)");
}

int cmd_solve(const ForwardOptions &opt) {
  const Benchmark b = benchmark_by_name(opt.benchmark);
  const Vector theta = theta_or(opt.theta, b.theta_star, b.spec.n_params);
  const TimeGrid grid = opt.h > 0.0 ? b.grid(opt.h) : b.grid();
  const FilterOutput out = filter_solve(b.spec, theta, grid, opt.R, KernelConfig{opt.sigma_dif});
  std::ofstream file;
  std::ostream &os = *open_output(opt.output, file);
  os << "t";
  for (int dim = 0; dim < b.spec.dim; ++dim) {
    os << ",mean_" << dim;
  }
  os << ",variance\n";
  for (int i = 0; i <= grid.steps(); ++i) {
    os << format_double(grid.time(i));
    for (int dim = 0; dim < b.spec.dim; ++dim) {
      os << "," << format_double(out.filter_means(dim, i));
    }
    os << "," << format_double(out.filter_variances(i)) << "\n";
  }
  return kOk;
}

struct InferOptions {
  std::string config;
  std::string output;
  std::int64_t seed = -1;
  int chains = 1;
};

void print_summary(const Trace &trace, const std::filesystem::path &path) {
  const TraceRecord &last = trace.last();
  std::cerr << to_string(trace.method) << ": " << trace.records.size() - 1 << " iterations, final E "
            << format_double(last.E);
  if (last.rel_err) {
    std::cerr << ", rel_err " << format_double(*last.rel_err);
  }
  if (is_sampler(trace.method)) {
    std::cerr << ", acceptance " << format_double(trace.acceptance_rate());
  }
  if (trace.ridge_bumps > 0) {
    std::cerr << ", " << trace.ridge_bumps << " ridge-regularized Hessians";
  }
  std::cerr << " -> " << path.string() << "\n";
  if (trace.aborted) {
    std::cerr << "aborted: " << trace.abort_reason << "\n";
  }
}

ExperimentConfig infer_config(const InferOptions &opt) {
  ExperimentConfig config = load_config(opt.config);
  if (!opt.output.empty()) {
    config.output = opt.output;
  }
  if (opt.seed >= 0) {
    config.solver.seed = static_cast<std::uint64_t>(opt.seed);
  }
  return config;
}

int cmd_infer(const InferOptions &opt) {
  if (opt.chains < 1) {
    throw ContractError("--chains must be positive");
  }
  const Experiment experiment(infer_config(opt));
  if (experiment.calibration()) {
    std::cerr << "calibrated sigma_dif " << format_double(experiment.kernel_config().sigma_dif)
              << (experiment.calibration()->degenerate ? " (degenerate, kept 1)" : "") << "\n";
  }
  std::vector<Trace> traces(static_cast<std::size_t>(opt.chains));
  std::vector<std::exception_ptr> errors(traces.size());
  {
    std::vector<std::jthread> workers;
    for (int c = 0; c < opt.chains; ++c) {
      workers.emplace_back([&, c] {
        try {
          traces[static_cast<std::size_t>(c)] = experiment.run_chain(c);
        } catch (...) {
          errors[static_cast<std::size_t>(c)] = std::current_exception();
        }
      });
    }
  }
  for (const auto &e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  bool aborted = false;
  for (int c = 0; c < opt.chains; ++c) {
    const auto path = chain_output_path(resolve_output(experiment.config().output), c, opt.chains);
    write_trace_csv(path, traces[static_cast<std::size_t>(c)]);
    print_summary(traces[static_cast<std::size_t>(c)], path);
    aborted = aborted || traces[static_cast<std::size_t>(c)].aborted;
  }
  return aborted ? kAborted : kOk;
}

struct CheckOptions {
  ForwardOptions forward;
  int halvings = 3;
  std::string variant = std::string(to_string(kDefaultJacobianVariant));
};

int cmd_jacobian_check(const CheckOptions &opt) {
  const Benchmark b = benchmark_by_name(opt.forward.benchmark);
  const Vector theta = theta_or(opt.forward.theta, b.theta_star, b.spec.n_params);
  const double h = opt.forward.h > 0.0 ? opt.forward.h : b.h;
  const JacobianCheckReport report = jacobian_check(b, theta, h, opt.forward.R, KernelConfig{opt.forward.sigma_dif},
                                                    opt.halvings, parse_jacobian_variant(opt.variant));
  std::ofstream file;
  write_jacobian_report(*open_output(opt.forward.output, file), report);
  return report.failures.empty() ? kOk : kNumerical;
}

struct SweepOptions {
  InferOptions infer;
  double lo = kMinStep;
  double hi = kMaxStep;
  bool surface = false;
  ForwardOptions forward;
  int param_a = 0;
  int param_b = 1;
  std::string range_a;
  std::string range_b;
  std::int64_t seed = 0;
};

int cmd_sweep_steps(const SweepOptions &opt) {
  if (opt.infer.config.empty()) {
    throw ContractError("sweep needs --config (or --surface)");
  }
  const Experiment experiment(infer_config(opt.infer));
  const SweepResult result =
      sweep(experiment.objective(), experiment.config().solver, experiment.benchmark().theta0,
            decade_grid(opt.lo, opt.hi), experiment.benchmark().theta_star);
  std::cout << "rho,final_E,final_rel_err,aborted\n";
  for (const SweepEntry &e : result.entries) {
    const TraceRecord &last = e.trace.last();
    std::cout << format_double(e.rho) << "," << format_double(last.E) << ","
              << (last.rel_err ? format_double(*last.rel_err) : "") << "," << (e.trace.aborted ? 1 : 0) << "\n";
  }
  const SweepEntry &best = result.best_entry();
  const auto path = resolve_output(experiment.config().output);
  write_trace_csv(path, best.trace);
  std::cerr << "best rho " << format_double(best.rho) << "\n";
  print_summary(best.trace, path);
  return kOk;
}

int cmd_sweep_surface(const SweepOptions &opt) {
  const Benchmark b = benchmark_by_name(opt.forward.benchmark);
  const Vector base = theta_or(opt.forward.theta, b.theta_star, b.spec.n_params);
  if (opt.range_a.empty() || opt.range_b.empty()) {
    throw ContractError("--surface needs --range-a and --range-b");
  }
  Rng rng(static_cast<std::uint64_t>(opt.seed));
  const Benchmark configured = [&] {
    Benchmark copy = b;
    if (opt.forward.h > 0.0) {
      copy.h = opt.forward.h;
    }
    return copy;
  }();
  const LikelihoodModel model(generate_data(configured, rng), configured.grid(), opt.forward.R,
                              KernelConfig{opt.forward.sigma_dif});
  const auto surface = likelihood_surface(b.spec, model, base, opt.param_a, parse_range(opt.range_a, "--range-a"),
                                          opt.param_b, parse_range(opt.range_b, "--range-b"));
  std::ofstream file;
  write_surface_csv(*open_output(opt.forward.output, file), surface);
  return kOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Gaussian ODE filtering for ODE inverse problems"};
  app.require_subcommand(1);

  ForwardOptions solve_opt;
  auto *solve_cmd = app.add_subcommand("solve", "forward solve; prints t, mean and variance columns");
  add_forward_options(solve_cmd, solve_opt);

  InferOptions infer_opt;
  auto *infer_cmd = app.add_subcommand("infer", "run an optimizer or sampler and write its trace CSV");
  infer_cmd->add_option("-c,--config", infer_opt.config, "INI experiment file")->required();
  infer_cmd->add_option("-o,--output", infer_opt.output, "trace CSV (overrides the config)");
  infer_cmd->add_option("--seed", infer_opt.seed, "seed (overrides the config)")->check(CLI::NonNegativeNumber);
  infer_cmd->add_option("--chains", infer_opt.chains, "independent chains run in parallel")->check(CLI::PositiveNumber);

  CheckOptions check_opt;
  check_opt.forward.benchmark = "logistic";
  auto *check_cmd = app.add_subcommand("jacobian-check", "compare J + K S with finite differences of the means");
  add_forward_options(check_cmd, check_opt.forward);
  check_cmd->add_option("--halvings", check_opt.halvings, "number of h halvings in the trend table")
      ->check(CLI::NonNegativeNumber);
  check_cmd->add_option("--variant", check_opt.variant, "J variant used for the trend: literal or drift_corrected");

  SweepOptions sweep_opt;
  auto *sweep_cmd = app.add_subcommand("sweep", "step-size sweep over decades, or a likelihood surface grid");
  sweep_cmd->add_option("-c,--config", sweep_opt.infer.config, "INI experiment file (step-size sweep)");
  sweep_cmd->add_option("--lo", sweep_opt.lo, "smallest step size")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--hi", sweep_opt.hi, "largest step size")->check(CLI::PositiveNumber);
  sweep_cmd->add_flag("--surface", sweep_opt.surface, "write E_aware/E_unaware over a 2-parameter grid");
  sweep_cmd->add_option("-b,--benchmark", sweep_opt.forward.benchmark, "benchmark (surface mode)");
  sweep_cmd->add_option("--theta", sweep_opt.forward.theta, "values of the fixed parameters (default: theta*)");
  sweep_cmd->add_option("--step", sweep_opt.forward.h, "step size (default: the benchmark's)");
  sweep_cmd->add_option("--R", sweep_opt.forward.R, "measurement variance")->check(CLI::NonNegativeNumber);
  sweep_cmd->add_option("--sigma-dif", sweep_opt.forward.sigma_dif, "diffusion scale")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--param-a", sweep_opt.param_a, "index of the first swept parameter");
  sweep_cmd->add_option("--param-b", sweep_opt.param_b, "index of the second swept parameter");
  sweep_cmd->add_option("--range-a", sweep_opt.range_a, "lo:hi:count for the first parameter");
  sweep_cmd->add_option("--range-b", sweep_opt.range_b, "lo:hi:count for the second parameter");
  sweep_cmd->add_option("--seed", sweep_opt.seed, "data seed (surface mode)")->check(CLI::NonNegativeNumber);
  sweep_cmd->add_option("-o,--output", sweep_opt.forward.output, "surface CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*solve_cmd) {
      return cmd_solve(solve_opt);
    }
    if (*infer_cmd) {
      return cmd_infer(infer_opt);
    }
    if (*check_cmd) {
      return cmd_jacobian_check(check_opt);
    }
    if (*sweep_cmd) {
      return sweep_opt.surface ? cmd_sweep_surface(sweep_opt) : cmd_sweep_steps(sweep_opt);
    }
  } catch (const DivergenceError &e) {
    std::cerr << "error: forward solve diverged: " << e.what() << "\n";
    return kNumerical;
  } catch (const LinearAlgebraError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const CalibrationError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const OracleError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument &e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::domain_error &e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}
