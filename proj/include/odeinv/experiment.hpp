#ifndef ODEINV_EXPERIMENT_HPP
#define ODEINV_EXPERIMENT_HPP

#include "odeinv/inverse.hpp"
#include "odeinv/linearization.hpp"
#include "odeinv/problems.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace odeinv {

enum class SigmaMode { fixed, calibrate };

std::string_view to_string(SigmaMode mode);

/// One inference run. Stored as INI; see config/schema.ini.
struct ExperimentConfig {
  std::string benchmark = "lv";
  SolverConfig solver;
  std::string output = "trace.csv";
  SigmaMode sigma_mode = SigmaMode::fixed;
  /// Used as is in fixed mode; ignored in calibrate mode.
  double sigma_dif = 1.0;
  double R = 0.0;
  /// Overrides the benchmark's step size.
  std::optional<double> h;
  JacobianVariant variant = kDefaultJacobianVariant;

  void validate() const;
  bool operator==(const ExperimentConfig &other) const;
};

/// Parses INI text. Unknown keys, malformed values and invalid settings throw
/// ContractError. A missing burn_in_force_accept takes the benchmark's value.
ExperimentConfig parse_config(std::string_view ini_text);
ExperimentConfig load_config(const std::filesystem::path &path);
std::string serialize_config(const ExperimentConfig &config);

/// Benchmark, synthetic data and likelihood model for a configuration.
class Experiment {
public:
  explicit Experiment(const ExperimentConfig &config);

  const ExperimentConfig &config() const { return config_; }
  const Benchmark &benchmark() const { return benchmark_; }
  const Dataset &data() const { return model_.data(); }
  const LikelihoodModel &model() const { return model_; }
  const KernelConfig &kernel_config() const { return model_.kernel_config(); }
  /// Set when sigma_dif was calibrated.
  const std::optional<SigmaCalibration> &calibration() const { return calibration_; }

  Objective objective() const { return ode_objective(benchmark_.spec, model_); }
  Trace run_chain(int chain = 0) const;

private:
  ExperimentConfig config_;
  Benchmark benchmark_;
  std::optional<SigmaCalibration> calibration_;
  LikelihoodModel model_;
};

/// Shortest round-trip formatting ("%.17g"); "inf"/"-inf"/"nan" for non-finite values.
std::string format_double(double value);

std::string trace_csv_header(int n_params);
void write_trace_csv(std::ostream &os, const Trace &trace);
void write_trace_csv(const std::filesystem::path &path, const Trace &trace);

/// `path` for a single chain; `stem_chainK.ext` when several chains run.
std::filesystem::path chain_output_path(const std::filesystem::path &path, int chain, int chains);

/// Aware and unaware negative log-likelihood on a rectangular grid over two
/// parameters, the others held at `base`.
struct SurfacePoint {
  double theta_a = 0.0;
  double theta_b = 0.0;
  double E_aware = 0.0;
  double E_unaware = 0.0;
};

std::vector<double> linspace(double lo, double hi, int count);

/// Rows run over theta_a (outer) and theta_b (inner).
std::vector<SurfacePoint> likelihood_surface(const ProblemSpec &spec, const LikelihoodModel &model, const Vector &base,
                                             int param_a, const std::vector<double> &values_a, int param_b,
                                             const std::vector<double> &values_b);
void write_surface_csv(std::ostream &os, const std::vector<SurfacePoint> &surface);

struct JacobianCheckReport {
  std::string benchmark;
  Vector theta;
  double h = 0.0;
  double R = 0.0;
  double sigma_dif = 1.0;
  JacobianVariant selected = kDefaultJacobianVariant;
  /// |Dm_fd - (J + K S)|_F / |Dm_fd|_F per variant (NaN when the oracle failed).
  double literal_error = 0.0;
  double drift_error = 0.0;

  struct TrendRow {
    double h = 0.0;
    /// |J - Dm_fd|_F for the selected variant.
    double gap = 0.0;
  };
  std::vector<TrendRow> trend;
  std::vector<std::string> failures;

  double selected_error() const {
    return selected == JacobianVariant::literal ? literal_error : drift_error;
  }
};

/// Identity check Dm = J + K S at (theta, h) for both variants, and the gap
/// |J - Dm_fd| over `halvings` successive halvings of h.
JacobianCheckReport jacobian_check(const Benchmark &benchmark, const Vector &theta, double h, double R,
                                   const KernelConfig &cfg, int halvings = 3,
                                   JacobianVariant selected = kDefaultJacobianVariant);
void write_jacobian_report(std::ostream &os, const JacobianCheckReport &report);

} // namespace odeinv

#endif // ODEINV_EXPERIMENT_HPP
