#ifndef ODEINV_INVERSE_HPP
#define ODEINV_INVERSE_HPP

#include "odeinv/filter.hpp"
#include "odeinv/likelihood.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace odeinv {

enum class Method { RS, GD, NWT, RWM, PLMC, PHMC };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);
bool is_sampler(Method method);

inline constexpr double kMinStep = 1e-16;
inline constexpr double kMaxStep = 1.0;

struct SolverConfig {
  Method method = Method::NWT;
  /// Step size (GD), proposal width (RS, RWM, PLMC), leapfrog step (PHMC) or
  /// Newton step factor (NWT).
  double rho = 1.0;
  /// Iterations or samples after the initial state.
  int budget = 100;
  std::uint64_t seed = 0;
  /// The first proposals of PLMC/PHMC that are accepted unconditionally.
  int burn_in_force_accept = 0;
  int leapfrog_steps = 5;
  double newton_damping = 0.0;
  /// Metropolis-Hastings correction for the asymmetric PLMC proposal.
  bool hastings_correction = true;
  /// Record wall-clock time per iteration. Off by default so traces are reproducible.
  bool timing = false;

  void validate() const;
};

/// Objective value, gradient and Hessian estimates at theta.
struct Evaluation {
  Vector theta;
  double E = kDivergedEnergy;
  Vector g;
  Matrix H;

  bool finite() const { return std::isfinite(E); }
};

/// Evaluates (E, g, H) at theta. Must be deterministic.
using Objective = std::function<Evaluation(const Vector &)>;

/// The value a diverged forward solve maps to: E = +inf, g = 0, H = I.
Evaluation diverged_evaluation(const Vector &theta);

/// Negative log-likelihood (or log-posterior with a prior) with the
/// J-based gradient and Hessian estimators. One forward solve per call.
Objective ode_objective(const ProblemSpec &spec, const LikelihoodModel &model,
                        std::optional<GaussianPrior> prior = std::nullopt);

using Rng = std::mt19937_64;

/// Independent stream for chain `chain` of a run seeded with `seed`.
Rng chain_rng(std::uint64_t seed, int chain);

struct StepResult {
  Evaluation state;
  bool accepted = true;
  bool forced = false;
  double proposal_E = kDivergedEnergy;
  bool ridge_bumped = false;
};

/// Cholesky factor of H + damping I. If that is not positive definite, the
/// diagonal is raised by 1e-10 trace(H)/n (or 1e-10 for a zero trace) until it is.
struct MetricFactor {
  Eigen::LLT<Matrix> llt;
  bool ridge_bumped = false;
};
MetricFactor factor_metric(const Matrix &H, double damping = 0.0);

StepResult step_rs(const Objective &objective, const Evaluation &current, Rng &rng, double rho);
StepResult step_gd(const Objective &objective, const Evaluation &current, double rho);
StepResult step_newton(const Objective &objective, const Evaluation &current, double damping,
                       double step_factor = 1.0);
StepResult step_rwm(const Objective &objective, const Evaluation &current, Rng &rng, double rho);
StepResult step_plmc(const Objective &objective, const Evaluation &current, Rng &rng, double rho,
                     bool hastings_correction = true, bool force_accept = false);
StepResult step_phmc(const Objective &objective, const Evaluation &current, Rng &rng, double rho, int steps,
                     bool force_accept = false);

/// log q(to | from) for the PLMC proposal N(from - rho H^{-1} g, 2 rho H^{-1}),
/// with g and H taken at `from`.
double plmc_log_density(const Evaluation &from, const Vector &to, double rho);

struct LeapfrogResult {
  Evaluation state;
  Vector momentum;
  bool diverged = false;
};

/// `steps` leapfrog steps of size eps for the Hamiltonian E(theta) + p^T M^{-1} p / 2.
/// Every position is evaluated through the objective; the mass stays fixed.
LeapfrogResult leapfrog(const Objective &objective, const Evaluation &start, const Vector &momentum,
                        const Eigen::LLT<Matrix> &mass, double eps, int steps);

struct TraceRecord {
  int index = 0;
  Vector theta;
  double E = kDivergedEnergy;
  std::optional<double> rel_err;
  bool accepted = true;
  bool forced = false;
  double proposal_E = kDivergedEnergy;
  std::optional<double> wall_ms;
};

struct Trace {
  Method method = Method::NWT;
  std::vector<TraceRecord> records;
  bool aborted = false;
  std::string abort_reason;
  /// Newton steps or PLMC/PHMC proposals that needed a ridge on H.
  int ridge_bumps = 0;

  const TraceRecord &last() const { return records.back(); }
  double acceptance_rate() const;
};

/// Runs longer than this many consecutive diverged evaluations are aborted.
inline constexpr int kMaxConsecutiveDivergences = 50;

/// Relative error |theta - theta*| / |theta*|.
double relative_error(const Vector &theta, const Vector &theta_star);

/// Runs the configured method from theta0 for config.budget iterations.
Trace run(const Objective &objective, const SolverConfig &config, const Vector &theta0,
          const std::optional<Vector> &theta_star = std::nullopt, int chain = 0);

Trace run(const ProblemSpec &spec, const LikelihoodModel &model, const SolverConfig &config, const Vector &theta0,
          const std::optional<Vector> &theta_star = std::nullopt, int chain = 0);

/// 1e-16, 1e-15, ..., 1.
std::vector<double> decade_grid(double lo = kMinStep, double hi = kMaxStep);

struct SweepEntry {
  double rho = 0.0;
  Trace trace;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  /// Index of the entry with the lowest final E (the first on ties).
  std::size_t best = 0;

  const SweepEntry &best_entry() const { return entries.at(best); }
};

/// Runs `config` once per candidate rho and picks the lowest final E.
SweepResult sweep(const Objective &objective, const SolverConfig &config, const Vector &theta0,
                  const std::vector<double> &rhos, const std::optional<Vector> &theta_star = std::nullopt);

} // namespace odeinv

#endif // ODEINV_INVERSE_HPP
