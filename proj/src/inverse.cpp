#include "odeinv/inverse.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

namespace odeinv {

std::string_view to_string(Method method) {
  switch (method) {
  case Method::RS:
    return "RS";
  case Method::GD:
    return "GD";
  case Method::NWT:
    return "NWT";
  case Method::RWM:
    return "RWM";
  case Method::PLMC:
    return "PLMC";
  case Method::PHMC:
    return "PHMC";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  for (Method m : {Method::RS, Method::GD, Method::NWT, Method::RWM, Method::PLMC, Method::PHMC}) {
    if (text == to_string(m)) {
      return m;
    }
  }
  throw ContractError("unknown method: " + std::string(text) + " (expected RS, GD, NWT, RWM, PLMC or PHMC)");
}

bool is_sampler(Method method) {
  return method == Method::RWM || method == Method::PLMC || method == Method::PHMC;
}

void SolverConfig::validate() const {
  if (!(rho >= kMinStep && rho <= kMaxStep)) {
    throw ContractError("rho must lie in [1e-16, 1]");
  }
  if (budget < 0) {
    throw ContractError("budget must be nonnegative");
  }
  if (burn_in_force_accept < 0) {
    throw ContractError("burn_in_force_accept must be nonnegative");
  }
  if (leapfrog_steps < 1) {
    throw ContractError("leapfrog_steps must be positive");
  }
  if (!(newton_damping >= 0.0) || !std::isfinite(newton_damping)) {
    throw ContractError("newton_damping must be nonnegative");
  }
}

Evaluation diverged_evaluation(const Vector &theta) {
  Evaluation ev;
  ev.theta = theta;
  ev.E = kDivergedEnergy;
  ev.g = Vector::Zero(theta.size());
  ev.H = Matrix::Identity(theta.size(), theta.size());
  return ev;
}

Objective ode_objective(const ProblemSpec &spec, const LikelihoodModel &model, std::optional<GaussianPrior> prior) {
  auto shared_model = std::make_shared<const LikelihoodModel>(model);
  std::optional<Eigen::LLT<Matrix>> prior_llt;
  if (prior) {
    if (prior->mu.size() != spec.n_params || prior->V.rows() != spec.n_params || prior->V.cols() != spec.n_params) {
      throw ContractError("GaussianPrior: shape does not match theta");
    }
    prior_llt.emplace(prior->V);
    if (prior_llt->info() != Eigen::Success) {
      throw ContractError("GaussianPrior: V must be symmetric positive definite");
    }
  }
  return [spec, shared_model, prior, prior_llt](const Vector &theta) {
    if (theta.size() != spec.n_params || !theta.allFinite()) {
      return diverged_evaluation(theta);
    }
    const LikelihoodModel &model = *shared_model;
    FilterOutput out;
    try {
      out = filter_solve(spec, theta, model.grid(), model.R(), model.kernel_config());
    } catch (const DivergenceError &) {
      return diverged_evaluation(theta);
    }
    Evaluation ev;
    ev.theta = theta;
    ev.E = neg_log_likelihood(model, out);
    if (!std::isfinite(ev.E)) {
      return diverged_evaluation(theta);
    }
    const JacobianEstimate J = model.jacobian(out);
    if (prior) {
      const Vector dev = theta - prior->mu;
      ev.E += 0.5 * dev.dot(prior_llt->solve(dev));
      ev.g = bayesian_gradient(model, out, J, *prior, theta);
      ev.H = bayesian_hessian(model, J, *prior);
    } else {
      ev.g = gradient_estimate(model, out, J);
      ev.H = hessian_estimate(model, J);
    }
    if (!std::isfinite(ev.E) || !ev.g.allFinite() || !ev.H.allFinite()) {
      return diverged_evaluation(theta);
    }
    return ev;
  };
}

Rng chain_rng(std::uint64_t seed, int chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain)};
  return Rng(seq);
}

MetricFactor factor_metric(const Matrix &H, double damping) {
  const Eigen::Index n = H.rows();
  MetricFactor f;
  Matrix A = H;
  A.diagonal().array() += damping;
  f.llt.compute(A);
  if (f.llt.info() == Eigen::Success) {
    return f;
  }
  f.ridge_bumped = true;
  double bump = 1e-10 * H.trace() / static_cast<double>(std::max<Eigen::Index>(n, 1));
  if (!(bump > 0.0) || !std::isfinite(bump)) {
    bump = 1e-10;
  }
  for (int attempt = 0; attempt < 40; ++attempt) {
    Matrix B = A;
    B.diagonal().array() += bump;
    f.llt.compute(B);
    if (f.llt.info() == Eigen::Success) {
      return f;
    }
    bump *= 10.0;
  }
  throw LinearAlgebraError("Hessian estimate could not be regularized to positive definite");
}

namespace {

Vector standard_normal(Rng &rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    z(i) = normal(rng);
  }
  return z;
}

double uniform01(Rng &rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// Accepts with probability min(1, exp(log_ratio)).
bool metropolis(Rng &rng, double log_ratio) {
  const double u = uniform01(rng);
  return std::isfinite(log_ratio) ? u < std::exp(std::min(log_ratio, 0.0)) : log_ratio > 0.0;
}

StepResult keep_or_move(const Evaluation &current, Evaluation proposal, bool accept, bool forced = false) {
  StepResult r;
  r.proposal_E = proposal.E;
  r.accepted = accept;
  r.forced = forced;
  r.state = accept ? std::move(proposal) : current;
  return r;
}

} // namespace

StepResult step_rs(const Objective &objective, const Evaluation &current, Rng &rng, double rho) {
  Vector u = standard_normal(rng, current.theta.size());
  const double norm = u.norm();
  if (norm > 0.0) {
    u /= norm;
  }
  Evaluation proposal = objective(current.theta + rho * u);
  const bool better = proposal.E < current.E;
  return keep_or_move(current, std::move(proposal), better);
}

StepResult step_gd(const Objective &objective, const Evaluation &current, double rho) {
  return keep_or_move(current, objective(current.theta - rho * current.g), true);
}

StepResult step_newton(const Objective &objective, const Evaluation &current, double damping, double step_factor) {
  const MetricFactor f = factor_metric(current.H, damping);
  StepResult r = keep_or_move(current, objective(current.theta - step_factor * f.llt.solve(current.g)), true);
  r.ridge_bumped = f.ridge_bumped;
  return r;
}

StepResult step_rwm(const Objective &objective, const Evaluation &current, Rng &rng, double rho) {
  Evaluation proposal = objective(current.theta + rho * standard_normal(rng, current.theta.size()));
  const bool accept = proposal.finite() && metropolis(rng, current.E - proposal.E);
  return keep_or_move(current, std::move(proposal), accept);
}

double plmc_log_density(const Evaluation &from, const Vector &to, double rho) {
  const MetricFactor f = factor_metric(from.H);
  const Eigen::Index n = from.theta.size();
  const Vector mean = from.theta - rho * f.llt.solve(from.g);
  const Matrix L = f.llt.matrixL();
  // cov = 2 rho H^{-1}, so the precision is H / (2 rho)
  const double quad = (L.transpose() * (to - mean)).squaredNorm() / (2.0 * rho);
  const double log_det_precision = 2.0 * L.diagonal().array().log().sum() - n * std::log(2.0 * rho);
  return 0.5 * (log_det_precision - n * std::log(2.0 * std::numbers::pi) - quad);
}

StepResult step_plmc(const Objective &objective, const Evaluation &current, Rng &rng, double rho,
                     bool hastings_correction, bool force_accept) {
  const MetricFactor f = factor_metric(current.H);
  const Vector z = standard_normal(rng, current.theta.size());
  // L^{-T} z has covariance H^{-1}
  const Vector xi = std::sqrt(2.0 * rho) * f.llt.matrixU().solve(z);
  const Vector target = current.theta - rho * f.llt.solve(current.g) + xi;
  Evaluation proposal = objective(target);
  const double u_log_ratio = [&] {
    if (!proposal.finite()) {
      return -std::numeric_limits<double>::infinity();
    }
    double log_ratio = current.E - proposal.E;
    if (hastings_correction) {
      log_ratio += plmc_log_density(proposal, current.theta, rho) - plmc_log_density(current, target, rho);
    }
    return log_ratio;
  }();
  const bool accepted_by_ratio = metropolis(rng, u_log_ratio);
  const bool forced = force_accept && proposal.finite() && !accepted_by_ratio;
  StepResult r = keep_or_move(current, std::move(proposal), accepted_by_ratio || forced, forced);
  r.ridge_bumped = f.ridge_bumped;
  return r;
}

LeapfrogResult leapfrog(const Objective &objective, const Evaluation &start, const Vector &momentum,
                        const Eigen::LLT<Matrix> &mass, double eps, int steps) {
  LeapfrogResult r;
  r.state = start;
  r.momentum = momentum;
  for (int s = 0; s < steps; ++s) {
    r.momentum -= 0.5 * eps * r.state.g;
    const Vector theta = r.state.theta + eps * mass.solve(r.momentum);
    r.state = objective(theta);
    if (!r.state.finite()) {
      r.diverged = true;
      return r;
    }
    r.momentum -= 0.5 * eps * r.state.g;
  }
  return r;
}

StepResult step_phmc(const Objective &objective, const Evaluation &current, Rng &rng, double rho, int steps,
                     bool force_accept) {
  const MetricFactor f = factor_metric(current.H);
  const Vector p0 = f.llt.matrixL() * standard_normal(rng, current.theta.size());
  LeapfrogResult lf = leapfrog(objective, current, p0, f.llt, rho, steps);
  double log_ratio = -std::numeric_limits<double>::infinity();
  if (!lf.diverged && lf.state.finite()) {
    const double k0 = 0.5 * p0.dot(f.llt.solve(p0));
    const double k1 = 0.5 * lf.momentum.dot(f.llt.solve(lf.momentum));
    log_ratio = (current.E + k0) - (lf.state.E + k1);
  }
  const bool accepted_by_ratio = metropolis(rng, log_ratio);
  const bool forced = force_accept && lf.state.finite() && !lf.diverged && !accepted_by_ratio;
  StepResult r = keep_or_move(current, std::move(lf.state), accepted_by_ratio || forced, forced);
  r.ridge_bumped = f.ridge_bumped;
  return r;
}

double Trace::acceptance_rate() const {
  if (records.size() <= 1) {
    return 0.0;
  }
  std::size_t accepted = 0;
  for (std::size_t i = 1; i < records.size(); ++i) {
    accepted += records[i].accepted ? 1 : 0;
  }
  return static_cast<double>(accepted) / static_cast<double>(records.size() - 1);
}

double relative_error(const Vector &theta, const Vector &theta_star) {
  if (theta.size() != theta_star.size()) {
    throw ContractError("relative_error: size mismatch");
  }
  const double scale = theta_star.norm();
  return scale > 0.0 ? (theta - theta_star).norm() / scale : (theta - theta_star).norm();
}

Trace run(const Objective &objective, const SolverConfig &config, const Vector &theta0,
          const std::optional<Vector> &theta_star, int chain) {
  config.validate();
  if (!theta0.allFinite()) {
    throw ContractError("theta0 must be finite");
  }
  Rng rng = chain_rng(config.seed, chain);
  const auto clock_start = std::chrono::steady_clock::now();

  Trace trace;
  trace.method = config.method;
  trace.records.reserve(static_cast<std::size_t>(config.budget) + 1);
  auto record = [&](int index, const Evaluation &state, bool accepted, bool forced, double proposal_E) {
    TraceRecord rec;
    rec.index = index;
    rec.theta = state.theta;
    rec.E = state.E;
    if (theta_star) {
      rec.rel_err = relative_error(state.theta, *theta_star);
    }
    rec.accepted = accepted;
    rec.forced = forced;
    rec.proposal_E = proposal_E;
    if (config.timing) {
      rec.wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - clock_start).count();
    }
    trace.records.push_back(std::move(rec));
  };

  Evaluation current = objective(theta0);
  record(0, current, true, false, current.E);
  int consecutive = current.finite() ? 0 : 1;

  for (int it = 1; it <= config.budget; ++it) {
    const bool force = it <= config.burn_in_force_accept;
    StepResult step;
    switch (config.method) {
    case Method::RS:
      step = step_rs(objective, current, rng, config.rho);
      break;
    case Method::GD:
      step = step_gd(objective, current, config.rho);
      break;
    case Method::NWT:
      step = step_newton(objective, current, config.newton_damping, config.rho);
      break;
    case Method::RWM:
      step = step_rwm(objective, current, rng, config.rho);
      break;
    case Method::PLMC:
      step = step_plmc(objective, current, rng, config.rho, config.hastings_correction, force);
      break;
    case Method::PHMC:
      step = step_phmc(objective, current, rng, config.rho, config.leapfrog_steps, force);
      break;
    }
    trace.ridge_bumps += step.ridge_bumped ? 1 : 0;
    consecutive = std::isfinite(step.proposal_E) ? 0 : consecutive + 1;
    current = std::move(step.state);
    record(it, current, step.accepted, step.forced, step.proposal_E);
    if (consecutive > kMaxConsecutiveDivergences) {
      trace.aborted = true;
      trace.abort_reason = std::to_string(consecutive) + " consecutive diverged forward solves";
      break;
    }
  }
  return trace;
}

Trace run(const ProblemSpec &spec, const LikelihoodModel &model, const SolverConfig &config, const Vector &theta0,
          const std::optional<Vector> &theta_star, int chain) {
  return run(ode_objective(spec, model), config, theta0, theta_star, chain);
}

std::vector<double> decade_grid(double lo, double hi) {
  if (!(lo > 0.0) || !(hi >= lo)) {
    throw ContractError("decade_grid: need 0 < lo <= hi");
  }
  std::vector<double> grid;
  const int first = static_cast<int>(std::lround(std::log10(lo)));
  const int last = static_cast<int>(std::lround(std::log10(hi)));
  for (int e = first; e <= last; ++e) {
    // parse the literal so that 1e-3 is the double nearest to 10^-3
    grid.push_back(std::stod("1e" + std::to_string(e)));
  }
  return grid;
}

SweepResult sweep(const Objective &objective, const SolverConfig &config, const Vector &theta0,
                  const std::vector<double> &rhos, const std::optional<Vector> &theta_star) {
  if (rhos.empty()) {
    throw ContractError("sweep: no step sizes given");
  }
  SweepResult result;
  for (double rho : rhos) {
    SolverConfig c = config;
    c.rho = rho;
    result.entries.push_back({rho, run(objective, c, theta0, theta_star)});
  }
  for (std::size_t i = 1; i < result.entries.size(); ++i) {
    if (result.entries[i].trace.last().E < result.entries[result.best].trace.last().E) {
      result.best = i;
    }
  }
  return result;
}

} // namespace odeinv
