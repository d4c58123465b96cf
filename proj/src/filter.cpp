#include "odeinv/filter.hpp"

#include <cmath>
#include <sstream>

namespace odeinv {

namespace {

double rel_error(const Matrix &a, const Matrix &b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

} // namespace

BasisCheck verify_basis(const ProblemSpec &spec, std::mt19937_64 &rng, int samples) {
  BasisCheck check;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.5, 1.5);
  const int d = spec.dim;
  const int n = spec.n_params;
  for (int s = 0; s < samples; ++s) {
    Vector x(d);
    for (int i = 0; i < d; ++i) {
      x(i) = spec.x0(i) * unit(rng) + 0.5 * normal(rng);
    }
    Vector theta(n);
    for (int j = 0; j < n; ++j) {
      theta(j) = normal(rng);
    }
    if (spec.reference_field) {
      check.field_rel_error =
          std::max(check.field_rel_error, rel_error(spec.field(x, theta), spec.reference_field(x, theta)));
    }
    const Matrix jac = spec.basis_jacobian(x);
    Matrix fd(d, d * n);
    for (int e = 0; e < d; ++e) {
      const double step = 1e-6 * std::max(1.0, std::abs(x(e)));
      Vector xp = x, xm = x;
      xp(e) += step;
      xm(e) -= step;
      const Matrix diff = (spec.basis(xp) - spec.basis(xm)) / (2.0 * step);
      for (int j = 0; j < n; ++j) {
        fd.col(j * d + e) = diff.col(j);
      }
    }
    // absolute floor: many basis Jacobians are exactly zero
    const double scale = std::max({jac.norm(), fd.norm(), 1.0});
    check.jacobian_rel_error = std::max(check.jacobian_rel_error, (jac - fd).norm() / scale);
  }
  return check;
}

TransitionModel discretize_prior(double h, const KernelConfig &cfg) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw std::domain_error("discretize_prior: h must be positive");
  }
  cfg.validate();
  TransitionModel model;
  model.h = h;
  model.A << 1.0, h, 0.0, 1.0;
  const double s2 = cfg.sigma2();
  model.Q << s2 * h * h * h / 3.0, s2 * h * h / 2.0, s2 * h * h / 2.0, s2 * h;
  return model;
}

GaussianState predict(const GaussianState &state, const TransitionModel &model) {
  GaussianState out;
  out.mean = model.A * state.mean;
  out.cov = model.A * state.cov * model.A.transpose() + model.Q;
  return out;
}

GaussianState update_derivative(const GaussianState &predicted, const Vector &y, double R) {
  const double r_eff = effective_measurement_variance(R);
  const double innovation_var = predicted.cov(1, 1) + r_eff;
  const Eigen::Vector2d gain = predicted.cov.col(1) / innovation_var;

  GaussianState out;
  out.mean = predicted.mean;
  for (int dim = 0; dim < predicted.mean.cols(); ++dim) {
    const double residual = y(dim) - predicted.mean(1, dim);
    out.mean.col(dim) += gain * residual;
  }
  Eigen::Matrix2d I_KH = Eigen::Matrix2d::Identity();
  I_KH.col(1) -= gain;
  out.cov = I_KH * predicted.cov * I_KH.transpose() + r_eff * gain * gain.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

Vector FilterOutput::means_at_data() const {
  const auto &idx = grid.data_indices();
  const int M = static_cast<int>(idx.size());
  const int d = dim();
  Vector out(M * d);
  for (int dim = 0; dim < d; ++dim) {
    for (int i = 0; i < M; ++i) {
      out(dim * M + i) = filter_means(dim, idx[i]);
    }
  }
  return out;
}

Vector FilterOutput::variances_at_data() const {
  const auto &idx = grid.data_indices();
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = filter_variances(idx[i]);
  }
  return out;
}

FilterOutput filter_solve(const ProblemSpec &spec, const Vector &theta, const TimeGrid &grid, double R,
                          const KernelConfig &cfg) {
  const int d = spec.dim;
  const int n = spec.n_params;
  const int N = grid.steps();
  if (theta.size() != n) {
    throw ContractError("filter_solve: theta has wrong length");
  }
  if (!theta.allFinite()) {
    throw ContractError("filter_solve: theta must be finite");
  }
  if (std::abs(grid.horizon() - spec.horizon) > 1e-9 * std::max(1.0, spec.horizon)) {
    throw ContractError("filter_solve: grid horizon does not match the problem horizon");
  }
  if (R < 0.0) {
    throw ContractError("filter_solve: R must be nonnegative");
  }
  const TransitionModel model = discretize_prior(grid.h(), cfg);

  FilterOutput out;
  out.grid = grid;
  out.theta = theta;
  out.R = R;
  out.cfg = cfg;
  out.filter_means.resize(d, N + 1);
  out.predictive_means.resize(d, N);
  out.filter_variances.resize(N + 1);
  out.Y.resize(static_cast<Eigen::Index>(N) * d, n);
  out.residuals.resize(d, N);
  out.innovation_variances.resize(N);

  out.basis_at_x0 = spec.basis(spec.x0);
  if (!out.basis_at_x0.allFinite()) {
    throw DivergenceError(0, "filter_solve: non-finite vector field at x0");
  }
  GaussianState state;
  state.mean.resize(2, d);
  state.mean.row(0) = spec.x0.transpose();
  state.mean.row(1) = (out.basis_at_x0 * theta).transpose();
  state.cov.setZero();
  out.filter_means.col(0) = spec.x0;
  out.filter_variances(0) = 0.0;

  for (int i = 1; i <= N; ++i) {
    const GaussianState pred = predict(state, model);
    const Vector position = pred.mean.row(0).transpose();
    if (!position.allFinite()) {
      throw DivergenceError(i, "filter_solve: non-finite predictive mean");
    }
    const Matrix basis = spec.basis(position);
    const Vector y = basis * theta;
    if (!y.allFinite()) {
      throw DivergenceError(i, "filter_solve: non-finite vector field evaluation");
    }
    out.predictive_means.col(i - 1) = position;
    for (int dim = 0; dim < d; ++dim) {
      out.Y.row(static_cast<Eigen::Index>(dim) * N + (i - 1)) = basis.row(dim) - out.basis_at_x0.row(dim);
      out.residuals(dim, i - 1) = y(dim) - pred.mean(1, dim);
    }
    out.innovation_variances(i - 1) = pred.cov(1, 1) + effective_measurement_variance(R);

    state = update_derivative(pred, y, R);
    out.filter_means.col(i) = state.mean.row(0).transpose();
    out.filter_variances(i) = state.cov(0, 0);
  }
  return out;
}

SigmaCalibration calibrate_sigma_dif(const FilterOutput &output) {
  const Eigen::Index N = output.innovation_variances.size();
  if (N == 0) {
    throw CalibrationError("calibrate_sigma_dif: empty filter output");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) {
    const double s = output.innovation_variances(i);
    if (!(s > 0.0)) {
      std::ostringstream msg;
      msg << "calibrate_sigma_dif: nonpositive innovation variance at step " << (i + 1);
      throw CalibrationError(msg.str());
    }
    total += output.residuals.col(i).squaredNorm() / s;
  }
  SigmaCalibration result;
  result.sigma2 = total / static_cast<double>(N * output.residuals.rows());
  result.degenerate = !(result.sigma2 > 0.0) || !std::isfinite(result.sigma2);
  return result;
}

} // namespace odeinv
