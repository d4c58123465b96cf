#include "odeinv/likelihood.hpp"

#include <cmath>

namespace odeinv {

Dataset Dataset::with_scalar_noise(std::vector<double> times, Vector z, double noise_var) {
  Dataset data;
  data.dim = times.empty() ? 1 : static_cast<int>(z.size() / static_cast<Eigen::Index>(times.size()));
  data.times = std::move(times);
  data.noise = Vector::Constant(z.size(), noise_var);
  data.z = std::move(z);
  data.validate();
  return data;
}

void Dataset::validate() const {
  if (times.empty()) {
    throw ContractError("Dataset: no observation times");
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || (i > 0 && times[i] <= times[i - 1])) {
      throw ContractError("Dataset: times must be nonnegative and strictly increasing");
    }
  }
  const Eigen::Index expected = static_cast<Eigen::Index>(times.size()) * dim;
  if (z.size() != expected || noise.size() != expected) {
    throw ContractError("Dataset: z and noise must have M*d entries");
  }
  if (!(noise.array() > 0.0).all()) {
    throw ContractError("Dataset: noise variances must be positive");
  }
}

LikelihoodModel::LikelihoodModel(Dataset data, const TimeGrid &grid, double R, const KernelConfig &cfg,
                                 JacobianVariant variant)
    : data_(std::move(data)), grid_(grid), R_(R), cfg_(cfg), variant_(variant) {
  data_.validate();
  if (grid_.num_data() != data_.num_times()) {
    throw ContractError("LikelihoodModel: grid and dataset disagree on the number of data times");
  }
  for (int i = 0; i < grid_.num_data(); ++i) {
    if (std::abs(grid_.data_time(i) - data_.times[static_cast<std::size_t>(i)]) > 1e-9 * std::max(1.0, data_.times[static_cast<std::size_t>(i)])) {
      throw ContractError("LikelihoodModel: data times are not aligned with the grid");
    }
  }
  prefactor_ = kernel_prefactor(grid_, R_, cfg_);
  P_ = filtering_variance(grid_, R_, cfg_);
  const int M = grid_.num_data();
  cov_ = data_.noise;
  for (int dim = 0; dim < data_.dim; ++dim) {
    cov_.segment(dim * M, M) += P_.cwiseMax(0.0);
  }
  llt_.compute(cov_.asDiagonal().toDenseMatrix());
  if (llt_.info() != Eigen::Success) {
    throw LinearAlgebraError("LikelihoodModel: P + noise is not positive definite");
  }
}

Vector LikelihoodModel::apply_inverse(const Vector &v) const { return llt_.solve(v); }
Matrix LikelihoodModel::apply_inverse(const Matrix &v) const { return llt_.solve(v); }

namespace {

void check_output(const LikelihoodModel &model, const FilterOutput &out) {
  if (out.grid.data_indices() != model.grid().data_indices() || out.dim() != model.data().dim) {
    throw ContractError("filter output does not match the likelihood model's grid");
  }
}

} // namespace

double neg_log_likelihood(const LikelihoodModel &model, const FilterOutput &out) {
  check_output(model, out);
  const Vector m = out.means_at_data();
  if (!m.allFinite()) {
    return kDivergedEnergy;
  }
  const Vector r = model.data().z - m;
  return 0.5 * r.dot(model.apply_inverse(r));
}

Vector gradient_estimate(const LikelihoodModel &model, const FilterOutput &out, const JacobianEstimate &J) {
  check_output(model, out);
  if (J.J.rows() != model.data().z.size()) {
    throw ContractError("gradient_estimate: Jacobian has wrong row count");
  }
  const Vector r = model.data().z - out.means_at_data();
  return -J.J.transpose() * model.apply_inverse(r);
}

Matrix hessian_estimate(const LikelihoodModel &model, const JacobianEstimate &J) {
  if (J.J.rows() != model.data().z.size()) {
    throw ContractError("hessian_estimate: Jacobian has wrong row count");
  }
  Matrix H = J.J.transpose() * model.apply_inverse(J.J);
  // exact symmetry for downstream Cholesky factorizations
  return 0.5 * (H + H.transpose());
}

namespace {

Eigen::LLT<Matrix> factor_prior(const GaussianPrior &prior, Eigen::Index n) {
  if (prior.mu.size() != n || prior.V.rows() != n || prior.V.cols() != n) {
    throw ContractError("GaussianPrior: shape does not match theta");
  }
  Eigen::LLT<Matrix> llt(prior.V);
  if (llt.info() != Eigen::Success) {
    throw ContractError("GaussianPrior: V must be symmetric positive definite");
  }
  return llt;
}

} // namespace

Vector bayesian_gradient(const LikelihoodModel &model, const FilterOutput &out, const JacobianEstimate &J,
                         const GaussianPrior &prior, const Vector &theta) {
  const auto llt = factor_prior(prior, theta.size());
  return gradient_estimate(model, out, J) + llt.solve(theta - prior.mu);
}

Matrix bayesian_hessian(const LikelihoodModel &model, const JacobianEstimate &J, const GaussianPrior &prior) {
  const Eigen::Index n = J.J.cols();
  const auto llt = factor_prior(prior, n);
  return hessian_estimate(model, J) + llt.solve(Matrix::Identity(n, n));
}

double unaware_neg_log_likelihood(const Dataset &data, const FilterOutput &out) {
  data.validate();
  if (out.grid.num_data() != data.num_times() || out.dim() != data.dim) {
    throw ContractError("unaware_neg_log_likelihood: output does not match the dataset");
  }
  const Vector m = out.means_at_data();
  if (!m.allFinite()) {
    return kDivergedEnergy;
  }
  const Vector r = data.z - m;
  return 0.5 * (r.array().square() / data.noise.array()).sum();
}

Matrix extended_design(const Matrix &J, int num_times, int dim) {
  if (J.rows() != static_cast<Eigen::Index>(num_times) * dim) {
    throw ContractError("extended_design: J must have M*d rows");
  }
  Matrix design = Matrix::Zero(J.rows(), dim + J.cols());
  for (int d = 0; d < dim; ++d) {
    design.block(static_cast<Eigen::Index>(d) * num_times, d, num_times, 1).setOnes();
  }
  design.rightCols(J.cols()) = J;
  return design;
}

} // namespace odeinv
