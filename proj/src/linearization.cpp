#include "odeinv/linearization.hpp"

#include <cmath>
#include <string>

namespace odeinv {

std::string_view to_string(JacobianVariant variant) {
  switch (variant) {
  case JacobianVariant::literal:
    return "literal";
  case JacobianVariant::drift_corrected:
    return "drift_corrected";
  }
  return "unknown";
}

JacobianVariant parse_jacobian_variant(std::string_view text) {
  if (text == "literal") {
    return JacobianVariant::literal;
  }
  if (text == "drift_corrected" || text == "drift") {
    return JacobianVariant::drift_corrected;
  }
  throw ContractError("unknown Jacobian variant: " + std::string(text));
}

namespace {

// Cholesky factor of the derivative Gram matrix over h, 2h, ..., L h plus R I.
// The Gram matrices for all data times are leading principal submatrices of it,
// so their factors are leading blocks of this one.
class DerivativeGram {
public:
  DerivativeGram(const TimeGrid &grid, double R, const KernelConfig &cfg) : grid_(grid), cfg_(cfg) {
    cfg.validate();
    if (grid.num_data() == 0) {
      throw ContractError("kernel prefactor needs at least one data time");
    }
    if (R < 0.0) {
      throw ContractError("measurement variance R must be nonnegative");
    }
    const int L = grid.max_data_index();
    const double r_eff = effective_measurement_variance(R);
    Matrix gram(L, L);
    for (int j = 0; j < L; ++j) {
      for (int k = 0; k <= j; ++k) {
        const double v = kernels::ddk(grid.time(j + 1), grid.time(k + 1), cfg);
        gram(j, k) = v;
        gram(k, j) = v;
      }
      gram(j, j) += r_eff;
    }
    llt_.compute(gram);
    if (llt_.info() != Eigen::Success) {
      throw LinearAlgebraError("derivative Gram matrix is not positive definite");
    }
    lower_ = llt_.matrixL();
  }

  // Cross-covariances between the position at data time i and the derivatives at h..l_i h.
  Vector cross_covariance(int i) const {
    const int l = grid_.data_indices()[i];
    const double t = grid_.data_time(i);
    Vector c(l);
    for (int j = 0; j < l; ++j) {
      c(j) = kernels::kd(t, grid_.time(j + 1), cfg_);
    }
    return c;
  }

  // L_l^{-1} c for the leading l x l block.
  Vector whiten(const Vector &c) const {
    const Eigen::Index l = c.size();
    return lower_.topLeftCorner(l, l).triangularView<Eigen::Lower>().solve(c);
  }

  Vector solve(const Vector &c) const {
    const Eigen::Index l = c.size();
    return lower_.topLeftCorner(l, l).transpose().triangularView<Eigen::Upper>().solve(whiten(c));
  }

private:
  const TimeGrid &grid_;
  KernelConfig cfg_;
  Eigen::LLT<Matrix> llt_;
  Matrix lower_;
};

} // namespace

KernelPrefactor kernel_prefactor(const TimeGrid &grid, double R, const KernelConfig &cfg) {
  const DerivativeGram gram(grid, R, cfg);
  KernelPrefactor prefactor;
  prefactor.grid = grid;
  prefactor.R = R;
  prefactor.cfg = cfg;
  prefactor.K = Matrix::Zero(grid.num_data(), grid.steps());
  for (int i = 0; i < grid.num_data(); ++i) {
    const Vector kappa = gram.solve(gram.cross_covariance(i));
    prefactor.K.row(i).head(kappa.size()) = kappa.transpose();
  }
  return prefactor;
}

Vector filtering_variance(const TimeGrid &grid, double R, const KernelConfig &cfg) {
  const DerivativeGram gram(grid, R, cfg);
  Vector P(grid.num_data());
  for (int i = 0; i < grid.num_data(); ++i) {
    const double t = grid.data_time(i);
    P(i) = kernels::k(t, t, cfg) - gram.whiten(gram.cross_covariance(i)).squaredNorm();
  }
  return P;
}

Matrix apply_prefactor(const KernelPrefactor &prefactor, const Matrix &stacked) {
  const Eigen::Index N = prefactor.K.cols();
  const Eigen::Index M = prefactor.K.rows();
  if (N == 0 || stacked.rows() % N != 0) {
    throw ContractError("apply_prefactor: row count is not a multiple of N");
  }
  const Eigen::Index d = stacked.rows() / N;
  Matrix out(M * d, stacked.cols());
  for (Eigen::Index dim = 0; dim < d; ++dim) {
    out.middleRows(dim * M, M).noalias() = prefactor.K * stacked.middleRows(dim * N, N);
  }
  return out;
}

JacobianEstimate jacobian_estimate(const KernelPrefactor &prefactor, const FilterOutput &out,
                                   JacobianVariant variant) {
  if (prefactor.K.cols() != out.grid.steps() || prefactor.grid.data_indices() != out.grid.data_indices()) {
    throw ContractError("jacobian_estimate: prefactor and filter output use different grids");
  }
  JacobianEstimate est;
  est.variant = variant;
  est.theta_used = out.theta;
  est.J = apply_prefactor(prefactor, out.Y);
  if (variant == JacobianVariant::drift_corrected) {
    const int M = prefactor.grid.num_data();
    for (int dim = 0; dim < out.dim(); ++dim) {
      for (int i = 0; i < M; ++i) {
        est.J.row(dim * M + i) += prefactor.grid.data_time(i) * out.basis_at_x0.row(dim);
      }
    }
  }
  return est;
}

Vector gp_form_means(const KernelPrefactor &prefactor, const FilterOutput &out, JacobianVariant variant) {
  const JacobianEstimate est = jacobian_estimate(prefactor, out, variant);
  const int M = prefactor.grid.num_data();
  Vector means = est.J * out.theta;
  for (int dim = 0; dim < out.dim(); ++dim) {
    means.segment(dim * M, M).array() += out.filter_means(dim, 0);
  }
  return means;
}

namespace {

template <typename Extract>
Matrix central_differences(const ProblemSpec &spec, const Vector &theta, const TimeGrid &grid, double R,
                           const KernelConfig &cfg, double delta, Extract extract) {
  if (!(delta > 0.0)) {
    throw ContractError("finite-difference step must be positive");
  }
  Matrix jac;
  for (int k = 0; k < spec.n_params; ++k) {
    const double step = delta * std::max(1.0, std::abs(theta(k)));
    Vector plus = theta, minus = theta;
    plus(k) += step;
    minus(k) -= step;
    Vector fp, fm;
    try {
      fp = extract(filter_solve(spec, plus, grid, R, cfg));
      fm = extract(filter_solve(spec, minus, grid, R, cfg));
    } catch (const DivergenceError &e) {
      throw OracleError("finite-difference oracle: perturbed solve diverged for parameter " +
                        std::to_string(k) + ": " + e.what());
    }
    if (jac.size() == 0) {
      jac.resize(fp.size(), spec.n_params);
    }
    jac.col(k) = (fp - fm) / (plus(k) - minus(k));
  }
  return jac;
}

} // namespace

Matrix true_jacobian_fd(const ProblemSpec &spec, const Vector &theta, const TimeGrid &grid, double R,
                        const KernelConfig &cfg, double delta) {
  return central_differences(spec, theta, grid, R, cfg, delta,
                             [](const FilterOutput &out) { return out.means_at_data(); });
}

SensitivityDecomposition sensitivity_fd(const ProblemSpec &spec, const Vector &theta, const TimeGrid &grid,
                                        double R, const KernelConfig &cfg, double delta) {
  const int d = spec.dim;
  const int n = spec.n_params;
  const int N = grid.steps();
  // column k: d/dtheta_k of the predictive means, flattened column-major (dim fastest)
  const Matrix dpred = central_differences(spec, theta, grid, R, cfg, delta, [](const FilterOutput &out) {
    return Eigen::Map<const Vector>(out.predictive_means.data(), out.predictive_means.size()).eval();
  });
  const FilterOutput base = filter_solve(spec, theta, grid, R, cfg);

  SensitivityDecomposition dec;
  dec.S.resize(static_cast<Eigen::Index>(N) * d, n);
  dec.Lambda.assign(static_cast<std::size_t>(N) * d, Matrix());
  for (int j = 0; j < N; ++j) {
    const Matrix jac = spec.basis_jacobian(base.predictive_means.col(j));
    // dm(e, k) = d m^-_e(jh) / d theta_k
    const Matrix dm = dpred.middleRows(static_cast<Eigen::Index>(j) * d, d);
    for (int dim = 0; dim < d; ++dim) {
      Matrix lambda(n, n);
      for (int l = 0; l < n; ++l) {
        // row `dim` of Df_l times the parameter sensitivities
        lambda.col(l) = (jac.block(dim, l * d, 1, d) * dm).transpose();
      }
      const Eigen::Index row = static_cast<Eigen::Index>(dim) * N + j;
      // entry k is sum_l theta_l lambda_kl, the derivative of (Y theta) w.r.t. theta_k
      dec.S.row(row) = (lambda * theta).transpose();
      dec.Lambda[static_cast<std::size_t>(row)] = std::move(lambda);
    }
  }
  return dec;
}

} // namespace odeinv
