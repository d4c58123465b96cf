#ifndef ODEINV_LIKELIHOOD_HPP
#define ODEINV_LIKELIHOOD_HPP

#include "odeinv/filter.hpp"
#include "odeinv/linearization.hpp"

#include <limits>
#include <vector>

namespace odeinv {

/// Noisy observations at grid-aligned times, stacked dimension-major:
/// z = [z_1(t_1..t_M), ..., z_d(t_1..t_M)].
struct Dataset {
  std::vector<double> times;
  int dim = 1;
  Vector z;
  /// Per-observation noise variances, same stacking as z.
  Vector noise;

  static Dataset with_scalar_noise(std::vector<double> times, Vector z, double noise_var);
  int num_times() const { return static_cast<int>(times.size()); }
  void validate() const;
};

/// Gaussian prior N(mu, V) on theta.
struct GaussianPrior {
  Vector mu;
  Matrix V;
};

/// Uncertainty-aware likelihood N(z; m_theta, P + noise). Everything that does
/// not depend on theta (K, P, the factorized covariance) is built once here.
class LikelihoodModel {
public:
  LikelihoodModel(Dataset data, const TimeGrid &grid, double R, const KernelConfig &cfg,
                  JacobianVariant variant = kDefaultJacobianVariant);

  const Dataset &data() const { return data_; }
  const TimeGrid &grid() const { return grid_; }
  double R() const { return R_; }
  const KernelConfig &kernel_config() const { return cfg_; }
  JacobianVariant variant() const { return variant_; }
  const KernelPrefactor &prefactor() const { return prefactor_; }
  /// P(t_i), length M.
  const Vector &filter_variance() const { return P_; }
  /// Diagonal of P + noise, length M d.
  const Vector &covariance_diagonal() const { return cov_; }

  /// (P + noise)^{-1} v.
  Vector apply_inverse(const Vector &v) const;
  Matrix apply_inverse(const Matrix &v) const;

  JacobianEstimate jacobian(const FilterOutput &out) const { return jacobian_estimate(prefactor_, out, variant_); }

private:
  Dataset data_;
  TimeGrid grid_;
  double R_;
  KernelConfig cfg_;
  JacobianVariant variant_;
  KernelPrefactor prefactor_;
  Vector P_;
  Vector cov_;
  Eigen::LLT<Matrix> llt_;
};

inline constexpr double kDivergedEnergy = std::numeric_limits<double>::infinity();

/// E = 1/2 (z - m)^T (P + noise)^{-1} (z - m); +inf when m is not finite.
double neg_log_likelihood(const LikelihoodModel &model, const FilterOutput &out);

/// -J^T (P + noise)^{-1} (z - m).
Vector gradient_estimate(const LikelihoodModel &model, const FilterOutput &out, const JacobianEstimate &J);

/// J^T (P + noise)^{-1} J.
Matrix hessian_estimate(const LikelihoodModel &model, const JacobianEstimate &J);

/// Gradient and Hessian of the negative log-posterior under a Gaussian prior:
/// g + V^{-1}(theta - mu) and H + V^{-1}.
Vector bayesian_gradient(const LikelihoodModel &model, const FilterOutput &out, const JacobianEstimate &J,
                         const GaussianPrior &prior, const Vector &theta);
Matrix bayesian_hessian(const LikelihoodModel &model, const JacobianEstimate &J, const GaussianPrior &prior);

/// 1/2 (z - m)^T noise^{-1} (z - m), ignoring the solver's uncertainty.
double unaware_neg_log_likelihood(const Dataset &data, const FilterOutput &out);

/// [1 J] per dimension: (M d) x (d + n) design for the parameter [x0; theta].
Matrix extended_design(const Matrix &J, int num_times, int dim);

} // namespace odeinv

#endif // ODEINV_LIKELIHOOD_HPP
