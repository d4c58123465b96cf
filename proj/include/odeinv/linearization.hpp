#ifndef ODEINV_LINEARIZATION_HPP
#define ODEINV_LINEARIZATION_HPP

#include "odeinv/filter.hpp"

#include <string_view>
#include <vector>

namespace odeinv {

/// How the constant part of the filtering mean is attributed.
///
/// `literal` is J = K Y. `drift_corrected` adds the prior drift term
/// D(i, j) = t_i f_j(x0), which the filter's initial derivative mean
/// f(x0, theta) introduces; with it, x0 + J theta reproduces the filter
/// means exactly.
enum class JacobianVariant { literal, drift_corrected };

std::string_view to_string(JacobianVariant variant);
JacobianVariant parse_jacobian_variant(std::string_view text);

/// Default variant; see docs/drift_resolution.md for the measurement behind it.
inline constexpr JacobianVariant kDefaultJacobianVariant = JacobianVariant::drift_corrected;

/// M x N matrix mapping derivative residuals to filtering means at data times.
/// Row i is zero beyond column l_i. Independent of theta.
struct KernelPrefactor {
  Matrix K;
  TimeGrid grid;
  double R = 0.0;
  KernelConfig cfg;
};

KernelPrefactor kernel_prefactor(const TimeGrid &grid, double R, const KernelConfig &cfg);

/// GP-form posterior position variance P(t_i) at each data time (length M).
Vector filtering_variance(const TimeGrid &grid, double R, const KernelConfig &cfg);

struct JacobianEstimate {
  Matrix J; ///< (M d) x n, dimension-major rows
  JacobianVariant variant = kDefaultJacobianVariant;
  Vector theta_used;
};

JacobianEstimate jacobian_estimate(const KernelPrefactor &prefactor, const FilterOutput &out,
                                   JacobianVariant variant = kDefaultJacobianVariant);

/// Applies K to each dimension block of a dimension-major (N d) x c matrix.
Matrix apply_prefactor(const KernelPrefactor &prefactor, const Matrix &stacked);

/// Filtering means at data times rebuilt in GP form, x0 + J theta.
Vector gp_form_means(const KernelPrefactor &prefactor, const FilterOutput &out,
                     JacobianVariant variant = kDefaultJacobianVariant);

/// Relative finite-difference step used by the oracles below.
inline constexpr double kDefaultFdStep = 1e-6;

/// Central differences of the filtering means at data times w.r.t. theta.
/// The step for theta_k is delta * max(1, |theta_k|).
Matrix true_jacobian_fd(const ProblemSpec &spec, const Vector &theta, const TimeGrid &grid, double R,
                        const KernelConfig &cfg, double delta = kDefaultFdStep);

struct SensitivityDecomposition {
  /// (N d) x n; row dim*N + (j-1) is Lambda_j^T theta for that dimension.
  Matrix S;
  /// n x n matrices lambda_kl, indexed like the rows of S.
  std::vector<Matrix> Lambda;
};

/// Sensitivity term with the parameter derivatives of the predictive means
/// taken by central differences and the state Jacobians from the basis.
SensitivityDecomposition sensitivity_fd(const ProblemSpec &spec, const Vector &theta, const TimeGrid &grid,
                                        double R, const KernelConfig &cfg, double delta = kDefaultFdStep);

} // namespace odeinv

#endif // ODEINV_LINEARIZATION_HPP
