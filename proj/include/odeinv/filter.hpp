#ifndef ODEINV_FILTER_HPP
#define ODEINV_FILTER_HPP

#include "odeinv/errors.hpp"
#include "odeinv/kernels.hpp"

#include <Eigen/Dense>

#include <functional>
#include <random>
#include <string>

namespace odeinv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// ODE dx/dt = sum_j theta_j f_j(x) with known initial value.
struct ProblemSpec {
  std::string name;
  int dim = 1;
  int n_params = 1;
  /// d x n matrix whose column j is f_j(x).
  std::function<Matrix(const Vector &)> basis;
  /// d x (d n) matrix [Df_1(x) ... Df_n(x)] of state Jacobians.
  std::function<Matrix(const Vector &)> basis_jacobian;
  /// Directly coded f(x, theta), kept to cross-check the basis split.
  std::function<Vector(const Vector &, const Vector &)> reference_field;
  Vector x0;
  double horizon = 1.0;

  Vector field(const Vector &x, const Vector &theta) const { return basis(x) * theta; }
};

/// Largest relative deviations found by `verify_basis`.
struct BasisCheck {
  double field_rel_error = 0.0;
  double jacobian_rel_error = 0.0;
};

/// Compares the basis sum with the reference field and the basis Jacobians
/// with central differences at `samples` random points around x0.
BasisCheck verify_basis(const ProblemSpec &spec, std::mt19937_64 &rng, int samples = 50);

/// Discrete-time IBM transition for one state dimension.
struct TransitionModel {
  Eigen::Matrix2d A;
  Eigen::Matrix2d Q;
  double h = 0.0;
};

TransitionModel discretize_prior(double h, const KernelConfig &cfg);

/// Filter belief: per-dimension (position, derivative) means sharing one 2x2 covariance.
struct GaussianState {
  Eigen::Matrix<double, 2, Eigen::Dynamic> mean;
  Eigen::Matrix2d cov;
};

GaussianState predict(const GaussianState &state, const TransitionModel &model);

/// Kalman update on a derivative observation y (one entry per dimension) with
/// noise variance R, using the Joseph form for the covariance.
GaussianState update_derivative(const GaussianState &predicted, const Vector &y, double R);

/// Measurement variances below this are raised to it before any inversion.
inline constexpr double kMeasurementVarianceFloor = 1e-12;
inline double effective_measurement_variance(double R) { return std::max(R, kMeasurementVarianceFloor); }

struct FilterOutput {
  TimeGrid grid;
  Vector theta;
  double R = 0.0;
  KernelConfig cfg;

  /// d x (N+1) filtered positions at 0, h, ..., N h.
  Matrix filter_means;
  /// d x N predicted positions at h, ..., N h.
  Matrix predictive_means;
  /// N+1 filtered position variances, shared by all dimensions.
  Vector filter_variances;
  /// (N d) x n evaluation factor, dimension-major: row dim*N + (i-1) holds
  /// [f_j(m^-(ih)) - f_j(x0)]_dim.
  Matrix Y;
  /// d x n basis evaluated at x0.
  Matrix basis_at_x0;
  /// d x N innovation residuals and the N innovation variances.
  Matrix residuals;
  Vector innovation_variances;

  int dim() const { return static_cast<int>(filter_means.rows()); }
  /// Filtered positions at data times, stacked dimension-major (length M d).
  Vector means_at_data() const;
  /// Filtered position variances at data times (length M).
  Vector variances_at_data() const;
};

/// Runs the Gaussian ODE filter. Throws DivergenceError on non-finite values.
FilterOutput filter_solve(const ProblemSpec &spec, const Vector &theta, const TimeGrid &grid, double R,
                          const KernelConfig &cfg);

/// Global quasi maximum-likelihood estimate of sigma_dif^2.
struct SigmaCalibration {
  double sigma2 = 0.0;
  bool degenerate = false;

  double sigma_dif_or(double fallback) const { return degenerate ? fallback : std::sqrt(sigma2); }
};

/// Expects an output computed with sigma_dif = 1. Averages r^T S^{-1} r over
/// all N steps and d dimensions.
SigmaCalibration calibrate_sigma_dif(const FilterOutput &output);

} // namespace odeinv

#endif // ODEINV_FILTER_HPP
