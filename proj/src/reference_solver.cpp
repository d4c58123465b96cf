#include "odeinv/reference_solver.hpp"

#include "odeinv/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace odeinv {

namespace {

// Dormand-Prince tableau
constexpr std::array<double, 6> c{1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// difference between the 5th and 4th order weights
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

} // namespace

Eigen::MatrixXd solve_reference(const std::function<Eigen::VectorXd(const Eigen::VectorXd &)> &field,
                                const Eigen::VectorXd &x0, const std::vector<double> &times,
                                const ReferenceSolverOptions &options) {
  using Eigen::VectorXd;
  Eigen::MatrixXd out(x0.size(), static_cast<Eigen::Index>(times.size()));
  if (!std::is_sorted(times.begin(), times.end()) || (!times.empty() && times.front() < 0.0)) {
    throw OracleError("reference solver: output times must be nonnegative and nondecreasing");
  }

  double t = 0.0;
  VectorXd x = x0;
  VectorXd k1 = field(x);
  double step = 1e-4 * std::max(1.0, times.empty() ? 1.0 : times.back());
  long steps_taken = 0;

  for (std::size_t idx = 0; idx < times.size(); ++idx) {
    const double target = times[idx];
    while (t < target) {
      if (++steps_taken > options.max_steps) {
        throw OracleError("reference solver: step budget exhausted");
      }
      const bool last = t + step >= target;
      const double dt = last ? target - t : step;

      const VectorXd k2 = field(x + dt * a21 * k1);
      const VectorXd k3 = field(x + dt * (a31 * k1 + a32 * k2));
      const VectorXd k4 = field(x + dt * (a41 * k1 + a42 * k2 + a43 * k3));
      const VectorXd k5 = field(x + dt * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const VectorXd k6 = field(x + dt * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      const VectorXd x_new = x + dt * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const VectorXd k7 = field(x_new);
      const VectorXd err = dt * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      const VectorXd scale =
          (options.abs_tol + options.rel_tol * x.cwiseAbs().cwiseMax(x_new.cwiseAbs()).array()).matrix();
      const double err_norm = std::sqrt((err.array() / scale.array()).square().mean());
      if (!std::isfinite(err_norm) || !x_new.allFinite()) {
        step = 0.25 * dt;
        if (step < 1e-14 * std::max(1.0, t)) {
          throw OracleError("reference solver: non-finite solution");
        }
        continue;
      }
      if (err_norm <= 1.0) {
        t = last ? target : t + dt;
        x = x_new;
        k1 = k7;
      }
      const double factor = err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
      const double proposed = dt * factor;
      // a shortened final step must not shrink the regular step size
      step = (last && err_norm <= 1.0) ? std::max(step, proposed) : proposed;
      if (step < 1e-14 * std::max(1.0, t)) {
        throw OracleError("reference solver: step size underflow");
      }
    }
    out.col(static_cast<Eigen::Index>(idx)) = x;
  }
  return out;
}

} // namespace odeinv
