#ifndef ODEINV_REFERENCE_SOLVER_HPP
#define ODEINV_REFERENCE_SOLVER_HPP

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace odeinv {

struct ReferenceSolverOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-10;
  long max_steps = 5'000'000;
};

/// High-accuracy solution of dx/dt = field(x), x(0) = x0, at the requested
/// nondecreasing times, by adaptive Dormand-Prince 5(4) integration.
/// Returns a d x times.size() matrix. Throws OracleError on failure.
Eigen::MatrixXd solve_reference(const std::function<Eigen::VectorXd(const Eigen::VectorXd &)> &field,
                                const Eigen::VectorXd &x0, const std::vector<double> &times,
                                const ReferenceSolverOptions &options = {});

} // namespace odeinv

#endif // ODEINV_REFERENCE_SOLVER_HPP
