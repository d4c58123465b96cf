#ifndef ODEINV_PROBLEMS_HPP
#define ODEINV_PROBLEMS_HPP

#include "odeinv/filter.hpp"
#include "odeinv/likelihood.hpp"

#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace odeinv {

/// One monomial contribution coef * prod(x[factors]) of parameter `param` to dx[state]/dt.
struct MonomialTerm {
  int param;
  int state;
  double coef;
  std::vector<int> factors;
};

/// Builds basis and basis Jacobian evaluators from a list of monomial terms.
void assign_monomial_basis(ProblemSpec &spec, std::vector<MonomialTerm> terms);

struct Benchmark {
  std::string label;
  ProblemSpec spec;
  Vector theta_star;
  Vector theta0;
  std::vector<double> data_times;
  double noise_var = 0.0;
  double h = 0.05;
  int burn_in = 0;

  TimeGrid grid() const { return grid(h); }
  TimeGrid grid(double step) const { return TimeGrid::aligned(step, spec.horizon, data_times); }
};

/// dx/dt = theta_1 x - theta_2 x^2 on [0, 3], x0 = 0.1, theta* = (3, 3).
Benchmark logistic();
Benchmark lotka_volterra();
Benchmark pst_linearized();
Benchmark guiy();

/// dx/dt = theta on [0, 1], x0 = 0: the filter is exact and J is known in closed form.
Benchmark constant_field();
/// dx/dt = 0 with one dummy parameter, x0 = 1.
Benchmark zero_field();

/// "logistic", "lv", "pst", "guiy", "constant" or "zero". Throws std::invalid_argument otherwise.
Benchmark benchmark_by_name(std::string_view name);
/// The four inference benchmarks (the auxiliary fields are not listed).
const std::vector<std::string> &benchmark_names();

/// Observations of the reference (Runge-Kutta) solution at theta* plus
/// N(0, noise_var) noise.
Dataset generate_data(const Benchmark &benchmark, std::mt19937_64 &rng);

} // namespace odeinv

#endif // ODEINV_PROBLEMS_HPP
