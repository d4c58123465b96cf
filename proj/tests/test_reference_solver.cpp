#include "odeinv/errors.hpp"
#include "odeinv/reference_solver.hpp"

#include <doctest.h>

#include <cmath>

using namespace odeinv;
using doctest::Approx;

TEST_SUITE("reference_solver") {

TEST_CASE("exponential decay") {
  const auto field = [](const Eigen::VectorXd &x) -> Eigen::VectorXd { return -0.7 * x; };
  const Eigen::MatrixXd sol = solve_reference(field, Eigen::VectorXd::Constant(1, 2.0), {0.0, 0.5, 3.0, 10.0});
  CHECK(sol(0, 0) == 2.0);
  for (double t : {0.5, 3.0, 10.0}) {
    const int col = t == 0.5 ? 1 : t == 3.0 ? 2 : 3;
    CHECK(sol(0, col) == Approx(2.0 * std::exp(-0.7 * t)).epsilon(1e-9));
  }
}

TEST_CASE("harmonic oscillator over several periods") {
  const auto field = [](const Eigen::VectorXd &x) -> Eigen::VectorXd {
    Eigen::VectorXd dx(2);
    dx << x(1), -x(0);
    return dx;
  };
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.0;
  const Eigen::MatrixXd sol = solve_reference(field, x0, {20.0});
  CHECK(sol(0, 0) == Approx(std::cos(20.0)).epsilon(1e-8));
  CHECK(sol(1, 0) == Approx(-std::sin(20.0)).epsilon(1e-8));
}

TEST_CASE("failures are oracle errors") {
  const auto blowup = [](const Eigen::VectorXd &x) -> Eigen::VectorXd { return x.cwiseProduct(x); };
  CHECK_THROWS_AS(solve_reference(blowup, Eigen::VectorXd::Ones(1), {2.0}), OracleError);
  const auto decay = [](const Eigen::VectorXd &x) -> Eigen::VectorXd { return -x; };
  CHECK_THROWS_AS(solve_reference(decay, Eigen::VectorXd::Ones(1), {1.0, 0.5}), OracleError);
}

} // TEST_SUITE
