#include "odeinv/filter.hpp"
#include "odeinv/problems.hpp"
#include "odeinv/reference_solver.hpp"

#include <doctest.h>

#include <random>

using namespace odeinv;
using doctest::Approx;

namespace {

// sigma^2 * int_0^h e^{F s} L L^T e^{F^T s} ds with F = [[0,1],[0,0]], L = [0,1]^T,
// by the composite trapezoid rule.
Eigen::Matrix2d process_noise_by_quadrature(double h, double sigma2, int panels = 20000) {
  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  for (int i = 0; i <= panels; ++i) {
    const double s = h * i / panels;
    Eigen::Matrix2d expF;
    expF << 1.0, s, 0.0, 1.0;
    const Eigen::Vector2d v = expF * Eigen::Vector2d(0.0, 1.0);
    const double w = (i == 0 || i == panels) ? 0.5 : 1.0;
    acc += w * v * v.transpose();
  }
  return sigma2 * acc * (h / panels);
}

ProblemSpec drift_spec() { return constant_field().spec; }

} // namespace

TEST_SUITE("filter") {

TEST_CASE("discretized prior matches the quadrature oracle") {
  const TransitionModel unit = discretize_prior(1.0, KernelConfig{1.0});
  Eigen::Matrix2d A;
  A << 1.0, 1.0, 0.0, 1.0;
  CHECK((unit.A - A).norm() == 0.0);
  CHECK((unit.Q - process_noise_by_quadrature(1.0, 1.0)).norm() < 1e-8);
  CHECK(unit.Q(0, 0) == Approx(1.0 / 3.0));
  CHECK(unit.Q(0, 1) == Approx(0.5));

  const TransitionModel small = discretize_prior(0.05, KernelConfig{1.0});
  CHECK(small.Q(1, 1) == Approx(0.05).epsilon(1e-14));
  CHECK((small.Q - process_noise_by_quadrature(0.05, 1.0)).norm() < 1e-10);

  const TransitionModel scaled = discretize_prior(0.3, KernelConfig{2.5});
  CHECK((scaled.Q - process_noise_by_quadrature(0.3, 6.25)).norm() < 1e-8);

  const TransitionModel tiny = discretize_prior(1e-12, KernelConfig{1.0});
  CHECK((tiny.A - Eigen::Matrix2d::Identity()).norm() < 1e-11);
  CHECK(tiny.Q.norm() < 1e-11);

  CHECK_THROWS_AS(discretize_prior(0.0, KernelConfig{1.0}), std::domain_error);
  CHECK_THROWS_AS(discretize_prior(-0.1, KernelConfig{1.0}), std::domain_error);
}

TEST_CASE("zero field stays at x0") {
  const Benchmark b = zero_field();
  const FilterOutput out = filter_solve(b.spec, Vector::Constant(1, 3.0), b.grid(), 0.0, KernelConfig{1.0});
  CHECK((out.filter_means.array() == 1.0).all());
  CHECK(out.Y.isZero(0.0));
}

TEST_CASE("constant field is solved exactly") {
  const ProblemSpec spec = drift_spec();
  const TimeGrid grid(0.1, 10, {10});
  const FilterOutput out = filter_solve(spec, Vector::Constant(1, 2.0), grid, 0.0, KernelConfig{1.0});
  for (int i = 0; i <= 10; ++i) {
    CHECK(std::abs(out.filter_means(0, i) - 0.2 * i) <= 1e-12);
  }
  CHECK(out.residuals.isZero(0.0));
}

TEST_CASE("Lotka-Volterra forward solve tracks the Runge-Kutta oracle") {
  const Benchmark b = lotka_volterra();
  const TimeGrid grid = b.grid(0.05);
  const FilterOutput out = filter_solve(b.spec, b.theta_star, grid, 0.0, KernelConfig{1.0});
  std::vector<double> times;
  for (int i = 1; i <= grid.steps(); ++i) {
    times.push_back(grid.time(i));
  }
  const Matrix truth = solve_reference([&](const Vector &x) { return b.spec.field(x, b.theta_star); }, b.spec.x0,
                                       times);
  double worst = 0.0;
  for (int i = 1; i <= grid.steps(); ++i) {
    const Vector err = out.filter_means.col(i) - truth.col(i - 1);
    worst = std::max(worst, err.norm() / truth.col(i - 1).norm());
  }
  CHECK(worst <= 0.5);
}

TEST_CASE("filter variances do not depend on theta") {
  const Benchmark b = logistic();
  const TimeGrid grid = b.grid();
  const Vector reference = filter_solve(b.spec, b.theta_star, grid, 1e-6, KernelConfig{0.7}).filter_variances;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 4.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector theta = Vector::NullaryExpr(2, [&] { return u(rng); });
    const Vector v = filter_solve(b.spec, theta, grid, 1e-6, KernelConfig{0.7}).filter_variances;
    CHECK(v == reference);
  }
  CHECK((reference.array() >= 0.0).all());
}

TEST_CASE("covariance stays symmetric positive semi-definite through the recursion") {
  const TransitionModel model = discretize_prior(0.1, KernelConfig{1.3});
  GaussianState s;
  s.mean = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, 3);
  s.cov.setZero();
  for (int i = 0; i < 200; ++i) {
    s = update_derivative(predict(s, model), Vector::Constant(3, 1.0), 0.0);
    CHECK(s.cov(0, 1) == s.cov(1, 0));
    const Eigen::Vector2d eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(s.cov).eigenvalues();
    CHECK(eig.minCoeff() >= -1e-12 * s.cov.trace());
  }
}

TEST_CASE("position error shrinks as h is halved") {
  const Benchmark b = logistic();
  double previous = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 4; ++k) {
    const TimeGrid grid = b.grid().refined(1 << k);
    const FilterOutput out = filter_solve(b.spec, b.theta_star, grid, 0.0, KernelConfig{1.0});
    std::vector<double> times;
    for (int i = 1; i <= grid.steps(); ++i) {
      times.push_back(grid.time(i));
    }
    const Matrix truth = solve_reference([&](const Vector &x) { return b.spec.field(x, b.theta_star); }, b.spec.x0,
                                         times);
    const double err = (out.filter_means.rightCols(grid.steps()) - truth).cwiseAbs().maxCoeff();
    CHECK(err < previous);
    previous = err;
  }
}

TEST_CASE("stored Y matches the basis at the stored predictive means") {
  const Benchmark b = lotka_volterra();
  const FilterOutput out = filter_solve(b.spec, b.theta_star, b.grid(), 0.0, KernelConfig{1.0});
  const int N = out.grid.steps();
  const Matrix f0 = b.spec.basis(b.spec.x0);
  double worst = 0.0;
  for (int i = 0; i < N; ++i) {
    const Matrix f = b.spec.basis(out.predictive_means.col(i));
    for (int dim = 0; dim < 2; ++dim) {
      const Eigen::RowVectorXd expected = f.row(dim) - f0.row(dim);
      const double scale = std::max(1.0, expected.norm());
      worst = std::max(worst, (out.Y.row(dim * N + i) - expected).norm() / scale);
    }
  }
  CHECK(worst <= 1e-14);
}

TEST_CASE("contract and divergence errors") {
  const Benchmark b = logistic();
  CHECK_THROWS_AS(filter_solve(b.spec, Vector::Ones(3), b.grid(), 0.0, KernelConfig{}), ContractError);
  CHECK_THROWS_AS(filter_solve(b.spec, Vector::Ones(2), TimeGrid(0.1, 10, {5}), 0.0, KernelConfig{}),
                  ContractError);
  CHECK_THROWS_AS(filter_solve(b.spec, Vector::Ones(2), b.grid(), -1.0, KernelConfig{}), ContractError);
  Vector nan_theta = Vector::Ones(2);
  nan_theta(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(filter_solve(b.spec, nan_theta, b.grid(), 0.0, KernelConfig{}), ContractError);

  Vector explosive(2);
  explosive << 0.0, -1e4;
  try {
    (void)filter_solve(b.spec, explosive, b.grid(), 0.0, KernelConfig{});
    FAIL("expected divergence");
  } catch (const DivergenceError &e) {
    CHECK(e.step() >= 1);
    CHECK(e.step() <= b.grid().steps());
  }
}

TEST_CASE("sigma calibration") {
  const Benchmark c = constant_field();
  const FilterOutput exact = filter_solve(c.spec, c.theta_star, c.grid(), 0.0, KernelConfig{1.0});
  const SigmaCalibration degenerate = calibrate_sigma_dif(exact);
  CHECK(degenerate.degenerate);
  CHECK(degenerate.sigma_dif_or(0.25) == 0.25);

  FilterOutput synthetic = exact;
  synthetic.residuals.setConstant(0.3);
  synthetic.innovation_variances.setConstant(0.02);
  CHECK(calibrate_sigma_dif(synthetic).sigma2 == Approx(0.09 / 0.02).epsilon(1e-14));
  synthetic.innovation_variances(2) = 0.0;
  CHECK_THROWS_AS(calibrate_sigma_dif(synthetic), CalibrationError);

  const Benchmark b = logistic();
  const SigmaCalibration cal = calibrate_sigma_dif(filter_solve(b.spec, b.theta_star, b.grid(), 0.0, KernelConfig{1.0}));
  CHECK(std::isfinite(cal.sigma2));
  CHECK(cal.sigma2 > 0.0);
  CHECK_FALSE(cal.degenerate);
}

} // TEST_SUITE
