#include "odeinv/likelihood.hpp"
#include "odeinv/problems.hpp"

#include <doctest.h>

#include <random>

using namespace odeinv;
using doctest::Approx;

namespace {

// x(t) = 1 on [0, T] with a single data time at T.
struct ScalarSetup {
  ProblemSpec spec;
  TimeGrid grid;
  FilterOutput out;
  double P = 0.0;
};

ScalarSetup scalar_setup(double T = 1.0) {
  ScalarSetup s;
  s.spec = zero_field().spec;
  s.spec.horizon = T;
  s.grid = TimeGrid(T, 1, {1});
  s.out = filter_solve(s.spec, Vector::Ones(1), s.grid, 0.0, KernelConfig{1.0});
  s.P = filtering_variance(s.grid, 0.0, KernelConfig{1.0})(0);
  return s;
}

LikelihoodModel scalar_model(const ScalarSetup &s, double z, double total_variance) {
  return LikelihoodModel(Dataset::with_scalar_noise({s.grid.data_time(0)}, Vector::Constant(1, z), total_variance - s.P),
                         s.grid, 0.0, KernelConfig{1.0});
}

JacobianEstimate fixed_jacobian(Matrix J) {
  JacobianEstimate est;
  est.J = std::move(J);
  return est;
}

} // namespace

TEST_SUITE("likelihood") {

TEST_CASE("negative log-likelihood") {
  const ScalarSetup s = scalar_setup();
  CHECK(neg_log_likelihood(scalar_model(s, 1.0, 2.0), s.out) == 0.0);
  CHECK(neg_log_likelihood(scalar_model(s, 2.0, 2.0), s.out) == Approx(0.25).epsilon(1e-14));
  CHECK(neg_log_likelihood(scalar_model(s, 2.0, 4.0), s.out) == Approx(0.125).epsilon(1e-14));

  FilterOutput broken = s.out;
  broken.filter_means(0, 1) = std::numeric_limits<double>::infinity();
  CHECK(neg_log_likelihood(scalar_model(s, 2.0, 2.0), broken) == kDivergedEnergy);
}

TEST_CASE("gradient and Hessian estimates, scalar cases") {
  const ScalarSetup s = scalar_setup();
  const LikelihoodModel model = scalar_model(s, 3.0, 1.0);
  const JacobianEstimate one = fixed_jacobian(Matrix::Ones(1, 1));
  CHECK(gradient_estimate(model, s.out, one)(0) == Approx(-2.0).epsilon(1e-14));
  CHECK(hessian_estimate(model, one)(0, 0) == Approx(1.0).epsilon(1e-14));

  const JacobianEstimate zero = fixed_jacobian(Matrix::Zero(1, 3));
  CHECK(gradient_estimate(model, s.out, zero).isZero(0.0));
  CHECK(hessian_estimate(model, zero).isZero(0.0));
  CHECK(gradient_estimate(scalar_model(s, 1.0, 1.0), s.out, one).isZero(0.0));
  CHECK_THROWS_AS(gradient_estimate(model, s.out, fixed_jacobian(Matrix::Ones(2, 1))), ContractError);
}

TEST_CASE("Hessian estimate is positive semi-definite") {
  const Benchmark b = lotka_volterra();
  std::mt19937_64 rng(2);
  const LikelihoodModel model(generate_data(b, rng), b.grid(), 0.0, KernelConfig{1.0});
  const FilterOutput out = filter_solve(b.spec, b.theta_star, b.grid(), 0.0, KernelConfig{1.0});
  const Matrix H = hessian_estimate(model, model.jacobian(out));
  CHECK(H == H.transpose());
  std::normal_distribution<double> normal;
  for (int i = 0; i < 100; ++i) {
    const Vector x = Vector::NullaryExpr(4, [&] { return normal(rng); });
    CHECK(x.dot(H * x) >= 0.0);
  }
}

TEST_CASE("Bayesian variants") {
  const ScalarSetup s = scalar_setup();
  const LikelihoodModel model = scalar_model(s, 1.0, 1.0);
  const JacobianEstimate one = fixed_jacobian(Matrix::Ones(1, 1));
  GaussianPrior prior{Vector::Constant(1, 2.0), Matrix::Identity(1, 1)};
  const Vector theta = Vector::Constant(1, 5.0);
  CHECK(bayesian_gradient(model, s.out, one, prior, theta)(0) == Approx(3.0).epsilon(1e-14));
  CHECK(bayesian_hessian(model, one, prior)(0, 0) == Approx(hessian_estimate(model, one)(0, 0) + 1.0).epsilon(1e-14));

  const LikelihoodModel off = scalar_model(s, 2.5, 1.0);
  CHECK(bayesian_gradient(off, s.out, one, prior, prior.mu) == gradient_estimate(off, s.out, one));

  GaussianPrior flat{Vector::Zero(1), Matrix::Identity(1, 1) * 1e12};
  CHECK(bayesian_gradient(off, s.out, one, flat, theta)(0) ==
        Approx(gradient_estimate(off, s.out, one)(0)).epsilon(1e-10));
  CHECK(bayesian_hessian(off, one, flat)(0, 0) == Approx(hessian_estimate(off, one)(0, 0)).epsilon(1e-10));

  GaussianPrior singular{Vector::Zero(2), Matrix::Zero(2, 2)};
  const JacobianEstimate two = fixed_jacobian(Matrix::Ones(1, 2));
  CHECK_THROWS_AS(bayesian_hessian(off, two, singular), ContractError);
  CHECK_THROWS_AS(bayesian_gradient(off, s.out, two, singular, Vector::Zero(2)), ContractError);
}

TEST_CASE("uncertainty-unaware likelihood") {
  const ScalarSetup s = scalar_setup();
  const LikelihoodModel model = scalar_model(s, 2.0, 1.0);
  CHECK(unaware_neg_log_likelihood(scalar_model(s, 1.0, 1.0).data(), s.out) == 0.0);

  // P tiny next to the noise: both likelihoods agree
  const ScalarSetup tiny = scalar_setup(1e-3);
  const LikelihoodModel tiny_model = scalar_model(tiny, 2.0, 1.0);
  CHECK(unaware_neg_log_likelihood(tiny_model.data(), tiny.out) ==
        Approx(neg_log_likelihood(tiny_model, tiny.out)).epsilon(1e-9));

  // P dominating the noise
  const LikelihoodModel dominated = scalar_model(s, 2.0, s.P + 1e-6);
  CHECK(unaware_neg_log_likelihood(dominated.data(), s.out) > 1e4 * neg_log_likelihood(dominated, s.out));
}

TEST_CASE("extended design") {
  Matrix J(2, 1);
  J << 0.3, -1.5;
  Matrix expected(2, 2);
  expected << 1.0, 0.3, 1.0, -1.5;
  CHECK(extended_design(J, 2, 1) == expected);
  CHECK(extended_design(Matrix::Zero(4, 0), 2, 2) == (Matrix(4, 2) << 1, 0, 1, 0, 0, 1, 0, 1).finished());

  Matrix J2 = Matrix::Random(6, 3);
  Vector x0(2), theta(3);
  x0 << 0.5, -2.0;
  theta << 1.0, 2.0, 3.0;
  Vector param(5);
  param << x0, theta;
  Vector expected_m = J2 * theta;
  expected_m.head(3).array() += x0(0);
  expected_m.tail(3).array() += x0(1);
  CHECK((extended_design(J2, 3, 2) * param - expected_m).norm() < 1e-14);
  CHECK_THROWS_AS(extended_design(J2, 4, 2), ContractError);
}

TEST_CASE("estimators are exact for the frozen-J quadratic") {
  const Benchmark b = logistic();
  std::mt19937_64 rng(4);
  const LikelihoodModel model(generate_data(b, rng), b.grid(), 0.0, KernelConfig{1.0});
  const FilterOutput out = filter_solve(b.spec, b.theta0, b.grid(), 0.0, KernelConfig{1.0});
  const JacobianEstimate J = model.jacobian(out);
  const Vector x0 = Vector::Constant(model.data().z.size(), b.spec.x0(0));
  auto frozen = [&](const Vector &theta) {
    const Vector r = model.data().z - x0 - J.J * theta;
    return 0.5 * r.dot(model.apply_inverse(r));
  };
  CHECK(frozen(b.theta0) == Approx(neg_log_likelihood(model, out)).epsilon(1e-8));

  const Vector g = gradient_estimate(model, out, J);
  const Matrix H = hessian_estimate(model, J);
  const double step = 1e-4;
  Vector g_fd(2);
  Matrix H_fd(2, 2);
  for (int k = 0; k < 2; ++k) {
    const Vector ek = Vector::Unit(2, k) * step;
    g_fd(k) = (frozen(b.theta0 + ek) - frozen(b.theta0 - ek)) / (2 * step);
    for (int l = 0; l < 2; ++l) {
      const Vector el = Vector::Unit(2, l) * step;
      H_fd(k, l) = (frozen(b.theta0 + ek + el) - frozen(b.theta0 + ek - el) - frozen(b.theta0 - ek + el) +
                    frozen(b.theta0 - ek - el)) /
                   (4 * step * step);
    }
  }
  CHECK((g - g_fd).norm() <= 1e-6 * g.norm());
  CHECK((H - H_fd).norm() <= 1e-6 * H.norm());
}

TEST_CASE("Newton direction is invariant to sigma_dif when noise is negligible") {
  const Benchmark b = logistic();
  std::mt19937_64 rng(8);
  Dataset data = generate_data(b, rng);
  data.noise.setConstant(1e-20);
  auto direction = [&](double sigma2) {
    const KernelConfig cfg{std::sqrt(sigma2)};
    const LikelihoodModel model(data, b.grid(), 0.0, cfg);
    const FilterOutput out = filter_solve(b.spec, b.theta0, b.grid(), 0.0, cfg);
    const JacobianEstimate J = model.jacobian(out);
    return Vector(hessian_estimate(model, J).ldlt().solve(gradient_estimate(model, out, J)));
  };
  const Vector base = direction(1.0);
  for (double c : {0.1, 10.0}) {
    CHECK((direction(c) - base).norm() <= 1e-8 * base.norm());
  }
}

TEST_CASE("dataset and model validation") {
  CHECK_THROWS_AS(Dataset::with_scalar_noise({0.2, 0.1}, Vector::Zero(2), 1.0), ContractError);
  CHECK_THROWS_AS(Dataset::with_scalar_noise({0.1, 0.2}, Vector::Zero(2), 0.0), ContractError);
  const Benchmark b = logistic();
  const Dataset misaligned = Dataset::with_scalar_noise({0.35}, Vector::Zero(1), 1.0);
  CHECK_THROWS_AS(LikelihoodModel(misaligned, TimeGrid(0.1, 30, {3}), 0.0, KernelConfig{}), ContractError);
}

} // TEST_SUITE
