#include "odeinv/problems.hpp"

#include "odeinv/reference_solver.hpp"

#include <memory>
#include <stdexcept>

namespace odeinv {

void assign_monomial_basis(ProblemSpec &spec, std::vector<MonomialTerm> terms) {
  const int d = spec.dim;
  const int n = spec.n_params;
  for (const auto &term : terms) {
    if (term.param < 0 || term.param >= n || term.state < 0 || term.state >= d) {
      throw ContractError("monomial term refers to an unknown parameter or state");
    }
    for (int f : term.factors) {
      if (f < 0 || f >= d) {
        throw ContractError("monomial term refers to an unknown state");
      }
    }
  }
  auto shared = std::make_shared<const std::vector<MonomialTerm>>(std::move(terms));

  spec.basis = [shared, d, n](const Vector &x) {
    Matrix F = Matrix::Zero(d, n);
    for (const auto &term : *shared) {
      double v = term.coef;
      for (int f : term.factors) {
        v *= x(f);
      }
      F(term.state, term.param) += v;
    }
    return F;
  };
  spec.basis_jacobian = [shared, d, n](const Vector &x) {
    Matrix D = Matrix::Zero(d, d * n);
    for (const auto &term : *shared) {
      // product rule over the factor list
      for (std::size_t a = 0; a < term.factors.size(); ++a) {
        double v = term.coef;
        for (std::size_t b = 0; b < term.factors.size(); ++b) {
          if (b != a) {
            v *= x(term.factors[b]);
          }
        }
        D(term.state, term.param * d + term.factors[a]) += v;
      }
    }
    return D;
  };
}

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) {
    v(i++) = x;
  }
  return v;
}

} // namespace

Benchmark logistic() {
  Benchmark b;
  b.label = "logistic";
  b.spec.name = "logistic";
  b.spec.dim = 1;
  b.spec.n_params = 2;
  b.spec.x0 = vec({0.1});
  b.spec.horizon = 3.0;
  assign_monomial_basis(b.spec, {{0, 0, 1.0, {0}}, {1, 0, -1.0, {0, 0}}});
  b.spec.reference_field = [](const Vector &x, const Vector &th) {
    return vec({th(0) * x(0) - th(1) * x(0) * x(0)});
  };
  b.theta_star = vec({3.0, 3.0});
  b.theta0 = vec({2.0, 2.0});
  b.data_times = {0.3, 0.6, 0.9, 1.2, 1.5, 1.8, 2.1, 2.4, 2.7, 3.0};
  b.noise_var = 1e-4;
  b.h = 0.1;
  b.burn_in = 10;
  return b;
}

Benchmark lotka_volterra() {
  Benchmark b;
  b.label = "lv";
  b.spec.name = "lotka-volterra";
  b.spec.dim = 2;
  b.spec.n_params = 4;
  b.spec.x0 = vec({20.0, 20.0});
  b.spec.horizon = 5.0;
  assign_monomial_basis(b.spec, {
                                    {0, 0, 1.0, {0}},
                                    {1, 0, -1.0, {0, 1}},
                                    {2, 1, -1.0, {1}},
                                    {3, 1, 1.0, {0, 1}},
                                });
  b.spec.reference_field = [](const Vector &x, const Vector &th) {
    return vec({th(0) * x(0) - th(1) * x(0) * x(1), -th(2) * x(1) + th(3) * x(0) * x(1)});
  };
  b.theta_star = vec({1.0, 0.1, 0.1, 1.0});
  b.theta0 = vec({0.8, 0.2, 0.05, 1.1});
  b.data_times = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5};
  b.noise_var = 0.01;
  b.h = 0.05;
  b.burn_in = 45;
  return b;
}

Benchmark pst_linearized() {
  Benchmark b;
  b.label = "pst";
  b.spec.name = "protein-signalling-transduction";
  b.spec.dim = 5;
  b.spec.n_params = 5;
  b.spec.x0 = vec({1.0, 0.0, 1.0, 0.0, 0.0});
  b.spec.horizon = 100.0;
  assign_monomial_basis(b.spec, {
                                    {0, 0, -1.0, {0}},
                                    {0, 1, 1.0, {0}},
                                    {1, 0, -1.0, {0, 2}},
                                    {1, 2, -1.0, {0, 2}},
                                    {1, 3, 1.0, {0, 2}},
                                    {2, 0, 1.0, {3}},
                                    {2, 2, 1.0, {3}},
                                    {2, 3, -1.0, {3}},
                                    {3, 3, -1.0, {3}},
                                    {3, 4, 1.0, {3}},
                                    {4, 2, 1.0, {4}},
                                    {4, 4, -1.0, {4}},
                                });
  b.spec.reference_field = [](const Vector &x, const Vector &th) {
    return vec({
        -th(0) * x(0) - th(1) * x(0) * x(2) + th(2) * x(3),
        th(0) * x(0),
        -th(1) * x(0) * x(2) + th(2) * x(3) + th(4) * x(4),
        th(1) * x(0) * x(2) - th(2) * x(3) - th(3) * x(3),
        th(3) * x(3) - th(4) * x(4),
    });
  };
  b.theta_star = vec({0.07, 0.6, 0.05, 0.3, 0.017});
  b.theta0 = vec({0.24, 1.8, 0.15, 0.9, 0.05});
  b.data_times = {1, 2, 4, 5, 7, 10, 15, 20, 30, 40, 50, 60, 80, 100};
  b.noise_var = 1e-8;
  b.h = 0.05;
  b.burn_in = 100;
  return b;
}

Benchmark guiy() {
  // state order: Glc^e, Glc^i, E-G6P^i, E-Glc-G6P^i, G6P^i, E-Glc^e, E-Glc^i, E^e, E^i
  enum : int { GlcE, GlcI, EG6P, EGlcG6P, G6P, EGlcE, EGlcI, EE, EI };
  // parameters: k1, k-1, k2, k-2, k3, k-3, k4, k-4, alpha, beta
  enum : int { k1, km1, k2, km2, k3, km3, k4, km4, alpha, beta };
  Benchmark b;
  b.label = "guiy";
  b.spec.name = "glucose-uptake-in-yeast";
  b.spec.dim = 9;
  b.spec.n_params = 10;
  b.spec.x0 = Vector::Ones(9);
  b.spec.horizon = 100.0;
  assign_monomial_basis(b.spec, {
                                    {k1, GlcE, -1.0, {EE, GlcE}},
                                    {k1, EGlcE, 1.0, {EE, GlcE}},
                                    {k1, EE, -1.0, {EE, GlcE}},
                                    {km1, GlcE, 1.0, {EGlcE}},
                                    {km1, EGlcE, -1.0, {EGlcE}},
                                    {km1, EE, 1.0, {EGlcE}},
                                    {k2, GlcI, -1.0, {EI, GlcI}},
                                    {k2, EGlcI, 1.0, {EI, GlcI}},
                                    {k2, EI, -1.0, {EI, GlcI}},
                                    {km2, GlcI, 1.0, {EGlcI}},
                                    {km2, EGlcI, -1.0, {EGlcI}},
                                    {km2, EI, 1.0, {EGlcI}},
                                    {k3, EGlcG6P, 1.0, {EGlcI, G6P}},
                                    {k3, G6P, -1.0, {EGlcI, G6P}},
                                    {k3, EGlcI, -1.0, {EGlcI, G6P}},
                                    {km3, EGlcG6P, -1.0, {EGlcG6P}},
                                    {km3, G6P, 1.0, {EGlcG6P}},
                                    {km3, EGlcI, 1.0, {EGlcG6P}},
                                    {k4, EG6P, 1.0, {EI, G6P}},
                                    {k4, G6P, -1.0, {EI, G6P}},
                                    {k4, EI, -1.0, {EI, G6P}},
                                    {km4, EG6P, 1.0, {EG6P}},
                                    {km4, G6P, 1.0, {EGlcI}},
                                    {km4, EI, 1.0, {EG6P}},
                                    {alpha, EGlcE, 1.0, {EGlcI}},
                                    {alpha, EGlcE, -1.0, {EGlcE}},
                                    {alpha, EGlcI, 1.0, {EGlcE}},
                                    {alpha, EGlcI, -1.0, {EGlcI}},
                                    {beta, EE, 1.0, {EI}},
                                    {beta, EE, -1.0, {EE}},
                                    {beta, EI, 1.0, {EE}},
                                    {beta, EI, -1.0, {EI}},
                                });
  b.spec.reference_field = [](const Vector &x, const Vector &p) {
    Vector dx(9);
    dx(GlcE) = -p(k1) * x(EE) * x(GlcE) + p(km1) * x(EGlcE);
    dx(GlcI) = -p(k2) * x(EI) * x(GlcI) + p(km2) * x(EGlcI);
    dx(EG6P) = p(k4) * x(EI) * x(G6P) + p(km4) * x(EG6P);
    dx(EGlcG6P) = p(k3) * x(EGlcI) * x(G6P) - p(km3) * x(EGlcG6P);
    dx(G6P) = -p(k3) * x(EGlcI) * x(G6P) + p(km3) * x(EGlcG6P) - p(k4) * x(EI) * x(G6P) + p(km4) * x(EGlcI);
    dx(EGlcE) = p(alpha) * (x(EGlcI) - x(EGlcE)) + p(k1) * x(EE) * x(GlcE) - p(km1) * x(EGlcE);
    dx(EGlcI) = p(alpha) * (x(EGlcE) - x(EGlcI)) - p(k3) * x(EGlcI) * x(G6P) + p(km3) * x(EGlcG6P) +
                p(k2) * x(EI) * x(GlcI) - p(km2) * x(EGlcI);
    dx(EE) = p(beta) * (x(EI) - x(EE)) - p(k1) * x(EE) * x(GlcE) + p(km1) * x(EGlcE);
    dx(EI) = p(beta) * (x(EE) - x(EI)) - p(k4) * x(EI) * x(G6P) + p(km4) * x(EG6P) - p(k2) * x(EI) * x(GlcI) +
             p(km2) * x(EGlcI);
    return dx;
  };
  b.theta_star = vec({0.1, 0.0, 0.4, 0.0, 0.3, 0.0, 0.7, 0.0, 0.1, 0.2});
  b.theta0 = 1.2 * b.theta_star;
  b.data_times = {1, 2, 4, 5, 7, 10, 15, 20, 30, 40, 50, 60, 80, 100};
  b.noise_var = 1e-5;
  b.h = 0.05;
  b.burn_in = 30;
  return b;
}

Benchmark constant_field() {
  Benchmark b;
  b.label = "constant";
  b.spec.name = "constant";
  b.spec.dim = 1;
  b.spec.n_params = 1;
  b.spec.x0 = vec({0.0});
  b.spec.horizon = 1.0;
  b.spec.basis = [](const Vector &) { return Matrix::Ones(1, 1); };
  b.spec.basis_jacobian = [](const Vector &) { return Matrix::Zero(1, 1); };
  b.spec.reference_field = [](const Vector &, const Vector &th) { return vec({th(0)}); };
  b.theta_star = vec({2.0});
  b.theta0 = vec({1.0});
  b.data_times = {0.2, 0.4, 0.6, 0.8, 1.0};
  b.noise_var = 1e-4;
  b.h = 0.1;
  return b;
}

Benchmark zero_field() {
  Benchmark b = constant_field();
  b.label = "zero";
  b.spec.name = "zero";
  b.spec.x0 = vec({1.0});
  b.spec.basis = [](const Vector &) { return Matrix::Zero(1, 1); };
  b.spec.reference_field = [](const Vector &, const Vector &) { return vec({0.0}); };
  return b;
}

const std::vector<std::string> &benchmark_names() {
  static const std::vector<std::string> names{"logistic", "lv", "pst", "guiy"};
  return names;
}

Benchmark benchmark_by_name(std::string_view name) {
  if (name == "logistic") {
    return logistic();
  }
  if (name == "lv") {
    return lotka_volterra();
  }
  if (name == "pst") {
    return pst_linearized();
  }
  if (name == "guiy") {
    return guiy();
  }
  if (name == "constant") {
    return constant_field();
  }
  if (name == "zero") {
    return zero_field();
  }
  throw std::invalid_argument("unknown benchmark '" + std::string(name) +
                              "' (expected logistic, lv, pst, guiy, constant or zero)");
}

Dataset generate_data(const Benchmark &benchmark, std::mt19937_64 &rng) {
  const ProblemSpec &spec = benchmark.spec;
  const Vector theta = benchmark.theta_star;
  const Matrix truth = solve_reference([&](const Vector &x) { return spec.field(x, theta); }, spec.x0,
                                       benchmark.data_times);
  const int M = static_cast<int>(benchmark.data_times.size());
  const int d = spec.dim;
  Vector z(M * d);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(benchmark.noise_var);
  for (int dim = 0; dim < d; ++dim) {
    for (int i = 0; i < M; ++i) {
      z(dim * M + i) = truth(dim, i) + sd * normal(rng);
    }
  }
  Dataset data;
  data.times = benchmark.data_times;
  data.dim = d;
  data.z = std::move(z);
  // zero noise is allowed for generation; the likelihood floor keeps it invertible
  data.noise = Vector::Constant(M * d, std::max(benchmark.noise_var, kMeasurementVarianceFloor));
  return data;
}

} // namespace odeinv
