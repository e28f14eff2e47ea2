#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/LU>

#include "spvb/mcmc_oracle.hpp"
#include "spvb/vb_laplace.hpp"
#include "test_support.hpp"

using namespace spvb;

namespace {

Vector<double> normal_draws(double mean, double sd, int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(mean, sd);
  Vector<double> out(m);
  for (int i = 0; i < m; ++i) out(i) = z(rng);
  return out;
}

}  // namespace

TEST_CASE("parameter labels") {
  CHECK(parameter_names(Method::Laplace, 3) ==
        std::vector<std::string>{"beta0", "beta1", "beta2", "tau1", "tau2", "eta", "tau0", "a"});
  CHECK(parameter_names(Method::CS, 2) == std::vector<std::string>{"beta0", "beta1", "z1", "pi1", "tau2", "a"});
  CHECK(parameter_names(Method::Bernoulli, 2) ==
        std::vector<std::string>{"beta0", "beta1", "gamma1", "alpha0", "alpha1", "pi1"});
}

TEST_CASE("configuration contract and kept draws") {
  McmcConfig cfg;
  CHECK(cfg.kept() == 500);
  cfg.burn_in = cfg.iterations;
  CHECK_THROWS_AS(cfg.check(), ContractError);
  cfg = {};
  cfg.thin = 0;
  CHECK_THROWS_AS(cfg.check(), ContractError);
}

TEST_CASE("chains match the large-sample normal posterior") {
  // Every coefficient is a strong signal, so selection is not in play and the
  // posterior is close to N(mle, I(mle)^-1).
  const Vector<double> beta = test::vec({0.5, 0.6, -0.5});
  const auto d = test::poisson_data(beta, 1500, 21, 1.0);
  const Vector<double> mle = test::poisson_mle(d);
  const Vector<double> rate = (d.design * mle).array().exp().matrix();
  const Matrix<double> info = d.design.transpose() * rate.asDiagonal() * d.design;
  const Matrix<double> cov = info.inverse();
  McmcConfig cfg;
  cfg.iterations = 20000;
  cfg.burn_in = 4000;
  cfg.thin = 4;
  for (Method m : {Method::Laplace, Method::CS, Method::Bernoulli}) {
    CAPTURE(to_string(m));
    const Chain chain = sample(m, d, Hyperparameters<double>{}, cfg, &cov, &mle);
    CHECK(chain.draws.rows() == cfg.kept());
    CHECK(chain.acceptance_rate > 0.15);
    CHECK(chain.acceptance_rate < 0.6);
    for (Index j = 0; j < 3; ++j) {
      const Vector<double> col = chain.draws.col(j);
      const double mean = col.mean();
      const double sd = std::sqrt((col.array() - mean).square().sum() / double(col.size() - 1));
      const double se = std::sqrt(cov(j, j));
      CHECK(std::abs(mean - mle(j)) < 0.25 * se + 0.01);
      CHECK(sd == doctest::Approx(se).epsilon(0.2));
    }
  }
}

TEST_CASE("indicator draws are binary and bounded parameters stay in range") {
  const auto d = test::poisson_data(test::vec({0.3, 0.8, 0.0}), 60, 22);
  McmcConfig cfg;
  cfg.iterations = 3000;
  cfg.burn_in = 1000;
  const Chain cs = sample(Method::CS, d, Hyperparameters<double>{}, cfg);
  const Chain be = sample(Method::Bernoulli, d, Hyperparameters<double>{}, cfg);
  for (const auto& [chain, ind] : {std::pair{&cs, "z"}, std::pair{&be, "gamma"}}) {
    for (int j = 1; j <= 2; ++j) {
      const Vector<double> z = chain->draws.col(chain->column(ind + std::to_string(j)));
      CHECK(((z.array() == 0) || (z.array() == 1)).all());
      const Vector<double> pi = chain->draws.col(chain->column("pi" + std::to_string(j)));
      CHECK(((pi.array() > 0) && (pi.array() < 1)).all());
    }
  }
  // The strong slope is included almost always.
  CHECK(cs.draws.col(cs.column("z1")).mean() > 0.8);
  CHECK(be.draws.col(be.column("gamma1")).mean() > 0.8);
  CHECK((cs.draws.col(cs.column("tau2")).array() > 0).all());
  CHECK_THROWS_AS(cs.column("nope"), ContractError);
}

TEST_CASE("chains are reproducible from the seed") {
  const auto d = test::poisson_data(test::vec({0.3, 0.8}), 40, 23);
  McmcConfig cfg;
  cfg.iterations = 1500;
  cfg.burn_in = 500;
  const auto a = sample(Method::Laplace, d, Hyperparameters<double>{}, cfg);
  const auto b = sample(Method::Laplace, d, Hyperparameters<double>{}, cfg);
  CHECK(a.draws == b.draws);
  cfg.seed = 2;
  CHECK(sample(Method::Laplace, d, Hyperparameters<double>{}, cfg).draws != a.draws);
}

TEST_CASE("a hopeless step size is reported") {
  const auto d = test::poisson_data(test::vec({0.3, 0.8}), 200, 24);
  McmcConfig cfg;
  cfg.iterations = 600;
  cfg.burn_in = 100;
  cfg.step_scale = 1e6;
  // Burn-in adaptation can shrink the step by at most 0.8^2 here.
  CHECK_THROWS_AS(sample(Method::Laplace, d, Hyperparameters<double>{}, cfg), TuningError);
}

TEST_CASE("accuracy score") {
  const Vector<double> draws = normal_draws(1.0, 0.5, 5000, 3);
  CHECK(kde_bandwidth(draws) == doctest::Approx(1.06 * 0.5 * std::pow(5000.0, -0.2)).epsilon(0.03));
  CHECK(accuracy_gaussian(1.0, 0.5, draws) > 95);
  // Two unit-variance normals two sd apart overlap in 2 Phi(-1) of their mass.
  const Vector<double> std_draws = normal_draws(0.0, 1.0, 20000, 4);
  const double expected = 100 * 2 * normal_cdf(-1.0);
  CHECK(accuracy_gaussian(2.0, 1.0, std_draws) == doctest::Approx(expected).epsilon(0.04));
  CHECK(accuracy_gaussian(50.0, 1.0, std_draws) < 1e-6);
  CHECK(accuracy_gaussian(0.0, 1.0, Vector<double>::Constant(100, 0.3)) == 0.0);

  const Vector<double> bin = test::vec({1, 1, 0, 1});
  CHECK(accuracy_discrete(0.75, bin) == doctest::Approx(100));
  CHECK(accuracy_discrete(0.25, bin) == doctest::Approx(50));
}

TEST_CASE("chain CSV layout") {
  Chain c;
  c.param_names = {"beta0", "tau1"};
  c.draws.resize(2, 2);
  c.draws << 0.1, 2, 1.0 / 3, 4;
  std::ostringstream out;
  write_chain_csv(c, out);
  CHECK(out.str() == "beta0,tau1\n0.10000000000000001,2\n0.33333333333333331,4\n");
}
